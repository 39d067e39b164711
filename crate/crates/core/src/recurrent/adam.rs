use ndarray::{Array1, Array2, Zip};

use super::lstm::Grads;
use super::{Params, RecurrentConfig};

/// Adam first/second moments for every parameter tensor.
///
/// Embedding rows are updated only once they have received a gradient. A row
/// with zero moments would not move under a dense update either, so this is
/// exactly dense Adam, just cheaper for large vocabularies.
#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    first: Params,
    second: Params,
    active: Vec<bool>,
    active_rows: Vec<usize>,
}

struct Hyper {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    correction1: f64,
    correction2: f64,
}

impl Hyper {
    fn apply(&self, p: &mut f64, m: &mut f64, v: &mut f64, g: f64) {
        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        let m_hat = *m / self.correction1;
        let v_hat = *v / self.correction2;
        *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
    }

    fn matrix(&self, p: &mut Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>, g: &Array2<f64>) {
        Zip::from(p)
            .and(m)
            .and(v)
            .and(g)
            .for_each(|p, m, v, &g| self.apply(p, m, v, g));
    }

    fn vector(&self, p: &mut Array1<f64>, m: &mut Array1<f64>, v: &mut Array1<f64>, g: &Array1<f64>) {
        Zip::from(p)
            .and(m)
            .and(v)
            .and(g)
            .for_each(|p, m, v, &g| self.apply(p, m, v, g));
    }
}

impl AdamState {
    pub(crate) fn new(params: &Params) -> Self {
        AdamState {
            step: 0,
            first: Params::zeros_like(params),
            second: Params::zeros_like(params),
            active: vec![false; params.embedding.nrows()],
            active_rows: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub(crate) fn update(&mut self, params: &mut Params, grads: &Grads, config: &RecurrentConfig) {
        self.step += 1;
        let t = self.step as i32;
        let hyper = Hyper {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps_adam,
            correction1: 1.0 - config.beta1.powi(t),
            correction2: 1.0 - config.beta2.powi(t),
        };
        let g = &grads.params;
        for &r in &grads.touched_rows {
            if !self.active[r] {
                self.active[r] = true;
                self.active_rows.push(r);
            }
        }
        for &r in &self.active_rows {
            let mut p = params.embedding.row_mut(r);
            let mut m = self.first.embedding.row_mut(r);
            let mut v = self.second.embedding.row_mut(r);
            let gr = g.embedding.row(r);
            for k in 0..p.len() {
                hyper.apply(&mut p[k], &mut m[k], &mut v[k], gr[k]);
            }
        }
        hyper.matrix(&mut params.w_input, &mut self.first.w_input, &mut self.second.w_input, &g.w_input);
        hyper.matrix(
            &mut params.w_recurrent,
            &mut self.first.w_recurrent,
            &mut self.second.w_recurrent,
            &g.w_recurrent,
        );
        hyper.vector(&mut params.bias, &mut self.first.bias, &mut self.second.bias, &g.bias);
        hyper.matrix(&mut params.w_out, &mut self.first.w_out, &mut self.second.w_out, &g.w_out);
        hyper.vector(&mut params.b_out, &mut self.first.b_out, &mut self.second.b_out, &g.b_out);
    }
}
