//! Seeded synthetic corpus with skewed, power-law user activity.
//!
//! Generation steps, all drawing from one [`Rng`] seeded with `config.seed`:
//!
//! 1. `H = round(hate_class_fraction * n_tweets)` hate tweets and
//!    `K = max(1, round(hater_fraction * n_users))` haters (0 when `H = 0`).
//! 2. Haters are a shuffled subset of the users. The first hater receives
//!    `round(top_hater_share * H)` hate tweets (clamped so every other hater
//!    gets at least one); the rest are spread over the remaining haters by
//!    rank weights `(rank + 1)^-activity_exponent`.
//! 3. Each hater also posts `round(HATER_NON_HATE_RATIO * hate_count)`
//!    non-hate tweets; every non-hater posts one, and the remaining non-hate
//!    tweets follow the same rank weights over non-haters.
//! 4. Tweet text is a run of generic pseudo-words (Zipf-weighted). A hate
//!    tweet carries a hate marker with probability [`EXPLICIT_HATE_RATE`].
//! 5. Every user gets a timeline (length 20 with probability 0.8, otherwise
//!    uniform in 0..=19). Each timeline tweet of a hater carries a marker with
//!    probability `signal_strength`; non-haters' timelines never do.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Dataset, LabelScheme, Timelines, Tweet, UserTimeline, TIMELINE_CAP};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Probability that a hate tweet contains an explicit marker token.
pub const EXPLICIT_HATE_RATE: f64 = 0.5;
/// Non-hate tweets posted by a hater per hate tweet.
pub const HATER_NON_HATE_RATIO: f64 = 0.25;
const FULL_TIMELINE_RATE: f64 = 0.8;
const GENERIC_VOCAB_SIZE: usize = 300;
const MIN_WORDS: usize = 4;
const MAX_WORDS: usize = 10;

const MARKER_FILE: &str = include_str!("../../data/hate_markers.txt");

/// The fixed hate-marker lexicon shipped in `data/hate_markers.txt`.
pub fn hate_markers() -> &'static [String] {
    static MARKERS: OnceLock<Vec<String>> = OnceLock::new();
    MARKERS.get_or_init(|| {
        MARKER_FILE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect()
    })
}

fn generic_vocab() -> &'static [String] {
    static VOCAB: OnceLock<Vec<String>> = OnceLock::new();
    VOCAB.get_or_init(|| {
        const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
        const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
        let syllables: Vec<String> = ONSETS
            .iter()
            .flat_map(|o| VOWELS.iter().map(move |v| format!("{o}{v}")))
            .collect();
        let n = syllables.len();
        (0..GENERIC_VOCAB_SIZE)
            .map(|i| {
                let mut w = String::new();
                w.push_str(&syllables[i % n]);
                w.push_str(&syllables[(i / n + 7 * i) % n]);
                if i % 3 == 0 {
                    w.push_str(&syllables[(i * 13 + 5) % n]);
                }
                w
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_tweets: usize,
    pub hate_class_fraction: f64,
    pub hater_fraction: f64,
    pub top_hater_share: f64,
    pub activity_exponent: f64,
    pub signal_strength: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 150,
            n_tweets: 2000,
            hate_class_fraction: 0.3,
            hater_fraction: 0.3,
            top_hater_share: 0.1,
            activity_exponent: 1.0,
            signal_strength: 0.9,
            seed: 1,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let fractions = [
            ("hate_class_fraction", self.hate_class_fraction),
            ("hater_fraction", self.hater_fraction),
            ("top_hater_share", self.top_hater_share),
            ("signal_strength", self.signal_strength),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.n_users == 0 {
            return Err(Error::Config("n_users must be at least 1".into()));
        }
        if self.n_tweets < self.n_users {
            return Err(Error::Config(format!(
                "n_tweets ({}) must be at least n_users ({})",
                self.n_tweets, self.n_users
            )));
        }
        if !(self.activity_exponent.is_finite() && self.activity_exponent > 0.0) {
            return Err(Error::Config(format!(
                "activity_exponent must be positive, got {}",
                self.activity_exponent
            )));
        }
        Ok(())
    }
}

fn cumulative_rank_weights(n: usize, exponent: f64) -> Vec<f64> {
    let mut acc = 0.0;
    (0..n)
        .map(|r| {
            acc += ((r + 1) as f64).powf(-exponent);
            acc
        })
        .collect()
}

/// Adds `extra` units to `counts` by weighted draws.
fn spread(rng: &mut Rng, counts: &mut [usize], extra: usize, exponent: f64) {
    if counts.is_empty() || extra == 0 {
        return;
    }
    let cumulative = cumulative_rank_weights(counts.len(), exponent);
    for _ in 0..extra {
        counts[rng.weighted_index(&cumulative)] += 1;
    }
}

fn zipf_word<'a>(rng: &mut Rng, vocab: &'a [String], cumulative: &[f64]) -> &'a str {
    &vocab[rng.weighted_index(cumulative)]
}

fn sentence(rng: &mut Rng, word_cdf: &[f64], marker: bool) -> String {
    let vocab = generic_vocab();
    let n = MIN_WORDS + rng.below(MAX_WORDS - MIN_WORDS + 1);
    let mut words: Vec<&str> = (0..n).map(|_| zipf_word(rng, vocab, word_cdf)).collect();
    if marker {
        let markers = hate_markers();
        let m = markers[rng.below(markers.len())].as_str();
        let pos = rng.below(words.len() + 1);
        words.insert(pos, m);
    }
    words.join(" ")
}

/// Generates a binary (`fused-binary`) dataset with a timeline for every user.
pub fn synth_corpus(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let scheme = LabelScheme::fused_binary();
    let none = scheme.index_of("none").expect("fused scheme");
    let hate = scheme.index_of("hate").expect("fused scheme");
    let mut rng = Rng::new(config.seed);

    let n_users = config.n_users;
    let n_hate = (config.hate_class_fraction * config.n_tweets as f64).round() as usize;
    let n_haters = if n_hate == 0 || config.hater_fraction == 0.0 {
        0
    } else {
        ((config.hater_fraction * n_users as f64).round() as usize).clamp(1, n_users)
    };
    if n_hate > 0 && n_haters == 0 {
        return Err(Error::Config(
            "hate_class_fraction > 0 requires hater_fraction > 0".into(),
        ));
    }
    if n_hate < n_haters {
        return Err(Error::Config(format!(
            "{n_hate} hate tweets cannot cover {n_haters} haters"
        )));
    }
    let n_non_hate = config.n_tweets - n_hate;
    let n_non_haters = n_users - n_haters;
    if n_non_hate < n_non_haters {
        return Err(Error::Config(format!(
            "{n_non_hate} non-hate tweets cannot cover {n_non_haters} non-haters"
        )));
    }

    let mut users: Vec<usize> = (0..n_users).collect();
    rng.shuffle(&mut users);
    let (haters, non_haters) = users.split_at(n_haters);

    // Hate tweets per hater, top hater first.
    let mut hate_counts = vec![0usize; n_haters];
    if n_haters > 0 {
        let top = ((config.top_hater_share * n_hate as f64).round() as usize)
            .clamp(1, n_hate - (n_haters - 1));
        hate_counts[0] = top;
        for c in hate_counts.iter_mut().skip(1) {
            *c = 1;
        }
        let extra = n_hate - top - (n_haters - 1);
        spread(&mut rng, &mut hate_counts[1..], extra, config.activity_exponent);
        if n_haters == 1 {
            hate_counts[0] += extra;
        }
    }

    // Non-hate tweets.
    let mut hater_non_hate: Vec<usize> = hate_counts
        .iter()
        .map(|&h| (HATER_NON_HATE_RATIO * h as f64).round() as usize)
        .collect();
    let mut non_hater_counts = vec![1usize; n_non_haters];
    let mut budget = n_non_hate - n_non_haters;
    for c in hater_non_hate.iter_mut() {
        let take = (*c).min(budget);
        *c = take;
        budget -= take;
    }
    if n_non_haters > 0 {
        spread(&mut rng, &mut non_hater_counts, budget, config.activity_exponent);
    } else {
        spread(&mut rng, &mut hater_non_hate, budget, config.activity_exponent);
    }

    // (user, label) slots, shuffled so users interleave.
    let mut slots: Vec<(usize, usize)> = Vec::with_capacity(config.n_tweets);
    for (i, &u) in haters.iter().enumerate() {
        slots.extend(std::iter::repeat((u, hate)).take(hate_counts[i]));
        slots.extend(std::iter::repeat((u, none)).take(hater_non_hate[i]));
    }
    for (i, &u) in non_haters.iter().enumerate() {
        slots.extend(std::iter::repeat((u, none)).take(non_hater_counts[i]));
    }
    debug_assert_eq!(slots.len(), config.n_tweets);
    rng.shuffle(&mut slots);

    let word_cdf = cumulative_rank_weights(generic_vocab().len(), 1.0);
    let user_id = |u: usize| format!("u{u:05}");
    let tweets: Vec<Tweet> = slots
        .iter()
        .enumerate()
        .map(|(i, &(u, label))| {
            let marker = label == hate && rng.bernoulli(EXPLICIT_HATE_RATE);
            Tweet {
                id: format!("t{i:07}"),
                user_id: user_id(u),
                text: sentence(&mut rng, &word_cdf, marker),
                label,
            }
        })
        .collect();

    let mut is_hater = vec![false; n_users];
    for &u in haters {
        is_hater[u] = true;
    }
    let mut timelines = Timelines::new();
    for u in 0..n_users {
        let len = if rng.bernoulli(FULL_TIMELINE_RATE) {
            TIMELINE_CAP
        } else {
            rng.below(TIMELINE_CAP)
        };
        let texts = (0..len)
            .map(|_| {
                let marker = is_hater[u] && rng.bernoulli(config.signal_strength);
                sentence(&mut rng, &word_cdf, marker)
            })
            .collect();
        timelines.insert(user_id(u), UserTimeline::new(user_id(u), texts));
    }

    Dataset::new(scheme, tweets, timelines)
}
