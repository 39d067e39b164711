//! Tokenisation, training-fold vocabularies, word vectors and averaging.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_INDEX: usize = 0;
pub const PAD_INDEX: usize = 1;
pub const MENTION_TOKEN: &str = "<mention>";
pub const URL_TOKEN: &str = "<url>";

/// Range of the uniform initialisation for rows without a pretrained vector.
pub const INIT_RANGE: f64 = 0.25;
pub const DEFAULT_EMBED_DIM: usize = 200;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn starts_url(s: &str) -> bool {
    let lower = s.get(..8).unwrap_or(s).to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Lower-cases and splits an utterance.
///
/// `@name` becomes `<mention>`, anything starting with `http://`, `https://`
/// or `www.` up to the next whitespace becomes `<url>`, `#tag` is kept with
/// its `#`, runs of letters, digits and `_` form words, and every other
/// non-space character is its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut rest = chunk;
        while let Some(c) = rest.chars().next() {
            if starts_url(rest) {
                tokens.push(URL_TOKEN.to_string());
                break;
            }
            if c == '@' || c == '#' {
                let body_len: usize = rest[1..]
                    .chars()
                    .take_while(|&ch| is_word_char(ch))
                    .map(char::len_utf8)
                    .sum();
                if body_len > 0 {
                    if c == '@' {
                        tokens.push(MENTION_TOKEN.to_string());
                    } else {
                        tokens.push(rest[..1 + body_len].to_lowercase());
                    }
                    rest = &rest[1 + body_len..];
                    continue;
                }
            }
            if is_word_char(c) {
                let len: usize = rest
                    .chars()
                    .take_while(|&ch| is_word_char(ch))
                    .map(char::len_utf8)
                    .sum();
                tokens.push(rest[..len].to_lowercase());
                rest = &rest[len..];
            } else {
                tokens.push(c.to_lowercase().collect());
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its tokens in index order. The first two
    /// entries must be the unknown and padding tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[UNK_INDEX] != UNK_TOKEN || tokens[PAD_INDEX] != PAD_TOKEN {
            return Err(Error::Input(format!(
                "vocabulary must start with {UNK_TOKEN:?} and {PAD_TOKEN:?}"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Input(format!("vocabulary repeats token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, or the unknown-token index.
    pub fn lookup(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK_INDEX)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t.as_ref())).collect()
    }
}

/// Vocabulary of every token occurring at least `min_count` times in
/// `train_texts`, after the two special tokens. Ordered by descending count,
/// then lexicographically.
pub fn build_vocab<S: AsRef<str>>(train_texts: &[S], min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::Input("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in train_texts {
        for tok in tokenize(text.as_ref()) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .collect();
    kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens = [UNK_TOKEN.to_string(), PAD_TOKEN.to_string()]
        .into_iter()
        .chain(kept.into_iter().map(|(t, _)| t))
        .collect();
    Vocabulary::from_tokens(tokens)
}

/// A `|V| x d` word-vector table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix(Array2<f64>);

impl EmbeddingMatrix {
    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("embedding contains non-finite values".into()));
        }
        Ok(EmbeddingMatrix(values))
    }

    /// Uniform `[-0.25, 0.25]` rows; the padding row is zero.
    pub fn random(rows: usize, dim: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let mut values = Array2::from_shape_simple_fn((rows, dim), || {
            rng.uniform(-INIT_RANGE, INIT_RANGE)
        });
        if rows > PAD_INDEX {
            values.row_mut(PAD_INDEX).fill(0.0);
        }
        EmbeddingMatrix(values)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, index: usize) -> ArrayView1<'_, f64> {
        self.0.row(index)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Initialises an embedding table for `vocab` from a GloVe-style text file
/// (`token v1 ... vd` per line). Tokens missing from the file keep their
/// seeded uniform initialisation; the padding row is zero.
pub fn load_pretrained_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut emb = EmbeddingMatrix::random(vocab.len(), dim, seed);
    let format_err = |line: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (i, raw) in contents.lines().enumerate() {
        let line = i + 1;
        let mut fields = raw.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| format_err(line, format!("bad number {f:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(format_err(
                line,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format_err(line, "non-finite value".into()));
        }
        if let Some(idx) = vocab.get(token) {
            if idx != PAD_INDEX {
                emb.0.row_mut(idx).assign(&Array1::from(values));
            }
        }
    }
    Ok(emb)
}

/// Mean of the rows of `tokens` (unknown tokens use the unknown row); the
/// zero vector for no tokens.
pub fn average_embedding<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    emb: &EmbeddingMatrix,
) -> Array1<f64> {
    let mut sum = Array1::zeros(emb.dim());
    if tokens.is_empty() {
        return sum;
    }
    for t in tokens {
        sum += &emb.row(vocab.lookup(t.as_ref()));
    }
    sum / tokens.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenizes_mentions_and_punctuation() {
        assert_eq!(
            tokenize(".@USER1 @USER2 when was she good?"),
            toks(&[".", "<mention>", "<mention>", "when", "was", "she", "good", "?"])
        );
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n ").is_empty());
    }

    #[test]
    fn tokenizes_urls_and_hashtags() {
        assert_eq!(
            tokenize("Check https://t.co/x #FeminismIsAwful"),
            toks(&["check", "<url>", "#feminismisawful"])
        );
        assert_eq!(
            tokenize("(www.Example.com) # lonely #"),
            toks(&["(", "<url>", "#", "lonely", "#"])
        );
        assert_eq!(tokenize("ÉCOLE don't!!"), toks(&["école", "don", "'", "t", "!", "!"]));
        assert_eq!(tokenize("a@b"), toks(&["a", "<mention>"]));
    }

    #[test]
    fn vocab_threshold_and_specials() {
        let v = build_vocab(&["a a b"], 2).unwrap();
        assert!(v.get("a").is_some());
        assert!(v.get("b").is_none());
        assert_eq!(v.lookup("b"), UNK_INDEX);

        let empty = build_vocab::<&str>(&[], 1).unwrap();
        assert_eq!(empty.len(), 2);
        assert_eq!(empty.tokens(), &[UNK_TOKEN, PAD_TOKEN]);
        assert!(build_vocab(&["a"], 0).is_err());
    }

    #[test]
    fn test_only_token_is_unknown() {
        let v = build_vocab(&["the cat sat"], 1).unwrap();
        assert_eq!(v.encode(&tokenize("the dog")), vec![v.lookup("the"), UNK_INDEX]);
    }

    #[test]
    fn pretrained_rows_copied_and_missing_rows_seeded() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vec.txt");
        std::fs::write(&p, "good 0.1 0.2\nunused 1 1\n\n").unwrap();
        let vocab = build_vocab(&["good bad"], 1).unwrap();
        let emb = load_pretrained_embeddings(&p, &vocab, 2, 9).unwrap();
        assert_eq!(emb.row(vocab.lookup("good")).to_vec(), vec![0.1, 0.2]);
        assert_eq!(emb.row(PAD_INDEX).to_vec(), vec![0.0, 0.0]);
        let bad = emb.row(vocab.lookup("bad")).to_vec();
        assert!(bad.iter().all(|v| v.abs() <= INIT_RANGE));
        let again = load_pretrained_embeddings(&p, &vocab, 2, 9).unwrap();
        assert_eq!(emb, again);
    }

    #[test]
    fn pretrained_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vec.txt");
        std::fs::write(&p, "good 0.1 0.2\nbad 0.1 0.2 0.3\n").unwrap();
        let vocab = build_vocab(&["good"], 1).unwrap();
        match load_pretrained_embeddings(&p, &vocab, 2, 0) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn random_rows_cover_init_range() {
        // 10^4 rows: every value inside the range, and the range is actually used.
        let emb = EmbeddingMatrix::random(10_000, 4, 123);
        let vals: Vec<f64> = emb
            .values()
            .outer_iter()
            .enumerate()
            .filter(|(i, _)| *i != PAD_INDEX)
            .flat_map(|(_, r)| r.to_vec())
            .collect();
        assert!(vals.iter().all(|v| (-INIT_RANGE..=INIT_RANGE).contains(v)));
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max > 0.249 && min < -0.249);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 0.005);
        assert_eq!(emb, EmbeddingMatrix::random(10_000, 4, 123));
    }

    #[test]
    fn averages_rows() {
        let vocab = Vocabulary::from_tokens(toks(&[UNK_TOKEN, PAD_TOKEN, "a", "b"])).unwrap();
        let emb = EmbeddingMatrix::from_array(array![
            [9.0, 9.0],
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0]
        ])
        .unwrap();
        assert_eq!(
            average_embedding(&["a", "b"], &vocab, &emb).to_vec(),
            vec![0.5, 0.5]
        );
        assert_eq!(average_embedding(&["b"], &vocab, &emb).to_vec(), vec![0.0, 1.0]);
        assert_eq!(
            average_embedding::<&str>(&[], &vocab, &emb).to_vec(),
            vec![0.0, 0.0]
        );
        assert_eq!(average_embedding(&["zzz"], &vocab, &emb).to_vec(), vec![9.0, 9.0]);
    }
}
