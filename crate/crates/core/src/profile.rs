//! Tweet, timeline and concatenated feature vectors for the boosted trees.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::corpus::{Timelines, Tweet, UserTimeline};
use crate::error::{Error, Result};
use crate::output::write_atomic;
use crate::text::{average_embedding, tokenize, EmbeddingMatrix, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileMode {
    /// Tweet vector only (`d` features).
    Baseline,
    /// Tweet vector followed by the author's timeline vector (`2d` features).
    Timeline,
}

impl ProfileMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileMode::Baseline => "baseline",
            ProfileMode::Timeline => "timeline",
        }
    }

    pub fn feature_len(self, dim: usize) -> usize {
        match self {
            ProfileMode::Baseline => dim,
            ProfileMode::Timeline => 2 * dim,
        }
    }
}

impl std::str::FromStr for ProfileMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ProfileMode::Baseline),
            "timeline" => Ok(ProfileMode::Timeline),
            other => Err(Error::Config(format!("unknown profile mode {other:?}"))),
        }
    }
}

pub type FeatureVector = Vec<f64>;

pub fn tweet_vector(tweet: &Tweet, vocab: &Vocabulary, emb: &EmbeddingMatrix) -> Array1<f64> {
    average_embedding(&tokenize(&tweet.text), vocab, emb)
}

/// Mean over every token of every timeline tweet, pooled into one list.
/// A missing or empty timeline gives the zero vector.
pub fn timeline_vector(
    timeline: Option<&UserTimeline>,
    vocab: &Vocabulary,
    emb: &EmbeddingMatrix,
) -> Array1<f64> {
    let tokens: Vec<String> = timeline
        .map(|t| t.tweets().iter().flat_map(|text| tokenize(text)).collect())
        .unwrap_or_default();
    average_embedding(&tokens, vocab, emb)
}

pub fn featurize(
    tweet: &Tweet,
    timelines: &Timelines,
    mode: ProfileMode,
    vocab: &Vocabulary,
    emb: &EmbeddingMatrix,
) -> FeatureVector {
    let mut out = tweet_vector(tweet, vocab, emb).to_vec();
    if mode == ProfileMode::Timeline {
        out.extend(timeline_vector(timelines.get(&tweet.user_id), vocab, emb));
    }
    out
}

/// [`featurize`] over many tweets, computing each author's timeline vector once.
pub fn featurize_all(
    tweets: &[Tweet],
    timelines: &Timelines,
    mode: ProfileMode,
    vocab: &Vocabulary,
    emb: &EmbeddingMatrix,
) -> Vec<FeatureVector> {
    let mut cache: BTreeMap<&str, Array1<f64>> = BTreeMap::new();
    tweets
        .iter()
        .map(|tweet| {
            let mut out = tweet_vector(tweet, vocab, emb).to_vec();
            if mode == ProfileMode::Timeline {
                let profile = cache.entry(tweet.user_id.as_str()).or_insert_with(|| {
                    timeline_vector(timelines.get(&tweet.user_id), vocab, emb)
                });
                out.extend(profile.iter());
            }
            out
        })
        .collect()
}

/// One row per tweet: id, then the feature values.
pub fn features_tsv(tweets: &[Tweet], features: &[FeatureVector]) -> Result<String> {
    if tweets.len() != features.len() {
        return Err(Error::Shape(format!(
            "{} tweets but {} feature rows",
            tweets.len(),
            features.len()
        )));
    }
    let width = features.first().map_or(0, Vec::len);
    let mut out = String::from("id");
    for j in 0..width {
        write!(out, "\tf{j}").unwrap();
    }
    out.push('\n');
    for (tweet, row) in tweets.iter().zip(features) {
        if row.len() != width {
            return Err(Error::Shape(format!("ragged feature row for tweet {}", tweet.id)));
        }
        out.push_str(&tweet.id);
        for v in row {
            write!(out, "\t{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_features_tsv(path: &Path, tweets: &[Tweet], features: &[FeatureVector]) -> Result<()> {
    write_atomic(path, features_tsv(tweets, features)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fixture() -> (Vocabulary, EmbeddingMatrix) {
        let vocab = Vocabulary::from_tokens(
            ["<unk>", "<pad>", "a", "b"].iter().map(|s| s.to_string()).collect(),
        )
        .unwrap();
        let emb = EmbeddingMatrix::from_array(array![
            [0.0, 0.0],
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0]
        ])
        .unwrap();
        (vocab, emb)
    }

    fn tweet(user: &str, text: &str) -> Tweet {
        Tweet {
            id: format!("{user}-{text}"),
            user_id: user.into(),
            text: text.into(),
            label: 0,
        }
    }

    fn timelines(user: &str, texts: &[&str]) -> Timelines {
        let mut t = Timelines::new();
        t.insert(
            user.into(),
            UserTimeline::new(user, texts.iter().map(|s| s.to_string()).collect()),
        );
        t
    }

    #[test]
    fn tweet_vector_is_token_mean() {
        let (vocab, emb) = fixture();
        assert_eq!(tweet_vector(&tweet("u", "a b"), &vocab, &emb), array![0.5, 0.5]);
        assert_eq!(tweet_vector(&tweet("u", ""), &vocab, &emb), array![0.0, 0.0]);
    }

    #[test]
    fn timeline_pools_tokens() {
        let (vocab, emb) = fixture();
        let tl = timelines("u", &["a", "b b"]);
        let v = timeline_vector(tl.get("u"), &vocab, &emb);
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-15 && (v[1] - 2.0 / 3.0).abs() < 1e-15);
        let same = timelines("u", &["b", "b", "b"]);
        assert_eq!(timeline_vector(same.get("u"), &vocab, &emb), array![0.0, 1.0]);
        assert_eq!(timeline_vector(None, &vocab, &emb), array![0.0, 0.0]);
    }

    #[test]
    fn featurize_layout() {
        let (vocab, emb) = fixture();
        let tl = timelines("u", &["b"]);
        let t = tweet("u", "a");
        assert_eq!(featurize(&t, &tl, ProfileMode::Baseline, &vocab, &emb), vec![1.0, 0.0]);
        assert_eq!(
            featurize(&t, &tl, ProfileMode::Timeline, &vocab, &emb),
            vec![1.0, 0.0, 0.0, 1.0]
        );
        let stranger = tweet("v", "a b");
        assert_eq!(
            featurize(&stranger, &tl, ProfileMode::Timeline, &vocab, &emb),
            vec![0.5, 0.5, 0.0, 0.0]
        );
        let all = featurize_all(&[t.clone(), stranger.clone()], &tl, ProfileMode::Timeline, &vocab, &emb);
        assert_eq!(all[0], featurize(&t, &tl, ProfileMode::Timeline, &vocab, &emb));
        assert_eq!(all[1], featurize(&stranger, &tl, ProfileMode::Timeline, &vocab, &emb));
    }

    #[test]
    fn tsv_export() {
        let (vocab, emb) = fixture();
        let tweets = vec![tweet("u", "a"), tweet("v", "a b")];
        let feats = featurize_all(&tweets, &Timelines::new(), ProfileMode::Baseline, &vocab, &emb);
        assert_eq!(
            features_tsv(&tweets, &feats).unwrap(),
            "id\tf0\tf1\nu-a\t1\t0\nv-a b\t0.5\t0.5\n"
        );
        assert!(matches!(features_tsv(&tweets, &feats[..1]), Err(Error::Shape(_))));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("timeline".parse::<ProfileMode>().unwrap(), ProfileMode::Timeline);
        assert!("both".parse::<ProfileMode>().is_err());
        assert_eq!(ProfileMode::Timeline.feature_len(200), 400);
    }
}
