//! Tweets, label schemes, user timelines and the datasets built from them.

mod dist;
mod fuse;
mod io;
mod synth;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dist::{activity_distribution, distribution_tsv, write_distribution_tsv};
pub use fuse::{fuse_datasets, is_negative_class_name, DEFAULT_FUSE_CAP};
pub use io::{
    infer_scheme, load_dataset, load_timelines, write_dataset, write_timelines, TimelineRecord,
    TweetRecord,
};
pub use synth::{hate_markers, synth_corpus, SynthConfig};

/// Maximum number of timeline tweets kept per user.
pub const TIMELINE_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub user_id: String,
    pub text: String,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelScheme {
    name: String,
    classes: Vec<String>,
}

impl LabelScheme {
    pub fn new(name: impl Into<String>, classes: Vec<String>) -> Result<Self> {
        let name = name.into();
        if classes.len() < 2 {
            return Err(Error::Schema(format!(
                "scheme {name:?} needs at least 2 classes, got {}",
                classes.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::Schema(format!(
                    "scheme {name:?} repeats class {c:?}"
                )));
            }
        }
        Ok(LabelScheme { name, classes })
    }

    /// Built-in schemes by name: `waseem-binary`, `waseem-ternary`,
    /// `davidson-ternary` and `fused-binary`.
    pub fn builtin(name: &str) -> Result<Self> {
        let classes: &[&str] = match name {
            "waseem-binary" => &["none", "sexism"],
            "waseem-ternary" => &["racism", "sexism", "none"],
            "davidson-ternary" => &["hate", "offensive", "neither"],
            "fused-binary" => &["none", "hate"],
            other => return Err(Error::Schema(format!("unknown label scheme {other:?}"))),
        };
        LabelScheme::new(name, classes.iter().map(|s| s.to_string()).collect())
    }

    /// The two-class scheme used for fused and synthetic corpora.
    pub fn fused_binary() -> Self {
        LabelScheme::builtin("fused-binary").expect("builtin scheme")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn class_name(&self, index: usize) -> &str {
        &self.classes[index]
    }
}

/// Most-recent-first historical tweets of one author.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UserTimeline {
    pub user_id: String,
    tweets: Vec<String>,
}

impl UserTimeline {
    /// Keeps at most the first [`TIMELINE_CAP`] entries.
    pub fn new(user_id: impl Into<String>, mut tweets: Vec<String>) -> Self {
        tweets.truncate(TIMELINE_CAP);
        UserTimeline {
            user_id: user_id.into(),
            tweets,
        }
    }

    pub fn tweets(&self) -> &[String] {
        &self.tweets
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }
}

pub type Timelines = BTreeMap<String, UserTimeline>;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    scheme: LabelScheme,
    tweets: Vec<Tweet>,
    timelines: Timelines,
}

impl Dataset {
    /// Validates label range and id uniqueness.
    pub fn new(scheme: LabelScheme, tweets: Vec<Tweet>, timelines: Timelines) -> Result<Self> {
        let mut ids = HashSet::with_capacity(tweets.len());
        for t in &tweets {
            if t.label >= scheme.n_classes() {
                return Err(Error::Schema(format!(
                    "tweet {:?} has label index {} outside scheme {:?}",
                    t.id,
                    t.label,
                    scheme.name()
                )));
            }
            if !ids.insert(t.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate tweet id {:?}", t.id)));
            }
        }
        Ok(Dataset {
            scheme,
            tweets,
            timelines,
        })
    }

    pub fn scheme(&self) -> &LabelScheme {
        &self.scheme
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    pub fn timelines(&self) -> &Timelines {
        &self.timelines
    }

    pub fn timeline(&self, user_id: &str) -> Option<&UserTimeline> {
        self.timelines.get(user_id)
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn with_timelines(mut self, timelines: Timelines) -> Self {
        self.timelines = timelines;
        self
    }

    /// Distinct authors, sorted.
    pub fn users(&self) -> Vec<&str> {
        let mut users: Vec<&str> = self.tweets.iter().map(|t| t.user_id.as_str()).collect();
        users.sort_unstable();
        users.dedup();
        users
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.scheme.n_classes()];
        for t in &self.tweets {
            counts[t.label] += 1;
        }
        counts
    }

    /// Drops every class with fewer than `min_count` tweets and re-indexes the
    /// remaining classes in their original order.
    pub fn drop_rare_classes(&self, min_count: usize) -> Result<Dataset> {
        let counts = self.class_counts();
        let kept: Vec<usize> = (0..counts.len())
            .filter(|&c| counts[c] >= min_count)
            .collect();
        if kept.len() == counts.len() {
            return Ok(self.clone());
        }
        let mut remap = vec![None; counts.len()];
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = Some(new);
        }
        let classes = kept
            .iter()
            .map(|&c| self.scheme.classes[c].clone())
            .collect();
        let scheme = LabelScheme::new(self.scheme.name.clone(), classes)?;
        let tweets = self
            .tweets
            .iter()
            .filter_map(|t| {
                remap[t.label].map(|label| Tweet {
                    label,
                    ..t.clone()
                })
            })
            .collect();
        Dataset::new(scheme, tweets, self.timelines.clone())
    }
}
