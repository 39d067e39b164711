use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

const SPLIT_STREAM: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Tweets are dealt to folds independently; a user may span folds.
    ByTweet,
    /// Users are dealt to folds; all of a user's tweets share one fold.
    ByUser,
}

impl SplitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::ByTweet => "by-tweet",
            SplitMode::ByUser => "by-user",
        }
    }
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by-tweet" | "tweet" => Ok(SplitMode::ByTweet),
            "by-user" | "user" => Ok(SplitMode::ByUser),
            other => Err(Error::Config(format!("unknown split mode {other:?}"))),
        }
    }
}

/// Assignment of each tweet (by position in the dataset) to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    k: usize,
    mode: SplitMode,
    seed: u64,
    assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> SplitMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fold of the tweet at each dataset position.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

fn check_k(k: usize, available: usize, what: &str) -> Result<()> {
    if k < 2 {
        return Err(Error::Input(format!("k must be at least 2, got {k}")));
    }
    if k > available {
        return Err(Error::Input(format!("k = {k} exceeds the {available} {what}")));
    }
    Ok(())
}

/// Seeded shuffle of the tweets, then round-robin into `k` folds.
pub fn split_by_tweet(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let n = dataset.len();
    check_k(k, n, "tweets")?;
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(derive_seed(seed, SPLIT_STREAM)).shuffle(&mut order);
    let mut assignment = vec![0; n];
    for (j, &i) in order.iter().enumerate() {
        assignment[i] = j % k;
    }
    Ok(FoldPlan {
        k,
        mode: SplitMode::ByTweet,
        seed,
        assignment,
    })
}

/// Seeded shuffle of the sorted users, round-robin users into `k` folds; each
/// tweet follows its author.
pub fn split_by_user(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let mut users = dataset.users();
    check_k(k, users.len(), "distinct users")?;
    Rng::new(derive_seed(seed, SPLIT_STREAM)).shuffle(&mut users);
    let fold_of: std::collections::HashMap<&str, usize> = users
        .iter()
        .enumerate()
        .map(|(j, &u)| (u, j % k))
        .collect();
    let assignment = dataset
        .tweets()
        .iter()
        .map(|t| fold_of[t.user_id.as_str()])
        .collect();
    Ok(FoldPlan {
        k,
        mode: SplitMode::ByUser,
        seed,
        assignment,
    })
}

pub fn split(dataset: &Dataset, mode: SplitMode, k: usize, seed: u64) -> Result<FoldPlan> {
    match mode {
        SplitMode::ByTweet => split_by_tweet(dataset, k, seed),
        SplitMode::ByUser => split_by_user(dataset, k, seed),
    }
}

/// Number of users appearing on both sides of fold `fold`'s train/test split.
pub fn user_overlap(dataset: &Dataset, plan: &FoldPlan, fold: usize) -> usize {
    let tweets = dataset.tweets();
    let side = |idx: Vec<usize>| -> BTreeSet<&str> {
        idx.into_iter().map(|i| tweets[i].user_id.as_str()).collect()
    };
    let test = side(plan.test_indices(fold));
    let train = side(plan.train_indices(fold));
    test.intersection(&train).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelScheme, Timelines, Tweet};

    fn dataset(users: &[&str]) -> Dataset {
        let tweets = users
            .iter()
            .enumerate()
            .map(|(i, u)| Tweet {
                id: format!("t{i}"),
                user_id: u.to_string(),
                text: "x".into(),
                label: i % 2,
            })
            .collect();
        Dataset::new(LabelScheme::fused_binary(), tweets, Timelines::new()).unwrap()
    }

    #[test]
    fn tweet_folds_balanced() {
        let users: Vec<String> = (0..25).map(|i| format!("u{i}")).collect();
        let refs: Vec<&str> = users.iter().map(String::as_str).collect();
        let d = dataset(&refs);
        let mut sizes = split_by_tweet(&d, 10, 3).unwrap().fold_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![2, 2, 2, 2, 2, 3, 3, 3, 3, 3]);
        let d10 = dataset(&refs[..10]);
        assert_eq!(split_by_tweet(&d10, 10, 3).unwrap().fold_sizes(), vec![1; 10]);
        assert!(matches!(split_by_tweet(&d10, 11, 3), Err(Error::Input(_))));
        assert!(matches!(split_by_tweet(&d10, 1, 3), Err(Error::Input(_))));
    }

    #[test]
    fn user_folds_are_disjoint() {
        let d = dataset(&["a", "a", "b", "c", "c", "c", "d", "b"]);
        let plan = split_by_user(&d, 2, 9).unwrap();
        for f in 0..2 {
            assert_eq!(user_overlap(&d, &plan, f), 0);
        }
        let users_per_fold: Vec<usize> = (0..2)
            .map(|f| {
                let idx = plan.test_indices(f);
                let set: BTreeSet<&str> = idx.iter().map(|&i| d.tweets()[i].user_id.as_str()).collect();
                set.len()
            })
            .collect();
        assert_eq!(users_per_fold, vec![2, 2]);
        assert!(matches!(
            split_by_user(&dataset(&["a", "b", "c"]), 5, 1),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn plans_are_seeded() {
        let users: Vec<String> = (0..40).map(|i| format!("u{}", i % 13)).collect();
        let refs: Vec<&str> = users.iter().map(String::as_str).collect();
        let d = dataset(&refs);
        for mode in [SplitMode::ByTweet, SplitMode::ByUser] {
            assert_eq!(split(&d, mode, 4, 5).unwrap(), split(&d, mode, 4, 5).unwrap());
            assert_ne!(
                split(&d, mode, 4, 5).unwrap().assignment(),
                split(&d, mode, 4, 6).unwrap().assignment()
            );
        }
    }
}
