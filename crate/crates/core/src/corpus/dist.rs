use std::collections::HashMap;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::output::write_atomic;

/// Tweets per user as `(rank, count)` in descending order of activity, ranks
/// starting at 1. With `hate_class`, only tweets of that class are counted and
/// users without any are left out. Equal counts are ordered by user id.
pub fn activity_distribution(
    dataset: &Dataset,
    hate_class: Option<&str>,
) -> Result<Vec<(usize, usize)>> {
    let only = match hate_class {
        Some(name) => Some(dataset.scheme().index_of(name).ok_or_else(|| {
            Error::Schema(format!(
                "class {name:?} not in scheme {:?}",
                dataset.scheme().name()
            ))
        })?),
        None => None,
    };
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in dataset.tweets() {
        if only.map_or(true, |c| t.label == c) {
            *counts.entry(t.user_id.as_str()).or_default() += 1;
        }
    }
    let mut sorted: Vec<(&str, usize)> = counts.into_iter().collect();
    sorted.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, (_, c))| (i + 1, c))
        .collect())
}

pub fn distribution_tsv(dist: &[(usize, usize)]) -> String {
    let mut out = String::from("rank\tcount\n");
    for (rank, count) in dist {
        out.push_str(&format!("{rank}\t{count}\n"));
    }
    out
}

pub fn write_distribution_tsv(path: &Path, dist: &[(usize, usize)]) -> Result<()> {
    write_atomic(path, distribution_tsv(dist).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelScheme, Timelines, Tweet};

    fn dataset(rows: &[(&str, usize)]) -> Dataset {
        let tweets = rows
            .iter()
            .enumerate()
            .map(|(i, (u, label))| Tweet {
                id: i.to_string(),
                user_id: u.to_string(),
                text: String::new(),
                label: *label,
            })
            .collect();
        Dataset::new(LabelScheme::fused_binary(), tweets, Timelines::new()).unwrap()
    }

    #[test]
    fn sorted_descending_and_conserving() {
        let mut rows = vec![("u1", 0); 5];
        rows.extend([("u2", 0), ("u2", 1), ("u3", 0), ("u3", 0)]);
        let ds = dataset(&rows);
        let d = activity_distribution(&ds, None).unwrap();
        assert_eq!(d, vec![(1, 5), (2, 2), (3, 2)]);
        assert_eq!(d.iter().map(|x| x.1).sum::<usize>(), ds.len());
        assert_eq!(
            distribution_tsv(&d),
            "rank\tcount\n1\t5\n2\t2\n3\t2\n"
        );
    }

    #[test]
    fn hate_only_excludes_non_haters() {
        let ds = dataset(&[("a", 1), ("a", 1), ("b", 0), ("c", 1)]);
        assert_eq!(
            activity_distribution(&ds, Some("hate")).unwrap(),
            vec![(1, 2), (2, 1)]
        );
        let clean = dataset(&[("a", 0), ("b", 0)]);
        assert!(activity_distribution(&clean, Some("hate")).unwrap().is_empty());
        assert!(activity_distribution(&dataset(&[]), None).unwrap().is_empty());
        assert!(activity_distribution(&clean, Some("nope")).is_err());
    }
}
