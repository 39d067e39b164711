use std::collections::{HashMap, HashSet};

use super::{Dataset, LabelScheme, Tweet};
use crate::error::{Error, Result};

pub const DEFAULT_FUSE_CAP: usize = 250;

const NEGATIVE_CLASS_NAMES: &[&str] = &["none", "neither", "non-hate", "normal", "clean"];

/// Whether a class name denotes the non-hateful class when collapsing a
/// scheme to hate vs. non-hate.
pub fn is_negative_class_name(name: &str) -> bool {
    let lower = name.to_lowercase();
    NEGATIVE_CLASS_NAMES.contains(&lower.as_str())
}

/// Merges `donor`'s `hate_class` tweets into `base`, collapsing every label to
/// the binary `fused-binary` scheme, then keeps at most `cap` tweets per
/// (user, class) pair in input order (base tweets first).
///
/// Base classes named like [`is_negative_class_name`] map to `none`, every
/// other base class maps to `hate`. Timelines of both inputs are carried over;
/// the donor's entry wins when both have one for the same user.
pub fn fuse_datasets(
    base: &Dataset,
    donor: &Dataset,
    hate_class: &str,
    cap: usize,
) -> Result<Dataset> {
    if cap == 0 {
        return Err(Error::Input("fuse cap must be at least 1".into()));
    }
    let donor_hate = donor.scheme().index_of(hate_class).ok_or_else(|| {
        Error::Schema(format!(
            "hate class {hate_class:?} not in donor scheme {:?}",
            donor.scheme().name()
        ))
    })?;
    let scheme = LabelScheme::fused_binary();
    let negative = scheme.index_of("none").expect("fused scheme");
    let positive = scheme.index_of("hate").expect("fused scheme");
    if !base
        .scheme()
        .classes()
        .iter()
        .any(|c| is_negative_class_name(c))
    {
        return Err(Error::Schema(format!(
            "base scheme {:?} has no non-hate class (expected one of {NEGATIVE_CLASS_NAMES:?})",
            base.scheme().name()
        )));
    }
    let base_map: Vec<usize> = base
        .scheme()
        .classes()
        .iter()
        .map(|c| {
            if is_negative_class_name(c) {
                negative
            } else {
                positive
            }
        })
        .collect();

    let candidates = base
        .tweets()
        .iter()
        .map(|t| Tweet {
            label: base_map[t.label],
            ..t.clone()
        })
        .chain(
            donor
                .tweets()
                .iter()
                .filter(|t| t.label == donor_hate)
                .map(|t| Tweet {
                    label: positive,
                    ..t.clone()
                }),
        );

    let mut per_user_class: HashMap<(String, usize), usize> = HashMap::new();
    let mut ids = HashSet::new();
    let mut tweets = Vec::new();
    for t in candidates {
        if !ids.insert(t.id.clone()) {
            return Err(Error::Integrity(format!(
                "tweet id {:?} present in both base and donor",
                t.id
            )));
        }
        let n = per_user_class
            .entry((t.user_id.clone(), t.label))
            .or_insert(0);
        if *n < cap {
            *n += 1;
            tweets.push(t);
        }
    }

    let mut timelines = base.timelines().clone();
    timelines.extend(donor.timelines().iter().map(|(k, v)| (k.clone(), v.clone())));
    Dataset::new(scheme, tweets, timelines)
}
