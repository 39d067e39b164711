//! JSON-lines readers and writers for tweet and timeline files.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, LabelScheme, Timelines, Tweet, UserTimeline};
use crate::error::{Error, Result};
use crate::output::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub user_id: String,
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineRecord {
    pub user_id: String,
    pub tweets: Vec<String>,
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
fn records(contents: &str) -> impl Iterator<Item = (usize, &str)> {
    contents
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
}

fn parse_line<T: for<'de> Deserialize<'de>>(path: &Path, line: usize, raw: &str) -> Result<T> {
    serde_json::from_str(raw).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })
}

/// Reads a tweet file under `scheme`. Timelines are left empty.
pub fn load_dataset(path: &Path, scheme: &LabelScheme) -> Result<Dataset> {
    let contents = read_to_string(path)?;
    let mut tweets = Vec::new();
    let mut ids = HashSet::new();
    for (line, raw) in records(&contents) {
        let rec: TweetRecord = parse_line(path, line, raw)?;
        let label = scheme.index_of(&rec.label).ok_or_else(|| {
            Error::Schema(format!(
                "{}:{line}: unknown label {:?} for scheme {:?}",
                path.display(),
                rec.label,
                scheme.name()
            ))
        })?;
        if !ids.insert(rec.id.clone()) {
            return Err(Error::Integrity(format!(
                "{}:{line}: duplicate tweet id {:?}",
                path.display(),
                rec.id
            )));
        }
        tweets.push(Tweet {
            id: rec.id,
            user_id: rec.user_id,
            text: rec.text,
            label,
        });
    }
    Dataset::new(scheme.clone(), tweets, Timelines::new())
}

/// Builds a scheme from the label names of a tweet file, in order of first
/// appearance.
pub fn infer_scheme(path: &Path, name: &str) -> Result<LabelScheme> {
    let contents = read_to_string(path)?;
    let mut classes: Vec<String> = Vec::new();
    for (line, raw) in records(&contents) {
        let rec: TweetRecord = parse_line(path, line, raw)?;
        if !classes.contains(&rec.label) {
            classes.push(rec.label);
        }
    }
    LabelScheme::new(name, classes)
}

/// Reads a timeline file; each timeline is truncated to its 20 most recent
/// entries. A later record for the same user replaces an earlier one.
pub fn load_timelines(path: &Path) -> Result<Timelines> {
    let contents = read_to_string(path)?;
    let mut out = Timelines::new();
    for (line, raw) in records(&contents) {
        let rec: TimelineRecord = parse_line(path, line, raw)?;
        out.insert(rec.user_id.clone(), UserTimeline::new(rec.user_id, rec.tweets));
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut buf = String::new();
    for t in dataset.tweets() {
        let rec = TweetRecord {
            id: t.id.clone(),
            user_id: t.user_id.clone(),
            text: t.text.clone(),
            label: dataset.scheme().class_name(t.label).to_string(),
        };
        buf.push_str(&serde_json::to_string(&rec)?);
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

pub fn write_timelines(path: &Path, timelines: &Timelines) -> Result<()> {
    let mut buf = String::new();
    for tl in timelines.values() {
        let rec = TimelineRecord {
            user_id: tl.user_id.clone(),
            tweets: tl.tweets().to_vec(),
        };
        buf.push_str(&serde_json::to_string(&rec)?);
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}
