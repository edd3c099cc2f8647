//! Judging assignments and their file format:
//!
//! ```text
//! #seed 42
//! topic_id assessor_id doc_id exclusive|shared
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DocTag {
    /// Judged by this assessor only.
    Exclusive,
    /// Judged by every assessor of the topic.
    Shared,
}

impl fmt::Display for DocTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DocTag::Exclusive => "exclusive",
            DocTag::Shared => "shared",
        })
    }
}

impl FromStr for DocTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exclusive" => Ok(DocTag::Exclusive),
            "shared" => Ok(DocTag::Shared),
            other => Err(Error::Validation(format!("unknown document tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub topic_id: String,
    pub assessor_id: String,
    pub docs: BTreeMap<String, DocTag>,
    pub seed: u64,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn contains(&self, doc: &str) -> bool {
        self.docs.contains_key(doc)
    }
}

pub fn parse_assignments(text: &str) -> Result<Vec<Assignment>> {
    let mut seed: Option<u64> = None;
    let mut by_key: BTreeMap<(String, String), Assignment> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols[0] == "#seed" {
            let s = cols
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse("assignments", lineno, "#seed needs an integer"))?;
            seed = Some(s);
            continue;
        }
        if cols.len() != 4 {
            return Err(Error::parse("assignments", lineno, format!("expected 4 columns, got {}", cols.len())));
        }
        let tag: DocTag = cols[3]
            .parse()
            .map_err(|e: Error| Error::parse("assignments", lineno, e.to_string()))?;
        let a = by_key
            .entry((cols[0].to_string(), cols[1].to_string()))
            .or_insert_with(|| Assignment {
                topic_id: cols[0].to_string(),
                assessor_id: cols[1].to_string(),
                docs: BTreeMap::new(),
                seed: 0,
            });
        if a.docs.insert(cols[2].to_string(), tag).is_some() {
            return Err(Error::parse(
                "assignments",
                lineno,
                format!("document {} assigned twice to {} for {}", cols[2], cols[1], cols[0]),
            ));
        }
    }
    let seed = seed.unwrap_or(0);
    Ok(by_key
        .into_values()
        .map(|mut a| {
            a.seed = seed;
            a
        })
        .collect())
}

/// Write assignments; the seed of the first assignment is recorded in the header.
pub fn write_assignments(assignments: &[Assignment]) -> String {
    let mut sorted: Vec<&Assignment> = assignments.iter().collect();
    sorted.sort_by(|a, b| (&a.topic_id, &a.assessor_id).cmp(&(&b.topic_id, &b.assessor_id)));
    let mut out = String::new();
    let _ = writeln!(out, "#seed {}", sorted.first().map_or(0, |a| a.seed));
    for a in sorted {
        for (doc, tag) in &a.docs {
            let _ = writeln!(out, "{} {} {doc} {tag}", a.topic_id, a.assessor_id);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "#seed 9\nt1 s1 a exclusive\nt1 s1 g shared\nt1 s2 b exclusive\nt1 s2 g shared\n";
        let parsed = parse_assignments(text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].seed, 9);
        assert_eq!(write_assignments(&parsed), text);
    }

    #[test]
    fn duplicate_doc_rejected() {
        assert!(parse_assignments("t s a shared\nt s a exclusive\n").is_err());
    }
}
