//! Ranked runs in the six-column format
//! `topic_id Q0 doc_id rank score system_id`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RankedDoc {
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
}

/// One system's ranked output for a set of topics.
///
/// Per topic, ranks are contiguous from 1, doc ids are unique, and scores
/// never increase with rank. List order is authoritative.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub system_id: String,
    pub topics: BTreeMap<String, Vec<RankedDoc>>,
}

impl Run {
    pub fn new(system_id: impl Into<String>) -> Self {
        Run {
            system_id: system_id.into(),
            topics: BTreeMap::new(),
        }
    }

    /// Add a topic from an ordered doc list; scores are synthesised as
    /// `n - i` so they decrease strictly with rank.
    pub fn with_ranking<S: AsRef<str>>(mut self, topic: impl Into<String>, docs: &[S]) -> Self {
        let n = docs.len();
        let entries = docs
            .iter()
            .enumerate()
            .map(|(i, d)| RankedDoc {
                doc_id: d.as_ref().to_string(),
                rank: (i + 1) as u32,
                score: (n - i) as f64,
            })
            .collect();
        self.topics.insert(topic.into(), entries);
        self
    }

    /// Doc ids for a topic in rank order; empty if the topic is absent.
    pub fn ranking(&self, topic: &str) -> Vec<&str> {
        self.topics
            .get(topic)
            .map(|v| v.iter().map(|d| d.doc_id.as_str()).collect())
            .unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.system_id.is_empty() {
            return Err(Error::Validation("run system id must be non-empty".into()));
        }
        for (topic, entries) in &self.topics {
            let mut seen = HashSet::new();
            for (i, e) in entries.iter().enumerate() {
                if e.rank as usize != i + 1 {
                    return Err(Error::Validation(format!(
                        "run {}: topic {topic}: ranks not contiguous from 1 (position {} has rank {})",
                        self.system_id,
                        i + 1,
                        e.rank
                    )));
                }
                if !seen.insert(e.doc_id.as_str()) {
                    return Err(Error::Validation(format!(
                        "run {}: topic {topic}: document {} ranked twice",
                        self.system_id, e.doc_id
                    )));
                }
                if i > 0 && e.score > entries[i - 1].score {
                    return Err(Error::Validation(format!(
                        "run {}: topic {topic}: score increases at rank {}",
                        self.system_id, e.rank
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn parse_run(text: &str) -> Result<Run> {
    let mut system: Option<String> = None;
    let mut topics: BTreeMap<String, Vec<RankedDoc>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(Error::parse("run", lineno, format!("expected 6 columns, got {}", cols.len())));
        }
        let rank: u32 = cols[3]
            .parse()
            .map_err(|_| Error::parse("run", lineno, format!("rank {:?} is not a positive integer", cols[3])))?;
        if rank == 0 {
            return Err(Error::parse("run", lineno, "rank must be positive"));
        }
        let score: f64 = cols[4]
            .parse()
            .map_err(|_| Error::parse("run", lineno, format!("score {:?} is not a number", cols[4])))?;
        if !score.is_finite() {
            return Err(Error::parse("run", lineno, "score must be finite"));
        }
        match &system {
            None => system = Some(cols[5].to_string()),
            Some(s) if s != cols[5] => {
                return Err(Error::parse(
                    "run",
                    lineno,
                    format!("system id {:?} differs from {:?}", cols[5], s),
                ))
            }
            _ => {}
        }
        topics.entry(cols[0].to_string()).or_default().push(RankedDoc {
            doc_id: cols[2].to_string(),
            rank,
            score,
        });
    }
    let system_id = system.ok_or_else(|| Error::Validation("run file contains no entries".into()))?;
    for entries in topics.values_mut() {
        entries.sort_by_key(|e| e.rank);
    }
    let run = Run { system_id, topics };
    run.validate()?;
    Ok(run)
}

pub fn write_run(run: &Run) -> String {
    let mut out = String::new();
    for (topic, entries) in &run.topics {
        for e in entries {
            let _ = writeln!(out, "{topic} Q0 {} {} {} {}", e.doc_id, e.rank, e.score, run.system_id);
        }
    }
    out
}
