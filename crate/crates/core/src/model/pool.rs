//! Judging pools and the pool file format
//! `topic_id doc_id provenance depth_used`.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Why a document is in a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    /// Retrieved by the pooling systems within the pool depth.
    Pooled,
    /// Forced in as one of the first Google results.
    Google,
    /// Forced in as a noise document.
    Noise,
    /// Both pooled and among the forced Google results.
    Both,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Pooled => "pooled",
            Provenance::Google => "google",
            Provenance::Noise => "noise",
            Provenance::Both => "both",
        }
    }

    pub fn includes_pooled(self) -> bool {
        matches!(self, Provenance::Pooled | Provenance::Both)
    }

    /// Regular documents are split between assessors; the rest are shared.
    pub fn is_regular(self) -> bool {
        self == Provenance::Pooled
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Provenance::Pooled),
            "google" => Ok(Provenance::Google),
            "noise" => Ok(Provenance::Noise),
            "both" => Ok(Provenance::Both),
            other => Err(Error::Validation(format!("unknown provenance {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    pub topic_id: String,
    pub members: BTreeMap<String, Provenance>,
    /// Per-system cutoff actually used.
    pub depth: usize,
    pub target_size: usize,
    /// Set when the runs ran out of documents before reaching the target.
    pub underfull: bool,
}

impl Pool {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, doc: &str) -> bool {
        self.members.contains_key(doc)
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.members.values().filter(|p| **p == provenance).count()
    }

    pub fn docs(&self) -> impl Iterator<Item = &str> {
        self.members.keys().map(String::as_str)
    }
}

/// Parse a pool file. The target size is not persisted, so it is set to
/// the member count.
pub fn parse_pools(text: &str) -> Result<Vec<Pool>> {
    let mut pools: BTreeMap<String, Pool> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::parse("pools", lineno, format!("expected 4 columns, got {}", cols.len())));
        }
        let provenance: Provenance = cols[2]
            .parse()
            .map_err(|e: Error| Error::parse("pools", lineno, e.to_string()))?;
        let depth: usize = cols[3]
            .parse()
            .map_err(|_| Error::parse("pools", lineno, format!("depth {:?} is not an integer", cols[3])))?;
        let pool = pools.entry(cols[0].to_string()).or_insert_with(|| Pool {
            topic_id: cols[0].to_string(),
            members: BTreeMap::new(),
            depth,
            target_size: 0,
            underfull: false,
        });
        if pool.depth != depth {
            return Err(Error::parse(
                "pools",
                lineno,
                format!("topic {} has conflicting depths {} and {depth}", cols[0], pool.depth),
            ));
        }
        if pool.members.insert(cols[1].to_string(), provenance).is_some() {
            return Err(Error::parse(
                "pools",
                lineno,
                format!("document {} listed twice for topic {}", cols[1], cols[0]),
            ));
        }
    }
    Ok(pools
        .into_values()
        .map(|mut p| {
            p.target_size = p.members.len();
            p
        })
        .collect())
}

pub fn write_pools(pools: &[Pool]) -> String {
    let mut sorted: Vec<&Pool> = pools.iter().collect();
    sorted.sort_by(|a, b| a.topic_id.cmp(&b.topic_id));
    let mut out = String::new();
    for p in sorted {
        for (doc, prov) in &p.members {
            let _ = writeln!(out, "{} {doc} {prov} {}", p.topic_id, p.depth);
        }
    }
    out
}
