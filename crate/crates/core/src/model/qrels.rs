//! Relevance judgments in the four-column format `topic_id 0 doc_id grade`.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A relevance grade on the -1..=2 scale.
///
/// -1 marks a document that could not be rendered and so was not judged;
/// 0 is nonrelevant, 1 somewhat relevant, 2 highly relevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct Grade(i8);

impl Grade {
    pub const UNJUDGEABLE: Grade = Grade(-1);
    pub const NONRELEVANT: Grade = Grade(0);
    pub const SOMEWHAT: Grade = Grade(1);
    pub const HIGHLY: Grade = Grade(2);

    pub fn new(value: i8) -> Result<Self> {
        if (-1..=2).contains(&value) {
            Ok(Grade(value))
        } else {
            Err(Error::Validation(format!("grade {value} outside -1..=2")))
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }

    pub fn is_relevant(self) -> bool {
        self.0 >= 1
    }

    /// Gain used by graded nDCG: the grade itself, with -1 counted as 0.
    pub fn gain(self) -> f64 {
        f64::from(self.0.max(0))
    }
}

impl TryFrom<i8> for Grade {
    type Error = Error;
    fn try_from(v: i8) -> Result<Self> {
        Grade::new(v)
    }
}

impl From<Grade> for i8 {
    fn from(g: Grade) -> i8 {
        g.0
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Graded3,
    Binary,
}

/// Judgments for a single topic.
pub type TopicQrels = BTreeMap<String, Grade>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, TopicQrels>,
    scale: Scale,
}

impl Default for Qrels {
    fn default() -> Self {
        Qrels::new(Scale::Graded3)
    }
}

impl Qrels {
    pub fn new(scale: Scale) -> Self {
        Qrels {
            judgments: BTreeMap::new(),
            scale,
        }
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    /// Insert a judgment; fails if the pair is already judged or the grade
    /// does not fit the scale.
    pub fn insert(&mut self, topic: &str, doc: &str, grade: Grade) -> Result<()> {
        if self.scale == Scale::Binary && grade == Grade::HIGHLY {
            return Err(Error::Validation(format!(
                "grade 2 for ({topic}, {doc}) in binary qrels"
            )));
        }
        let t = self.judgments.entry(topic.to_string()).or_default();
        if t.contains_key(doc) {
            return Err(Error::Validation(format!("duplicate judgment for ({topic}, {doc})")));
        }
        t.insert(doc.to_string(), grade);
        Ok(())
    }

    pub fn get(&self, topic: &str, doc: &str) -> Option<Grade> {
        self.judgments.get(topic).and_then(|t| t.get(doc)).copied()
    }

    pub fn topic(&self, topic: &str) -> Option<&TopicQrels> {
        self.judgments.get(topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = (&str, &TopicQrels)> {
        self.judgments.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    /// All judged `(topic, doc, grade)` triples in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, Grade)> {
        self.judgments
            .iter()
            .flat_map(|(t, docs)| docs.iter().map(move |(d, g)| (t.as_str(), d.as_str(), *g)))
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of relevant (grade >= 1) documents for a topic.
    pub fn relevant_count(&self, topic: &str) -> usize {
        self.topic(topic)
            .map(|t| t.values().filter(|g| g.is_relevant()).count())
            .unwrap_or(0)
    }

    /// Keep only judgments whose `(topic, doc)` pair satisfies `keep`.
    /// Topics left without judgments are retained as empty entries so the
    /// evaluated topic set does not shrink.
    pub fn restrict<F>(&self, mut keep: F) -> Qrels
    where
        F: FnMut(&str, &str) -> bool,
    {
        let judgments = self
            .judgments
            .iter()
            .map(|(t, docs)| {
                let kept = docs
                    .iter()
                    .filter(|(d, _)| keep(t, d))
                    .map(|(d, g)| (d.clone(), *g))
                    .collect();
                (t.clone(), kept)
            })
            .collect();
        Qrels {
            judgments,
            scale: self.scale,
        }
    }

    /// Keep only the topics for which `keep` holds.
    pub fn select_topics<F>(&self, mut keep: F) -> Qrels
    where
        F: FnMut(&str) -> bool,
    {
        Qrels {
            judgments: self
                .judgments
                .iter()
                .filter(|(t, _)| keep(t))
                .map(|(t, d)| (t.clone(), d.clone()))
                .collect(),
            scale: self.scale,
        }
    }

    /// Make sure `topic` is present, possibly with no judgments.
    pub fn ensure_topic(&mut self, topic: &str) {
        self.judgments.entry(topic.to_string()).or_default();
    }
}

/// Map graded judgments onto the binary scale: 2 and 1 become 1, 0 and -1
/// become 0. Binary qrels are returned unchanged.
pub fn conflate(qrels: &Qrels) -> Qrels {
    let judgments = qrels
        .judgments
        .iter()
        .map(|(t, docs)| {
            let docs = docs
                .iter()
                .map(|(d, g)| {
                    let b = if g.is_relevant() { Grade::SOMEWHAT } else { Grade::NONRELEVANT };
                    (d.clone(), b)
                })
                .collect();
            (t.clone(), docs)
        })
        .collect();
    Qrels {
        judgments,
        scale: Scale::Binary,
    }
}

pub fn parse_qrels(text: &str) -> Result<Qrels> {
    let mut q = Qrels::new(Scale::Graded3);
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::parse("qrels", lineno, format!("expected 4 columns, got {}", cols.len())));
        }
        let raw: i8 = cols[3]
            .parse()
            .map_err(|_| Error::parse("qrels", lineno, format!("grade {:?} is not an integer", cols[3])))?;
        let grade = Grade::new(raw).map_err(|e| Error::parse("qrels", lineno, e.to_string()))?;
        q.insert(cols[0], cols[2], grade)
            .map_err(|e| Error::parse("qrels", lineno, e.to_string()))?;
    }
    Ok(q)
}

pub fn write_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (t, d, g) in qrels.iter() {
        let _ = writeln!(out, "{t} 0 {d} {g}");
    }
    out
}
