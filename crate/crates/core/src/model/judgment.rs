//! Assessor judgments and the append-only JSON-lines judgment log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Grade;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub assessor_id: String,
    pub topic_id: String,
    pub doc_id: String,
    pub grade: Grade,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    /// 1 for the first submission of a (assessor, topic, doc) triple.
    pub revision: u32,
}

impl Judgment {
    pub fn new(assessor: &str, topic: &str, doc: &str, grade: Grade) -> Self {
        Judgment {
            assessor_id: assessor.to_string(),
            topic_id: topic.to_string(),
            doc_id: doc.to_string(),
            grade,
            timestamp: 0,
            revision: 1,
        }
    }

    pub fn key(&self) -> JudgmentKey {
        (self.assessor_id.clone(), self.topic_id.clone(), self.doc_id.clone())
    }
}

/// `(assessor, topic, doc)`.
pub type JudgmentKey = (String, String, String);

/// Reduce a log to the latest revision per `(assessor, topic, doc)`.
/// Among equal revisions the later log entry wins.
pub fn latest_judgments<'a, I>(log: I) -> BTreeMap<JudgmentKey, Judgment>
where
    I: IntoIterator<Item = &'a Judgment>,
{
    let mut latest: BTreeMap<JudgmentKey, Judgment> = BTreeMap::new();
    for j in log {
        match latest.get(&j.key()) {
            Some(prev) if prev.revision > j.revision => {}
            _ => {
                latest.insert(j.key(), j.clone());
            }
        }
    }
    latest
}

pub fn parse_judgment_log(text: &str) -> Result<Vec<Judgment>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| {
            serde_json::from_str(l).map_err(|e| Error::parse("judgments", idx + 1, e.to_string()))
        })
        .collect()
}

pub fn write_judgment_line(j: &Judgment) -> String {
    let mut s = serde_json::to_string(j).expect("judgment serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latest_revision_wins() {
        let mut a = Judgment::new("s1", "t", "d", Grade::SOMEWHAT);
        let mut b = a.clone();
        b.grade = Grade::HIGHLY;
        b.revision = 2;
        a.timestamp = 5;
        let latest = latest_judgments([&b, &a]);
        assert_eq!(latest.len(), 1);
        assert_eq!(latest.values().next().unwrap().grade, Grade::HIGHLY);
    }

    #[test]
    fn log_round_trip_and_grade_validation() {
        let j = Judgment::new("s1", "t", "d", Grade::UNJUDGEABLE);
        let line = write_judgment_line(&j);
        assert_eq!(parse_judgment_log(&line).unwrap(), vec![j]);
        let bad = line.replace("\"grade\":-1", "\"grade\":7");
        assert!(parse_judgment_log(&bad).is_err());
    }
}
