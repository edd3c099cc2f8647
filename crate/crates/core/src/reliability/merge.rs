use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{latest_judgments, Assignment, Grade, Judgment, Qrels, Scale};
use crate::seed::scoped_rng;

/// Merge assessor judgments into one graded qrels.
///
/// Documents judged by a single assessor keep that judgment. Shared
/// documents take one of their judgments, chosen by a coin flip seeded per
/// `(topic, doc)`. Only the latest revision of each judgment counts.
pub fn merge_judgments(assignments: &[Assignment], judgments: &[Judgment], seed: u64) -> Result<Qrels> {
    merge(assignments, judgments, seed, true)
}

/// Like [`merge_judgments`] but tolerates missing judgments: documents with
/// no judgment at all are left out of the qrels.
pub fn merge_available(assignments: &[Assignment], judgments: &[Judgment], seed: u64) -> Result<Qrels> {
    merge(assignments, judgments, seed, false)
}

fn merge(assignments: &[Assignment], judgments: &[Judgment], seed: u64, strict: bool) -> Result<Qrels> {
    let latest = latest_judgments(judgments);
    let by_owner: HashMap<(&str, &str), &Assignment> = assignments
        .iter()
        .map(|a| ((a.topic_id.as_str(), a.assessor_id.as_str()), a))
        .collect();

    for j in latest.values() {
        let assigned = by_owner
            .get(&(j.topic_id.as_str(), j.assessor_id.as_str()))
            .is_some_and(|a| a.contains(&j.doc_id));
        if !assigned {
            return Err(Error::Validation(format!(
                "judgment by {} for ({}, {}) does not match any assignment",
                j.assessor_id, j.topic_id, j.doc_id
            )));
        }
    }

    // topic -> doc -> grades in assessor order
    let mut grades: BTreeMap<&str, BTreeMap<&str, Vec<Grade>>> = BTreeMap::new();
    let mut missing = Vec::new();
    let mut ordered: Vec<&Assignment> = assignments.iter().collect();
    ordered.sort_by(|a, b| (&a.topic_id, &a.assessor_id).cmp(&(&b.topic_id, &b.assessor_id)));
    for a in ordered {
        for doc in a.docs.keys() {
            let key = (a.assessor_id.clone(), a.topic_id.clone(), doc.clone());
            let slot = grades
                .entry(a.topic_id.as_str())
                .or_default()
                .entry(doc.as_str())
                .or_default();
            match latest.get(&key) {
                Some(j) => slot.push(j.grade),
                None => missing.push(key),
            }
        }
    }
    if strict && !missing.is_empty() {
        return Err(Error::IncompleteJudgments(missing));
    }

    let mut qrels = Qrels::new(Scale::Graded3);
    for (topic, docs) in grades {
        qrels.ensure_topic(topic);
        for (doc, gs) in docs {
            let grade = match gs.as_slice() {
                [] => continue,
                [only] => *only,
                many if many.iter().all(|g| *g == many[0]) => many[0],
                many => {
                    let mut rng = scoped_rng(seed, &["merge", topic, doc]);
                    many[rng.random_range(0..many.len())]
                }
            };
            qrels.insert(topic, doc, grade)?;
        }
    }
    Ok(qrels)
}
