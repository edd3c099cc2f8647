use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::{Assignment, DocTag, Pool};
use crate::seed::scoped_rng;

/// Split a pool between two assessors.
///
/// Regular (pooled-only) documents are shuffled with a seed scoped to the
/// topic and cut into two halves whose sizes differ by at most one. Google
/// and noise documents are shared: both assessors judge them.
pub fn assign_judging(pool: &Pool, assessors: &[String], seed: u64) -> Result<Vec<Assignment>> {
    if assessors.len() != 2 {
        return Err(Error::Unsupported(format!(
            "{} assessors per topic; only 2 are supported",
            assessors.len()
        )));
    }
    if assessors[0] == assessors[1] {
        return Err(Error::Validation(format!(
            "topic {} assigned twice to assessor {}",
            pool.topic_id, assessors[0]
        )));
    }
    let mut regular: Vec<&str> = Vec::new();
    let mut shared: Vec<&str> = Vec::new();
    for (doc, prov) in &pool.members {
        if prov.is_regular() {
            regular.push(doc);
        } else {
            shared.push(doc);
        }
    }
    let mut rng = scoped_rng(seed, &["assign", &pool.topic_id]);
    regular.shuffle(&mut rng);
    let cut = regular.len().div_ceil(2);
    let halves = [&regular[..cut], &regular[cut..]];

    Ok(assessors
        .iter()
        .zip(halves)
        .map(|(assessor, half)| {
            let mut docs: BTreeMap<String, DocTag> =
                half.iter().map(|d| (d.to_string(), DocTag::Exclusive)).collect();
            docs.extend(shared.iter().map(|d| (d.to_string(), DocTag::Shared)));
            Assignment {
                topic_id: pool.topic_id.clone(),
                assessor_id: assessor.clone(),
                docs,
                seed,
            }
        })
        .collect())
}

/// Default assessor names for a topic: `<topic>-a` and `<topic>-b`.
pub fn default_assessors(topic: &str) -> Vec<String> {
    vec![format!("{topic}-a"), format!("{topic}-b")]
}
