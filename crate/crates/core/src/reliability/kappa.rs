use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{latest_judgments, Assignment, DocTag, Grade, Judgment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KappaWeighting {
    /// Nominal kappa: every disagreement weighs the same.
    #[default]
    Unweighted,
    /// Agreement weight `1 - |i - j| / 3` over the ordered scale -1..=2.
    Linear,
}

/// Unweighted Cohen's kappa over the documents both assessors judged.
pub fn cohen_kappa(a: &BTreeMap<String, Grade>, b: &BTreeMap<String, Grade>) -> Result<f64> {
    cohen_kappa_weighted(a, b, KappaWeighting::Unweighted)
}

pub fn cohen_kappa_weighted(
    a: &BTreeMap<String, Grade>,
    b: &BTreeMap<String, Grade>,
    weighting: KappaWeighting,
) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::Validation("kappa needs at least one judged document".into()));
    }
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        return Err(Error::Validation("kappa inputs judge different document sets".into()));
    }

    const CATS: [i8; 4] = [-1, 0, 1, 2];
    let idx = |g: Grade| (g.value() + 1) as usize;
    let n = a.len();
    let mut table = [[0usize; 4]; 4];
    for (ga, gb) in a.values().zip(b.values()) {
        table[idx(*ga)][idx(*gb)] += 1;
    }
    let rows: Vec<usize> = (0..4).map(|i| table[i].iter().sum()).collect();
    let cols: Vec<usize> = (0..4).map(|j| (0..4).map(|i| table[i][j]).sum()).collect();

    let weight = |i: usize, j: usize| -> f64 {
        match weighting {
            KappaWeighting::Unweighted => f64::from(u8::from(i == j)),
            KappaWeighting::Linear => 1.0 - (i as f64 - j as f64).abs() / (CATS.len() - 1) as f64,
        }
    };
    let nn = (n * n) as f64;
    let mut p_o = 0.0;
    let mut p_e = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let w = weight(i, j);
            p_o += w * table[i][j] as f64 / n as f64;
            p_e += w * (rows[i] * cols[j]) as f64 / nn;
        }
    }
    // Degenerate chance agreement: both assessors used a single category.
    let expected_full = match weighting {
        KappaWeighting::Unweighted => (0..4).map(|i| rows[i] * cols[i]).sum::<usize>() == n * n,
        KappaWeighting::Linear => (p_e - 1.0).abs() < 1e-12,
    };
    if expected_full {
        return if (p_o - 1.0).abs() < 1e-12 {
            Ok(1.0)
        } else {
            Err(Error::Undefined("kappa with chance agreement 1 and imperfect observed agreement".into()))
        };
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicAgreement {
    pub topic_id: String,
    pub assessors: (String, String),
    /// Shared documents judged by both assessors.
    pub shared: usize,
    pub observed: f64,
    pub kappa: Option<f64>,
}

/// Per-topic kappa between the two assessors of each topic, over the
/// shared documents both of them judged.
pub fn topic_agreement(
    assignments: &[Assignment],
    judgments: &[Judgment],
    weighting: KappaWeighting,
) -> Vec<TopicAgreement> {
    let latest = latest_judgments(judgments);
    let mut by_topic: BTreeMap<&str, Vec<&Assignment>> = BTreeMap::new();
    for a in assignments {
        by_topic.entry(&a.topic_id).or_default().push(a);
    }
    let mut out = Vec::new();
    for (topic, mut group) in by_topic {
        if group.len() != 2 {
            continue;
        }
        group.sort_by(|x, y| x.assessor_id.cmp(&y.assessor_id));
        let shared: BTreeSet<&String> = group[0]
            .docs
            .iter()
            .filter(|(d, t)| **t == DocTag::Shared && group[1].docs.get(*d) == Some(&DocTag::Shared))
            .map(|(d, _)| d)
            .collect();
        let grades_of = |a: &Assignment| -> BTreeMap<String, Grade> {
            shared
                .iter()
                .filter_map(|d| {
                    latest
                        .get(&(a.assessor_id.clone(), topic.to_string(), (*d).clone()))
                        .map(|j| ((*d).clone(), j.grade))
                })
                .collect()
        };
        let mut ga = grades_of(group[0]);
        let mut gb = grades_of(group[1]);
        ga.retain(|d, _| gb.contains_key(d));
        gb.retain(|d, _| ga.contains_key(d));
        let observed = if ga.is_empty() {
            0.0
        } else {
            ga.iter().filter(|(d, g)| gb.get(*d) == Some(g)).count() as f64 / ga.len() as f64
        };
        out.push(TopicAgreement {
            topic_id: topic.to_string(),
            assessors: (group[0].assessor_id.clone(), group[1].assessor_id.clone()),
            shared: ga.len(),
            observed,
            kappa: cohen_kappa_weighted(&ga, &gb, weighting).ok(),
        });
    }
    out
}

pub fn agreement_tsv(rows: &[TopicAgreement]) -> String {
    let mut out = String::from("topic\tassessor_a\tassessor_b\tshared\tobserved\tkappa\n");
    for r in rows {
        let kappa = r.kappa.map_or_else(|| "NA".to_string(), |k| format!("{k:.4}"));
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.4}\t{kappa}",
            r.topic_id, r.assessors.0, r.assessors.1, r.shared, r.observed
        );
    }
    let defined: Vec<f64> = rows.iter().filter_map(|r| r.kappa).collect();
    if !defined.is_empty() {
        let mean = defined.iter().sum::<f64>() / defined.len() as f64;
        let _ = writeln!(out, "mean\t-\t-\t-\t-\t{mean:.4}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grades(gs: &[i8]) -> BTreeMap<String, Grade> {
        gs.iter()
            .enumerate()
            .map(|(i, g)| (format!("d{i}"), Grade::new(*g).unwrap()))
            .collect()
    }

    #[test]
    fn hand_example_is_zero() {
        // marginals 2/2 on both sides: p_o = 0.5, p_e = 0.5
        let k = cohen_kappa(&grades(&[1, 1, 0, 0]), &grades(&[1, 0, 1, 0])).unwrap();
        assert!(k.abs() < 1e-12);
    }

    #[test]
    fn identical_is_one() {
        let a = grades(&[0, 1, 2, -1, 0]);
        assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn single_category_is_one() {
        let a = grades(&[0, 0, 0]);
        assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_keys_and_empty() {
        let a = grades(&[0, 1]);
        let b = grades(&[0]);
        assert!(cohen_kappa(&a, &b).is_err());
        assert!(cohen_kappa(&BTreeMap::new(), &BTreeMap::new()).is_err());
    }

    #[test]
    fn linear_weighting_credits_near_misses() {
        let a = grades(&[2, 1, 0, 0, 2, 1]);
        let b = grades(&[1, 1, 0, 1, 2, 2]);
        let unweighted = cohen_kappa(&a, &b).unwrap();
        let linear = cohen_kappa_weighted(&a, &b, KappaWeighting::Linear).unwrap();
        assert!(linear > unweighted);
    }

    #[test]
    fn linear_weighted_hand_value() {
        // table over categories (0,1): [[1,1],[1,1]] on a 4-category scale,
        // w(0,1) = 2/3. p_o = (1 + 1 + 2*(2/3)) / 4 = 5/6, p_e identical.
        let a = grades(&[1, 1, 0, 0]);
        let b = grades(&[1, 0, 1, 0]);
        let k = cohen_kappa_weighted(&a, &b, KappaWeighting::Linear).unwrap();
        assert!(k.abs() < 1e-12);
    }
}
