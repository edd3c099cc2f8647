use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::model::{latest_judgments, CrawlManifest, Grade, Judgment, Qrels};

pub const DEFAULT_NOISE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCounts {
    pub total: usize,
    pub by_grade: BTreeMap<Grade, usize>,
    /// Judgments with grade 1 or 2.
    pub positive: usize,
}

impl NoiseCounts {
    fn new() -> Self {
        NoiseCounts {
            total: 0,
            by_grade: BTreeMap::new(),
            positive: 0,
        }
    }

    fn add(&mut self, g: Grade) {
        self.total += 1;
        *self.by_grade.entry(g).or_default() += 1;
        if g.is_relevant() {
            self.positive += 1;
        }
    }

    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.positive as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseReport {
    pub overall: NoiseCounts,
    pub per_assessor: BTreeMap<String, NoiseCounts>,
    pub threshold: f64,
}

impl NoiseReport {
    /// Assessors whose positive fraction on noise documents exceeds the threshold.
    pub fn flagged(&self) -> Vec<&str> {
        self.per_assessor
            .iter()
            .filter(|(_, c)| c.fraction() > self.threshold)
            .map(|(a, _)| a.as_str())
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("assessor\tjudgments\tgrade_-1\tgrade_0\tgrade_1\tgrade_2\tpositive\tfraction\tflagged\n");
        let mut row = |name: &str, c: &NoiseCounts, flagged: &str| {
            let g = |v: i8| c.by_grade.get(&Grade::new(v).expect("valid")).copied().unwrap_or(0);
            let _ = writeln!(
                out,
                "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{flagged}",
                c.total,
                g(-1),
                g(0),
                g(1),
                g(2),
                c.positive,
                format_percent(c.fraction())
            );
        };
        for (a, c) in &self.per_assessor {
            let f = if c.fraction() > self.threshold { "yes" } else { "no" };
            row(a, c, f);
        }
        row("overall", &self.overall, "-");
        out
    }
}

/// Percentage with two decimals, e.g. `0.14%`.
pub fn format_percent(fraction: f64) -> String {
    let s = format!("{:.2}%", fraction * 100.0);
    if s == "-0.00%" {
        "0.00%".to_string()
    } else {
        s
    }
}

/// Count judgments of noise documents made for regular topics, per
/// assessor and overall, using the latest revision of each judgment.
pub fn noise_quality_check(judgments: &[Judgment], manifest: &CrawlManifest, threshold: f64) -> NoiseReport {
    let mut overall = NoiseCounts::new();
    let mut per_assessor: BTreeMap<String, NoiseCounts> = BTreeMap::new();
    for j in latest_judgments(judgments).values() {
        if manifest.is_noise_topic(&j.topic_id) || !manifest.is_noise_doc(&j.doc_id) {
            continue;
        }
        overall.add(j.grade);
        per_assessor
            .entry(j.assessor_id.clone())
            .or_insert_with(NoiseCounts::new)
            .add(j.grade);
    }
    NoiseReport {
        overall,
        per_assessor,
        threshold,
    }
}

/// Noise check over merged qrels, attributed to a single pseudo-assessor.
pub fn noise_quality_check_qrels(qrels: &Qrels, manifest: &CrawlManifest, threshold: f64) -> NoiseReport {
    let judgments: Vec<Judgment> = qrels
        .iter()
        .map(|(t, d, g)| Judgment::new("qrels", t, d, g))
        .collect();
    noise_quality_check(&judgments, manifest, threshold)
}
