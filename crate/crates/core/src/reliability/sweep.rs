//! Pool-size sweep: how much do scores and system rankings move as the
//! judging pools grow?
//!
//! For each minimum pool size the biased pools are rebuilt from scratch,
//! the full qrels are restricted to the pooled documents, and every
//! student run is re-evaluated. Consecutive sizes are compared by the
//! relative increment of each system's mean score and by Kendall's τ
//! between the two system rankings.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{evaluate_matrix, EvalOptions, Measure};
use crate::model::{Pool, Qrels, Run};
use crate::pooling::{build_pools, PoolSpec};
use crate::reliability::kendall::{kendall_tau, rank_by_score};
use crate::reliability::noise::format_percent;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub k_google: usize,
    pub k_noise: usize,
    pub google_system_id: String,
    pub seed: u64,
    pub measures: Vec<Measure>,
}

impl SweepConfig {
    /// Sizes `from, from + step, ..., to`.
    pub fn sizes_range(from: usize, to: usize, step: usize) -> Vec<usize> {
        if step == 0 || from > to {
            return Vec::new();
        }
        (from..=to).step_by(step).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 {
            return Err(Error::Validation("a sweep needs at least two pool sizes".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("sweep sizes must be strictly increasing".into()));
        }
        let forced = self.k_google + self.k_noise;
        if self.sizes[0] < forced {
            return Err(Error::Validation(format!(
                "sweep size {} is below k_google + k_noise = {forced}",
                self.sizes[0]
            )));
        }
        if self.measures.is_empty() {
            return Err(Error::Validation("no measures requested".into()));
        }
        Ok(())
    }
}

/// Evaluation at one pool size.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeEvaluation {
    pub size: usize,
    pub pools: Vec<Pool>,
    /// measure -> system -> mean over topics
    pub means: BTreeMap<Measure, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub measure: Measure,
    /// Mean relative increment in percent over systems with a nonzero
    /// baseline; `None` when every baseline is zero.
    pub mean_increment: Option<f64>,
    pub max_increment: Option<f64>,
    pub tau: f64,
    /// Systems included in mean and max.
    pub systems: usize,
    /// Systems skipped because their score at the smaller size is 0.
    pub zero_baseline: usize,
    /// Tied pairs in the smaller and larger rankings.
    pub ties: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub from: usize,
    pub to: usize,
    pub cells: Vec<SweepCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub sizes: Vec<usize>,
    pub measures: Vec<Measure>,
    pub evaluations: Vec<SizeEvaluation>,
    pub rows: Vec<SweepRow>,
    /// Documents in the largest pools that have no judgment.
    pub unjudged_in_largest: usize,
}

/// Relative increment in percent, or `None` for a zero baseline.
pub fn relative_increment(before: f64, after: f64) -> Option<f64> {
    if before == 0.0 {
        None
    } else {
        Some(100.0 * (after - before) / before)
    }
}

fn evaluate_at_size(
    size: usize,
    student_runs: &[Run],
    pooling_runs: &[Run],
    noise_docs: &[String],
    full_qrels: &Qrels,
    topics: &[String],
    config: &SweepConfig,
) -> Result<SizeEvaluation> {
    let spec = PoolSpec::biased(size, config.k_google, config.k_noise, &config.google_system_id, config.seed);
    let pools = build_pools(pooling_runs, noise_docs, topics, &spec)?;
    let members: BTreeMap<&str, &Pool> = pools.iter().map(|p| (p.topic_id.as_str(), p)).collect();
    let topic_set: HashSet<&str> = topics.iter().map(String::as_str).collect();
    let mut qrels = full_qrels
        .select_topics(|t| topic_set.contains(t))
        .restrict(|t, d| members.get(t).is_some_and(|p| p.contains(d)));
    for t in topics {
        qrels.ensure_topic(t);
    }
    let eval = evaluate_matrix(student_runs, &qrels, None, &config.measures, EvalOptions::default())?;
    let means = config.measures.iter().map(|m| (*m, eval.means(*m))).collect();
    Ok(SizeEvaluation { size, pools, means })
}

/// Run the sweep over `topics` (the non-noise topics to pool).
pub fn pool_sweep(
    student_runs: &[Run],
    pooling_runs: &[Run],
    noise_docs: &[String],
    full_qrels: &Qrels,
    topics: &[String],
    config: &SweepConfig,
) -> Result<SweepReport> {
    config.validate()?;
    if student_runs.len() < 2 {
        return Err(Error::Validation("a sweep needs at least two student runs".into()));
    }
    let evaluations: Vec<SizeEvaluation> = config
        .sizes
        .par_iter()
        .map(|s| evaluate_at_size(*s, student_runs, pooling_runs, noise_docs, full_qrels, topics, config))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(evaluations.len().saturating_sub(1));
    for pair in evaluations.windows(2) {
        let (small, large) = (&pair[0], &pair[1]);
        let mut cells = Vec::with_capacity(config.measures.len());
        for m in &config.measures {
            let before = &small.means[m];
            let after = &large.means[m];
            let mut increments = Vec::new();
            let mut zero_baseline = 0;
            for (system, b) in before {
                match relative_increment(*b, after[system]) {
                    Some(inc) => increments.push(inc),
                    None => zero_baseline += 1,
                }
            }
            let (mean_increment, max_increment) = if increments.is_empty() {
                (None, None)
            } else {
                let mean = increments.iter().sum::<f64>() / increments.len() as f64;
                let max = increments.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (Some(mean), Some(max))
            };
            let (rank_a, ties_a) = rank_by_score(before.iter().map(|(s, v)| (s.as_str(), *v)));
            let (rank_b, ties_b) = rank_by_score(after.iter().map(|(s, v)| (s.as_str(), *v)));
            cells.push(SweepCell {
                measure: *m,
                mean_increment,
                max_increment,
                tau: kendall_tau(&rank_a, &rank_b)?,
                systems: increments.len(),
                zero_baseline,
                ties: (ties_a, ties_b),
            });
        }
        rows.push(SweepRow {
            from: small.size,
            to: large.size,
            cells,
        });
    }

    let unjudged_in_largest = evaluations.last().map_or(0, |e| {
        e.pools
            .iter()
            .map(|p| p.docs().filter(|d| full_qrels.get(&p.topic_id, d).is_none()).count())
            .sum()
    });

    Ok(SweepReport {
        sizes: config.sizes.clone(),
        measures: config.measures.clone(),
        evaluations,
        rows,
        unjudged_in_largest,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format_percent(x / 100.0))
}

impl SweepReport {
    /// TSV with one row per consecutive size pair: mean and max increment
    /// and τ per measure, plus the count of zero-baseline systems.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("pool_size");
        for m in &self.measures {
            let _ = write!(out, "\t{m}_mean\t{m}_max\t{m}_tau\t{m}_zero");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{}->{}", row.from, row.to);
            for c in &row.cells {
                let _ = write!(
                    out,
                    "\t{}\t{}\t{:.3}\t{}",
                    pct(c.mean_increment),
                    pct(c.max_increment),
                    c.tau,
                    c.zero_baseline
                );
            }
            out.push('\n');
        }
        out
    }

    /// Whether the pools at two sizes are identical for every topic.
    pub fn identical_pools(&self, from: usize, to: usize) -> bool {
        let find = |s: usize| self.evaluations.iter().find(|e| e.size == s);
        match (find(from), find(to)) {
            (Some(a), Some(b)) => {
                let members = |e: &SizeEvaluation| -> BTreeSet<(String, String)> {
                    e.pools
                        .iter()
                        .flat_map(|p| p.docs().map(move |d| (p.topic_id.clone(), d.to_string())))
                        .collect()
                };
                members(a) == members(b)
            }
            _ => false,
        }
    }
}
