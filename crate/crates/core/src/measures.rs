//! Effectiveness measures and the system × topic evaluation matrix.
//!
//! A document is relevant when its grade is at least 1; unjudged documents
//! count as nonrelevant. nDCG uses the `1/log2(i+1)` discount from rank 1
//! and takes gains from the grades it is given, so it is binary on
//! conflated qrels and graded otherwise. AP normalises by the total number
//! of relevant documents for the topic, not by `min(R, k)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{conflate, CrawlManifest, Qrels, Run, TopicQrels};

fn is_relevant(judged: &TopicQrels, doc: &str) -> bool {
    judged.get(doc).is_some_and(|g| g.is_relevant())
}

fn relevant_total(judged: &TopicQrels) -> usize {
    judged.values().filter(|g| g.is_relevant()).count()
}

fn relevant_in_top<S: AsRef<str>>(ranking: &[S], judged: &TopicQrels, k: usize) -> usize {
    ranking
        .iter()
        .take(k)
        .filter(|d| is_relevant(judged, d.as_ref()))
        .count()
}

/// Relevant documents in the top `k`, divided by `k` (not by the list length).
pub fn precision_at<S: AsRef<str>>(ranking: &[S], judged: &TopicQrels, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    relevant_in_top(ranking, judged, k) as f64 / k as f64
}

/// Fraction of the topic's relevant documents found in the top `k`;
/// 0 when the topic has none.
pub fn recall_at<S: AsRef<str>>(ranking: &[S], judged: &TopicQrels, k: usize) -> f64 {
    let r = relevant_total(judged);
    if r == 0 {
        return 0.0;
    }
    relevant_in_top(ranking, judged, k) as f64 / r as f64
}

pub fn average_precision_at<S: AsRef<str>>(ranking: &[S], judged: &TopicQrels, k: usize) -> f64 {
    let r = relevant_total(judged);
    if r == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranking.iter().take(k).enumerate() {
        if is_relevant(judged, d.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / r as f64
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

pub fn ndcg_at<S: AsRef<str>>(ranking: &[S], judged: &TopicQrels, k: usize) -> f64 {
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| judged.get(d.as_ref()).map_or(0.0, |g| g.gain()) * discount(i + 1))
        .sum();
    let mut gains: Vec<f64> = judged.values().map(|g| g.gain()).filter(|g| *g > 0.0).collect();
    gains.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = gains
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| g * discount(i + 1))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

pub fn reciprocal_rank<S: AsRef<str>>(ranking: &[S], judged: &TopicQrels) -> f64 {
    ranking
        .iter()
        .position(|d| is_relevant(judged, d.as_ref()))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Fraction of the top `k` documents that were crawled for `topic`.
pub fn crawl_ratio_at<S: AsRef<str>>(ranking: &[S], manifest: &CrawlManifest, topic: &str, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let crawled = ranking
        .iter()
        .take(k)
        .filter(|d| manifest.was_crawled_for(d.as_ref(), topic))
        .count();
    crawled as f64 / k as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Ndcg(usize),
    Ap(usize),
    P(usize),
    Rr,
    C(usize),
    R(usize),
}

impl Measure {
    /// The measures used to rank systems: nDCG@100, AP@100, P@10, RR.
    pub fn default_suite() -> Vec<Measure> {
        vec![Measure::Ndcg(100), Measure::Ap(100), Measure::P(10), Measure::Rr]
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Ndcg(_) => "ndcg",
            Measure::Ap(_) => "ap",
            Measure::P(_) => "p",
            Measure::Rr => "rr",
            Measure::C(_) => "c",
            Measure::R(_) => "r",
        }
    }

    pub fn cutoff(self) -> Option<usize> {
        match self {
            Measure::Ndcg(k) | Measure::Ap(k) | Measure::P(k) | Measure::C(k) | Measure::R(k) => Some(k),
            Measure::Rr => None,
        }
    }

    pub fn needs_manifest(self) -> bool {
        matches!(self, Measure::C(_))
    }

    /// Build a measure from a name and optional cutoff.
    pub fn from_parts(name: &str, k: Option<usize>) -> Result<Measure> {
        let need = |k: Option<usize>| {
            k.filter(|k| *k > 0)
                .ok_or_else(|| Error::Validation(format!("measure {name} needs a positive cutoff")))
        };
        match name.to_ascii_lowercase().as_str() {
            "ndcg" => Ok(Measure::Ndcg(need(k)?)),
            "ap" => Ok(Measure::Ap(need(k)?)),
            "p" => Ok(Measure::P(need(k)?)),
            "c" => Ok(Measure::C(need(k)?)),
            "r" => Ok(Measure::R(need(k)?)),
            "rr" if k.is_none() => Ok(Measure::Rr),
            "rr" => Err(Error::Validation("rr takes no cutoff".into())),
            other => Err(Error::Validation(format!("unknown measure {other:?}"))),
        }
    }

    pub fn compute<S: AsRef<str>>(
        self,
        ranking: &[S],
        judged: &TopicQrels,
        manifest: Option<&CrawlManifest>,
        topic: &str,
    ) -> f64 {
        match self {
            Measure::Ndcg(k) => ndcg_at(ranking, judged, k),
            Measure::Ap(k) => average_precision_at(ranking, judged, k),
            Measure::P(k) => precision_at(ranking, judged, k),
            Measure::Rr => reciprocal_rank(ranking, judged),
            Measure::R(k) => recall_at(ranking, judged, k),
            Measure::C(k) => manifest.map_or(0.0, |m| crawl_ratio_at(ranking, m, topic, k)),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cutoff() {
            Some(k) => write!(f, "{}@{k}", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('@') {
            Some((name, k)) => {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::Validation(format!("bad cutoff in measure {s:?}")))?;
                Measure::from_parts(name, Some(k))
            }
            None => Measure::from_parts(s, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub system_id: String,
    pub topic_id: String,
    pub measure: Measure,
    pub value: f64,
    /// The topic has no relevant documents in the qrels.
    pub zero_relevant: bool,
    /// The run has no results for the topic.
    pub missing_topic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single topic.
    pub sd: f64,
}

impl MeasureStats {
    pub fn from_values(values: &[f64]) -> MeasureStats {
        let n = values.len();
        if n == 0 {
            return MeasureStats { mean: 0.0, sd: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        MeasureStats { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSummary {
    pub system_id: String,
    /// In the order of the requested measures.
    pub stats: Vec<(Measure, MeasureStats)>,
    /// 1-based position by the ranking measure.
    pub rank: usize,
}

impl SystemSummary {
    pub fn get(&self, m: Measure) -> Option<MeasureStats> {
        self.stats.iter().find(|(x, _)| *x == m).map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    /// Keep graded gains for nDCG instead of conflating to binary first.
    pub graded_gain: bool,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub measures: Vec<Measure>,
    pub ranking_measure: Measure,
    pub topics: Vec<String>,
    pub results: Vec<EvalResult>,
    /// Sorted by mean of the ranking measure, descending; ties by system id.
    pub summaries: Vec<SystemSummary>,
}

/// The measure systems are ranked by: the first nDCG in the list, or the
/// first measure when no nDCG was requested.
pub fn ranking_measure(measures: &[Measure]) -> Option<Measure> {
    measures
        .iter()
        .copied()
        .find(|m| matches!(m, Measure::Ndcg(_)))
        .or_else(|| measures.first().copied())
}

/// Evaluate every run on every topic of `qrels`.
pub fn evaluate_matrix(
    runs: &[Run],
    qrels: &Qrels,
    manifest: Option<&CrawlManifest>,
    measures: &[Measure],
    options: EvalOptions,
) -> Result<Evaluation> {
    let ranking_measure =
        ranking_measure(measures).ok_or_else(|| Error::Validation("no measures requested".into()))?;
    if manifest.is_none() && measures.iter().any(|m| m.needs_manifest()) {
        return Err(Error::Validation("C@k requires a crawl manifest".into()));
    }
    let topics: Vec<String> = qrels.topic_ids().map(str::to_string).collect();
    let run_topics: BTreeSet<&str> = runs
        .iter()
        .flat_map(|r| r.topics.keys().map(String::as_str))
        .collect();
    if !runs.is_empty() && !topics.iter().any(|t| run_topics.contains(t.as_str())) {
        return Err(Error::Validation(
            "qrels and runs share no topics".into(),
        ));
    }

    let binary = conflate(qrels);
    let empty = TopicQrels::new();

    let per_system: Vec<(Vec<EvalResult>, SystemSummary)> = runs
        .par_iter()
        .map(|run| {
            let mut results = Vec::with_capacity(topics.len() * measures.len());
            let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(topics.len()); measures.len()];
            for topic in &topics {
                let ranking = run.ranking(topic);
                let missing = !run.topics.contains_key(topic);
                let judged_bin = binary.topic(topic).unwrap_or(&empty);
                let judged_graded = qrels.topic(topic).unwrap_or(&empty);
                let zero = judged_bin.values().all(|g| !g.is_relevant());
                for (mi, m) in measures.iter().enumerate() {
                    let judged = match m {
                        Measure::Ndcg(_) if options.graded_gain => judged_graded,
                        _ => judged_bin,
                    };
                    let value = m.compute(&ranking, judged, manifest, topic);
                    values[mi].push(value);
                    results.push(EvalResult {
                        system_id: run.system_id.clone(),
                        topic_id: topic.clone(),
                        measure: *m,
                        value,
                        zero_relevant: zero,
                        missing_topic: missing,
                    });
                }
            }
            let stats = measures
                .iter()
                .zip(&values)
                .map(|(m, v)| (*m, MeasureStats::from_values(v)))
                .collect();
            (
                results,
                SystemSummary {
                    system_id: run.system_id.clone(),
                    stats,
                    rank: 0,
                },
            )
        })
        .collect();

    let mut results = Vec::new();
    let mut summaries = Vec::new();
    for (r, s) in per_system {
        results.extend(r);
        summaries.push(s);
    }
    results.sort_by(|a, b| {
        (&a.system_id, &a.topic_id)
            .cmp(&(&b.system_id, &b.topic_id))
            .then_with(|| {
                let ia = measures.iter().position(|m| *m == a.measure);
                let ib = measures.iter().position(|m| *m == b.measure);
                ia.cmp(&ib)
            })
    });
    let key = |s: &SystemSummary| s.get(ranking_measure).map_or(0.0, |x| x.mean);
    summaries.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.system_id.cmp(&b.system_id)));
    for (i, s) in summaries.iter_mut().enumerate() {
        s.rank = i + 1;
    }
    Ok(Evaluation {
        measures: measures.to_vec(),
        ranking_measure,
        topics,
        results,
        summaries,
    })
}

impl Evaluation {
    /// Per-topic TSV: system, topic, measure, cutoff, value, flags.
    pub fn per_topic_tsv(&self) -> String {
        let mut out = String::from("system\ttopic\tmeasure\tk\tvalue\tflags\n");
        for r in &self.results {
            let k = r.measure.cutoff().map_or_else(|| "-".to_string(), |k| k.to_string());
            let mut flags = Vec::new();
            if r.zero_relevant {
                flags.push("zero_relevant");
            }
            if r.missing_topic {
                flags.push("missing_topic");
            }
            let flags = if flags.is_empty() { "-".to_string() } else { flags.join(",") };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{k}\t{:.6}\t{flags}",
                r.system_id,
                r.topic_id,
                r.measure.name(),
                r.value
            );
        }
        out
    }

    /// Summary TSV: one row per system in ranking order with mean and
    /// sample standard deviation per measure.
    pub fn summary_tsv(&self) -> String {
        let mut out = format!(
            "# systems ordered by mean {}; sd is the sample standard deviation (n-1) over {} topics\n",
            self.ranking_measure,
            self.topics.len()
        );
        out.push_str("rank\tsystem");
        for m in &self.measures {
            let _ = write!(out, "\t{m}_mean\t{m}_sd");
        }
        out.push('\n');
        for s in &self.summaries {
            let _ = write!(out, "{}\t{}", s.rank, s.system_id);
            for (_, st) in &s.stats {
                let _ = write!(out, "\t{:.4}\t{:.4}", st.mean, st.sd);
            }
            out.push('\n');
        }
        out
    }

    /// Mean score of each system for one measure.
    pub fn means(&self, m: Measure) -> BTreeMap<String, f64> {
        self.summaries
            .iter()
            .filter_map(|s| s.get(m).map(|st| (s.system_id.clone(), st.mean)))
            .collect()
    }
}
