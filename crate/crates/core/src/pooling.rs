//! Pool construction: depth-k, size-k and biased pools, the two-stage
//! procedure, and pool statistics.
//!
//! A size-k pool uses the smallest per-system depth `d` such that the union
//! of every run's top `d` documents reaches `k`. A biased pool additionally
//! forces in `k_noise` sampled noise documents and the first `k_google`
//! Google results, then completes with the size-k rule over all runs
//! (Google included) until the deduplicated pool holds at least `k`
//! documents.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Pool, Provenance, Run};
use crate::seed::scoped_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    DepthK,
    SizeK,
    Biased,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolSpec {
    pub strategy: Strategy,
    /// Depth for depth-k, minimum total size otherwise.
    pub k: usize,
    pub k_google: usize,
    pub k_noise: usize,
    pub google_system_id: Option<String>,
    pub noise_seed: u64,
}

impl PoolSpec {
    pub fn depth_k(k: usize) -> Self {
        PoolSpec {
            strategy: Strategy::DepthK,
            k,
            k_google: 0,
            k_noise: 0,
            google_system_id: None,
            noise_seed: 0,
        }
    }

    pub fn size_k(k: usize) -> Self {
        PoolSpec {
            strategy: Strategy::SizeK,
            ..PoolSpec::depth_k(k)
        }
    }

    pub fn biased(k: usize, k_google: usize, k_noise: usize, google: &str, seed: u64) -> Self {
        PoolSpec {
            strategy: Strategy::Biased,
            k,
            k_google,
            k_noise,
            google_system_id: Some(google.to_string()),
            noise_seed: seed,
        }
    }

    pub fn validate(&self, runs: &[Run]) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Validation("pool k must be at least 1".into()));
        }
        if self.strategy == Strategy::Biased {
            if self.k < self.k_google + self.k_noise {
                return Err(Error::Validation(format!(
                    "biased pool k={} is smaller than k_google + k_noise = {}",
                    self.k,
                    self.k_google + self.k_noise
                )));
            }
            if self.k_google > 0 {
                let google = self.google_system_id.as_deref().ok_or_else(|| {
                    Error::Validation("biased pool with k_google > 0 needs a Google system id".into())
                })?;
                if !runs.iter().any(|r| r.system_id == google) {
                    return Err(Error::Validation(format!(
                        "Google system {google:?} is not among the pooling runs"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn rankings<'a>(runs: &'a [Run], topic: &str) -> Vec<Vec<&'a str>> {
    runs.iter().map(|r| r.ranking(topic)).collect()
}

/// Union of every ranking's top `depth` documents.
fn union_at<'a>(lists: &[Vec<&'a str>], depth: usize) -> BTreeSet<&'a str> {
    lists
        .iter()
        .flat_map(|l| l.iter().take(depth).copied())
        .collect()
}

/// Smallest depth whose union together with `forced` reaches `k`, scanning
/// d = 0, 1, 2, ... The second value is false when the lists run out first,
/// in which case the depth is the longest list length.
fn minimal_depth(lists: &[Vec<&str>], forced: &HashSet<&str>, k: usize) -> (usize, bool) {
    let mut seen: HashSet<&str> = forced.clone();
    if seen.len() >= k {
        return (0, true);
    }
    let max_len = lists.iter().map(Vec::len).max().unwrap_or(0);
    for d in 1..=max_len {
        for l in lists {
            if let Some(doc) = l.get(d - 1) {
                seen.insert(doc);
            }
        }
        if seen.len() >= k {
            return (d, true);
        }
    }
    (max_len, false)
}

pub fn pool_depth_k(runs: &[Run], topic: &str, k: usize) -> Result<Pool> {
    if k == 0 {
        return Err(Error::Validation("pool depth must be at least 1".into()));
    }
    let lists = rankings(runs, topic);
    if lists.iter().all(Vec::is_empty) {
        return Err(Error::EmptyPool(topic.to_string()));
    }
    let members = union_at(&lists, k)
        .into_iter()
        .map(|d| (d.to_string(), Provenance::Pooled))
        .collect::<BTreeMap<_, _>>();
    Ok(Pool {
        topic_id: topic.to_string(),
        target_size: members.len(),
        members,
        depth: k,
        underfull: false,
    })
}

pub fn pool_size_k(runs: &[Run], topic: &str, k: usize) -> Result<Pool> {
    if k == 0 {
        return Err(Error::Validation("pool size must be at least 1".into()));
    }
    let lists = rankings(runs, topic);
    if lists.iter().all(Vec::is_empty) {
        return Err(Error::EmptyPool(topic.to_string()));
    }
    let (depth, reached) = minimal_depth(&lists, &HashSet::new(), k);
    let members = union_at(&lists, depth)
        .into_iter()
        .map(|d| (d.to_string(), Provenance::Pooled))
        .collect();
    Ok(Pool {
        topic_id: topic.to_string(),
        members,
        depth,
        target_size: k,
        underfull: !reached,
    })
}

/// Sample the forced noise documents for a topic. The draw depends only on
/// the seed, the topic id and the candidate set.
pub fn sample_noise(noise_docs: &[String], topic: &str, k_noise: usize, seed: u64) -> Result<Vec<String>> {
    let candidates: Vec<&String> = noise_docs.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if candidates.len() < k_noise {
        return Err(Error::InsufficientNoise {
            topic: topic.to_string(),
            needed: k_noise,
            available: candidates.len(),
        });
    }
    let mut rng = scoped_rng(seed, &["noise", topic]);
    let mut picked: Vec<String> = sample(&mut rng, candidates.len(), k_noise)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect();
    picked.sort();
    Ok(picked)
}

/// Build a biased pool. `runs` are all pooling systems, including the
/// Google run named by `spec.google_system_id`.
pub fn pool_biased(runs: &[Run], noise_docs: &[String], topic: &str, spec: &PoolSpec) -> Result<Pool> {
    spec.validate(runs)?;
    let noise = sample_noise(noise_docs, topic, spec.k_noise, spec.noise_seed)?;
    let google_top: Vec<&str> = match (&spec.google_system_id, spec.k_google) {
        (_, 0) | (None, _) => Vec::new(),
        (Some(g), kg) => runs
            .iter()
            .find(|r| &r.system_id == g)
            .map(|r| r.ranking(topic).into_iter().take(kg).collect())
            .unwrap_or_default(),
    };

    let forced: HashSet<&str> = noise
        .iter()
        .map(String::as_str)
        .chain(google_top.iter().copied())
        .collect();
    let lists = rankings(runs, topic);
    let (depth, reached) = minimal_depth(&lists, &forced, spec.k);
    let pooled = union_at(&lists, depth);

    let mut members: BTreeMap<String, Provenance> = BTreeMap::new();
    for d in &pooled {
        members.insert(d.to_string(), Provenance::Pooled);
    }
    for d in &google_top {
        let p = if pooled.contains(d) { Provenance::Both } else { Provenance::Google };
        members.insert(d.to_string(), p);
    }
    for d in &noise {
        members.insert(d.clone(), Provenance::Noise);
    }
    if members.is_empty() {
        return Err(Error::EmptyPool(topic.to_string()));
    }
    Ok(Pool {
        topic_id: topic.to_string(),
        members,
        depth,
        target_size: spec.k,
        underfull: !reached,
    })
}

/// Build pools for every topic with the given strategy. Topics are
/// processed in parallel; the output follows the order of `topics`.
pub fn build_pools(runs: &[Run], noise_docs: &[String], topics: &[String], spec: &PoolSpec) -> Result<Vec<Pool>> {
    spec.validate(runs)?;
    topics
        .par_iter()
        .map(|t| match spec.strategy {
            Strategy::DepthK => pool_depth_k(runs, t, spec.k),
            Strategy::SizeK => pool_size_k(runs, t, spec.k),
            Strategy::Biased => pool_biased(runs, noise_docs, t, spec),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TwoStagePools {
    pub stage1: Vec<Pool>,
    pub stage2: Vec<Pool>,
}

impl TwoStagePools {
    /// The pooled collection: every document in a stage-1 pool.
    pub fn stage1_union(&self) -> BTreeSet<&str> {
        self.stage1.iter().flat_map(Pool::docs).collect()
    }
}

/// Two-stage pooling: size-k pools over the runs against the complete
/// collection, then biased pools over runs made against the pooled
/// collection. Every document the stage-2 runs cite for the pooled topics
/// must belong to the stage-1 union.
pub fn two_stage_pools(
    complete_runs: &[Run],
    pooled_runs: &[Run],
    noise_docs: &[String],
    topics: &[String],
    stage1: &PoolSpec,
    stage2: &PoolSpec,
) -> Result<TwoStagePools> {
    if stage2.strategy != Strategy::Biased {
        return Err(Error::Validation("second pooling stage must be biased".into()));
    }
    let first = build_pools(complete_runs, &[], topics, stage1)?;
    let union: HashSet<&str> = first.iter().flat_map(Pool::docs).collect();
    for run in pooled_runs {
        for topic in topics {
            if let Some(doc) = run.ranking(topic).into_iter().find(|d| !union.contains(d)) {
                return Err(Error::Validation(format!(
                    "stage-2 run {} cites document {doc} for topic {topic}, which is not in the stage-1 pooled collection",
                    run.system_id
                )));
            }
        }
    }
    let second = build_pools(pooled_runs, noise_docs, topics, stage2)?;
    for p in &second {
        if let Some((doc, _)) = p
            .members
            .iter()
            .find(|(d, prov)| prov.includes_pooled() && !union.contains(d.as_str()))
        {
            return Err(Error::Validation(format!(
                "stage-2 pool for {} holds {doc}, which is not in the stage-1 pooled collection",
                p.topic_id
            )));
        }
    }
    Ok(TwoStagePools {
        stage1: first,
        stage2: second,
    })
}

/// For each n, the number of distinct documents that appear in exactly n
/// topic pools.
pub fn overlap_histogram(pools: &[Pool]) -> BTreeMap<usize, usize> {
    let mut per_doc: BTreeMap<&str, usize> = BTreeMap::new();
    for p in pools {
        for d in p.docs() {
            *per_doc.entry(d).or_default() += 1;
        }
    }
    let mut hist = BTreeMap::new();
    for n in per_doc.into_values() {
        *hist.entry(n).or_default() += 1;
    }
    hist
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolStatsRow {
    pub topic_id: String,
    pub size: usize,
    pub depth: usize,
    pub underfull: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolStats {
    pub rows: Vec<PoolStatsRow>,
    pub mean_size: f64,
    pub mean_depth: f64,
    /// Sum of pool sizes over topics.
    pub total_judgments: usize,
    /// Distinct documents over all pools.
    pub union_size: usize,
}

pub fn pool_stats(pools: &[Pool]) -> PoolStats {
    let mut rows: Vec<PoolStatsRow> = pools
        .iter()
        .map(|p| PoolStatsRow {
            topic_id: p.topic_id.clone(),
            size: p.len(),
            depth: p.depth,
            underfull: p.underfull,
        })
        .collect();
    rows.sort_by(|a, b| a.topic_id.cmp(&b.topic_id));
    let n = rows.len();
    let total_judgments: usize = rows.iter().map(|r| r.size).sum();
    let depth_sum: usize = rows.iter().map(|r| r.depth).sum();
    let (mean_size, mean_depth) = if n == 0 {
        (0.0, 0.0)
    } else {
        (total_judgments as f64 / n as f64, depth_sum as f64 / n as f64)
    };
    let union_size = pools.iter().flat_map(Pool::docs).collect::<HashSet<_>>().len();
    PoolStats {
        rows,
        mean_size,
        mean_depth,
        total_judgments,
        union_size,
    }
}

impl PoolStats {
    /// TSV with one row per topic, then `Average` and `Total` rows. The
    /// total size is the number of distinct pooled documents.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("topic\tpool_size\tpool_depth\tunderfull\n");
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", r.topic_id, r.size, r.depth, r.underfull);
        }
        if !self.rows.is_empty() {
            let _ = writeln!(out, "Average\t{:.2}\t{:.2}\t-", self.mean_size, self.mean_depth);
            let _ = writeln!(out, "Total\t{}\t-\t-", self.union_size);
        }
        out
    }
}

pub fn overlap_tsv(hist: &BTreeMap<usize, usize>) -> String {
    let mut out = String::from("topics\tdocuments\n");
    for (n, c) in hist {
        let _ = writeln!(out, "{n}\t{c}");
    }
    out
}
