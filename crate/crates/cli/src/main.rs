//! `qrelkit`: pool runs, split pools between assessors, serve the judging
//! campaign, merge judgments, evaluate runs and sweep pool sizes.

use std::collections::BTreeSet;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use qrelkit_core::measures::{evaluate_matrix, EvalOptions, Measure};
use qrelkit_core::model::{
    parse_assignments, parse_judgment_log, parse_manifest, parse_pools, parse_qrels, parse_run, parse_topics,
    write_assignments, write_pools, write_qrels, Assignment, CrawlManifest, Judgment, Pool, Qrels, Run, Topic,
};
use qrelkit_core::pooling::{build_pools, overlap_histogram, overlap_tsv, pool_stats, two_stage_pools, PoolSpec};
use qrelkit_core::reliability::{
    agreement_tsv, assign_judging, default_assessors, merge_available, merge_judgments, noise_quality_check,
    pool_sweep, topic_agreement, KappaWeighting, SweepConfig, DEFAULT_NOISE_THRESHOLD,
};
use qrelkit_core::sanitize::clean_directory;
use qrelkit_judge::{AppState, Campaign, JudgeError};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Internal(_) => 3,
        }
    }

    /// Attach the file a core error came from.
    fn core(path: &Path, e: qrelkit_core::Error) -> Self {
        match e {
            qrelkit_core::Error::Io(source) => CliError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => CliError::Validation(format!("{}: {other}", path.display())),
        }
    }
}

impl From<qrelkit_core::Error> for CliError {
    fn from(e: qrelkit_core::Error) -> Self {
        match e {
            qrelkit_core::Error::Io(source) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<JudgeError> for CliError {
    fn from(e: JudgeError) -> Self {
        match e {
            JudgeError::Core(c) => c.into(),
            JudgeError::Io(source) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            JudgeError::Load(_) | JudgeError::Incomplete(_) | JudgeError::BadRequest(_) => {
                CliError::Validation(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "qrelkit", version, about = "Build test collections and evaluate retrieval runs")]
struct Cli {
    /// Global seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Directory for output files.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    DepthK,
    SizeK,
    Biased,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightingArg {
    Unweighted,
    Linear,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build judging pools from run files.
    Pool {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "size-k")]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 100)]
        k: usize,
        /// Google top documents forced into biased pools.
        #[arg(long, default_value_t = 10)]
        kg: usize,
        /// Noise documents forced into biased pools.
        #[arg(long, default_value_t = 10)]
        kn: usize,
        /// System id of the Google run among --runs.
        #[arg(long, default_value = "google")]
        google: String,
        /// Complete runs for a first size-k stage; --runs then must only
        /// cite documents from that stage's pools.
        #[arg(long, num_args = 1..)]
        stage1_runs: Vec<PathBuf>,
        #[arg(long, default_value_t = 100)]
        stage1_k: usize,
    },
    /// Split each pool between two assessors.
    Assign {
        #[arg(long)]
        pools: PathBuf,
    },
    /// Merge assessor judgments into graded qrels.
    Merge {
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        /// Merge whatever is judged instead of refusing on gaps.
        #[arg(long)]
        force: bool,
    },
    /// Per-topic Cohen's kappa on shared documents.
    Agree {
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long, value_enum, default_value = "unweighted")]
        weighting: WeightingArg,
    },
    /// Check how often noise documents were judged relevant.
    NoiseCheck {
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NOISE_THRESHOLD)]
        threshold: f64,
    },
    /// Evaluate runs against qrels.
    Eval {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Measure names (ndcg, ap, p, rr, r, c), optionally as name@k.
        #[arg(long, value_delimiter = ',', default_value = "ndcg,ap,p,rr")]
        measures: Vec<String>,
        /// Cutoffs matching --measures; "-" for none. Defaults: 100 for
        /// ndcg, ap, r and c; 10 for p.
        #[arg(long, value_delimiter = ',')]
        k: Vec<String>,
        /// Use graded gains for nDCG.
        #[arg(long)]
        graded: bool,
    },
    /// Re-pool and re-evaluate at increasing pool sizes.
    Sweep {
        /// Runs to evaluate.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Runs to pool from (the evaluated runs plus the Google run).
        #[arg(long, num_args = 1.., required = true)]
        pooling_runs: Vec<PathBuf>,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, default_value = "google")]
        google: String,
        #[arg(long, default_value_t = 10)]
        kg: usize,
        #[arg(long, default_value_t = 10)]
        kn: usize,
        /// Explicit pool sizes, e.g. 20,30,40.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        from: usize,
        #[arg(long, default_value_t = 160)]
        to: usize,
        #[arg(long, default_value_t = 10)]
        step: usize,
        #[arg(long, value_delimiter = ',', default_value = "ndcg,ap,p,rr")]
        measures: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<String>,
    },
    /// Truncate and clean a directory of raw documents.
    Clean {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Serve a judging campaign over HTTP.
    Serve {
        /// campaign.json, or a directory containing it.
        #[arg(long)]
        campaign: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        export_on_complete: bool,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn load_runs(paths: &[PathBuf]) -> Result<Vec<Run>> {
    let mut runs = Vec::with_capacity(paths.len());
    let mut ids = BTreeSet::new();
    for p in paths {
        let run = parse_run(&read(p)?).map_err(|e| CliError::core(p, e))?;
        if !ids.insert(run.system_id.clone()) {
            return Err(CliError::Validation(format!(
                "{}: system id {} appears in more than one run file",
                p.display(),
                run.system_id
            )));
        }
        runs.push(run);
    }
    Ok(runs)
}

fn load_topics(path: &Path) -> Result<Vec<Topic>> {
    parse_topics(&read(path)?).map_err(|e| CliError::core(path, e))
}

fn load_manifest(path: &Path) -> Result<CrawlManifest> {
    parse_manifest(&read(path)?).map_err(|e| CliError::core(path, e))
}

fn load_qrels(path: &Path) -> Result<Qrels> {
    parse_qrels(&read(path)?).map_err(|e| CliError::core(path, e))
}

fn load_pools(path: &Path) -> Result<Vec<Pool>> {
    parse_pools(&read(path)?).map_err(|e| CliError::core(path, e))
}

fn load_assignments(path: &Path) -> Result<Vec<Assignment>> {
    parse_assignments(&read(path)?).map_err(|e| CliError::core(path, e))
}

fn load_judgments(path: &Path) -> Result<Vec<Judgment>> {
    parse_judgment_log(&read(path)?).map_err(|e| CliError::core(path, e))
}

fn default_cutoff(name: &str) -> Option<usize> {
    match name.to_ascii_lowercase().as_str() {
        "p" => Some(10),
        "rr" => None,
        _ => Some(100),
    }
}

/// Combine `--measures` and `--k`. Entries written as `name@k` carry their
/// own cutoff; without `--k` the others take their default cutoff.
fn parse_measures(names: &[String], ks: &[String]) -> Result<Vec<Measure>> {
    if !ks.is_empty() && ks.len() != names.len() {
        return Err(CliError::Validation(format!(
            "--k has {} entries but --measures has {}",
            ks.len(),
            names.len()
        )));
    }
    let mut out = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let name = name.trim();
        let m = if name.contains('@') {
            name.parse::<Measure>()?
        } else if ks.is_empty() {
            Measure::from_parts(name, default_cutoff(name))?
        } else {
            let k = match ks[i].trim() {
                "-" | "" => None,
                k => Some(
                    k.parse::<usize>()
                        .map_err(|_| CliError::Validation(format!("bad cutoff {k:?} for measure {name}")))?,
                ),
            };
            Measure::from_parts(name, k)?
        };
        if out.contains(&m) {
            return Err(CliError::Validation(format!("measure {m} requested twice")));
        }
        out.push(m);
    }
    if out.is_empty() {
        return Err(CliError::Validation("no measures requested".into()));
    }
    Ok(out)
}

fn regular_topic_ids(topics: &[Topic]) -> Vec<String> {
    topics.iter().filter(|t| !t.is_noise).map(|t| t.id.clone()).collect()
}

fn report(written: &[PathBuf]) {
    for p in written {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out_dir.as_path();
    let seed = cli.seed;
    match cli.command {
        Command::Pool {
            runs,
            topics,
            manifest,
            strategy,
            k,
            kg,
            kn,
            google,
            stage1_runs,
            stage1_k,
        } => {
            let runs = load_runs(&runs)?;
            let topic_ids = regular_topic_ids(&load_topics(&topics)?);
            let spec = match strategy {
                StrategyArg::DepthK => PoolSpec::depth_k(k),
                StrategyArg::SizeK => PoolSpec::size_k(k),
                StrategyArg::Biased => PoolSpec::biased(k, kg, kn, &google, seed),
            };
            let noise_docs = match (&manifest, strategy) {
                (Some(p), _) => load_manifest(p)?.noise_docs(),
                (None, StrategyArg::Biased) if kn > 0 => {
                    return Err(CliError::Validation(
                        "--strategy biased needs --manifest to find noise documents".into(),
                    ))
                }
                (None, _) => Vec::new(),
            };
            let mut written = Vec::new();
            let pools = if stage1_runs.is_empty() {
                build_pools(&runs, &noise_docs, &topic_ids, &spec)?
            } else {
                let complete = load_runs(&stage1_runs)?;
                let stages =
                    two_stage_pools(&complete, &runs, &noise_docs, &topic_ids, &PoolSpec::size_k(stage1_k), &spec)?;
                written.push(write(out, "stage1_pools.txt", &write_pools(&stages.stage1))?);
                stages.stage2
            };
            written.push(write(out, "pools.txt", &write_pools(&pools))?);
            written.push(write(out, "pool_stats.tsv", &pool_stats(&pools).to_tsv())?);
            written.push(write(out, "pool_overlap.tsv", &overlap_tsv(&overlap_histogram(&pools)))?);
            report(&written);
        }
        Command::Assign { pools } => {
            let pools = load_pools(&pools)?;
            let mut assignments = Vec::new();
            for p in &pools {
                assignments.extend(assign_judging(p, &default_assessors(&p.topic_id), seed)?);
            }
            report(&[write(out, "assignments.txt", &write_assignments(&assignments))?]);
        }
        Command::Merge {
            assignments,
            judgments,
            force,
        } => {
            let assignments = load_assignments(&assignments)?;
            let judgments = load_judgments(&judgments)?;
            let qrels = if force {
                merge_available(&assignments, &judgments, seed)?
            } else {
                merge_judgments(&assignments, &judgments, seed)?
            };
            report(&[write(out, "qrels.txt", &write_qrels(&qrels))?]);
        }
        Command::Agree {
            assignments,
            judgments,
            weighting,
        } => {
            let weighting = match weighting {
                WeightingArg::Unweighted => KappaWeighting::Unweighted,
                WeightingArg::Linear => KappaWeighting::Linear,
            };
            let rows = topic_agreement(&load_assignments(&assignments)?, &load_judgments(&judgments)?, weighting);
            let tsv = agreement_tsv(&rows);
            print!("{tsv}");
            report(&[write(out, "agreement.tsv", &tsv)?]);
        }
        Command::NoiseCheck {
            judgments,
            manifest,
            threshold,
        } => {
            let r = noise_quality_check(&load_judgments(&judgments)?, &load_manifest(&manifest)?, threshold);
            let tsv = r.to_tsv();
            print!("{tsv}");
            report(&[write(out, "noise.tsv", &tsv)?]);
        }
        Command::Eval {
            runs,
            qrels,
            manifest,
            measures,
            k,
            graded,
        } => {
            let measures = parse_measures(&measures, &k)?;
            let runs = load_runs(&runs)?;
            let qrels = load_qrels(&qrels)?;
            let manifest = manifest.as_deref().map(load_manifest).transpose()?;
            let eval = evaluate_matrix(
                &runs,
                &qrels,
                manifest.as_ref(),
                &measures,
                EvalOptions { graded_gain: graded },
            )?;
            let summary = eval.summary_tsv();
            print!("{summary}");
            report(&[
                write(out, "eval_per_topic.tsv", &eval.per_topic_tsv())?,
                write(out, "eval_summary.tsv", &summary)?,
            ]);
        }
        Command::Sweep {
            runs,
            pooling_runs,
            qrels,
            manifest,
            topics,
            google,
            kg,
            kn,
            sizes,
            from,
            to,
            step,
            measures,
            k,
        } => {
            let measures = parse_measures(&measures, &k)?;
            let sizes = if sizes.is_empty() {
                SweepConfig::sizes_range(from, to, step)
            } else {
                sizes
            };
            let config = SweepConfig {
                sizes,
                k_google: kg,
                k_noise: kn,
                google_system_id: google,
                seed,
                measures,
            };
            config.validate()?;
            let students = load_runs(&runs)?;
            let pooling = load_runs(&pooling_runs)?;
            let qrels = load_qrels(&qrels)?;
            let noise_docs = load_manifest(&manifest)?.noise_docs();
            let topic_ids = regular_topic_ids(&load_topics(&topics)?);
            let report_ = pool_sweep(&students, &pooling, &noise_docs, &qrels, &topic_ids, &config)?;
            let tsv = report_.to_tsv();
            print!("{tsv}");
            if report_.unjudged_in_largest > 0 {
                eprintln!(
                    "note: {} pooled documents at the largest size have no judgment and count as nonrelevant",
                    report_.unjudged_in_largest
                );
            }
            report(&[write(out, "sweep.tsv", &tsv)?]);
        }
        Command::Clean { input } => {
            let records = clean_directory(&input, out).map_err(|e| CliError::core(&input, e))?;
            let truncated = records.iter().filter(|r| r.truncated).count();
            println!("cleaned {} documents ({truncated} truncated) into {}", records.len(), out.display());
        }
        Command::Serve {
            campaign,
            port,
            host,
            export_on_complete,
        } => {
            let path = if campaign.is_dir() {
                campaign.join("campaign.json")
            } else {
                campaign
            };
            if !path.is_file() {
                return Err(CliError::Validation(format!("{}: no campaign file", path.display())));
            }
            let campaign = Arc::new(Campaign::open(&path)?);
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| CliError::Validation(format!("bad listen address {host}:{port}: {e}")))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
            eprintln!("serving on http://{addr}");
            rt.block_on(qrelkit_judge::serve(AppState::new(campaign, export_on_complete), addr))
                .map_err(|source| CliError::Io {
                    path: PathBuf::from(addr.to_string()),
                    source,
                })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
