//! Campaign state: immutable inputs plus the append-only judgment log.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use qrelkit_core::model::{
    latest_judgments, parse_assignments, parse_judgment_log, parse_manifest, parse_pools, parse_topics,
    write_judgment_line, write_qrels, Assignment, CrawlManifest, Grade, Judgment, JudgmentKey, Pool, Qrels, Topic,
};
use qrelkit_core::reliability::{
    agreement_tsv, merge_available, merge_judgments, noise_quality_check, topic_agreement, KappaWeighting,
    NoiseReport, TopicAgreement, DEFAULT_NOISE_THRESHOLD,
};
use qrelkit_core::sanitize::clean_document;
use qrelkit_core::seed::scoped_rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{JudgeError, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct AssessorEntry {
    pub id: String,
    pub token: String,
}

/// Contents of `campaign.json`. Relative paths are resolved against the
/// directory holding the file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CampaignConfig {
    pub seed: u64,
    pub admin_token: String,
    pub assessors: Vec<AssessorEntry>,
    pub topics: PathBuf,
    pub pools: PathBuf,
    pub assignments: PathBuf,
    pub docs: PathBuf,
    #[serde(default = "default_log")]
    pub judgments: PathBuf,
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default = "default_export")]
    pub export_dir: PathBuf,
    #[serde(default = "default_threshold")]
    pub noise_threshold: f64,
}

fn default_log() -> PathBuf {
    "judgments.jsonl".into()
}

fn default_export() -> PathBuf {
    "export".into()
}

fn default_threshold() -> f64 {
    DEFAULT_NOISE_THRESHOLD
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg: CampaignConfig =
            serde_json::from_str(&text).map_err(|e| JudgeError::Load(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.topics,
            &mut cfg.pools,
            &mut cfg.assignments,
            &mut cfg.docs,
            &mut cfg.judgments,
            &mut cfg.export_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(m) = cfg.manifest.as_mut() {
            if m.is_relative() {
                *m = base.join(&*m);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Judged,
}

/// One row of an assessor's work list. Carries no provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentItem {
    pub topic_id: String,
    pub doc_id: String,
    pub status: Status,
    /// The assessor's own latest grade, if any.
    pub grade: Option<i8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub judged: usize,
    pub assigned: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentPayload {
    pub topic_id: String,
    pub doc_id: String,
    pub title: Option<String>,
    pub body: String,
    pub highlight_terms: Vec<String>,
    pub original_size: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicPayload {
    pub topic_id: String,
    pub title: String,
    /// Grade -> description.
    pub levels: BTreeMap<u8, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub revision: u32,
    pub progress: Progress,
}

#[derive(Debug, Clone)]
pub struct ExportResult {
    pub qrels: Qrels,
    pub agreement: Vec<TopicAgreement>,
    pub noise: Option<NoiseReport>,
    /// SHA-256 of the judgment log at export time.
    pub log_sha256: String,
    pub qrels_sha256: String,
    pub files: Vec<PathBuf>,
}

struct LogState {
    file: File,
    latest: BTreeMap<JudgmentKey, Judgment>,
    entries: usize,
}

pub struct Campaign {
    config: CampaignConfig,
    topics: BTreeMap<String, Topic>,
    pools: Vec<Pool>,
    manifest: Option<CrawlManifest>,
    assignments: Vec<Assignment>,
    /// assessor -> (topic, doc) in presentation order
    order: BTreeMap<String, Vec<(String, String)>>,
    tokens: HashMap<String, String>,
    doc_paths: HashMap<String, PathBuf>,
    log: RwLock<LogState>,
    export_lock: Mutex<()>,
}

fn find_doc(dir: &Path, doc: &str) -> Option<PathBuf> {
    [doc.to_string(), format!("{doc}.html"), format!("{doc}.htm")]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

/// Read the judgment log, tolerating a torn final line left by a crash
/// mid-append. The torn tail is cut off the file.
fn replay_log(path: &Path) -> Result<Vec<Judgment>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    match parse_judgment_log(&text) {
        Ok(log) => Ok(log),
        Err(e) => {
            let complete = text.rfind('\n').map_or(0, |i| i + 1);
            if complete == text.len() {
                return Err(e.into());
            }
            let log = parse_judgment_log(&text[..complete])?;
            fs::write(path, &text[..complete])?;
            Ok(log)
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Campaign {
    pub fn open(config_path: &Path) -> Result<Self> {
        Self::from_config(CampaignConfig::load(config_path)?)
    }

    pub fn from_config(config: CampaignConfig) -> Result<Self> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| JudgeError::Load(format!("{}: {e}", p.display())));
        let topics: BTreeMap<String, Topic> = parse_topics(&read(&config.topics)?)?
            .into_iter()
            .map(|t| (t.id.clone(), t))
            .collect();
        let pools = parse_pools(&read(&config.pools)?)?;
        let assignments = parse_assignments(&read(&config.assignments)?)?;
        let manifest = match &config.manifest {
            Some(p) => Some(parse_manifest(&read(p)?)?),
            None => None,
        };

        let tokens: HashMap<String, String> =
            config.assessors.iter().map(|a| (a.token.clone(), a.id.clone())).collect();
        if tokens.len() != config.assessors.len() || tokens.contains_key(&config.admin_token) {
            return Err(JudgeError::Load("assessor and admin tokens must be distinct".into()));
        }
        let known: BTreeSet<&str> = config.assessors.iter().map(|a| a.id.as_str()).collect();
        let pool_docs: BTreeMap<&str, &Pool> = pools.iter().map(|p| (p.topic_id.as_str(), p)).collect();
        for a in &assignments {
            if !known.contains(a.assessor_id.as_str()) {
                return Err(JudgeError::Load(format!("assignment for unknown assessor {}", a.assessor_id)));
            }
            if !topics.contains_key(&a.topic_id) {
                return Err(JudgeError::Load(format!("assignment for unknown topic {}", a.topic_id)));
            }
            let pool = pool_docs
                .get(a.topic_id.as_str())
                .ok_or_else(|| JudgeError::Load(format!("no pool for topic {}", a.topic_id)))?;
            if let Some(d) = a.docs.keys().find(|d| !pool.contains(d)) {
                return Err(JudgeError::Load(format!("assigned doc {d} is not in the pool of {}", a.topic_id)));
            }
        }

        let mut doc_paths = HashMap::new();
        let mut missing = BTreeSet::new();
        for d in assignments.iter().flat_map(|a| a.docs.keys()) {
            if doc_paths.contains_key(d) {
                continue;
            }
            match find_doc(&config.docs, d) {
                Some(p) => {
                    doc_paths.insert(d.clone(), p);
                }
                None => {
                    missing.insert(d.clone());
                }
            }
        }
        if !missing.is_empty() {
            let list: Vec<String> = missing.into_iter().collect();
            return Err(JudgeError::Load(format!("missing document files: {}", list.join(", "))));
        }

        let mut order: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        for a in &assignments {
            let items = order.entry(a.assessor_id.clone()).or_default();
            items.extend(a.docs.keys().map(|d| (a.topic_id.clone(), d.clone())));
        }
        for (assessor, items) in order.iter_mut() {
            items.sort();
            items.shuffle(&mut scoped_rng(config.seed, &["order", assessor]));
        }

        let replayed = replay_log(&config.judgments)?;
        let assigned: BTreeSet<(&str, &str, &str)> = assignments
            .iter()
            .flat_map(|a| a.docs.keys().map(move |d| (a.assessor_id.as_str(), a.topic_id.as_str(), d.as_str())))
            .collect();
        if let Some(j) = replayed
            .iter()
            .find(|j| !assigned.contains(&(j.assessor_id.as_str(), j.topic_id.as_str(), j.doc_id.as_str())))
        {
            return Err(JudgeError::Load(format!(
                "logged judgment by {} for ({}, {}) is not assigned",
                j.assessor_id, j.topic_id, j.doc_id
            )));
        }
        if let Some(parent) = config.judgments.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&config.judgments)?;
        let log = LogState {
            file,
            latest: latest_judgments(&replayed),
            entries: replayed.len(),
        };

        Ok(Campaign {
            config,
            topics,
            pools,
            manifest,
            assignments,
            order,
            tokens,
            doc_paths,
            log: RwLock::new(log),
            export_lock: Mutex::new(()),
        })
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    pub fn pools(&self) -> &[Pool] {
        &self.pools
    }

    /// Assessor id for a bearer token.
    pub fn assessor_for_token(&self, token: &str) -> Option<&str> {
        self.tokens.get(token).map(String::as_str)
    }

    pub fn is_admin_token(&self, token: &str) -> bool {
        !self.config.admin_token.is_empty() && token == self.config.admin_token
    }

    fn is_assigned(&self, assessor: &str, topic: &str, doc: &str) -> bool {
        self.assignments
            .iter()
            .any(|a| a.assessor_id == assessor && a.topic_id == topic && a.contains(doc))
    }

    fn read_log(&self) -> std::sync::RwLockReadGuard<'_, LogState> {
        self.log.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn get_assignment(&self, assessor: &str) -> Result<Vec<AssignmentItem>> {
        let items = self
            .order
            .get(assessor)
            .ok_or_else(|| JudgeError::NotFound(format!("no assignment for {assessor}")))?;
        let log = self.read_log();
        Ok(items
            .iter()
            .map(|(t, d)| {
                let grade = log
                    .latest
                    .get(&(assessor.to_string(), t.clone(), d.clone()))
                    .map(|j| j.grade.value());
                AssignmentItem {
                    topic_id: t.clone(),
                    doc_id: d.clone(),
                    status: if grade.is_some() { Status::Judged } else { Status::Pending },
                    grade,
                }
            })
            .collect())
    }

    /// Topics the assessor judges, with their relevance descriptions.
    pub fn topics_for(&self, assessor: &str) -> Vec<TopicPayload> {
        let ids: BTreeSet<&str> = self
            .assignments
            .iter()
            .filter(|a| a.assessor_id == assessor)
            .map(|a| a.topic_id.as_str())
            .collect();
        ids.into_iter()
            .filter_map(|id| self.topics.get(id))
            .map(|t| TopicPayload {
                topic_id: t.id.clone(),
                title: t.title.clone(),
                levels: t.levels.clone(),
            })
            .collect()
    }

    pub fn get_document(&self, assessor: &str, topic: &str, doc: &str) -> Result<DocumentPayload> {
        if !self.is_assigned(assessor, topic, doc) {
            return Err(JudgeError::Forbidden(format!("{doc} is not assigned to {assessor} for {topic}")));
        }
        let path = &self.doc_paths[doc];
        let raw = fs::read(path)?;
        let clean = clean_document(doc, &raw).highlighted(&self.topics[topic]);
        Ok(DocumentPayload {
            topic_id: topic.to_string(),
            doc_id: clean.doc_id,
            title: clean.title,
            body: clean.body,
            highlight_terms: clean.highlight_terms,
            original_size: clean.original_size,
            truncated: clean.truncated,
        })
    }

    pub fn progress(&self, assessor: &str) -> Progress {
        let log = self.read_log();
        self.progress_locked(&log, assessor)
    }

    fn progress_locked(&self, log: &LogState, assessor: &str) -> Progress {
        let items = self.order.get(assessor).map_or(&[][..], Vec::as_slice);
        let judged = items
            .iter()
            .filter(|(t, d)| log.latest.contains_key(&(assessor.to_string(), t.clone(), d.clone())))
            .count();
        Progress {
            judged,
            assigned: items.len(),
        }
    }

    pub fn all_progress(&self) -> BTreeMap<String, Progress> {
        let log = self.read_log();
        self.order
            .keys()
            .map(|a| (a.clone(), self.progress_locked(&log, a)))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.all_progress().values().all(|p| p.judged == p.assigned)
    }

    /// Number of log entries, including superseded revisions.
    pub fn log_len(&self) -> usize {
        self.read_log().entries
    }

    /// Record a judgment. The log line is flushed to disk before the
    /// in-memory state changes.
    pub fn submit_judgment(&self, assessor: &str, topic: &str, doc: &str, grade: i8) -> Result<Ack> {
        let grade = Grade::new(grade).map_err(|e| JudgeError::BadRequest(e.to_string()))?;
        if !self.is_assigned(assessor, topic, doc) {
            return Err(JudgeError::Forbidden(format!("{doc} is not assigned to {assessor} for {topic}")));
        }
        let mut log = self.log.write().unwrap_or_else(|e| e.into_inner());
        let key = (assessor.to_string(), topic.to_string(), doc.to_string());
        let revision = log.latest.get(&key).map_or(1, |j| j.revision + 1);
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let judgment = Judgment {
            assessor_id: assessor.to_string(),
            topic_id: topic.to_string(),
            doc_id: doc.to_string(),
            grade,
            timestamp,
            revision,
        };
        log.file.write_all(write_judgment_line(&judgment).as_bytes())?;
        log.file.sync_data()?;
        log.latest.insert(key, judgment);
        log.entries += 1;
        let progress = self.progress_locked(&log, assessor);
        Ok(Ack { revision, progress })
    }

    fn snapshot(&self) -> Vec<Judgment> {
        self.read_log().latest.values().cloned().collect()
    }

    /// Merge, measure agreement, run the noise check and write the export
    /// files. Refuses while judgments are missing unless `force` is set.
    pub fn export(&self, force: bool) -> Result<ExportResult> {
        let _guard = self.export_lock.lock().unwrap_or_else(|e| e.into_inner());
        let judgments = self.snapshot();
        let seed = self.config.seed;
        let qrels = match merge_judgments(&self.assignments, &judgments, seed) {
            Ok(q) => q,
            Err(qrelkit_core::Error::IncompleteJudgments(missing)) if !force => {
                return Err(JudgeError::Incomplete(missing));
            }
            Err(qrelkit_core::Error::IncompleteJudgments(_)) => merge_available(&self.assignments, &judgments, seed)?,
            Err(e) => return Err(e.into()),
        };
        let agreement = topic_agreement(&self.assignments, &judgments, KappaWeighting::Unweighted);
        let noise = self
            .manifest
            .as_ref()
            .map(|m| noise_quality_check(&judgments, m, self.config.noise_threshold));

        let dir = &self.config.export_dir;
        fs::create_dir_all(dir)?;
        let qrels_text = write_qrels(&qrels);
        let log_bytes = fs::read(&self.config.judgments)?;
        let log_sha256 = sha256_hex(&log_bytes);
        let qrels_sha256 = sha256_hex(qrels_text.as_bytes());
        let mut files = Vec::new();
        let mut put = |name: &str, body: &[u8]| -> Result<()> {
            let p = dir.join(name);
            fs::write(&p, body)?;
            files.push(p);
            Ok(())
        };
        put("qrels.txt", qrels_text.as_bytes())?;
        put("agreement.tsv", agreement_tsv(&agreement).as_bytes())?;
        if let Some(n) = &noise {
            put("noise.tsv", n.to_tsv().as_bytes())?;
        }
        put("judgments.jsonl", &log_bytes)?;
        put(
            "SHA256SUMS",
            format!("{qrels_sha256}  qrels.txt\n{log_sha256}  judgments.jsonl\n").as_bytes(),
        )?;
        Ok(ExportResult {
            qrels,
            agreement,
            noise,
            log_sha256,
            qrels_sha256,
            files,
        })
    }
}
