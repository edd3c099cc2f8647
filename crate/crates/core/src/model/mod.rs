//! Domain types and their text formats. All formats are UTF-8, LF-terminated,
//! and written in a canonical order so that `write(parse(text))` normalises
//! and `parse(write(value))` is the identity.

mod assignment;
mod judgment;
mod manifest;
mod pool;
mod qrels;
mod run;
mod topic;

pub use assignment::{parse_assignments, write_assignments, Assignment, DocTag};
pub use judgment::{latest_judgments, parse_judgment_log, write_judgment_line, Judgment, JudgmentKey};
pub use manifest::{parse_manifest, write_manifest, CrawlManifest};
pub use pool::{parse_pools, write_pools, Pool, Provenance};
pub use qrels::{conflate, parse_qrels, write_qrels, Grade, Qrels, Scale, TopicQrels};
pub use run::{parse_run, write_run, RankedDoc, Run};
pub use topic::{parse_topics, write_topic, write_topics, Topic, MAX_LEVEL};
