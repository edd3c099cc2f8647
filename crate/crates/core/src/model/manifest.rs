//! Crawl manifest: which topics each document was crawled for.
//!
//! ```text
//! #noise 2012-036 2012-037 2012-038
//! doc-0001 2012-001
//! doc-0002 2012-001 2012-014
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

const NOISE_HEADER: &str = "#noise";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrawlManifest {
    pub crawled_for: BTreeMap<String, BTreeSet<String>>,
    pub noise_topics: BTreeSet<String>,
}

impl CrawlManifest {
    pub fn add(&mut self, doc: &str, topic: &str) {
        self.crawled_for
            .entry(doc.to_string())
            .or_default()
            .insert(topic.to_string());
    }

    pub fn was_crawled_for(&self, doc: &str, topic: &str) -> bool {
        self.crawled_for
            .get(doc)
            .is_some_and(|topics| topics.contains(topic))
    }

    pub fn is_noise_topic(&self, topic: &str) -> bool {
        self.noise_topics.contains(topic)
    }

    /// A noise document was crawled only for noise topics.
    pub fn is_noise_doc(&self, doc: &str) -> bool {
        self.crawled_for
            .get(doc)
            .is_some_and(|topics| !topics.is_empty() && topics.is_subset(&self.noise_topics))
    }

    /// Every noise document, sorted.
    pub fn noise_docs(&self) -> Vec<String> {
        self.crawled_for
            .keys()
            .filter(|d| self.is_noise_doc(d))
            .cloned()
            .collect()
    }

    pub fn topic_universe(&self) -> BTreeSet<&str> {
        self.crawled_for
            .values()
            .flat_map(|t| t.iter().map(String::as_str))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((doc, _)) = self.crawled_for.iter().find(|(_, t)| t.is_empty()) {
            return Err(Error::Validation(format!("manifest document {doc} has no topics")));
        }
        let universe = self.topic_universe();
        if let Some(t) = self.noise_topics.iter().find(|t| !universe.contains(t.as_str())) {
            return Err(Error::Validation(format!(
                "noise topic {t} has no crawled documents in the manifest"
            )));
        }
        Ok(())
    }
}

pub fn parse_manifest(text: &str) -> Result<CrawlManifest> {
    let mut m = CrawlManifest::default();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split_whitespace();
        let first = cols.next().expect("non-empty line");
        if first == NOISE_HEADER {
            if saw_header {
                return Err(Error::parse("manifest", lineno, "repeated #noise header"));
            }
            saw_header = true;
            m.noise_topics.extend(cols.map(str::to_string));
            continue;
        }
        if first.starts_with('#') {
            return Err(Error::parse("manifest", lineno, format!("unknown header {first:?}")));
        }
        if m.crawled_for.contains_key(first) {
            return Err(Error::parse("manifest", lineno, format!("document {first} listed twice")));
        }
        let topics: BTreeSet<String> = cols.map(str::to_string).collect();
        if topics.is_empty() {
            return Err(Error::parse("manifest", lineno, format!("document {first} has no topics")));
        }
        m.crawled_for.insert(first.to_string(), topics);
    }
    m.validate()?;
    Ok(m)
}

pub fn write_manifest(m: &CrawlManifest) -> String {
    let mut out = String::from(NOISE_HEADER);
    for t in &m.noise_topics {
        out.push(' ');
        out.push_str(t);
    }
    out.push('\n');
    for (doc, topics) in &m.crawled_for {
        out.push_str(doc);
        for t in topics {
            let _ = write!(out, " {t}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_and_docs() {
        let m = parse_manifest("#noise n1\nd1 t1\nd2 t1 t2\nd3 n1\n").unwrap();
        assert!(m.was_crawled_for("d2", "t2"));
        assert!(!m.was_crawled_for("d1", "t2"));
        assert_eq!(m.noise_docs(), vec!["d3".to_string()]);
    }

    #[test]
    fn noise_topic_must_exist() {
        assert!(parse_manifest("#noise n9\nd1 t1\n").is_err());
    }

    #[test]
    fn doc_crawled_for_noise_and_real_topic_is_not_noise() {
        let m = parse_manifest("#noise n1\nd1 t1 n1\n").unwrap();
        assert!(!m.is_noise_doc("d1"));
    }

    #[test]
    fn canonical_form() {
        let m = parse_manifest("d2 t2 t1\n#noise\nd1 t1\n").unwrap();
        assert_eq!(write_manifest(&m), "#noise\nd1 t1\nd2 t1 t2\n");
    }
}
