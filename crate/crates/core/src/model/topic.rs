//! Topic descriptions in the XML topics format.
//!
//! ```xml
//! <topic id="2012-014">
//!   <title>Social media in the Arab uprisings</title>
//!   <relevance>
//!     <level value="2">...</level>
//!     <level value="1">...</level>
//!     <level value="0">...</level>
//!   </relevance>
//! </topic>
//! ```
//!
//! A file may hold a single `<topic>` root or any root element wrapping
//! several of them. Topics without a `<relevance>` element are noise topics.

use std::collections::{BTreeMap, HashSet};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::error::{Error, Result};

/// Highest grade a level description may declare.
pub const MAX_LEVEL: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub id: String,
    /// Used verbatim as the query.
    pub title: String,
    /// Relevance level descriptions keyed by grade.
    pub levels: BTreeMap<u8, String>,
    pub is_noise: bool,
}

impl Topic {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Topic {
            id: id.into(),
            title: title.into(),
            levels: BTreeMap::new(),
            is_noise: false,
        }
    }

    pub fn noise(id: impl Into<String>, title: impl Into<String>) -> Self {
        Topic {
            is_noise: true,
            ..Topic::new(id, title)
        }
    }

    pub fn with_level(mut self, grade: u8, description: impl Into<String>) -> Self {
        self.levels.insert(grade, description.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("topic id must be non-empty".into()));
        }
        if self.is_noise && !self.levels.is_empty() {
            return Err(Error::Validation(format!(
                "noise topic {} must not carry relevance levels",
                self.id
            )));
        }
        if let Some(g) = self.levels.keys().find(|g| **g > MAX_LEVEL) {
            return Err(Error::Validation(format!(
                "topic {}: level {g} outside 0..={MAX_LEVEL}",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Default)]
struct TopicBuilder {
    id: String,
    title: Option<String>,
    levels: BTreeMap<u8, String>,
    has_relevance: bool,
    line: usize,
}

enum Capture {
    None,
    Title(String),
    Level(u8, String),
}

fn line_of(text: &str, pos: usize) -> usize {
    let pos = pos.min(text.len());
    text.as_bytes()[..pos].iter().filter(|b| **b == b'\n').count() + 1
}

fn attr(e: &BytesStart<'_>, name: &[u8], text: &str, pos: usize) -> Result<Option<String>> {
    for a in e.attributes() {
        let a = a.map_err(|err| Error::parse("topics", line_of(text, pos), err.to_string()))?;
        if a.key.as_ref() == name {
            let v = a
                .unescape_value()
                .map_err(|err| Error::parse("topics", line_of(text, pos), err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

/// Parse a topics XML document.
pub fn parse_topics(text: &str) -> Result<Vec<Topic>> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(false);

    let mut topics: Vec<Topic> = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Option<TopicBuilder> = None;
    let mut capture = Capture::None;
    let mut depth_in_capture = 0usize;
    let mut stack: Vec<Vec<u8>> = Vec::new();

    loop {
        let pos = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| Error::parse("topics", line_of(text, reader.error_position() as usize), e.to_string()))?;
        match event {
            Event::Start(e) => {
                let name = e.name().as_ref().to_vec();
                if !matches!(capture, Capture::None) {
                    // nested markup inside a description is not part of the format
                    return Err(Error::parse(
                        "topics",
                        line_of(text, pos),
                        format!("unexpected element <{}> inside text", String::from_utf8_lossy(&name)),
                    ));
                }
                match name.as_slice() {
                    b"topic" => {
                        if current.is_some() {
                            return Err(Error::parse("topics", line_of(text, pos), "nested <topic>"));
                        }
                        let id = attr(&e, b"id", text, pos)?.ok_or_else(|| {
                            Error::parse("topics", line_of(text, pos), "<topic> without id attribute")
                        })?;
                        current = Some(TopicBuilder {
                            id,
                            line: line_of(text, pos),
                            ..Default::default()
                        });
                    }
                    b"title" if current.is_some() && stack.last().map(Vec::as_slice) == Some(b"topic") => {
                        capture = Capture::Title(String::new());
                        depth_in_capture = stack.len() + 1;
                    }
                    b"relevance" if current.is_some() => {
                        if let Some(t) = current.as_mut() {
                            t.has_relevance = true;
                        }
                    }
                    b"level" if stack.last().map(Vec::as_slice) == Some(b"relevance") => {
                        let raw = attr(&e, b"value", text, pos)?.ok_or_else(|| {
                            Error::parse("topics", line_of(text, pos), "<level> without value attribute")
                        })?;
                        let grade: u8 = raw.trim().parse().map_err(|_| {
                            Error::parse("topics", line_of(text, pos), format!("bad level value {raw:?}"))
                        })?;
                        if grade > MAX_LEVEL {
                            return Err(Error::parse(
                                "topics",
                                line_of(text, pos),
                                format!("level value {grade} outside 0..={MAX_LEVEL}"),
                            ));
                        }
                        capture = Capture::Level(grade, String::new());
                        depth_in_capture = stack.len() + 1;
                    }
                    _ => {}
                }
                stack.push(name);
            }
            Event::Empty(e) => {
                let name = e.name().as_ref().to_vec();
                match name.as_slice() {
                    b"topic" => {
                        return Err(Error::parse("topics", line_of(text, pos), "empty <topic/> element"));
                    }
                    b"relevance" => {
                        if let Some(t) = current.as_mut() {
                            t.has_relevance = true;
                        }
                    }
                    b"title" if current.is_some() => {
                        if let Some(t) = current.as_mut() {
                            t.title = Some(String::new());
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                let s = t
                    .unescape()
                    .map_err(|e| Error::parse("topics", line_of(text, pos), e.to_string()))?;
                match &mut capture {
                    Capture::Title(buf) | Capture::Level(_, buf) => buf.push_str(&s),
                    Capture::None => {}
                }
            }
            Event::CData(t) => {
                let s = String::from_utf8_lossy(&t.into_inner()).into_owned();
                match &mut capture {
                    Capture::Title(buf) | Capture::Level(_, buf) => buf.push_str(&s),
                    Capture::None => {}
                }
            }
            Event::End(e) => {
                let name = e.name().as_ref().to_vec();
                if stack.len() == depth_in_capture {
                    match std::mem::replace(&mut capture, Capture::None) {
                        Capture::Title(buf) => {
                            if let Some(t) = current.as_mut() {
                                t.title = Some(buf);
                            }
                        }
                        Capture::Level(grade, buf) => {
                            if let Some(t) = current.as_mut() {
                                if t.levels.insert(grade, buf).is_some() {
                                    return Err(Error::Validation(format!(
                                        "topic {}: duplicate level {grade}",
                                        t.id
                                    )));
                                }
                            }
                        }
                        Capture::None => {}
                    }
                    depth_in_capture = 0;
                }
                stack.pop();
                if name == b"topic" {
                    let b = current.take().expect("balanced by reader");
                    let title = b.title.ok_or_else(|| {
                        Error::parse("topics", b.line, format!("topic {} has no <title>", b.id))
                    })?;
                    let topic = Topic {
                        id: b.id,
                        title,
                        is_noise: !b.has_relevance,
                        levels: b.levels,
                    };
                    topic.validate()?;
                    if !seen.insert(topic.id.clone()) {
                        return Err(Error::Validation(format!("duplicate topic id {:?}", topic.id)));
                    }
                    topics.push(topic);
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(Error::parse("topics", line_of(text, text.len()), "unexpected end of document"));
    }
    Ok(topics)
}

fn escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}

/// Write one topic in the canonical layout (levels in descending grade order).
pub fn write_topic(topic: &Topic) -> String {
    let mut out = String::new();
    out.push_str(&format!("<topic id=\"{}\">\n", escape(&topic.id)));
    out.push_str(&format!("  <title>{}</title>\n", escape(&topic.title)));
    if !topic.is_noise {
        out.push_str("  <relevance>\n");
        for (grade, text) in topic.levels.iter().rev() {
            out.push_str(&format!("    <level value=\"{grade}\">{}</level>\n", escape(text)));
        }
        out.push_str("  </relevance>\n");
    }
    out.push_str("</topic>\n");
    out
}

/// Write a topic set wrapped in `<topics>`, sorted by id.
pub fn write_topics(topics: &[Topic]) -> String {
    let mut sorted: Vec<&Topic> = topics.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = String::from("<topics>\n");
    for t in sorted {
        out.push_str(&write_topic(t));
    }
    out.push_str("</topics>\n");
    out
}
