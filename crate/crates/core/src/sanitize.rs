//! Document preparation for judging: truncation, reduction to plain
//! black-and-white markup, and highlighting of topic terms.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ego_tree::NodeRef;
use scraper::{Html, Node};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::Topic;

/// Documents are cut to 256 KiB before cleaning.
pub const TRUNCATE_LIMIT: usize = 262_144;

/// Elements removed together with everything inside them.
const DROP: &[&str] = &[
    "script", "style", "link", "meta", "base", "object", "embed", "applet", "iframe", "frame",
    "frameset", "noscript", "noembed", "noframes", "template", "button", "input", "title", "svg",
    "math", "head",
];

/// Elements removed while keeping their children.
const UNWRAP: &[&str] = &["form"];

const ATTR_ALLOW: &[&str] = &[
    "href", "src", "alt", "title", "colspan", "rowspan", "headers", "scope", "abbr", "lang", "dir",
    "cite", "datetime", "start", "reversed", "value", "label", "name", "id",
];

const VOID: &[&str] = &[
    "area", "base", "basefont", "bgsound", "br", "col", "embed", "frame", "hr", "img", "input",
    "keygen", "link", "meta", "param", "source", "track", "wbr",
];

/// Raw-text containers that are rewritten to `pre` so their content can be
/// escaped like ordinary text.
const AS_PRE: &[&str] = &["xmp", "plaintext", "listing"];

pub const STYLESHEET: &str = "\
html { background: #fff; color: #000; }
body { font: 16px/1.5 serif; max-width: 48em; margin: 1em auto; padding: 0 1em; }
* { background: transparent !important; color: #000 !important; border-color: #000 !important; }
a { text-decoration: underline; }
img { max-width: 100%; filter: grayscale(100%); }
mark { background: #000 !important; color: #fff !important; }
.truncated { border: 1px solid #000; padding: 0.5em; }
";

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has", "have", "how",
    "i", "if", "in", "into", "is", "it", "its", "more", "most", "no", "not", "of", "on", "only",
    "or", "other", "our", "should", "so", "some", "such", "than", "that", "the", "their", "them",
    "then", "there", "these", "they", "this", "those", "to", "was", "we", "were", "what", "when",
    "where", "which", "who", "why", "will", "with", "would", "you",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub doc_id: String,
    pub title: Option<String>,
    pub body: String,
    pub highlight_terms: Vec<String>,
    pub original_size: usize,
    pub truncated: bool,
}

/// Cut `bytes` to at most [`TRUNCATE_LIMIT`] bytes without splitting a
/// UTF-8 sequence. The flag is set iff anything was removed.
pub fn truncate_doc(bytes: &[u8]) -> (Vec<u8>, bool) {
    truncate_at(bytes, TRUNCATE_LIMIT)
}

pub fn truncate_at(bytes: &[u8], limit: usize) -> (Vec<u8>, bool) {
    if bytes.len() <= limit {
        return (bytes.to_vec(), false);
    }
    // bytes[limit] is the first byte dropped; if it continues a sequence,
    // back up to that sequence's lead byte.
    let mut cut = limit;
    while cut > 0 && limit - cut < 3 && bytes[cut] & 0xC0 == 0x80 {
        cut -= 1;
    }
    if bytes[cut] & 0xC0 == 0x80 {
        // Not UTF-8 around the limit; no sequence to protect.
        cut = limit;
    }
    (bytes[..cut].to_vec(), true)
}

fn escape_text(out: &mut String, s: &str) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

fn escape_attr(out: &mut String, s: &str) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

fn unsafe_url(v: &str) -> bool {
    let squeezed: String = v
        .chars()
        .filter(|c| !c.is_whitespace() && !c.is_control())
        .flat_map(char::to_lowercase)
        .collect();
    squeezed.starts_with("javascript:") || squeezed.starts_with("vbscript:") || squeezed.starts_with("data:")
}

struct Writer<'t> {
    out: String,
    terms: Option<&'t BTreeSet<String>>,
}

impl Writer<'_> {
    fn children(&mut self, node: NodeRef<'_, Node>, ctx: Ctx) {
        for child in node.children() {
            self.node(child, ctx);
        }
    }

    fn node(&mut self, node: NodeRef<'_, Node>, ctx: Ctx) {
        match node.value() {
            Node::Text(t) => {
                // The parser eats one newline right after <pre> and <textarea>.
                if ctx.newline_guard == Some(self.out.len()) && t.starts_with('\n') {
                    self.out.push('\n');
                }
                match self.terms {
                    Some(terms) if ctx.markable => mark_text(&mut self.out, t, terms),
                    _ => escape_text(&mut self.out, t),
                }
            }
            Node::Element(e) => {
                let name = e.name();
                if DROP.contains(&name) {
                    return;
                }
                if UNWRAP.contains(&name) {
                    self.children(node, ctx);
                    return;
                }
                let name = if AS_PRE.contains(&name) { "pre" } else { name };
                self.out.push('<');
                self.out.push_str(name);
                for (k, v) in e.attrs() {
                    if !ATTR_ALLOW.contains(&k) || ((k == "href" || k == "src") && unsafe_url(v)) {
                        continue;
                    }
                    let _ = write!(self.out, " {k}=\"");
                    escape_attr(&mut self.out, v);
                    self.out.push('"');
                }
                self.out.push('>');
                if VOID.contains(&name) {
                    return;
                }
                let inner = Ctx {
                    newline_guard: matches!(name, "pre" | "textarea").then_some(self.out.len()),
                    markable: ctx.markable && !matches!(name, "mark" | "textarea" | "option" | "select"),
                };
                self.children(node, inner);
                let _ = write!(self.out, "</{name}>");
            }
            Node::Document | Node::Fragment => self.children(node, ctx),
            _ => {}
        }
    }
}

#[derive(Clone, Copy)]
struct Ctx {
    /// Output offset at which a text node would be the first content of a
    /// `pre` or `textarea`.
    newline_guard: Option<usize>,
    markable: bool,
}

fn render(html: &Html, terms: Option<&BTreeSet<String>>) -> String {
    let mut w = Writer {
        out: String::with_capacity(1024),
        terms,
    };
    let ctx = Ctx {
        newline_guard: None,
        markable: true,
    };
    // A fragment parse hangs everything under a synthetic <html> element.
    w.children(*html.root_element(), ctx);
    w.out
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn find_title(node: NodeRef<'_, Node>) -> Option<String> {
    node.children().find_map(|n| match n.value() {
        Node::Element(e) if e.name() == "title" => {
            let text: String = n.children().filter_map(|d| d.value().as_text().map(|t| t.to_string())).collect();
            let t = collapse_ws(&text);
            (!t.is_empty()).then_some(t)
        }
        _ => find_title(n),
    })
}

/// Clean arbitrary HTML for display: drop scripts, embedded objects and
/// non-rendering elements, keep only structural attributes, and serialize
/// canonically. Returns the body markup and the document title, if any.
pub fn sanitize_with_title(html: &str) -> (String, Option<String>) {
    let parsed = Html::parse_fragment(html);
    let title = find_title(parsed.tree.root());
    (settle(render(&parsed, None), None), title)
}

pub fn sanitize_html(html: &str) -> String {
    sanitize_with_title(html).0
}

/// Some parse trees (misnested formatting elements, content adopted out
/// of tables) serialize to markup that parses into a different tree.
/// Re-parse until the output reproduces itself.
fn settle(mut markup: String, terms: Option<&BTreeSet<String>>) -> String {
    for _ in 0..MAX_SETTLE {
        let next = render(&Html::parse_fragment(&markup), terms);
        if next == markup {
            break;
        }
        markup = next;
    }
    markup
}

const MAX_SETTLE: usize = 8;

/// Lowercased alphanumeric tokens of `text`.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Highlight terms of a topic: tokens of the title and relevance level
/// descriptions, minus stopwords. Noise topics have none.
pub fn topic_terms(topic: &Topic) -> BTreeSet<String> {
    if topic.is_noise {
        return BTreeSet::new();
    }
    std::iter::once(topic.title.as_str())
        .chain(topic.levels.values().map(String::as_str))
        .flat_map(tokenize)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

fn mark_text(out: &mut String, text: &str, terms: &BTreeSet<String>) {
    let mut rest = text;
    while !rest.is_empty() {
        let start = rest.find(char::is_alphanumeric).unwrap_or(rest.len());
        escape_text(out, &rest[..start]);
        rest = &rest[start..];
        let end = rest.find(|c: char| !c.is_alphanumeric()).unwrap_or(rest.len());
        let token = &rest[..end];
        if !token.is_empty() && terms.contains(&token.to_lowercase()) {
            out.push_str("<mark>");
            escape_text(out, token);
            out.push_str("</mark>");
        } else {
            escape_text(out, token);
        }
        rest = &rest[end..];
    }
}

/// Wrap whole-token, case-insensitive matches of `terms` in `<mark>`.
pub fn highlight_with(body: &str, terms: &BTreeSet<String>) -> String {
    if terms.is_empty() {
        return body.to_string();
    }
    render(&Html::parse_fragment(body), Some(terms))
}

pub fn highlight_terms(body: &str, topic: &Topic) -> String {
    highlight_with(body, &topic_terms(topic))
}

/// Truncate, decode and sanitize raw document bytes.
pub fn clean_document(doc_id: &str, bytes: &[u8]) -> CleanDocument {
    let (cut, truncated) = truncate_doc(bytes);
    let text = String::from_utf8_lossy(&cut);
    let (body, title) = sanitize_with_title(&text);
    CleanDocument {
        doc_id: doc_id.to_string(),
        title,
        body,
        highlight_terms: Vec::new(),
        original_size: bytes.len(),
        truncated,
    }
}

impl CleanDocument {
    /// Apply topic-term highlighting to the body.
    pub fn highlighted(mut self, topic: &Topic) -> Self {
        let terms = topic_terms(topic);
        self.body = highlight_with(&self.body, &terms);
        self.highlight_terms = terms.into_iter().collect();
        self
    }

    /// Standalone page with the fixed stylesheet.
    pub fn to_page(&self) -> String {
        let mut out = String::from("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>");
        escape_text(&mut out, self.title.as_deref().unwrap_or(&self.doc_id));
        out.push_str("</title>\n<style>\n");
        out.push_str(STYLESHEET);
        out.push_str("</style>\n</head>\n<body>\n");
        if self.truncated {
            out.push_str("<p class=\"truncated\">This document was truncated to 256 KB.</p>\n");
        }
        out.push_str(&self.body);
        out.push_str("\n</body>\n</html>\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanRecord {
    pub doc_id: String,
    pub size: usize,
    pub truncated: bool,
    pub title: Option<String>,
}

/// Doc id for a raw file: the file name without an `.html`/`.htm` suffix.
pub fn doc_id_for(file_name: &str) -> &str {
    file_name
        .strip_suffix(".html")
        .or_else(|| file_name.strip_suffix(".htm"))
        .unwrap_or(file_name)
}

/// Clean every file in `input` into `output/<doc_id>.html` and write
/// `output/docs.jsonl` with one metadata record per document, sorted by id.
pub fn clean_directory(input: &Path, output: &Path) -> Result<Vec<CleanRecord>> {
    fs::create_dir_all(output)?;
    let mut files: Vec<_> = fs::read_dir(input)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .map(|e| e.path())
        .collect();
    files.sort();
    let mut records = Vec::with_capacity(files.len());
    let mut meta = String::new();
    for path in files {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let id = doc_id_for(&name);
        let doc = clean_document(id, &fs::read(&path)?);
        fs::write(output.join(format!("{id}.html")), doc.to_page())?;
        let rec = CleanRecord {
            doc_id: doc.doc_id,
            size: doc.original_size,
            truncated: doc.truncated,
            title: doc.title,
        };
        meta.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        meta.push('\n');
        records.push(rec);
    }
    fs::write(output.join("docs.jsonl"), meta)?;
    Ok(records)
}
