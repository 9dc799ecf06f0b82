//! Lenient HTML tree builder and a small XPath-like selector language.
//!
//! The parser never fails: unclosed tags are closed at the end of the input,
//! stray end tags are dropped and unknown entities are passed through.
//!
//! Selectors are slash-separated element paths. `/` steps to children, `//`
//! to any descendant, `*` matches any element and each step may carry
//! `[@id='x']` or `[@class='y']` predicates (class matches one token of the
//! class list):
//!
//! ```text
//! //div[@id='cellular-info']//td[@id='kpi-rsrp']
//! /html/body/ul[@class='signal-list']/li/span[@class='val']
//! ```

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];
const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Element { tag: String, attrs: Vec<(String, String)> },
    Text(String),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Parsed document. Node ids are indices in document order; id 0 is the
/// synthetic root.
#[derive(Debug, Clone)]
pub struct Document {
    nodes: Vec<Node>,
}

impl Document {
    pub const ROOT: usize = 0;

    pub fn parse(html: &str) -> Document {
        Parser::new(html).run()
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn tag(&self, id: usize) -> Option<&str> {
        match &self.nodes[id].kind {
            NodeKind::Element { tag, .. } => Some(tag),
            NodeKind::Text(_) => None,
        }
    }

    pub fn attr(&self, id: usize, name: &str) -> Option<&str> {
        match &self.nodes[id].kind {
            NodeKind::Element { attrs, .. } => attrs
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.as_str()),
            NodeKind::Text(_) => None,
        }
    }

    /// Concatenated descendant text with whitespace runs collapsed.
    pub fn text_content(&self, id: usize) -> String {
        let mut raw = String::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            match &self.nodes[n].kind {
                NodeKind::Text(t) => {
                    raw.push_str(t);
                    raw.push(' ');
                }
                NodeKind::Element { .. } => stack.extend(self.nodes[n].children.iter().rev()),
            }
        }
        collapse_whitespace(&raw)
    }

    fn descendants(&self, id: usize, out: &mut Vec<usize>) {
        let mut stack: Vec<usize> = self.nodes[id].children.iter().rev().copied().collect();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
    }
}

pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    nodes: Vec<Node>,
    stack: Vec<usize>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            nodes: vec![Node {
                kind: NodeKind::Element { tag: "#document".to_owned(), attrs: Vec::new() },
                parent: None,
                children: Vec::new(),
            }],
            stack: vec![Document::ROOT],
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn run(mut self) -> Document {
        while self.pos < self.src.len() {
            let rest = self.rest();
            if let Some(comment) = rest.strip_prefix("<!--") {
                self.pos = match comment.find("-->") {
                    Some(end) => self.pos + 4 + end + 3,
                    None => self.src.len(),
                };
            } else if rest.starts_with("<!") || rest.starts_with("<?") {
                self.skip_past('>');
            } else if rest.starts_with("</") {
                self.end_tag();
            } else if rest.len() > 1 && rest.as_bytes()[0] == b'<' && rest.as_bytes()[1].is_ascii_alphabetic() {
                self.start_tag();
            } else {
                self.text();
            }
        }
        Document { nodes: self.nodes }
    }

    fn skip_past(&mut self, c: char) {
        self.pos = match self.rest().find(c) {
            Some(i) => self.pos + i + 1,
            None => self.src.len(),
        };
    }

    fn push_node(&mut self, kind: NodeKind) -> usize {
        let parent = *self.stack.last().unwrap_or(&Document::ROOT);
        let id = self.nodes.len();
        self.nodes.push(Node { kind, parent: Some(parent), children: Vec::new() });
        self.nodes[parent].children.push(id);
        id
    }

    fn top_tag(&self) -> Option<&str> {
        let id = *self.stack.last()?;
        match &self.nodes[id].kind {
            NodeKind::Element { tag, .. } if id != Document::ROOT => Some(tag),
            _ => None,
        }
    }

    fn text(&mut self) {
        let rest = self.rest();
        // A lone '<' that does not open a tag is literal text.
        let skip = usize::from(rest.starts_with('<'));
        let end = rest[skip..].find('<').map_or(rest.len(), |i| i + skip);
        let text = decode_entities(&rest[..end]);
        self.pos += end;
        if !text.trim().is_empty() {
            self.push_node(NodeKind::Text(text));
        }
    }

    fn end_tag(&mut self) {
        let rest = self.rest();
        let end = rest.find('>').unwrap_or(rest.len());
        let name = rest[2..end].trim().to_ascii_lowercase();
        self.pos += (end + 1).min(rest.len());
        if let Some(depth) = self.stack.iter().rposition(|&id| {
            id != Document::ROOT
                && matches!(&self.nodes[id].kind, NodeKind::Element { tag, .. } if *tag == name)
        }) {
            self.stack.truncate(depth);
        }
    }

    fn start_tag(&mut self) {
        let bytes = self.src.as_bytes();
        let mut i = self.pos + 1;
        let name_start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' && bytes[i] != b'/' {
            i += 1;
        }
        let tag = self.src[name_start..i].to_ascii_lowercase();
        let mut attrs: Vec<(String, String)> = Vec::new();
        let mut self_closing = false;
        loop {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i >= bytes.len() {
                break;
            }
            match bytes[i] {
                b'>' => {
                    i += 1;
                    break;
                }
                b'/' => {
                    self_closing = true;
                    i += 1;
                    continue;
                }
                _ => {}
            }
            self_closing = false;
            let key_start = i;
            while i < bytes.len()
                && !bytes[i].is_ascii_whitespace()
                && !matches!(bytes[i], b'=' | b'>' | b'/')
            {
                i += 1;
            }
            let key = self.src[key_start..i].to_ascii_lowercase();
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            let mut value = String::new();
            if i < bytes.len() && bytes[i] == b'=' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') {
                    let quote = bytes[i];
                    let v_start = i + 1;
                    let v_end = bytes[v_start..]
                        .iter()
                        .position(|&b| b == quote)
                        .map_or(bytes.len(), |p| v_start + p);
                    value = decode_entities(&self.src[v_start..v_end]);
                    i = (v_end + 1).min(bytes.len());
                } else {
                    let v_start = i;
                    while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' {
                        i += 1;
                    }
                    value = decode_entities(&self.src[v_start..i]);
                }
            }
            if !key.is_empty() && !attrs.iter().any(|(k, _)| *k == key) {
                attrs.push((key, value));
            }
        }
        self.pos = i;

        self.close_implied(&tag);
        let id = self.push_node(NodeKind::Element { tag: tag.clone(), attrs });
        if VOID_ELEMENTS.contains(&tag.as_str()) || self_closing {
            return;
        }
        if RAW_TEXT_ELEMENTS.contains(&tag.as_str()) {
            let rest = self.rest();
            let close = alloc::format!("</{tag}");
            let end = find_ascii_ci(rest, &close).unwrap_or(rest.len());
            if !rest[..end].trim().is_empty() {
                let tid = self.nodes.len();
                self.nodes.push(Node {
                    kind: NodeKind::Text(rest[..end].to_owned()),
                    parent: Some(id),
                    children: Vec::new(),
                });
                self.nodes[id].children.push(tid);
            }
            self.pos += end;
            if self.pos < self.src.len() {
                self.skip_past('>');
            }
            return;
        }
        self.stack.push(id);
    }

    /// Optional end tags: a new cell closes the open cell, a new row the
    /// open row, a new list item the open item.
    fn close_implied(&mut self, tag: &str) {
        let closes: &[&str] = match tag {
            "td" | "th" => &["td", "th"],
            "tr" => &["td", "th", "tr"],
            "li" => &["li"],
            "p" => &["p"],
            "option" => &["option"],
            _ => return,
        };
        while let Some(top) = self.top_tag() {
            if closes.contains(&top) {
                let was_row = top == "tr";
                self.stack.pop();
                if tag != "tr" || was_row {
                    break;
                }
            } else {
                break;
            }
        }
    }
}

fn find_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_owned();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let window = rest.len().min(12);
        let semi = rest.as_bytes()[..window].iter().position(|&b| b == b';');
        let decoded = semi.and_then(|semi| {
            let name = &rest[1..semi];
            let ch = match name {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" | "#39" => Some('\''),
                "nbsp" => Some('\u{a0}'),
                _ => {
                    let num = name.strip_prefix('#')?;
                    let code = match num.strip_prefix(['x', 'X']) {
                        Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                        None => num.parse().ok()?,
                    };
                    char::from_u32(code)
                }
            }?;
            Some((ch, semi + 1))
        });
        match decoded {
            Some((ch, used)) => {
                out.push(ch);
                rest = &rest[used..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Predicate {
    Id(String),
    Class(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Step {
    descendant: bool,
    /// `None` for `*`.
    tag: Option<String>,
    predicates: Vec<Predicate>,
}

/// A compiled selector path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    source: String,
    steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectorError {
    pub selector: String,
    pub reason: &'static str,
}

impl fmt::Display for SelectorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid selector {:?}: {}", self.selector, self.reason)
    }
}

impl core::error::Error for SelectorError {}

impl Selector {
    pub fn parse(source: &str) -> Result<Selector, SelectorError> {
        let err = |reason| SelectorError { selector: source.to_owned(), reason };
        let mut rest = source.trim();
        if !rest.starts_with('/') {
            return Err(err("path must start with '/' or '//'"));
        }
        let mut steps = Vec::new();
        while !rest.is_empty() {
            let descendant = if let Some(r) = rest.strip_prefix("//") {
                rest = r;
                true
            } else if let Some(r) = rest.strip_prefix('/') {
                rest = r;
                false
            } else {
                return Err(err("expected '/' between steps"));
            };
            let name_len = rest
                .find(['/', '['])
                .unwrap_or(rest.len());
            let name = &rest[..name_len];
            rest = &rest[name_len..];
            let tag = match name {
                "" => return Err(err("empty step")),
                "*" => None,
                n if n.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') => {
                    Some(n.to_ascii_lowercase())
                }
                _ => return Err(err("invalid element name")),
            };
            let mut predicates = Vec::new();
            while let Some(r) = rest.strip_prefix('[') {
                let close = r.find(']').ok_or_else(|| err("unterminated predicate"))?;
                predicates.push(parse_predicate(&r[..close]).ok_or_else(|| err("unsupported predicate"))?);
                rest = &r[close + 1..];
            }
            steps.push(Step { descendant, tag, predicates });
        }
        if steps.is_empty() {
            return Err(err("no steps"));
        }
        Ok(Selector { source: source.trim().to_owned(), steps })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    /// Matching element ids in document order.
    pub fn select(&self, doc: &Document) -> Vec<usize> {
        let mut current = vec![Document::ROOT];
        for step in &self.steps {
            let mut candidates = Vec::new();
            for &n in &current {
                if step.descendant {
                    doc.descendants(n, &mut candidates);
                } else {
                    candidates.extend_from_slice(&doc.node(n).children);
                }
            }
            candidates.sort_unstable();
            candidates.dedup();
            candidates.retain(|&c| step.matches(doc, c));
            current = candidates;
            if current.is_empty() {
                break;
            }
        }
        current
    }
}

impl Step {
    fn matches(&self, doc: &Document, id: usize) -> bool {
        let Some(tag) = doc.tag(id) else { return false };
        if let Some(want) = &self.tag {
            if want != tag {
                return false;
            }
        }
        self.predicates.iter().all(|p| match p {
            Predicate::Id(v) => doc.attr(id, "id") == Some(v.as_str()),
            Predicate::Class(v) => doc
                .attr(id, "class")
                .is_some_and(|c| c.split_whitespace().any(|t| t == v)),
        })
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn parse_predicate(body: &str) -> Option<Predicate> {
    let body = body.trim().strip_prefix('@')?;
    let (name, value) = body.split_once('=')?;
    let value = value.trim();
    let quote = value.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let value = value.strip_prefix(quote)?.strip_suffix(quote)?.to_owned();
    match name.trim() {
        "id" => Some(Predicate::Id(value)),
        "class" => Some(Predicate::Class(value)),
        _ => None,
    }
}
