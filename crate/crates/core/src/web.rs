//! Web dashboard scraping: selector maps, field extraction and parsing, plus
//! the two dashboard layouts served by the emulator.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::coverage::{CPE_A, CPE_B};
use crate::error::CollectError;
use crate::html::{collapse_whitespace, Document, Selector, SelectorError};
use crate::model::{Band, Duplex, Field, FreqRange, KpiSnapshot, Method, Rat};
use crate::parse::{bad, parse_digits, parse_measure, parse_pci, parse_rssi, parse_uint, render_rssi};

/// Raw text per field as found on the page.
pub type RawFieldMap = BTreeMap<Field, String>;

/// Template isolating the value inside a node's text, e.g. `"RSRP: {value}"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValuePattern {
    prefix: String,
    suffix: String,
}

pub const VALUE_PLACEHOLDER: &str = "{value}";

impl ValuePattern {
    pub fn whole() -> Self {
        ValuePattern { prefix: String::new(), suffix: String::new() }
    }

    pub fn parse(template: &str) -> Result<Self, WebConfigError> {
        let mut parts = template.split(VALUE_PLACEHOLDER);
        let (Some(prefix), Some(suffix), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(WebConfigError::Pattern(template.to_owned()));
        };
        Ok(ValuePattern {
            prefix: collapse_whitespace(prefix),
            suffix: collapse_whitespace(suffix),
        })
    }

    /// Captured value, or `None` if the text does not fit the template.
    pub fn capture<'a>(&self, text: &'a str) -> Option<&'a str> {
        let rest = strip_prefix_ci(text, &self.prefix)?;
        let rest = strip_suffix_ci(rest, &self.suffix)?;
        Some(rest.trim())
    }
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &s[prefix.len()..])
}

fn strip_suffix_ci<'a>(s: &'a str, suffix: &str) -> Option<&'a str> {
    let cut = s.len().checked_sub(suffix.len())?;
    let tail = s.get(cut..)?;
    tail.eq_ignore_ascii_case(suffix).then(|| &s[..cut])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSelector {
    pub selector: Selector,
    pub pattern: ValuePattern,
}

/// Where each KPI lives on a dashboard page.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectorMap {
    entries: BTreeMap<Field, FieldSelector>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WebConfigError {
    UnknownField(String),
    Selector(SelectorError),
    Pattern(String),
}

impl fmt::Display for WebConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WebConfigError::UnknownField(k) => write!(f, "selector map names unknown field {k:?}"),
            WebConfigError::Selector(e) => e.fmt(f),
            WebConfigError::Pattern(t) => {
                write!(f, "value pattern {t:?} must contain {VALUE_PLACEHOLDER} exactly once")
            }
        }
    }
}

impl core::error::Error for WebConfigError {}

impl SelectorMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add an entry; validates the field key, selector syntax and pattern.
    pub fn insert(&mut self, key: &str, path: &str, pattern: Option<&str>) -> Result<(), WebConfigError> {
        let field = Field::from_key(key).ok_or_else(|| WebConfigError::UnknownField(key.to_owned()))?;
        let selector = Selector::parse(path).map_err(WebConfigError::Selector)?;
        let pattern = match pattern {
            Some(p) => ValuePattern::parse(p)?,
            None => ValuePattern::whole(),
        };
        self.entries.insert(field, FieldSelector { selector, pattern });
        Ok(())
    }

    pub fn get(&self, field: Field) -> Option<&FieldSelector> {
        self.entries.get(&field)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Field, &FieldSelector)> {
        self.entries.iter().map(|(f, s)| (*f, s))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Run every selector over the page. A selector matching nothing leaves the
/// field absent; one matching several nodes is ambiguous and fails.
pub fn extract_fields(html: &str, selectors: &SelectorMap) -> Result<RawFieldMap, CollectError> {
    let doc = Document::parse(html);
    let mut out = RawFieldMap::new();
    for (field, fs) in selectors.iter() {
        let hits = fs.selector.select(&doc);
        match hits.as_slice() {
            [] => {}
            [one] => {
                let text = doc.text_content(*one);
                let value = fs.pattern.capture(&text).ok_or_else(|| {
                    CollectError::parse(format!("{}: text {:?} does not match value pattern", field.key(), text))
                        .with_raw(html.as_bytes())
                })?;
                out.insert(field, value.to_owned());
            }
            many => {
                return Err(CollectError::parse(format!(
                    "{}: selector {} matched {} nodes",
                    field.key(),
                    fs.selector,
                    many.len()
                ))
                .with_raw(html.as_bytes()))
            }
        }
    }
    Ok(out)
}

/// Turn raw dashboard text into a WEB snapshot for `device`. Numeric grain
/// is inferred from the decimals the page shows.
pub fn parse_web_snapshot(raw: &RawFieldMap, device: &str) -> Result<KpiSnapshot, CollectError> {
    if raw.is_empty() {
        return Err(CollectError::parse("empty page"));
    }
    let mut snap = KpiSnapshot::new(Method::Web, device);
    for (&field, text) in raw {
        apply_field(&mut snap, field, text)?;
    }
    Ok(snap)
}

fn apply_field(snap: &mut KpiSnapshot, field: Field, text: &str) -> Result<(), CollectError> {
    let cell = &mut snap.cell;
    match field {
        Field::Rat => {
            if text.trim().is_empty() {
                return Err(bad(field, text));
            }
            cell.rat = Some(Rat::from_label(text));
        }
        Field::Mcc => cell.mcc = Some(parse_digits(text, field, 3..=3)?),
        Field::Mnc => cell.mnc = Some(parse_digits(text, field, 2..=3)?),
        Field::NrCellId => cell.nr_cell_id = Some(parse_uint(text, field)?),
        Field::Tac => cell.tac = Some(parse_uint(text, field)?),
        Field::Pci => cell.pci = Some(parse_pci(text)?),
        Field::Band => cell.band = Some(Band::parse(text).ok_or_else(|| bad(field, text))?),
        Field::Arfcn => cell.arfcn = Some(parse_uint(text, field)?),
        Field::FreqRangeType => {
            snap.radio.freq_range_type = Some(FreqRange::parse(text).ok_or_else(|| bad(field, text))?)
        }
        Field::Duplex => snap.radio.duplex = Some(Duplex::parse(text).ok_or_else(|| bad(field, text))?),
        Field::Rssi => {
            let (declared, slots) = parse_rssi(text, None)?;
            snap.radio.rssi_declared = Some(declared);
            snap.radio.rssi_branches = slots;
        }
        measured => {
            let v = parse_measure(text, measured, None)?;
            snap.set_value(measured, Some(v));
        }
    }
    Ok(())
}

/// Extract and parse a whole dashboard page.
pub fn parse_page(html: &str, selectors: &SelectorMap, device: &str) -> Result<KpiSnapshot, CollectError> {
    let raw = extract_fields(html, selectors)?;
    let mut snap = parse_web_snapshot(&raw, device).map_err(|e| e.or_raw(html.as_bytes()))?;
    snap.raw = html.as_bytes().to_vec();
    Ok(snap)
}

/// Text a dashboard shows for `field`, if the snapshot has it.
pub fn field_text(snap: &KpiSnapshot, field: Field) -> Option<String> {
    let c = &snap.cell;
    let r = &snap.radio;
    match field {
        Field::Rat => c.rat.as_ref().map(|r| r.raw.clone()),
        Field::Mcc => c.mcc.clone(),
        Field::Mnc => c.mnc.clone(),
        Field::NrCellId => c.nr_cell_id.map(|v| v.to_string()),
        Field::Tac => c.tac.map(|v| v.to_string()),
        Field::Pci => c.pci.map(|v| v.to_string()),
        Field::Band => c.band.map(|b| b.to_string()),
        Field::Arfcn => c.arfcn.map(|v| v.to_string()),
        Field::FreqRangeType => r.freq_range_type.map(|f| f.label().to_owned()),
        Field::Duplex => r.duplex.map(|d| d.label().to_owned()),
        Field::Rssi => snap
            .has(Field::Rssi)
            .then(|| render_rssi(r.rssi_declared.unwrap_or(0), &r.rssi_branches)),
        measured => snap.value(measured).map(|v| v.to_string()),
    }
}

/// Dashboard page layouts of the two emulated devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WebLayout {
    /// Table-based status page (CPE-A).
    StatusTable,
    /// List-based signal panel (CPE-B).
    SignalList,
}

impl WebLayout {
    pub fn for_device(device: &str) -> Option<WebLayout> {
        match device {
            CPE_A => Some(WebLayout::StatusTable),
            CPE_B => Some(WebLayout::SignalList),
            _ => None,
        }
    }

    pub fn selector_path(self, field: Field) -> String {
        match self {
            WebLayout::StatusTable => format!("//div[@id='cellular-info']//td[@id='kpi-{}']", field.key()),
            WebLayout::SignalList => {
                format!("//ul[@class='signal-list']/li/span[@id='sig-{}']", field.key())
            }
        }
    }

    /// Selector map covering every schema field for this layout.
    pub fn selector_map(self) -> SelectorMap {
        let mut map = SelectorMap::new();
        for field in Field::ALL {
            map.insert(field.key(), &self.selector_path(field), None)
                .expect("layout selectors are well-formed");
        }
        map
    }

    /// One page element per populated field, in schema order.
    pub fn render_rows(self, snap: &KpiSnapshot) -> Vec<String> {
        Field::ALL
            .into_iter()
            .filter_map(|f| field_text(snap, f).map(|t| (f, t)))
            .map(|(f, text)| {
                let text = escape(&text);
                match self {
                    WebLayout::StatusTable => format!(
                        "<tr><th>{}</th><td id=\"kpi-{}\">{}</td></tr>",
                        f.label(),
                        f.key(),
                        text
                    ),
                    WebLayout::SignalList => format!(
                        "<li><span class=\"name\">{}</span><span class=\"val\" id=\"sig-{}\">{}</span></li>",
                        f.label(),
                        f.key(),
                        text
                    ),
                }
            })
            .collect()
    }

    /// Full page around pre-rendered rows.
    pub fn wrap(self, rows: &[String]) -> String {
        let body = rows.concat();
        match self {
            WebLayout::StatusTable => format!(
                "<!DOCTYPE html>\n<html><head><title>OD-513 Status</title>\
                 <script>var refresh = 3000;</script></head>\n<body>\
                 <div id=\"nav\"><a href=\"/status\">Status</a><a href=\"/logout\">Logout</a></div>\n\
                 <div id=\"cellular-info\"><h2>Cellular Information</h2>\
                 <table class=\"status\">{body}</table></div>\n\
                 <div id=\"footer\">&copy; vendor</div></body></html>\n"
            ),
            WebLayout::SignalList => format!(
                "<!DOCTYPE html>\n<html><head><title>SRT853L</title></head>\n<body>\
                 <div class=\"menu\"><ul class=\"tabs\"><li>Home</li><li>Network</li></ul></div>\n\
                 <div class=\"panel\" id=\"signal\"><h3>Signal</h3>\
                 <ul class=\"signal-list\">{body}</ul></div>\n</body></html>\n"
            ),
        }
    }

    pub fn render_page(self, snap: &KpiSnapshot) -> String {
        self.wrap(&self.render_rows(snap))
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}
