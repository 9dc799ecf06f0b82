//! Token helpers shared by the web and AT parsers.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::vec::Vec;

use crate::error::CollectError;
use crate::model::{parse_shown_decimal, Field};
use crate::value::{Grain, MeasurementValue, Unit};

/// Parse `<number>[ <unit>]`. With `grain = None` the grain comes from the
/// decimals shown; otherwise the number must be an exact multiple of it.
pub fn parse_measure(text: &str, field: Field, grain: Option<Grain>) -> Result<MeasurementValue, CollectError> {
    let unit = field.unit();
    let text = text.trim();
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || c == '-' || c == '+' || c == '.'))
        .unwrap_or(text.len());
    let (number, suffix) = text.split_at(split);
    let suffix = suffix.trim();
    if !suffix.is_empty() && !(unit != Unit::None && suffix.eq_ignore_ascii_case(unit.label())) {
        return Err(CollectError::parse(format!(
            "{}: unexpected unit {:?} in {:?}",
            field.key(),
            suffix,
            text
        ))
        .with_raw(text.as_bytes()));
    }
    let parsed = match grain {
        Some(g) => MeasurementValue::parse_decimal(number, g, unit),
        None => parse_shown_decimal(number, unit),
    };
    parsed.map_err(|e| {
        CollectError::parse(format!("{}: {} in {:?}", field.key(), e, text)).with_raw(text.as_bytes())
    })
}

pub fn parse_uint<T: core::str::FromStr>(text: &str, field: Field) -> Result<T, CollectError> {
    let t = text.trim();
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad(field, text));
    }
    t.parse().map_err(|_| bad(field, text))
}

pub fn parse_pci(text: &str) -> Result<u16, CollectError> {
    let pci: u16 = parse_uint(text, Field::Pci)?;
    if pci > crate::coverage::PCI_MAX {
        return Err(bad(Field::Pci, text));
    }
    Ok(pci)
}

pub fn parse_digits(text: &str, field: Field, lengths: core::ops::RangeInclusive<usize>) -> Result<alloc::string::String, CollectError> {
    let t = text.trim();
    if !lengths.contains(&t.len()) || !t.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad(field, text));
    }
    Ok(t.to_owned())
}

pub fn bad(field: Field, text: &str) -> CollectError {
    CollectError::parse(format!("{}: malformed value {:?}", field.key(), text)).with_raw(text.as_bytes())
}

/// RSSI cell: `<count> (<slot>, <slot>, ...)` with blank slots allowed.
/// Slots are kept verbatim unless every slot is blank.
pub fn parse_rssi(
    text: &str,
    grain: Option<Grain>,
) -> Result<(u8, Vec<Option<MeasurementValue>>), CollectError> {
    let t = text.trim();
    let open = t.find('(').ok_or_else(|| bad(Field::Rssi, text))?;
    let inner = t[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| bad(Field::Rssi, text))?;
    let declared: u8 = parse_uint(&t[..open], Field::Rssi)?;
    let mut slots = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            slots.push(None);
        } else {
            slots.push(Some(parse_measure(part, Field::Rssi, grain)?));
        }
    }
    if slots.iter().all(Option::is_none) {
        slots.clear();
    } else if declared as usize > slots.len() {
        return Err(CollectError::parse(format!(
            "rssi: declared {declared} branches but only {} slots in {text:?}",
            slots.len()
        ))
        .with_raw(text.as_bytes()));
    }
    Ok((declared, slots))
}

/// Inverse of [`parse_rssi`]. Empty lists render as four blank slots.
pub fn render_rssi(declared: u8, slots: &[Option<MeasurementValue>]) -> alloc::string::String {
    if slots.is_empty() {
        return format!("{declared} ( , , , )");
    }
    let parts: Vec<_> = slots
        .iter()
        .map(|s| s.as_ref().map(|v| format!("{v}")).unwrap_or_default())
        .collect();
    format!("{declared} ({})", parts.join(", "))
}
