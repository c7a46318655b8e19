use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::DataItem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocationPrecision {
    Precise,
    Coarse,
}

impl LocationPrecision {
    pub fn item(self) -> DataItem {
        match self {
            LocationPrecision::Precise => DataItem::PreciseLocation,
            LocationPrecision::Coarse => DataItem::CoarseLocation,
        }
    }
}

/// Digits after the decimal point, trailing zeros included.
/// Accepts an optional sign, digits and an optional fraction; nothing else.
pub fn decimal_places(text: &str) -> Result<usize> {
    let bad = || Error::Coordinate(text.to_string());
    let t = text.trim();
    let t = t.strip_prefix(['-', '+']).unwrap_or(t);
    let (int, frac) = match t.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (t, None),
    };
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) {
        return Err(bad());
    }
    match frac {
        None if !int.is_empty() => Ok(0),
        Some(f) if digits(f) && !(int.is_empty() && f.is_empty()) => Ok(f.len()),
        _ => Err(bad()),
    }
}

/// Precise iff both coordinates carry at least three decimal places.
pub fn classify_location(lat: &str, lon: &str) -> Result<LocationPrecision> {
    let places = decimal_places(lat)?.min(decimal_places(lon)?);
    Ok(if places >= 3 {
        LocationPrecision::Precise
    } else {
        LocationPrecision::Coarse
    })
}
