//! Moment files: a canonical JSON layout for [`MomentSequence`].
//!
//! ```json
//! {
//!   "dimension": 1,
//!   "max_degree": 2,
//!   "basis": "monomial",
//!   "label": "uniform:0:1",
//!   "entries": [
//!     {"alpha": [0], "value": 1.0000000000000000e0},
//!     ...
//!   ]
//! }
//! ```
//!
//! Entries are written in graded-lexicographic order of `α` and values with
//! 17 significant digits, so writing a file that was just read reproduces it
//! byte for byte. Readers accept any entry order and any JSON number format.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::moments::MomentSequence;
use crate::multi_index::{enumerate_basis, MultiIndex};

pub const MONOMIAL_BASIS: &str = "monomial";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    dimension: usize,
    max_degree: usize,
    basis: String,
    #[serde(default)]
    label: String,
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    alpha: Vec<u32>,
    value: f64,
}

/// Formats `x` with 17 significant digits in a JSON-compatible exponent form.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        // keeps the sign of negative zero out of canonical files
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

pub fn to_json_string(z: &MomentSequence) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"dimension\": {},", z.dim());
    let _ = writeln!(out, "  \"max_degree\": {},", z.max_degree());
    let _ = writeln!(out, "  \"basis\": \"{MONOMIAL_BASIS}\",");
    let label = serde_json::to_string(z.label()).expect("strings serialize");
    let _ = writeln!(out, "  \"label\": {label},");
    out.push_str("  \"entries\": [\n");
    let len = z.len();
    for (i, (alpha, value)) in z.iter().enumerate() {
        let exps: Vec<String> = alpha.exponents().iter().map(|e| e.to_string()).collect();
        let sep = if i + 1 < len { "," } else { "" };
        let _ = writeln!(out, "    {{\"alpha\": [{}], \"value\": {}}}{sep}", exps.join(", "), format_float(value));
    }
    out.push_str("  ]\n}\n");
    out
}

pub fn from_json_str(text: &str) -> Result<MomentSequence> {
    let raw: RawFile = serde_json::from_str(text)?;
    if raw.basis != MONOMIAL_BASIS {
        return Err(Error::InvalidFile(format!("basis must be \"{MONOMIAL_BASIS}\", got \"{}\"", raw.basis)));
    }
    if raw.dimension == 0 {
        return Err(Error::InvalidFile("dimension must be at least 1".into()));
    }
    let indexer = enumerate_basis(raw.dimension, raw.max_degree);
    let mut values = vec![None; indexer.len()];
    for e in &raw.entries {
        if e.alpha.len() != raw.dimension {
            return Err(Error::InvalidFile(format!(
                "multi-index {:?} has {} entries, dimension is {}",
                e.alpha,
                e.alpha.len(),
                raw.dimension
            )));
        }
        let alpha = MultiIndex::new(e.alpha.clone());
        let idx = indexer.index_of(&alpha).ok_or_else(|| {
            Error::InvalidFile(format!("multi-index {alpha} exceeds max_degree {}", raw.max_degree))
        })?;
        if !e.value.is_finite() {
            return Err(Error::InvalidFile(format!("value for {alpha} is not finite")));
        }
        if values[idx].replace(e.value).is_some() {
            return Err(Error::InvalidFile(format!("multi-index {alpha} appears more than once")));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::InvalidFile(format!("missing multi-index {}", indexer.get(i)))))
        .collect::<Result<Vec<_>>>()?;
    MomentSequence::new(raw.dimension, raw.max_degree, values, raw.label)
}

pub fn read_moment_file(path: impl AsRef<Path>) -> Result<MomentSequence> {
    from_json_str(&std::fs::read_to_string(path)?)
}

pub fn write_moment_file(path: impl AsRef<Path>, z: &MomentSequence) -> Result<()> {
    std::fs::write(path, to_json_string(z))?;
    Ok(())
}
