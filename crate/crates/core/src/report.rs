//! Residual bookkeeping and decimal-string serialization.
//!
//! Every verification routine reports named residuals in a common shape:
//! the raw defect, the defect relative to the largest additive term of
//! the identity (identities here mix scales that grow with n, so a plain
//! relative error against the left side would be meaningless), and that
//! scale itself. All numeric output is decimal strings at a requested
//! digit count; binary floats never cross a serialization boundary.

use rug::Float;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::Real;

/// One verified identity at one (n, x).
#[derive(Clone, Debug)]
pub struct ResidualRecord {
    pub identity: String,
    pub n: Option<usize>,
    pub x: Option<Real>,
    pub abs: Real,
    pub rel: Real,
    pub scale: Real,
}

#[derive(Clone, Debug, Default)]
pub struct ResidualReport {
    pub records: Vec<ResidualRecord>,
}

impl ResidualReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        identity: impl Into<String>,
        n: Option<usize>,
        x: Option<Real>,
        abs: Real,
        rel: Real,
        scale: Real,
    ) {
        self.records.push(ResidualRecord {
            identity: identity.into(),
            n,
            x,
            abs,
            rel,
            scale,
        });
    }

    pub fn merge(&mut self, other: ResidualReport) {
        self.records.extend(other.records);
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Largest relative residual in the report.
    pub fn max_rel(&self) -> Option<Real> {
        self.records
            .iter()
            .map(|r| r.rel.clone())
            .reduce(|a, b| if b > a { b } else { a })
    }

    /// Record with the largest relative residual.
    pub fn worst(&self) -> Option<&ResidualRecord> {
        self.records.iter().max_by(|a, b| {
            a.rel
                .partial_cmp(&b.rel)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    }

    /// Records grouped per (n, x); each group maps identity name to
    /// {abs, rel, scale} as decimal strings.
    pub fn to_json(&self, digits: usize) -> Value {
        type GroupKey = (Option<usize>, Option<String>);
        let mut groups: Vec<(GroupKey, serde_json::Map<String, Value>)> = Vec::new();
        for r in &self.records {
            let key = (r.n, r.x.as_ref().map(|x| dec(x, digits)));
            let entry = json!({
                "abs": dec(&r.abs, digits),
                "rel": dec(&r.rel, digits),
                "scale": dec(&r.scale, digits),
            });
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, map)) => {
                    map.insert(r.identity.clone(), entry);
                }
                None => {
                    let mut map = serde_json::Map::new();
                    map.insert(r.identity.clone(), entry);
                    groups.push((key, map));
                }
            }
        }
        Value::Array(
            groups
                .into_iter()
                .map(|((n, x), map)| {
                    json!({
                        "n": n,
                        "x": x,
                        "residuals": Value::Object(map),
                    })
                })
                .collect(),
        )
    }
}

/// abs / rel / scale of Σ lhs_terms − Σ rhs_terms, the relative part
/// normalized by the largest |term| on either side.
pub(crate) fn residual_parts(
    bits: u32,
    lhs_terms: &[Real],
    rhs_terms: &[Real],
) -> (Real, Real, Real) {
    let mut lhs = Float::new(bits);
    for t in lhs_terms {
        lhs += t;
    }
    let mut rhs = Float::new(bits);
    for t in rhs_terms {
        rhs += t;
    }
    let mut scale = Float::new(bits);
    for t in lhs_terms.iter().chain(rhs_terms) {
        let m = t.clone().abs();
        if m > scale {
            scale = m;
        }
    }
    let abs = Float::with_val(bits, &lhs - &rhs).abs();
    let rel = if scale > 0u32 {
        Float::with_val(bits, &abs / &scale)
    } else {
        abs.clone()
    };
    (abs, rel, scale)
}

/// Decimal string with `digits` significant digits, normalized to
/// `d.ddd...e±k`. Deterministic for a given value and digit count.
pub fn dec(x: &Real, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x.is_sign_negative() {
            "-inf".into()
        } else {
            "inf".into()
        };
    }
    let (neg, mant, exp) = x.to_sign_string_exp(10, Some(digits.max(2)));
    if mant.chars().all(|c| c == '0') {
        return "0".into();
    }
    let sign = if neg { "-" } else { "" };
    let exp10 = exp.unwrap_or(0) - 1;
    let (head, tail) = mant.split_at(1);
    format!("{sign}{head}.{tail}e{exp10}")
}

/// Parses a decimal string produced by [`dec`] (or any MPFR-acceptable
/// decimal form) at the given mantissa precision.
pub fn parse_real(s: &str, bits: u32) -> Result<Real> {
    let incomplete =
        Float::parse(s).map_err(|e| Error::Domain(format!("bad decimal string {s:?}: {e}")))?;
    Ok(Float::with_val(bits, incomplete))
}

/// FNV-1a over serialized table content; used for report provenance.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
