//! On-disk JSON format for QP instances and solver results.
//!
//! Keys appear in a fixed order:
//! `format_version, n, m, P, q, A, l, u, metadata`. Matrices are triplet
//! objects `{rows, cols, vals}` (`P` upper triangle only) and every real
//! value is a hexadecimal floating-point string such as `"-0x1.8p+1"`, so a
//! write followed by a read reproduces each double bit for bit. Plain JSON
//! numbers and decimal strings are accepted on input. Infinite bounds are
//! written as `±1e30`, and any bound of magnitude `>= 1e30` reads back as
//! infinite.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::problem::{ProblemData, ProblemError};
use crate::sparse::{CscMatrix, SparseError, INFINITY_THRESHOLD};
use crate::solver::SolveResult;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum QpioError {
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format_version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("{field} has length {found}, expected {expected}")]
    Length { field: &'static str, found: usize, expected: usize },
    #[error("{field} entry {index} at ({row}, {col}) is below the diagonal")]
    NotUpper { field: &'static str, index: usize, row: usize, col: usize },
    #[error("{field}: {source}")]
    Matrix { field: &'static str, source: SparseError },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Formats a finite or infinite double as a C99-style hex float. NaN is
/// written as `"nan"`.
pub fn format_hex(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    let (lead, e) = match (exp, mant) {
        (0, 0) => return format!("{sign}0x0p+0"),
        (0, _) => (0, -1022),
        _ => (1, exp - 1023),
    };
    let digits = format!("{mant:013x}");
    let digits = digits.trim_end_matches('0');
    if digits.is_empty() {
        format!("{sign}0x{lead}p{e:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{e:+}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid hex float `{0}`")]
pub struct HexParseError(pub String);

/// Parses a hex float. The value must be exactly representable; inputs
/// that would need rounding are rejected.
pub fn parse_hex(s: &str) -> Result<f64, HexParseError> {
    let err = || HexParseError(s.to_string());
    let t = s.trim();
    let (neg, t) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    let signed = |v: f64| if neg { -v } else { v };
    match t {
        "inf" | "infinity" => return Ok(signed(f64::INFINITY)),
        "nan" => return Ok(f64::NAN),
        _ => {}
    }
    let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).ok_or_else(err)?;
    let (body, exp) = t.split_once(['p', 'P']).ok_or_else(err)?;
    let exp: i64 = exp.parse().map_err(|_| err())?;
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    let mut mant: u128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        let d = c.to_digit(16).ok_or_else(err)? as u128;
        mant = mant.checked_mul(16).and_then(|v| v.checked_add(d)).ok_or_else(err)?;
    }
    if mant == 0 {
        return Ok(signed(0.0));
    }
    // value = mant · 2^e2
    let e2 = exp - 4 * frac_part.len() as i64;
    let top = 127 - mant.leading_zeros() as i64; // index of the highest set bit
    let unbiased = e2 + top;
    if unbiased > 1023 {
        return Err(err());
    }
    let bits = if unbiased >= -1022 {
        // normal: keep 52 bits below the leading one
        let shift = top - 52;
        let frac = if shift >= 0 {
            if mant & ((1u128 << shift) - 1) != 0 {
                return Err(err());
            }
            mant >> shift
        } else {
            mant << (-shift)
        };
        (((unbiased + 1023) as u64) << 52) | (frac as u64 & ((1u64 << 52) - 1))
    } else {
        // subnormal: value = frac · 2^-1074
        let shift = -1074 - e2;
        if shift >= 128 {
            return Err(err());
        }
        let frac = if shift >= 0 {
            if mant & ((1u128 << shift) - 1) != 0 {
                return Err(err());
            }
            mant >> shift
        } else {
            mant << (-shift)
        };
        frac as u64
    };
    Ok(signed(f64::from_bits(bits)))
}

/// A double serialized as a hex string and read from a hex string, decimal
/// string or JSON number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexF64(pub f64);

impl Serialize for HexF64 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_hex(self.0))
    }
}

impl<'de> Deserialize<'de> for HexF64 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = HexF64;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a hex float string or a number")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<HexF64, E> {
                Ok(HexF64(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<HexF64, E> {
                Ok(HexF64(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<HexF64, E> {
                Ok(HexF64(v as f64))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> Result<HexF64, E> {
                if s.trim_start_matches(['-', '+']).starts_with("0x") {
                    parse_hex(s).map(HexF64).map_err(E::custom)
                } else {
                    s.trim().parse::<f64>().map(HexF64).map_err(|_| E::custom(format!("invalid number `{s}`")))
                }
            }
        }
        deserializer.deserialize_any(V)
    }
}

fn hex_vec(v: &[f64]) -> Vec<HexF64> {
    v.iter().map(|&x| HexF64(x)).collect()
}

fn bound_vec(v: &[f64]) -> Vec<HexF64> {
    v.iter()
        .map(|&x| HexF64(if x.is_infinite() { x.signum() * INFINITY_THRESHOLD } else { x }))
        .collect()
}

fn plain(v: &[HexF64]) -> Vec<f64> {
    v.iter().map(|h| h.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletBlock {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<HexF64>,
}

impl TripletBlock {
    fn from_matrix(m: &CscMatrix) -> Self {
        let (rows, cols, vals) = m.to_triplets();
        Self { rows, cols, vals: hex_vec(&vals) }
    }

    fn to_matrix(&self, field: &'static str, nrows: usize, ncols: usize) -> Result<CscMatrix, QpioError> {
        CscMatrix::from_triplets(nrows, ncols, &self.rows, &self.cols, &plain(&self.vals), false)
            .map_err(|source| QpioError::Matrix { field, source })
    }
}

/// Provenance of a generated instance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl From<&crate::probgen::GenSpec> for Metadata {
    fn from(spec: &crate::probgen::GenSpec) -> Self {
        Self {
            class: Some(spec.class.to_string()),
            dim: Some(spec.dim),
            seed: Some(spec.seed),
            name: Some(spec.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpFile {
    pub format_version: u32,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "P")]
    pub p: TripletBlock,
    pub q: Vec<HexF64>,
    #[serde(rename = "A")]
    pub a: TripletBlock,
    pub l: Vec<HexF64>,
    pub u: Vec<HexF64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

/// A problem together with its optional metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct QpInstance {
    pub problem: ProblemData,
    pub metadata: Option<Metadata>,
}

impl QpFile {
    pub fn from_problem(problem: &ProblemData, metadata: Option<Metadata>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            n: problem.n(),
            m: problem.m(),
            p: TripletBlock::from_matrix(&problem.p),
            q: hex_vec(&problem.q),
            a: TripletBlock::from_matrix(&problem.a),
            l: bound_vec(&problem.l),
            u: bound_vec(&problem.u),
            metadata,
        }
    }

    /// Validates the file and builds the problem. Bounds must satisfy
    /// `l <= u`; the error names the first offending row.
    pub fn into_instance(self) -> Result<QpInstance, QpioError> {
        if self.format_version != FORMAT_VERSION {
            return Err(QpioError::Version { found: self.format_version });
        }
        let (n, m) = (self.n, self.m);
        for (field, found, expected) in [
            ("q", self.q.len(), n),
            ("l", self.l.len(), m),
            ("u", self.u.len(), m),
        ] {
            if found != expected {
                return Err(QpioError::Length { field, found, expected });
            }
        }
        for (k, (&r, &c)) in self.p.rows.iter().zip(&self.p.cols).enumerate() {
            if r > c {
                return Err(QpioError::NotUpper { field: "P", index: k, row: r, col: c });
            }
        }
        let p = self.p.to_matrix("P", n, n)?;
        let a = self.a.to_matrix("A", m, n)?;
        let problem = ProblemData::new(p, plain(&self.q), a, plain(&self.l), plain(&self.u))?;
        problem.check_bounds()?;
        Ok(QpInstance { problem, metadata: self.metadata })
    }
}

pub fn to_json(problem: &ProblemData, metadata: Option<Metadata>) -> Result<String, QpioError> {
    let mut s = serde_json::to_string_pretty(&QpFile::from_problem(problem, metadata))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<QpInstance, QpioError> {
    serde_json::from_str::<QpFile>(text)?.into_instance()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> QpioError + '_ {
    move |source| QpioError::Io { path: path.display().to_string(), source }
}

pub fn write_qp(problem: &ProblemData, metadata: Option<Metadata>, path: &Path) -> Result<(), QpioError> {
    fs::write(path, to_json(problem, metadata)?).map_err(io_err(path))
}

pub fn read_qp(path: &Path) -> Result<QpInstance, QpioError> {
    from_json(&fs::read_to_string(path).map_err(io_err(path))?)
}

pub fn result_to_json(result: &SolveResult) -> Result<String, QpioError> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}

pub fn write_result(result: &SolveResult, path: &Path) -> Result<(), QpioError> {
    fs::write(path, result_to_json(result)?).map_err(io_err(path))
}

pub fn read_result(path: &Path) -> Result<SolveResult, QpioError> {
    Ok(serde_json::from_str(&fs::read_to_string(path).map_err(io_err(path))?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probgen::{oracle_instance, GenSpec, ProblemClass};

    #[test]
    fn hex_format_examples() {
        assert_eq!(format_hex(1.0), "0x1p+0");
        assert_eq!(format_hex(-3.0), "-0x1.8p+1");
        assert_eq!(format_hex(0.1), "0x1.999999999999ap-4");
        assert_eq!(format_hex(0.0), "0x0p+0");
        assert_eq!(format_hex(-0.0), "-0x0p+0");
        assert_eq!(format_hex(f64::MIN_POSITIVE), "0x1p-1022");
        assert_eq!(format_hex(5e-324), "0x0.0000000000001p-1022");
        assert_eq!(format_hex(f64::MAX), "0x1.fffffffffffffp+1023");
    }

    #[test]
    fn hex_round_trip_is_bit_exact() {
        let samples = [
            0.0, -0.0, 1.0, 0.1, -2.5e-300, 5e-324, f64::from_bits(0x000f_ffff_ffff_ffff), 1e30, f64::MAX, -f64::MIN_POSITIVE,
            std::f64::consts::PI,
        ];
        for v in samples {
            let back = parse_hex(&format_hex(v)).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v:e}");
        }
    }

    #[test]
    fn hex_parse_accepts_unnormalized_forms() {
        assert_eq!(parse_hex("0x10p-4").unwrap(), 1.0);
        assert_eq!(parse_hex("0x.8p1").unwrap(), 1.0);
        assert_eq!(parse_hex("0X3P0").unwrap(), 3.0);
        assert_eq!(parse_hex("-inf").unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn hex_parse_rejects_garbage_and_inexact() {
        for bad in ["", "0x", "0xp1", "1.5", "0x1.g", "0x1p", "0x1p+1024", "0x1.00000000000001p0"] {
            assert!(parse_hex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn every_class_round_trips() {
        for c in ProblemClass::ALL {
            let prob = oracle_instance(c, 3).unwrap();
            let meta = Metadata::from(&GenSpec::new(c, 1, 3));
            let back = from_json(&to_json(&prob, Some(meta.clone())).unwrap()).unwrap();
            assert_eq!(back.problem, prob, "{c}");
            assert_eq!(back.metadata, Some(meta));
        }
    }

    #[test]
    fn keys_are_in_fixed_order() {
        let prob = oracle_instance(ProblemClass::Lasso, 0).unwrap();
        let text = to_json(&prob, Some(Metadata { name: Some("x".into()), ..Default::default() })).unwrap();
        let keys = ["\"format_version\"", "\"n\"", "\"m\"", "\"P\"", "\"q\"", "\"A\"", "\"l\"", "\"u\"", "\"metadata\""];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
    }

    fn tiny(l: &str, u: &str) -> String {
        format!(
            r#"{{"format_version": 1, "n": 1, "m": 1,
                "P": {{"rows": [0], "cols": [0], "vals": ["0x1p+0"]}}, "q": [0],
                "A": {{"rows": [0], "cols": [0], "vals": [1.0]}}, "l": [{l}], "u": [{u}]}}"#
        )
    }

    #[test]
    fn inconsistent_bounds_are_rejected_with_row() {
        let err = from_json(&tiny("1", "0")).unwrap_err();
        assert!(matches!(err, QpioError::Problem(ProblemError::InconsistentBounds { row: 0, .. })), "{err}");
        assert!(err.to_string().contains("row 0"));
    }

    #[test]
    fn large_bounds_mean_infinity_and_write_back_as_1e30() {
        let inst = from_json(&tiny("-1e30", "\"0x1.93e5939a08ceap+99\"")).unwrap();
        assert_eq!(inst.problem.l[0], f64::NEG_INFINITY);
        assert_eq!(inst.problem.u[0], f64::INFINITY);
        let text = to_json(&inst.problem, None).unwrap();
        assert_eq!(format_hex(1e30), "0x1.93e5939a08ceap+99");
        assert!(text.contains("\"-0x1.93e5939a08ceap+99\""));
        assert!(text.contains("\"0x1.93e5939a08ceap+99\""));
    }

    #[test]
    fn structural_errors_are_reported() {
        let below = tiny("0", "1").replace(r#""P": {"rows": [0], "cols": [0]"#, r#""P": {"rows": [1], "cols": [0]"#);
        assert!(from_json(&below).is_err());
        let version = tiny("0", "1").replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(matches!(from_json(&version), Err(QpioError::Version { found: 9 })));
        let short = tiny("0", "1").replace("\"q\": [0]", "\"q\": []");
        assert!(matches!(from_json(&short), Err(QpioError::Length { field: "q", .. })));
        assert!(matches!(from_json("{"), Err(QpioError::Json(_))));
    }

    #[test]
    fn files_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let prob = oracle_instance(ProblemClass::Portfolio, 1).unwrap();
        write_qp(&prob, None, &path).unwrap();
        assert_eq!(read_qp(&path).unwrap().problem, prob);
        assert!(matches!(read_qp(&dir.path().join("missing.json")), Err(QpioError::Io { .. })));
    }
}
