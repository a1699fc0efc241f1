//! JSON operator documents: exact rationals as strings, never floats.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use ovjordan::opmatrix::OpMatrix;
use ovjordan::partition::Partition;
use ovjordan::piecewise::PiecewiseRational;
use ovjordan::poly::Poly;
use ovjordan::ratfunc::RatFunc;
use ovjordan::rational::Gq;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

pub const SCHEMA: &str = "ovjordan/1";

/// A coefficient: a rational string "p/q" or a complex pair of them.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Coefficient {
    Real(String),
    Complex { re: String, im: String },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CellFunction {
    pub num: Vec<Coefficient>,
    pub den: Vec<Coefficient>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Interval {
    pub a: String,
    pub b: String,
}

/// Serialized operator matrix: per entry (row-major), one rational function
/// per cell of the partition.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OperatorDocument {
    pub schema: String,
    pub lambda: Interval,
    pub partition: Vec<String>,
    pub n: usize,
    pub entries: Vec<Vec<CellFunction>>,
}

#[derive(Debug)]
pub struct ParseError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ParseError {}

fn parse_rational(s: &str, path: &str) -> Result<BigRational, ParseError> {
    let s = s.trim();
    let make_err = |m: String| ParseError {
        path: path.to_string(),
        message: m,
    };
    if let Some((p, q)) = s.split_once('/') {
        let num = BigInt::from_str(p.trim())
            .map_err(|e| make_err(format!("bad numerator '{}': {}", p, e)))?;
        let den = BigInt::from_str(q.trim())
            .map_err(|e| make_err(format!("bad denominator '{}': {}", q, e)))?;
        if den.is_zero() {
            return Err(make_err("zero denominator".into()));
        }
        Ok(BigRational::new(num, den))
    } else {
        let num =
            BigInt::from_str(s).map_err(|e| make_err(format!("not a rational '{}': {}", s, e)))?;
        Ok(BigRational::from_integer(num))
    }
}

fn parse_coefficient(c: &Coefficient, path: &str) -> Result<Gq, ParseError> {
    match c {
        Coefficient::Real(s) => Ok(Gq::from_rational(parse_rational(s, path)?)),
        Coefficient::Complex { re, im } => Ok(Gq::new(
            parse_rational(re, &format!("{}.re", path))?,
            parse_rational(im, &format!("{}.im", path))?,
        )),
    }
}

fn emit_rational(r: &BigRational) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn emit_coefficient(c: &Gq) -> Coefficient {
    if c.is_real() {
        Coefficient::Real(emit_rational(&c.re))
    } else {
        Coefficient::Complex {
            re: emit_rational(&c.re),
            im: emit_rational(&c.im),
        }
    }
}

pub fn emit_ratfunc(f: &RatFunc) -> CellFunction {
    CellFunction {
        num: f.num().coeffs().iter().map(emit_coefficient).collect(),
        den: f.den().coeffs().iter().map(emit_coefficient).collect(),
    }
}

fn parse_poly(cs: &[Coefficient], path: &str) -> Result<Poly, ParseError> {
    let mut out = Vec::with_capacity(cs.len());
    for (k, c) in cs.iter().enumerate() {
        out.push(parse_coefficient(c, &format!("{}[{}]", path, k))?);
    }
    Ok(Poly::new(out))
}

pub fn parse_cell_function(cf: &CellFunction, path: &str) -> Result<RatFunc, ParseError> {
    let num = parse_poly(&cf.num, &format!("{}.num", path))?;
    let den = parse_poly(&cf.den, &format!("{}.den", path))?;
    if den.is_zero() {
        return Err(ParseError {
            path: format!("{}.den", path),
            message: "denominator polynomial is zero".into(),
        });
    }
    Ok(RatFunc::new(num, den))
}

/// Parse a document into an exact operator matrix.
pub fn parse_document(doc: &OperatorDocument) -> Result<OpMatrix, ParseError> {
    if doc.schema != SCHEMA {
        return Err(ParseError {
            path: "schema".into(),
            message: format!("expected '{}', found '{}'", SCHEMA, doc.schema),
        });
    }
    let a = parse_rational(&doc.lambda.a, "lambda.a")?;
    let b = parse_rational(&doc.lambda.b, "lambda.b")?;
    let mut points = Vec::with_capacity(doc.partition.len());
    for (k, p) in doc.partition.iter().enumerate() {
        points.push(parse_rational(p, &format!("partition[{}]", k))?);
    }
    if points.first() != Some(&a) || points.last() != Some(&b) {
        return Err(ParseError {
            path: "partition".into(),
            message: "endpoints must match lambda.a and lambda.b".into(),
        });
    }
    let partition = Partition::new(points).map_err(|e| ParseError {
        path: "partition".into(),
        message: e.to_string(),
    })?;
    if doc.n == 0 {
        return Err(ParseError {
            path: "n".into(),
            message: "dimension must be positive".into(),
        });
    }
    if doc.entries.len() != doc.n * doc.n {
        return Err(ParseError {
            path: "entries".into(),
            message: format!(
                "expected {} entries, found {}",
                doc.n * doc.n,
                doc.entries.len()
            ),
        });
    }
    let cells = partition.cell_count();
    let mut entries = Vec::with_capacity(doc.entries.len());
    for (k, entry) in doc.entries.iter().enumerate() {
        let path = format!("entries[{}]", k);
        if entry.len() != cells {
            return Err(ParseError {
                path,
                message: format!("expected {} cell functions, found {}", cells, entry.len()),
            });
        }
        let mut fns = Vec::with_capacity(cells);
        for (ci, cf) in entry.iter().enumerate() {
            fns.push(parse_cell_function(cf, &format!("{}[{}]", path, ci))?);
        }
        entries.push(
            PiecewiseRational::new(partition.clone(), fns).map_err(|e| ParseError {
                path,
                message: e.to_string(),
            })?,
        );
    }
    OpMatrix::new(doc.n, entries).map_err(|e| ParseError {
        path: "entries".into(),
        message: e.to_string(),
    })
}

/// Serialize an operator matrix into a document (cells in partition order).
pub fn emit_document(m: &OpMatrix) -> OperatorDocument {
    let part = m.partition();
    OperatorDocument {
        schema: SCHEMA.to_string(),
        lambda: Interval {
            a: emit_rational(part.a()),
            b: emit_rational(part.b()),
        },
        partition: part.points().iter().map(emit_rational).collect(),
        n: m.n(),
        entries: (0..m.n() * m.n())
            .map(|k| {
                let (i, j) = (k / m.n(), k % m.n());
                m.entry(i, j).cells().iter().map(emit_ratfunc).collect()
            })
            .collect(),
    }
}

pub fn emit_rational_str(r: &BigRational) -> String {
    emit_rational(r)
}

/// Compact display of a rational function for text reports.
pub fn display_ratfunc(f: &RatFunc) -> String {
    format!("{:?}", f)
}
