//! JSON carpet description.
//!
//! ```json
//! {"maps": [{"a": "1/3", "b": 0.25, "c": 0, "d": 0}, ...], "tolerance": 1e-12}
//! ```
//!
//! Every number may be a JSON number, a decimal string, or an exact fraction
//! string `"p/q"`; fractions are converted by one correctly rounded division.

use serde::{Deserialize, Serialize};

use crate::carpet::{build_carpet, AffineMap, GLCarpet, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Float(f64),
    Text(String),
}

impl Number {
    pub fn value(&self) -> Result<f64> {
        match self {
            Number::Float(x) => Ok(*x),
            Number::Text(s) => parse_number(s),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapSpec {
    pub a: Number,
    pub b: Number,
    pub c: Number,
    pub d: Number,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarpetSpec {
    pub maps: Vec<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Number>,
}

impl CarpetSpec {
    pub fn from_carpet(carpet: &GLCarpet) -> Self {
        CarpetSpec {
            maps: carpet
                .maps()
                .iter()
                .map(|m| MapSpec {
                    a: Number::Float(m.a),
                    b: Number::Float(m.b),
                    c: Number::Float(m.c),
                    d: Number::Float(m.d),
                })
                .collect(),
            tolerance: Some(Number::Float(carpet.tolerance())),
        }
    }

    pub fn build(&self) -> Result<GLCarpet> {
        let maps = self
            .maps
            .iter()
            .map(|m| {
                Ok(AffineMap::new(
                    m.a.value()?,
                    m.b.value()?,
                    m.c.value()?,
                    m.d.value()?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let tol = match &self.tolerance {
            Some(t) => t.value()?,
            None => DEFAULT_TOLERANCE,
        };
        build_carpet(maps, tol)
    }
}

/// Parses `"0.25"`, `"-3"` or `"p/q"` with integer `p`, `q`.
pub fn parse_number(text: &str) -> Result<f64> {
    let s = text.trim();
    let bad = || Error::InvalidNumber(text.to_string());
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        // exact for |p|, |q| < 2^53
        return Ok(p as f64 / q as f64);
    }
    let x: f64 = s.parse().map_err(|_| bad())?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad())
    }
}

/// Parses and validates a carpet from JSON text.
///
/// Syntax errors carry serde's line/column position.
pub fn parse_carpet(json: &str) -> Result<GLCarpet> {
    let spec: CarpetSpec = serde_json::from_str(json).map_err(|e| Error::Input(e.to_string()))?;
    spec.build()
}

pub fn to_json(carpet: &GLCarpet) -> String {
    serde_json::to_string_pretty(&CarpetSpec::from_carpet(carpet)).expect("carpet serialises")
}
