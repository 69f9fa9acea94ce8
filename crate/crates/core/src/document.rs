//! JSON system definition documents.
//!
//! ```json
//! {
//!   "plant": {
//!     "n": 3,
//!     "A": [[[-0.08, -0.03, 0.2], [0.2, -0.04, -0.005], [-0.06, 0.2, -0.07]]], "hA": [0],
//!     "B1": [[[-0.1], [-0.2], [0.1]]], "hB1": [5],
//!     "C1": [[[1, 0, 0], [0, 1, 0], [0, 0, 1]]], "hC1": [0]
//!   },
//!   "controller": { "n": 0, "D11": [[[0.0409, 0.0612, 0.3837]]], "hD11": [0] }
//! }
//! ```
//!
//! Each field `X` holds a list of row-major matrices and `hX` the matching
//! delays. `E`/`hE` default to the identity at delay 0; `nu`/`ny` are only
//! needed when no matrix fixes the port sizes. A `system` block describes a
//! bare DDAE (`E`, `A`, `hA`) instead of a plant. A `report` block is carried
//! along for output documents and ignored on input.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::asymptotic::StrongStabilityReport;
use crate::error::{Error, Result};
use crate::model::{interconnect, DdaeSystem, DelayTerm, DelayedTerms, IoSystem};

pub type RowMajor = Vec<Vec<f64>>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct IoBlock {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub E: Vec<RowMajor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hE: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub A: Vec<RowMajor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hA: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub B1: Vec<RowMajor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hB1: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub C1: Vec<RowMajor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hC1: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub D11: Vec<RowMajor>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hD11: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct DdaeBlock {
    pub E: RowMajor,
    pub A: Vec<RowMajor>,
    pub hA: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<IoBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<IoBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<DdaeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<StrongStabilityReport>,
}

fn matrix(rows: &RowMajor, what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 {
        return Err(Error::Document(format!("{what}: empty matrix")));
    }
    if let Some(i) = rows.iter().position(|row| row.len() != c) {
        return Err(Error::Document(format!(
            "{what}: row {i} has {} entries, expected {c}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> RowMajor {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn terms(mats: &[RowMajor], delays: &[f64], what: &str) -> Result<DelayedTerms> {
    if mats.len() != delays.len() {
        return Err(Error::Document(format!(
            "{what}: {} matrices but h{what} lists {} delays",
            mats.len(),
            delays.len()
        )));
    }
    let matrices = mats
        .iter()
        .enumerate()
        .map(|(i, m)| matrix(m, &format!("{what}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    DelayedTerms::new(matrices, delays.to_vec())
}

fn block_terms(t: &DelayedTerms) -> (Vec<RowMajor>, Vec<f64>) {
    (t.matrices.iter().map(to_rows).collect(), t.delays.clone())
}

impl IoBlock {
    /// `ports` supplies `(n_in, n_out)` when the block itself cannot fix them.
    pub fn to_io_system(&self, ports: Option<(usize, usize)>) -> Result<IoSystem> {
        let a = terms(&self.A, &self.hA, "A")?;
        let b1 = terms(&self.B1, &self.hB1, "B1")?;
        let c1 = terms(&self.C1, &self.hC1, "C1")?;
        let d11 = terms(&self.D11, &self.hD11, "D11")?;
        let e = match self.E.len() {
            0 => None,
            1 => {
                if self.hE.iter().any(|&h| h != 0.0) {
                    return Err(Error::Document("hE must be 0".into()));
                }
                Some(matrix(&self.E[0], "E")?)
            }
            _ => return Err(Error::Document("only one E matrix is supported".into())),
        };
        let n_in = self
            .nu
            .or_else(|| b1.matrices.first().or(d11.matrices.first()).map(|m| m.ncols()))
            .or(ports.map(|p| p.0))
            .unwrap_or(0);
        let n_out = self
            .ny
            .or_else(|| c1.matrices.first().or(d11.matrices.first()).map(|m| m.nrows()))
            .or(ports.map(|p| p.1))
            .unwrap_or(0);
        IoSystem::new((self.n, n_in, n_out), e, a, b1, c1, d11)
    }

    pub fn from_io_system(sys: &IoSystem) -> Self {
        let (a, ha) = block_terms(&sys.a);
        let (b1, hb1) = block_terms(&sys.b1);
        let (c1, hc1) = block_terms(&sys.c1);
        let (d11, hd11) = block_terms(&sys.d11);
        let identity = DMatrix::identity(sys.n_state(), sys.n_state());
        let (e, he) = if sys.n_state() == 0 || sys.e == identity {
            (Vec::new(), Vec::new())
        } else {
            (vec![to_rows(&sys.e)], vec![0.0])
        };
        Self {
            n: sys.n_state(),
            nu: Some(sys.n_inputs()),
            ny: Some(sys.n_outputs()),
            E: e,
            hE: he,
            A: a,
            hA: ha,
            B1: b1,
            hB1: hb1,
            C1: c1,
            hC1: hc1,
            D11: d11,
            hD11: hd11,
        }
    }
}

impl SystemDocument {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Indented JSON with matrix rows kept on one line.
    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        let mut out = String::new();
        write_value(&value, 0, &mut out);
        out.push('\n');
        Ok(out)
    }

    pub fn plant(&self) -> Result<Option<IoSystem>> {
        self.plant.as_ref().map(|b| b.to_io_system(None)).transpose()
    }

    pub fn controller(&self) -> Result<Option<IoSystem>> {
        let plant = self.plant()?;
        let ports = plant.as_ref().map(|p| (p.n_outputs(), p.n_inputs()));
        self.controller.as_ref().map(|b| b.to_io_system(ports)).transpose()
    }

    /// The DDAE described by the document: the `system` block, or the plant
    /// closed with its controller (a zero static gain when none is given).
    pub fn ddae(&self) -> Result<DdaeSystem> {
        if let Some(sys) = &self.system {
            if self.plant.is_some() {
                return Err(Error::Document("give either `system` or `plant`, not both".into()));
            }
            let e = matrix(&sys.E, "E")?;
            let a = terms(&sys.A, &sys.hA, "A")?;
            return DdaeSystem::from_terms(
                e,
                a.matrices
                    .into_iter()
                    .zip(a.delays)
                    .map(|(matrix, delay)| DelayTerm { delay, matrix }),
            );
        }
        let plant = self
            .plant()?
            .ok_or_else(|| Error::Document("missing `plant` (or `system`) block".into()))?;
        let controller = match self.controller()? {
            Some(c) => c,
            None => IoSystem::static_gain(DMatrix::zeros(plant.n_inputs(), plant.n_outputs())),
        };
        interconnect(&plant, &controller)
    }

    pub fn with_plant(plant: &IoSystem, controller: Option<&IoSystem>) -> Self {
        Self {
            plant: Some(IoBlock::from_io_system(plant)),
            controller: controller.map(IoBlock::from_io_system),
            system: None,
            report: None,
        }
    }
}

fn write_value(v: &serde_json::Value, depth: usize, out: &mut String) {
    use serde_json::Value;
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Array(items) if items.iter().any(|x| x.is_array() || x.is_object()) => {
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(Value::to_string).collect();
            out.push('[');
            out.push_str(&parts.join(", "));
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub mod extended_float {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct FloatVisitor;

    impl Visitor<'_> for FloatVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(FloatVisitor)
    }
}
