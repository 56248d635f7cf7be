//! JSON and CSV formats.
//!
//! - matrix: `{"dim": d, "re": [[..]], "im": [[..]]}` (`im` optional)
//! - vector: `{"re": [..], "im": [..]}` (`im` optional)
//! - sequence: `{"dim": d, "lo": n, "values": [[[re..], [im..]], ..]}`, one
//!   `[re, im]` pair per index starting at `lo`
//! - circle function: `{"rho": r, "samples": [[[re..], [im..]], ..]}`
//! - stencil: `{"kernel": name, ..parameters, "forcing": sequence?}`

use std::io::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::manifold::{ManifoldSettings, SweepRow};
use crate::operator::BoundedOperator;
use crate::sequence::WindowedSequence;
use crate::stencil::{Kernel, ScalarFn, StencilMap};
use crate::transform::CircleFunction;
use crate::{c64, CMatrix, CVector};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::InvalidInput("matrix dim must be >= 1".into()));
        }
        let check = |rows: &Vec<Vec<f64>>, part: &str| -> Result<()> {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(Error::InvalidInput(format!("matrix {part} part is not {d}x{d}")));
            }
            Ok(())
        };
        check(&self.re, "re")?;
        if let Some(im) = &self.im {
            check(im, "im")?;
        }
        Ok(CMatrix::from_fn(d, d, |i, j| {
            c64(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))
        }))
    }

    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = |f: fn(&crate::Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        Self {
            dim: m.nrows(),
            re: rows(|z| z.re),
            im: Some(rows(|z| z.im)),
        }
    }
}

impl Serialize for BoundedOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(self.entries()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoundedOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = MatrixJson::deserialize(d)?;
        m.to_matrix()
            .and_then(BoundedOperator::new)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorJson {
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

impl VectorJson {
    pub fn to_vector(&self) -> Result<CVector> {
        if self.re.is_empty() {
            return Err(Error::InvalidInput("vector must be non-empty".into()));
        }
        if let Some(im) = &self.im {
            if im.len() != self.re.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.re.len(),
                    actual: im.len(),
                });
            }
        }
        let v = CVector::from_fn(self.re.len(), |i, _| {
            c64(self.re[i], self.im.as_ref().map_or(0.0, |im| im[i]))
        });
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("vector entry"));
        }
        Ok(v)
    }

    pub fn from_vector(v: &CVector) -> Self {
        Self {
            re: v.iter().map(|z| z.re).collect(),
            im: Some(v.iter().map(|z| z.im).collect()),
        }
    }
}

/// `serialize_with` helper writing a vector as `{"re", "im"}`.
pub fn ser_vector<S: Serializer>(v: &CVector, s: S) -> std::result::Result<S::Ok, S::Error> {
    VectorJson::from_vector(v).serialize(s)
}

/// `serialize_with` helper for optional vectors.
pub fn ser_opt_vector<S: Serializer>(v: &Option<CVector>, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.as_ref().map(VectorJson::from_vector).serialize(s)
}

fn pair(v: &CVector) -> [Vec<f64>; 2] {
    [v.iter().map(|z| z.re).collect(), v.iter().map(|z| z.im).collect()]
}

fn unpair(p: &[Vec<f64>; 2], dim: usize) -> Result<CVector> {
    if p[0].len() != dim || p[1].len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: if p[0].len() != dim { p[0].len() } else { p[1].len() },
        });
    }
    Ok(CVector::from_fn(dim, |i, _| c64(p[0][i], p[1][i])))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceJson {
    pub dim: usize,
    pub lo: i64,
    pub values: Vec<[Vec<f64>; 2]>,
}

impl SequenceJson {
    pub fn to_sequence(&self) -> Result<WindowedSequence> {
        let values = self
            .values
            .iter()
            .map(|p| unpair(p, self.dim))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return crate::sequence::embed_one_sided(self.dim, self.lo, &[]);
        }
        WindowedSequence::new(self.dim, self.lo, values)
    }

    pub fn from_sequence(u: &WindowedSequence) -> Self {
        Self {
            dim: u.dim(),
            lo: u.lo(),
            values: u.values().iter().map(pair).collect(),
        }
    }
}

impl Serialize for WindowedSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SequenceJson::from_sequence(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for WindowedSequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        SequenceJson::deserialize(d)?
            .to_sequence()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircleFunctionJson {
    pub rho: f64,
    pub samples: Vec<[Vec<f64>; 2]>,
}

impl CircleFunctionJson {
    pub fn from_circle(f: &CircleFunction) -> Self {
        Self {
            rho: f.rho(),
            samples: f.samples().iter().map(pair).collect(),
        }
    }

    pub fn to_circle(&self) -> Result<CircleFunction> {
        let dim = self
            .samples
            .first()
            .map(|p| p[0].len())
            .ok_or_else(|| Error::InvalidInput("circle function needs samples".into()))?;
        let samples = self
            .samples
            .iter()
            .map(|p| unpair(p, dim))
            .collect::<Result<Vec<_>>>()?;
        CircleFunction::new(self.rho, dim, samples)
    }
}

impl Serialize for CircleFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CircleFunctionJson::from_circle(self).serialize(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum KernelJson {
    Zero {
        dim: usize,
    },
    Linear {
        b: MatrixJson,
        #[serde(default)]
        lag: usize,
    },
    Saturation {
        eps: f64,
        /// All-ones coupling when absent.
        #[serde(default)]
        coupling: Option<MatrixJson>,
        #[serde(default)]
        dim: Option<usize>,
    },
    PolynomialClipped {
        dim: usize,
        coeffs: Vec<f64>,
        clip_radius: f64,
    },
    ImplicitEuler {
        dim: usize,
        h: f64,
        f: ScalarFn,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StencilJson {
    #[serde(flatten)]
    pub kernel: KernelJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<SequenceJson>,
}

impl StencilJson {
    pub fn to_stencil(&self) -> Result<StencilMap> {
        let map = match &self.kernel {
            KernelJson::Zero { dim } => StencilMap::new(*dim, Kernel::Zero)?,
            KernelJson::Linear { b, lag } => {
                let b = b.to_matrix()?;
                StencilMap::new(b.nrows(), Kernel::Linear { b, lag: *lag })?
            }
            KernelJson::Saturation { eps, coupling, dim } => match coupling {
                Some(c) => {
                    let c = c.to_matrix()?;
                    if let Some(d) = dim {
                        if *d != c.nrows() {
                            return Err(Error::DimensionMismatch {
                                expected: *d,
                                actual: c.nrows(),
                            });
                        }
                    }
                    StencilMap::new(c.nrows(), Kernel::Saturation { eps: *eps, coupling: c })?
                }
                None => {
                    let d = dim.ok_or_else(|| {
                        Error::InvalidInput("saturation kernel needs \"dim\" or \"coupling\"".into())
                    })?;
                    StencilMap::saturation(d, *eps)?
                }
            },
            KernelJson::PolynomialClipped {
                dim,
                coeffs,
                clip_radius,
            } => StencilMap::new(
                *dim,
                Kernel::PolynomialClipped {
                    coeffs: coeffs.clone(),
                    clip_radius: *clip_radius,
                },
            )?,
            KernelJson::ImplicitEuler { dim, h, f } => {
                StencilMap::new(*dim, Kernel::ImplicitEuler { h: *h, f: f.clone() })?
            }
        };
        match &self.forcing {
            Some(g) => map.with_forcing(g.to_sequence()?),
            None => Ok(map),
        }
    }
}

/// Manifold problem file: operator, nonlinearity and optional knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldProblemJson {
    #[serde(rename = "A")]
    pub a: MatrixJson,
    #[serde(rename = "F")]
    pub f: StencilJson,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub fp_tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub window: Option<usize>,
}

impl ManifoldProblemJson {
    pub fn settings(&self) -> ManifoldSettings {
        let mut s = ManifoldSettings {
            rho: self.rho,
            window: self.window,
            ..ManifoldSettings::default()
        };
        if let Some(t) = self.fp_tol {
            s.fp_tol = t;
        }
        if let Some(m) = self.max_iter {
            s.max_iter = m;
        }
        s
    }
}

/// Parses JSON, mapping syntax errors to [`Error::InvalidInput`].
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("{what}: {e}")))
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("csv output: {e}"))
}

/// Shortest round-trip form, with an exponent for very small or large values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Rows `n,component,re,im` over the stored window.
pub fn write_sequence_csv(u: &WindowedSequence, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "component", "re", "im"]).map_err(csv_err)?;
    for (i, v) in u.values().iter().enumerate() {
        let n = u.lo() + i as i64;
        for (c, z) in v.iter().enumerate() {
            w.write_record([n.to_string(), c.to_string(), num(z.re), num(z.im)])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(csv_err)
}

/// Rows `theta,abs`.
pub fn write_profile_csv(profile: &[(f64, f64)], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta", "abs"]).map_err(csv_err)?;
    for (t, a) in profile {
        w.write_record([num(*t), num(*a)]).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Columns `xi_re_i, xi_im_i, eta_re_i, eta_im_i, decay_rate, iterations,
/// residual, error`; failed rows leave the numeric columns empty.
pub fn write_sweep_csv(rows: &[SweepRow], dim: usize, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = Vec::new();
    for name in ["xi", "eta"] {
        for i in 0..dim {
            header.push(format!("{name}_re_{i}"));
            header.push(format!("{name}_im_{i}"));
        }
    }
    header.extend(["decay_rate", "iterations", "residual", "error"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut rec = Vec::with_capacity(header.len());
        for z in row.xi.iter() {
            rec.push(num(z.re));
            rec.push(num(z.im));
        }
        match &row.eta {
            Some(eta) => {
                for z in eta.iter() {
                    rec.push(num(z.re));
                    rec.push(num(z.im));
                }
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 2 * dim)),
        }
        rec.push(row.decay_rate.map_or(String::new(), num));
        rec.push(row.iterations.map_or(String::new(), |x| x.to_string()));
        rec.push(row.residual.map_or(String::new(), num));
        rec.push(row.error.as_ref().map_or(String::new(), |e| e.code.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let text = r#"{"dim": 2, "re": [[0.5, 1.0], [0.0, 2.0]]}"#;
        let a: BoundedOperator = serde_json::from_str(text).unwrap();
        assert_eq!(a.entries()[(0, 1)], c64(1.0, 0.0));
        let back: BoundedOperator = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, back);
        assert!(serde_json::from_str::<BoundedOperator>(r#"{"dim": 2, "re": [[1.0]]}"#).is_err());
    }

    #[test]
    fn sequence_round_trip() {
        let u = WindowedSequence::from_fn(2, -1, 1, |k| CVector::from_vec(vec![c64(k as f64, 1.0), c64(0.5, -(k as f64))]));
        let text = serde_json::to_string(&u).unwrap();
        let back: WindowedSequence = serde_json::from_str(&text).unwrap();
        assert_eq!(u, back);
        let z: WindowedSequence = serde_json::from_str(r#"{"dim": 3, "lo": 4, "values": []}"#).unwrap();
        assert!(z.is_zero() && z.dim() == 3);
    }

    #[test]
    fn stencil_parsing() {
        let s: StencilJson = serde_json::from_str(r#"{"kernel": "saturation", "eps": 0.01, "dim": 2}"#).unwrap();
        let f = s.to_stencil().unwrap();
        assert!((f.lip_bound(1.0) - 0.02).abs() < 1e-15);
        let s: StencilJson = serde_json::from_str(
            r#"{"kernel": "implicit_euler", "dim": 1, "h": 0.1, "f": {"name": "linear", "lambda": -1.0},
                "forcing": {"dim": 1, "lo": -1, "values": [[[1.0], [0.0]]]}}"#,
        )
        .unwrap();
        let f = s.to_stencil().unwrap();
        assert_eq!(f.lookahead(), 1);
        assert!(f.forcing().is_some());
        assert!(serde_json::from_str::<StencilJson>(r#"{"kernel": "cubic"}"#).is_err());
    }

    #[test]
    fn sequence_csv_rows() {
        let u = WindowedSequence::impulse(-1, CVector::from_vec(vec![c64(1.5, 0.0), c64(0.0, -2.0)]));
        let mut buf = Vec::new();
        write_sequence_csv(&u, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,component,re,im\n-1,0,1.5,0.0\n-1,1,0.0,-2.0\n");
    }
}
