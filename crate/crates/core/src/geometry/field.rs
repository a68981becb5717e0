use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which discrete family a field or state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Sphere,
    ConformalTorus,
    WarpedTorus,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Sphere => "sphere",
            BackendKind::ConformalTorus => "conformal_torus",
            BackendKind::WarpedTorus => "warped_torus",
        }
    }

    pub fn is_grid(self) -> bool {
        !matches!(self, BackendKind::Sphere)
    }
}

/// One zonal mode `c * G_l(cos θ)` of a spectral sphere field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub degree: usize,
    pub coeff: f64,
}

/// A scalar function on the manifold: point samples on a grid or zonal
/// coefficients on the sphere. Spectral modes are kept sorted by degree.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Grid { kind: BackendKind, values: Vec<f64> },
    Spectral { modes: Vec<Mode> },
}

impl ScalarField {
    pub fn grid(kind: BackendKind, values: Vec<f64>) -> Self {
        ScalarField::Grid { kind, values }
    }

    /// Builds a spectral field, merging repeated degrees.
    pub fn spectral(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut modes: Vec<Mode> = Vec::new();
        for (degree, coeff) in pairs {
            if !coeff.is_finite() {
                return Err(Error::Domain(format!("non-finite coefficient at degree {degree}")));
            }
            match modes.iter_mut().find(|m| m.degree == degree) {
                Some(m) => {
                    return Err(Error::Invalid(format!(
                        "degree {} listed twice (coefficients {} and {coeff})",
                        m.degree, m.coeff
                    )))
                }
                None => modes.push(Mode { degree, coeff }),
            }
        }
        modes.sort_by_key(|m| m.degree);
        Ok(ScalarField::Spectral { modes })
    }

    pub fn spectral_constant(c: f64) -> Self {
        ScalarField::Spectral {
            modes: vec![Mode { degree: 0, coeff: c }],
        }
    }

    pub fn kind(&self) -> BackendKind {
        match self {
            ScalarField::Grid { kind, .. } => *kind,
            ScalarField::Spectral { .. } => BackendKind::Sphere,
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match self {
            ScalarField::Grid { values, .. } => Some(values),
            ScalarField::Spectral { .. } => None,
        }
    }

    pub fn modes(&self) -> Option<&[Mode]> {
        match self {
            ScalarField::Spectral { modes } => Some(modes),
            ScalarField::Grid { .. } => None,
        }
    }

    pub fn grid_values(&self) -> Result<&[f64]> {
        self.values()
            .ok_or_else(|| Error::Unsupported("expected grid samples, found spectral coefficients".into()))
    }

    /// Coefficient of degree `l` (zero when absent).
    pub fn coeff(&self, l: usize) -> f64 {
        self.modes()
            .and_then(|m| m.iter().find(|m| m.degree == l))
            .map_or(0.0, |m| m.coeff)
    }

    /// The constant value of a spectral field whose only nonzero mode is `l = 0`.
    pub fn spectral_constant_value(&self) -> Option<f64> {
        let modes = self.modes()?;
        if modes.iter().all(|m| m.degree == 0 || m.coeff == 0.0) {
            Some(self.coeff(0))
        } else {
            None
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            ScalarField::Grid { values, .. } => values.iter().all(|v| v.is_finite()),
            ScalarField::Spectral { modes } => modes.iter().all(|m| m.coeff.is_finite()),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        match self {
            ScalarField::Grid { kind, values } => Ok(ScalarField::Grid {
                kind: *kind,
                values: values.iter().map(|&v| f(v)).collect(),
            }),
            ScalarField::Spectral { .. } => match self.spectral_constant_value() {
                Some(c) => Ok(ScalarField::spectral_constant(f(c))),
                None => Err(Error::Unsupported(
                    "pointwise maps of non-constant spectral fields".into(),
                )),
            },
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            ScalarField::Grid { kind, values } => ScalarField::Grid {
                kind: *kind,
                values: values.iter().map(|v| v * s).collect(),
            },
            ScalarField::Spectral { modes } => ScalarField::Spectral {
                modes: modes
                    .iter()
                    .map(|m| Mode {
                        degree: m.degree,
                        coeff: m.coeff * s,
                    })
                    .collect(),
            },
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &ScalarField) -> Result<Self> {
        match (self, other) {
            (ScalarField::Grid { kind, values }, ScalarField::Grid { kind: k2, values: v2 }) => {
                if kind != k2 {
                    return Err(mismatch(*kind, *k2));
                }
                if values.len() != v2.len() {
                    return Err(Error::Shape {
                        expected: values.len(),
                        found: v2.len(),
                    });
                }
                Ok(ScalarField::Grid {
                    kind: *kind,
                    values: values.iter().zip(v2).map(|(a, b)| a + s * b).collect(),
                })
            }
            (ScalarField::Spectral { modes }, ScalarField::Spectral { modes: m2 }) => {
                let mut out = modes.clone();
                for m in m2 {
                    match out.iter_mut().find(|o| o.degree == m.degree) {
                        Some(o) => o.coeff += s * m.coeff,
                        None => out.push(Mode {
                            degree: m.degree,
                            coeff: s * m.coeff,
                        }),
                    }
                }
                out.sort_by_key(|m| m.degree);
                Ok(ScalarField::Spectral { modes: out })
            }
            (a, b) => Err(mismatch(a.kind(), b.kind())),
        }
    }

    /// Pointwise product. Spectral fields multiply only when one factor is constant.
    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        match (self, other) {
            (ScalarField::Grid { kind, values }, ScalarField::Grid { kind: k2, values: v2 }) => {
                if kind != k2 {
                    return Err(mismatch(*kind, *k2));
                }
                if values.len() != v2.len() {
                    return Err(Error::Shape {
                        expected: values.len(),
                        found: v2.len(),
                    });
                }
                Ok(ScalarField::Grid {
                    kind: *kind,
                    values: values.iter().zip(v2).map(|(a, b)| a * b).collect(),
                })
            }
            (a @ ScalarField::Spectral { .. }, b @ ScalarField::Spectral { .. }) => {
                if let Some(c) = a.spectral_constant_value() {
                    Ok(b.scaled(c))
                } else if let Some(c) = b.spectral_constant_value() {
                    Ok(a.scaled(c))
                } else {
                    Err(Error::Unsupported(
                        "product of two non-constant spectral fields".into(),
                    ))
                }
            }
            (a, b) => Err(mismatch(a.kind(), b.kind())),
        }
    }

    /// Max absolute difference of samples or coefficients.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        let d = self.add_scaled(-1.0, other)?;
        Ok(match d {
            ScalarField::Grid { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            ScalarField::Spectral { modes } => modes.iter().fold(0.0, |m, v| m.max(v.coeff.abs())),
        })
    }
}

pub(crate) fn mismatch(expected: BackendKind, found: BackendKind) -> Error {
    Error::BackendMismatch {
        expected: expected.name().into(),
        found: found.name().into(),
    }
}

/// Symmetric 2-tensor field. Grid variants hold covariant components per
/// point; the spectral variant is a constant multiple of the metric.
#[derive(Debug, Clone, PartialEq)]
pub enum SymTensorField {
    Grid {
        kind: BackendKind,
        xx: Vec<f64>,
        xy: Vec<f64>,
        yy: Vec<f64>,
    },
    Spectral { coeff: f64 },
}

impl SymTensorField {
    pub fn zero_like(&self) -> Self {
        match self {
            SymTensorField::Grid { kind, xx, .. } => SymTensorField::Grid {
                kind: *kind,
                xx: vec![0.0; xx.len()],
                xy: vec![0.0; xx.len()],
                yy: vec![0.0; xx.len()],
            },
            SymTensorField::Spectral { .. } => SymTensorField::Spectral { coeff: 0.0 },
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &SymTensorField) -> Result<Self> {
        match (self, other) {
            (
                SymTensorField::Grid { kind, xx, xy, yy },
                SymTensorField::Grid {
                    kind: k2,
                    xx: xx2,
                    xy: xy2,
                    yy: yy2,
                },
            ) => {
                if kind != k2 {
                    return Err(mismatch(*kind, *k2));
                }
                if xx.len() != xx2.len() {
                    return Err(Error::Shape {
                        expected: xx.len(),
                        found: xx2.len(),
                    });
                }
                let comb = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p + s * q).collect();
                Ok(SymTensorField::Grid {
                    kind: *kind,
                    xx: comb(xx, xx2),
                    xy: comb(xy, xy2),
                    yy: comb(yy, yy2),
                })
            }
            (SymTensorField::Spectral { coeff }, SymTensorField::Spectral { coeff: c2 }) => {
                Ok(SymTensorField::Spectral { coeff: coeff + s * c2 })
            }
            (SymTensorField::Spectral { .. }, SymTensorField::Grid { kind, .. }) => {
                Err(mismatch(BackendKind::Sphere, *kind))
            }
            (SymTensorField::Grid { kind, .. }, SymTensorField::Spectral { .. }) => {
                Err(mismatch(*kind, BackendKind::Sphere))
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            SymTensorField::Grid { xx, xy, yy, .. } => xx
                .iter()
                .chain(xy)
                .chain(yy)
                .all(|v| v.is_finite()),
            SymTensorField::Spectral { coeff } => coeff.is_finite(),
        }
    }
}

/// Quadrature weights for `dμ` or `dV`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    /// Per-sample cell weights.
    Grid(Vec<f64>),
    /// Uniform density against the round measure; mode norms come from the backend.
    Spectral { density: f64 },
}

impl Weights {
    pub fn grid(&self) -> Option<&[f64]> {
        match self {
            Weights::Grid(w) => Some(w),
            Weights::Spectral { .. } => None,
        }
    }
}

/// Pointwise samples used by the gradient-estimate checks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSamples {
    pub value: Vec<f64>,
    pub grad_sq: Vec<f64>,
    pub laplacian: Vec<f64>,
}

/// Trigonometric initial data `c + Σ A·trig(2π(kx·x + ky·y))` on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub amplitude: f64,
    #[serde(default)]
    pub kx: i32,
    #[serde(default)]
    pub ky: i32,
    pub trig: Trig,
}

impl TrigTerm {
    fn phase(&self, x: f64, y: f64) -> f64 {
        2.0 * PI * (self.kx as f64 * x + self.ky as f64 * y)
    }

    fn base(&self, p: f64) -> (f64, f64) {
        // (trig(p), d/dp trig(p))
        match self.trig {
            Trig::Cos => (p.cos(), -p.sin()),
            Trig::Sin => (p.sin(), p.cos()),
        }
    }
}

/// Initial data description shared by all backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// Zonal sphere coefficients as `[degree, coefficient]` pairs.
    Modes { modes: Vec<(usize, f64)> },
    /// Trigonometric grid expression.
    Trig {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        terms: Vec<TrigTerm>,
    },
}

impl FieldSpec {
    pub fn constant(c: f64) -> Self {
        FieldSpec::Trig {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn trig(constant: f64, terms: Vec<TrigTerm>) -> Self {
        FieldSpec::Trig { constant, terms }
    }

    fn terms(&self) -> Result<(f64, &[TrigTerm])> {
        match self {
            FieldSpec::Trig { constant, terms } => Ok((*constant, terms)),
            FieldSpec::Modes { .. } => Err(Error::Unsupported(
                "mode lists describe sphere data; grid backends need a trig expression".into(),
            )),
        }
    }

    pub fn is_x_only(&self) -> bool {
        match self {
            FieldSpec::Trig { terms, .. } => terms.iter().all(|t| t.ky == 0),
            FieldSpec::Modes { .. } => false,
        }
    }

    /// Value at `(x, y)`.
    pub fn value(&self, x: f64, y: f64) -> Result<f64> {
        let (c, terms) = self.terms()?;
        Ok(c + terms
            .iter()
            .map(|t| t.amplitude * t.base(t.phase(x, y)).0)
            .sum::<f64>())
    }

    /// Exact gradient `(∂x, ∂y)`.
    pub fn gradient(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let (_, terms) = self.terms()?;
        let mut g = (0.0, 0.0);
        for t in terms {
            let d = t.amplitude * t.base(t.phase(x, y)).1 * 2.0 * PI;
            g.0 += d * t.kx as f64;
            g.1 += d * t.ky as f64;
        }
        Ok(g)
    }

    /// Exact second derivatives `(∂xx, ∂xy, ∂yy)`.
    pub fn hessian(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        let (_, terms) = self.terms()?;
        let mut h = (0.0, 0.0, 0.0);
        for t in terms {
            let v = -t.amplitude * t.base(t.phase(x, y)).0 * 4.0 * PI * PI;
            let (kx, ky) = (t.kx as f64, t.ky as f64);
            h.0 += v * kx * kx;
            h.1 += v * kx * ky;
            h.2 += v * ky * ky;
        }
        Ok(h)
    }

    /// Exact flat Laplacian.
    pub fn flat_laplacian(&self, x: f64, y: f64) -> Result<f64> {
        let (xx, _, yy) = self.hessian(x, y)?;
        Ok(xx + yy)
    }
}
