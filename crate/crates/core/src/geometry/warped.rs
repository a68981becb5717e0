use std::sync::Arc;

use super::field::{mismatch, BackendKind, FieldSpec, PointSamples, ScalarField, SymTensorField, Weights};
use super::grid::{d1, ring_edge_form, ring_flux_divergence, roughness, ROUGHNESS_LIMIT};
use super::{Backend, CFL_FACTOR};
use crate::error::{Error, Result};
use crate::linalg;

/// Periodic unit square with metric `a(x)² dx² + b(x)² dy²` and a map
/// field `φ(x)`. All fields depend on `x` only and carry `N` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedTorus {
    a: Vec<f64>,
    b: Vec<f64>,
    phi: Vec<f64>,
}

impl WarpedTorus {
    pub fn new(a: Vec<f64>, b: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let n = a.len();
        if n < 4 {
            return Err(Error::Invalid(format!("grid resolution must be at least 4, got {n}")));
        }
        for v in [&b, &phi] {
            if v.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        if a.iter().chain(&b).chain(&phi).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite warp or map sample".into()));
        }
        if let Some(p) = a.iter().chain(&b).position(|v| *v <= 0.0) {
            return Err(Error::Domain(format!(
                "warp factors must be positive; sample {} of {} is not",
                p % n,
                if p < n { "a" } else { "b" }
            )));
        }
        Ok(WarpedTorus { a, b, phi })
    }

    pub fn from_spec(n: usize, a: &FieldSpec, b: &FieldSpec, phi: &FieldSpec) -> Result<Self> {
        let sample = |s: &FieldSpec, name: &str| -> Result<Vec<f64>> {
            if !s.is_x_only() {
                return Err(Error::Unsupported(format!("warped torus field `{name}` must depend on x only")));
            }
            (0..n).map(|i| s.value(i as f64 / n as f64, 0.0)).collect()
        };
        WarpedTorus::new(sample(a, "a")?, sample(b, "b")?, sample(phi, "phi")?)
    }

    pub fn flat(n: usize) -> Self {
        WarpedTorus {
            a: vec![1.0; n],
            b: vec![1.0; n],
            phi: vec![0.0; n],
        }
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    fn n(&self) -> usize {
        self.a.len()
    }

    fn h(&self) -> f64 {
        1.0 / self.n() as f64
    }

    fn field(&self, values: Vec<f64>) -> ScalarField {
        ScalarField::grid(BackendKind::WarpedTorus, values)
    }

    fn values<'a>(&self, u: &'a ScalarField) -> Result<&'a [f64]> {
        self.check_field(u)?;
        Ok(u.values().expect("checked grid"))
    }

    fn weights<'a>(&self, w: &'a Weights) -> Result<&'a [f64]> {
        match w {
            Weights::Grid(v) if v.len() == self.n() => Ok(v),
            Weights::Grid(v) => Err(Error::Shape {
                expected: self.n(),
                found: v.len(),
            }),
            Weights::Spectral { .. } => Err(Error::Invalid("spectral weights passed to a grid backend".into())),
        }
    }

    /// Edge conductances `K b / a` whose arithmetic mean sits at half-points.
    fn conductance(&self, k: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| k[i] * self.b[i] / self.a[i]).collect()
    }

    fn gaussian_curvature(&self) -> Vec<f64> {
        let n = self.n();
        let h = self.h();
        (0..n)
            .map(|i| {
                let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
                let ap = 0.5 * (self.a[i] + self.a[ip]);
                let am = 0.5 * (self.a[i] + self.a[im]);
                let flux = (self.b[ip] - self.b[i]) / (h * ap) - (self.b[i] - self.b[im]) / (h * am);
                -flux / (self.a[i] * self.b[i] * h)
            })
            .collect()
    }

    fn check_values_resolved(&self, u: &[f64]) -> Result<()> {
        let n = self.n();
        let r = roughness(u, |i| vec![((i + 1) % n, (i + n - 1) % n)]);
        if r > ROUGHNESS_LIMIT {
            return Err(Error::Resolution(format!(
                "field oscillates on the grid scale (second-difference ratio {r:.3} > {ROUGHNESS_LIMIT})"
            )));
        }
        Ok(())
    }

    fn tensor_parts<'a>(&self, t: &'a SymTensorField) -> Result<(&'a [f64], &'a [f64], &'a [f64])> {
        match t {
            SymTensorField::Grid { kind, xx, xy, yy } => {
                if *kind != BackendKind::WarpedTorus {
                    return Err(mismatch(BackendKind::WarpedTorus, *kind));
                }
                if xx.len() != self.n() {
                    return Err(Error::Shape {
                        expected: self.n(),
                        found: xx.len(),
                    });
                }
                Ok((xx, xy, yy))
            }
            SymTensorField::Spectral { .. } => Err(mismatch(BackendKind::WarpedTorus, BackendKind::Sphere)),
        }
    }

    fn tensor(&self, xx: Vec<f64>, xy: Vec<f64>, yy: Vec<f64>) -> SymTensorField {
        SymTensorField::Grid {
            kind: BackendKind::WarpedTorus,
            xx,
            xy,
            yy,
        }
    }

    fn phi_laplacian(&self) -> Vec<f64> {
        let h2 = self.h() * self.h();
        let c = self.conductance(&vec![1.0; self.n()]);
        ring_flux_divergence(&c, &self.phi)
            .iter()
            .enumerate()
            .map(|(i, f)| f / (self.a[i] * self.b[i] * h2))
            .collect()
    }
}

impl Backend for WarpedTorus {
    fn kind(&self) -> BackendKind {
        BackendKind::WarpedTorus
    }

    fn dimension(&self) -> usize {
        2
    }

    fn resolution(&self) -> usize {
        self.n()
    }

    fn spacing(&self) -> Option<f64> {
        Some(self.h())
    }

    fn field_len(&self) -> Option<usize> {
        Some(self.n())
    }

    fn check_field(&self, u: &ScalarField) -> Result<()> {
        match u {
            ScalarField::Grid { kind, values } => {
                if *kind != BackendKind::WarpedTorus {
                    return Err(mismatch(BackendKind::WarpedTorus, *kind));
                }
                if values.len() != self.n() {
                    return Err(Error::Shape {
                        expected: self.n(),
                        found: values.len(),
                    });
                }
                Ok(())
            }
            ScalarField::Spectral { .. } => Err(mismatch(BackendKind::WarpedTorus, BackendKind::Sphere)),
        }
    }

    fn constant_field(&self, c: f64) -> ScalarField {
        self.field(vec![c; self.n()])
    }

    fn sample(&self, spec: &FieldSpec) -> Result<ScalarField> {
        if let FieldSpec::Trig { .. } = spec {
            if !spec.is_x_only() {
                return Err(Error::Unsupported(
                    "warped torus fields depend on x only; drop the ky terms".into(),
                ));
            }
        }
        let h = self.h();
        let values = (0..self.n()).map(|i| spec.value(i as f64 * h, 0.0)).collect::<Result<_>>()?;
        Ok(self.field(values))
    }

    fn scalar_curvature(&self) -> Result<ScalarField> {
        Ok(self.field(self.gaussian_curvature().into_iter().map(|k| 2.0 * k).collect()))
    }

    fn laplacian(&self, u: &ScalarField) -> Result<ScalarField> {
        self.drift_laplacian(&self.constant_field(1.0), u)
    }

    fn drift_laplacian(&self, density: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
        let k = self.values(density)?;
        let u = self.values(u)?;
        let h2 = self.h() * self.h();
        let flux = ring_flux_divergence(&self.conductance(k), u);
        Ok(self.field(
            (0..self.n())
                .map(|i| flux[i] / (k[i] * self.a[i] * self.b[i] * h2))
                .collect(),
        ))
    }

    fn gradient_norm_sq(&self, u: &ScalarField) -> Result<ScalarField> {
        let ux = d1(self.values(u)?, self.h());
        Ok(self.field(ux.iter().zip(&self.a).map(|(d, a)| d * d / (a * a)).collect()))
    }

    fn dirichlet_form(&self, density: &ScalarField, u: &ScalarField, v: &ScalarField) -> Result<f64> {
        let c = self.conductance(self.values(density)?);
        Ok(ring_edge_form(&c, self.values(u)?, self.values(v)?) / self.h())
    }

    fn volume_weights(&self) -> Weights {
        Weights::Grid(self.volume_elements())
    }

    fn measure(&self, density: &ScalarField) -> Result<Weights> {
        let k = self.values(density)?;
        let h = self.h();
        Ok(Weights::Grid(
            (0..self.n()).map(|i| k[i] * self.a[i] * self.b[i] * h).collect(),
        ))
    }

    fn integrate(&self, field: &ScalarField, w: &Weights) -> Result<f64> {
        let f = self.values(field)?;
        Ok(self.weights(w)?.iter().zip(f).map(|(w, f)| w * f).sum())
    }

    fn inner(&self, u: &ScalarField, v: &ScalarField, w: &Weights) -> Result<f64> {
        let (u, v) = (self.values(u)?, self.values(v)?);
        Ok(self
            .weights(w)?
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    fn hessian(&self, f: &ScalarField) -> Result<SymTensorField> {
        let f = self.values(f)?;
        let h = self.h();
        let (fx, fxx) = (d1(f, h), super::grid::d2(f, h));
        let (ax, bx) = (d1(&self.a, h), d1(&self.b, h));
        let n = self.n();
        let xx = (0..n).map(|i| fxx[i] - ax[i] / self.a[i] * fx[i]).collect();
        let yy = (0..n)
            .map(|i| self.b[i] * bx[i] / (self.a[i] * self.a[i]) * fx[i])
            .collect();
        Ok(self.tensor(xx, vec![0.0; n], yy))
    }

    fn hessian_energy(&self, u: &ScalarField, w: &Weights) -> Result<f64> {
        self.check_values_resolved(self.values(u)?)?;
        let w = self.weights(w)?;
        let hess = self.hessian(u)?;
        let (xx, _, yy) = self.tensor_parts(&hess)?;
        Ok((0..self.n())
            .map(|i| {
                let (a2, b2) = (self.a[i] * self.a[i], self.b[i] * self.b[i]);
                w[i] * (xx[i] * xx[i] / (a2 * a2) + yy[i] * yy[i] / (b2 * b2))
            })
            .sum())
    }

    fn ricci(&self) -> Result<SymTensorField> {
        let k = self.gaussian_curvature();
        let n = self.n();
        let xx = (0..n).map(|i| k[i] * self.a[i] * self.a[i]).collect();
        let yy = (0..n).map(|i| k[i] * self.b[i] * self.b[i]).collect();
        Ok(self.tensor(xx, vec![0.0; n], yy))
    }

    fn tensor_energy(&self, t: &SymTensorField, u: &ScalarField, w: &Weights) -> Result<f64> {
        let (xx, _, _) = self.tensor_parts(t)?;
        let ux = d1(self.values(u)?, self.h());
        let w = self.weights(w)?;
        Ok((0..self.n())
            .map(|i| {
                let a2 = self.a[i] * self.a[i];
                w[i] * xx[i] * ux[i] * ux[i] / (a2 * a2)
            })
            .sum())
    }

    fn eigen_extremes(&self, t: &SymTensorField) -> Result<(f64, f64)> {
        let (xx, xy, yy) = self.tensor_parts(t)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n() {
            let (p, q, r) = (
                xx[i] / (self.a[i] * self.a[i]),
                xy[i] / (self.a[i] * self.b[i]),
                yy[i] / (self.b[i] * self.b[i]),
            );
            let mid = 0.5 * (p + r);
            let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            lo = lo.min(mid - rad);
            hi = hi.max(mid + rad);
        }
        Ok((lo, hi))
    }

    fn map_differential(&self) -> Option<SymTensorField> {
        let px = d1(&self.phi, self.h());
        let n = self.n();
        Some(self.tensor(px.iter().map(|d| d * d).collect(), vec![0.0; n], vec![0.0; n]))
    }

    fn map_energy_density(&self) -> Option<ScalarField> {
        let px = d1(&self.phi, self.h());
        Some(self.field(px.iter().zip(&self.a).map(|(d, a)| d * d / (a * a)).collect()))
    }

    fn pointwise(&self, u: &ScalarField, _samples: usize) -> Result<PointSamples> {
        Ok(PointSamples {
            value: self.values(u)?.to_vec(),
            grad_sq: self.gradient_norm_sq(u)?.values().unwrap().to_vec(),
            laplacian: self.laplacian(u)?.values().unwrap().to_vec(),
        })
    }

    /// Restricted to functions of `x`, the sector the flow preserves.
    fn first_eigenvalue(&self, density: &ScalarField) -> Result<f64> {
        let mass = match self.measure(density)? {
            Weights::Grid(w) => w,
            Weights::Spectral { .. } => unreachable!(),
        };
        let c = self.conductance(self.values(density)?);
        let h = self.h();
        let stiffness = move |x: &[f64]| -> Vec<f64> { ring_flux_divergence(&c, x).iter().map(|v| -v / h).collect() };
        linalg::first_nonzero_eigenvalue(&stiffness, &mass)
    }

    fn volume_elements(&self) -> Vec<f64> {
        let h = self.h();
        self.a.iter().zip(&self.b).map(|(a, b)| a * b * h).collect()
    }

    fn stable_step(&self, _u: Option<&ScalarField>) -> f64 {
        let h = self.h();
        let amin = self.a.iter().fold(f64::INFINITY, |m, a| m.min(a * a));
        CFL_FACTOR * h * h * amin
    }

    fn flow_vars(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.n());
        v.extend_from_slice(&self.a);
        v.extend_from_slice(&self.b);
        v.extend_from_slice(&self.phi);
        v
    }

    fn with_flow_vars(&self, vars: &[f64]) -> Result<Arc<dyn Backend>> {
        let n = self.n();
        if vars.len() != 3 * n {
            return Err(Error::Shape {
                expected: 3 * n,
                found: vars.len(),
            });
        }
        Ok(Arc::new(WarpedTorus::new(
            vars[..n].to_vec(),
            vars[n..2 * n].to_vec(),
            vars[2 * n..].to_vec(),
        )?))
    }

    fn flow_rhs(&self, alpha: Option<f64>) -> Result<Vec<f64>> {
        let n = self.n();
        let k = self.gaussian_curvature();
        let mut out = vec![0.0; 3 * n];
        for i in 0..n {
            out[i] = -k[i] * self.a[i];
            out[n + i] = -k[i] * self.b[i];
        }
        if let Some(alpha) = alpha {
            if alpha < 0.0 {
                return Err(Error::Domain(format!("coupling α must be non-negative, got {alpha}")));
            }
            let px = d1(&self.phi, self.h());
            let lap = self.phi_laplacian();
            for i in 0..n {
                out[i] += alpha * px[i] * px[i] / self.a[i];
                out[2 * n + i] = lap[i];
            }
        }
        Ok(out)
    }

    fn check_resolved(&self, u: &ScalarField) -> Result<()> {
        self.check_values_resolved(self.values(u)?)
    }

    fn min_metric_coefficient(&self) -> f64 {
        self.a
            .iter()
            .chain(&self.b)
            .fold(f64::INFINITY, |m, v| m.min(v * v))
    }
}
