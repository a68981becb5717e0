use std::sync::Arc;

use super::field::{mismatch, BackendKind, FieldSpec, PointSamples, ScalarField, SymTensorField, Weights};
use super::grid::{roughness, Square, ROUGHNESS_LIMIT};
use super::{Backend, CFL_FACTOR};
use crate::error::{Error, Result};
use crate::linalg;

/// Periodic unit square with metric `e^{2φ}(dx² + dy²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalTorus {
    n: usize,
    phi: Vec<f64>,
}

impl ConformalTorus {
    pub fn new(n: usize, phi: Vec<f64>) -> Result<Self> {
        if n < 4 {
            return Err(Error::Invalid(format!("grid resolution must be at least 4, got {n}")));
        }
        if phi.len() != n * n {
            return Err(Error::Shape {
                expected: n * n,
                found: phi.len(),
            });
        }
        if let Some(p) = phi.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite conformal exponent at point {p}")));
        }
        Ok(ConformalTorus { n, phi })
    }

    pub fn from_spec(n: usize, phi: &FieldSpec) -> Result<Self> {
        let sq = Square::new(n);
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                values.push(phi.value(i as f64 * sq.h, j as f64 * sq.h)?);
            }
        }
        ConformalTorus::new(n, values)
    }

    pub fn flat(n: usize) -> Self {
        ConformalTorus { n, phi: vec![0.0; n * n] }
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Coordinates of sample `p`.
    pub fn coords(&self, p: usize) -> (f64, f64) {
        let h = 1.0 / self.n as f64;
        ((p % self.n) as f64 * h, (p / self.n) as f64 * h)
    }

    fn square(&self) -> Square {
        Square::new(self.n)
    }

    fn factor(&self) -> impl Iterator<Item = f64> + '_ {
        self.phi.iter().map(|p| (2.0 * p).exp())
    }

    fn values<'a>(&self, u: &'a ScalarField) -> Result<&'a [f64]> {
        self.check_field(u)?;
        Ok(u.values().expect("checked grid"))
    }

    fn weights<'a>(&self, w: &'a Weights) -> Result<&'a [f64]> {
        match w {
            Weights::Grid(v) if v.len() == self.n * self.n => Ok(v),
            Weights::Grid(v) => Err(Error::Shape {
                expected: self.n * self.n,
                found: v.len(),
            }),
            Weights::Spectral { .. } => Err(Error::Invalid("spectral weights passed to a grid backend".into())),
        }
    }

    fn field(&self, values: Vec<f64>) -> ScalarField {
        ScalarField::grid(BackendKind::ConformalTorus, values)
    }

    fn check_values_resolved(&self, u: &[f64]) -> Result<()> {
        let sq = self.square();
        let r = roughness(u, |p| {
            let (i, j) = ((p % self.n) as isize, (p / self.n) as isize);
            vec![
                (sq.idx(i + 1, j), sq.idx(i - 1, j)),
                (sq.idx(i, j + 1), sq.idx(i, j - 1)),
            ]
        });
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
                if *kind != BackendKind::ConformalTorus {
                    return Err(mismatch(BackendKind::ConformalTorus, *kind));
                }
                if xx.len() != self.n * self.n {
                    return Err(Error::Shape {
                        expected: self.n * self.n,
                        found: xx.len(),
                    });
                }
                Ok((xx, xy, yy))
            }
            SymTensorField::Spectral { .. } => Err(mismatch(BackendKind::ConformalTorus, BackendKind::Sphere)),
        }
    }

    fn gaussian_curvature(&self) -> Vec<f64> {
        let lap = self.square().flat_laplacian(&self.phi);
        self.phi.iter().zip(lap).map(|(p, l)| -(-2.0 * p).exp() * l).collect()
    }
}

impl Backend for ConformalTorus {
    fn kind(&self) -> BackendKind {
        BackendKind::ConformalTorus
    }

    fn dimension(&self) -> usize {
        2
    }

    fn resolution(&self) -> usize {
        self.n
    }

    fn spacing(&self) -> Option<f64> {
        Some(1.0 / self.n as f64)
    }

    fn field_len(&self) -> Option<usize> {
        Some(self.n * self.n)
    }

    fn check_field(&self, u: &ScalarField) -> Result<()> {
        match u {
            ScalarField::Grid { kind, values } => {
                if *kind != BackendKind::ConformalTorus {
                    return Err(mismatch(BackendKind::ConformalTorus, *kind));
                }
                if values.len() != self.n * self.n {
                    return Err(Error::Shape {
                        expected: self.n * self.n,
                        found: values.len(),
                    });
                }
                Ok(())
            }
            ScalarField::Spectral { .. } => Err(mismatch(BackendKind::ConformalTorus, BackendKind::Sphere)),
        }
    }

    fn constant_field(&self, c: f64) -> ScalarField {
        self.field(vec![c; self.n * self.n])
    }

    fn sample(&self, spec: &FieldSpec) -> Result<ScalarField> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for p in 0..self.n * self.n {
            let (x, y) = self.coords(p);
            out.push(spec.value(x, y)?);
        }
        Ok(self.field(out))
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
        let h2 = 1.0 / (self.n * self.n) as f64;
        let flux = self.square().flux_divergence(k, u);
        Ok(self.field(
            flux.iter()
                .zip(k)
                .zip(self.factor())
                .map(|((f, k), e)| f / (k * e * h2))
                .collect(),
        ))
    }

    fn gradient_norm_sq(&self, u: &ScalarField) -> Result<ScalarField> {
        let (gx, gy) = self.square().gradient(self.values(u)?);
        Ok(self.field(
            gx.iter()
                .zip(&gy)
                .zip(&self.phi)
                .map(|((a, b), p)| (-2.0 * p).exp() * (a * a + b * b))
                .collect(),
        ))
    }

    fn dirichlet_form(&self, density: &ScalarField, u: &ScalarField, v: &ScalarField) -> Result<f64> {
        Ok(self
            .square()
            .edge_form(self.values(density)?, self.values(u)?, self.values(v)?))
    }

    fn volume_weights(&self) -> Weights {
        let h2 = 1.0 / (self.n * self.n) as f64;
        Weights::Grid(self.factor().map(|e| e * h2).collect())
    }

    fn measure(&self, density: &ScalarField) -> Result<Weights> {
        let k = self.values(density)?;
        let h2 = 1.0 / (self.n * self.n) as f64;
        Ok(Weights::Grid(k.iter().zip(self.factor()).map(|(k, e)| k * e * h2).collect()))
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
        let sq = self.square();
        let (fx, fy) = sq.gradient(f);
        let (fxx, fxy, fyy) = sq.second_derivatives(f);
        let (px, py) = sq.gradient(&self.phi);
        let len = f.len();
        let (mut xx, mut xy, mut yy) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for p in 0..len {
            xx[p] = fxx[p] - px[p] * fx[p] + py[p] * fy[p];
            yy[p] = fyy[p] + px[p] * fx[p] - py[p] * fy[p];
            xy[p] = fxy[p] - py[p] * fx[p] - px[p] * fy[p];
        }
        Ok(SymTensorField::Grid {
            kind: BackendKind::ConformalTorus,
            xx,
            xy,
            yy,
        })
    }

    fn hessian_energy(&self, u: &ScalarField, w: &Weights) -> Result<f64> {
        self.check_values_resolved(self.values(u)?)?;
        let w = self.weights(w)?;
        let hess = self.hessian(u)?;
        let (xx, xy, yy) = self.tensor_parts(&hess)?;
        Ok((0..w.len())
            .map(|p| {
                let s = (-4.0 * self.phi[p]).exp();
                w[p] * s * (xx[p] * xx[p] + 2.0 * xy[p] * xy[p] + yy[p] * yy[p])
            })
            .sum())
    }

    fn ricci(&self) -> Result<SymTensorField> {
        let kg: Vec<f64> = self
            .gaussian_curvature()
            .iter()
            .zip(self.factor())
            .map(|(k, e)| k * e)
            .collect();
        Ok(SymTensorField::Grid {
            kind: BackendKind::ConformalTorus,
            xx: kg.clone(),
            xy: vec![0.0; kg.len()],
            yy: kg,
        })
    }

    fn tensor_energy(&self, t: &SymTensorField, u: &ScalarField, w: &Weights) -> Result<f64> {
        let (xx, xy, yy) = self.tensor_parts(t)?;
        let (ux, uy) = self.square().gradient(self.values(u)?);
        let w = self.weights(w)?;
        Ok((0..w.len())
            .map(|p| {
                let s = (-4.0 * self.phi[p]).exp();
                w[p] * s * (xx[p] * ux[p] * ux[p] + 2.0 * xy[p] * ux[p] * uy[p] + yy[p] * uy[p] * uy[p])
            })
            .sum())
    }

    fn eigen_extremes(&self, t: &SymTensorField) -> Result<(f64, f64)> {
        let (xx, xy, yy) = self.tensor_parts(t)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in 0..xx.len() {
            let s = (-2.0 * self.phi[p]).exp();
            let (a, b, c) = (s * xx[p], s * xy[p], s * yy[p]);
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            lo = lo.min(mid - rad);
            hi = hi.max(mid + rad);
        }
        Ok((lo, hi))
    }

    fn pointwise(&self, u: &ScalarField, _samples: usize) -> Result<PointSamples> {
        Ok(PointSamples {
            value: self.values(u)?.to_vec(),
            grad_sq: self.gradient_norm_sq(u)?.values().unwrap().to_vec(),
            laplacian: self.laplacian(u)?.values().unwrap().to_vec(),
        })
    }

    fn first_eigenvalue(&self, density: &ScalarField) -> Result<f64> {
        let mass = match self.measure(density)? {
            Weights::Grid(w) => w,
            Weights::Spectral { .. } => unreachable!(),
        };
        let k = self.values(density)?.to_vec();
        let sq = self.square();
        let stiffness = move |x: &[f64]| -> Vec<f64> { sq.flux_divergence(&k, x).iter().map(|v| -v).collect() };
        linalg::first_nonzero_eigenvalue(&stiffness, &mass)
    }

    fn volume_elements(&self) -> Vec<f64> {
        match self.volume_weights() {
            Weights::Grid(w) => w,
            Weights::Spectral { .. } => unreachable!(),
        }
    }

    fn stable_step(&self, _u: Option<&ScalarField>) -> f64 {
        let h = 1.0 / self.n as f64;
        CFL_FACTOR * h * h * self.min_metric_coefficient()
    }

    fn flow_vars(&self) -> Vec<f64> {
        self.phi.clone()
    }

    fn with_flow_vars(&self, vars: &[f64]) -> Result<Arc<dyn Backend>> {
        Ok(Arc::new(ConformalTorus::new(self.n, vars.to_vec())?))
    }

    fn flow_rhs(&self, alpha: Option<f64>) -> Result<Vec<f64>> {
        if alpha.is_some() {
            return Err(Error::Unsupported(
                "the conformal torus carries no map field; Ricci-harmonic flow needs the warped torus".into(),
            ));
        }
        // ∂t φ = e^{-2φ} Δ0 φ = -R/2
        Ok(self
            .gaussian_curvature()
            .into_iter()
            .map(|k| -k)
            .collect())
    }

    fn check_resolved(&self, u: &ScalarField) -> Result<()> {
        self.check_values_resolved(self.values(u)?)
    }

    fn min_metric_coefficient(&self) -> f64 {
        self.factor().fold(f64::INFINITY, f64::min)
    }
}
