use std::f64::consts::PI;
use std::sync::Arc;

use super::field::{mismatch, BackendKind, FieldSpec, PointSamples, ScalarField, SymTensorField, Weights};
use super::Backend;
use crate::error::{Error, Result};

/// Volume of the unit round sphere `S^n`.
pub fn unit_sphere_volume(n: usize) -> f64 {
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * unit_sphere_volume(n - 2),
    }
}

fn binomial(m: usize, k: usize) -> f64 {
    if k > m {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// Dimension of the space of degree-`l` spherical harmonics on `S^n`.
pub fn harmonic_multiplicity(n: usize, l: usize) -> f64 {
    let lower = if l >= 2 { binomial(l + n - 2, n) } else { 0.0 };
    binomial(l + n, n) - lower
}

/// Zonal harmonic of degree `l` on `S^n` normalized to 1 at the pole, and its
/// derivative in `x = cos θ`. For `n = 2` these are the Legendre polynomials.
pub fn gegenbauer_normalized(n: usize, l: usize, x: f64) -> (f64, f64) {
    let lam = (n as f64 - 1.0) / 2.0;
    let value = gegenbauer(lam, l, x);
    let at_pole = gegenbauer(lam, l, 1.0);
    let deriv = if l == 0 {
        0.0
    } else {
        2.0 * lam * gegenbauer(lam + 1.0, l - 1, x)
    };
    (value / at_pole, deriv / at_pole)
}

fn gegenbauer(lam: f64, l: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if l == 0 {
        return prev;
    }
    let mut cur = 2.0 * lam * x;
    for k in 2..=l {
        let k = k as f64;
        let next = (2.0 * x * (k + lam - 1.0) * cur - (k + 2.0 * lam - 2.0) * prev) / k;
        prev = cur;
        cur = next;
    }
    cur
}

/// Round sphere `S^n` of squared radius `r²`, fields as zonal coefficient lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereSpectral {
    pub dim: usize,
    pub r2: f64,
    pub band_limit: usize,
}

impl SphereSpectral {
    pub fn new(dim: usize, r2: f64, band_limit: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!("sphere dimension must be >= 2, got {dim}")));
        }
        if !(r2 > 0.0) || !r2.is_finite() {
            return Err(Error::Domain(format!("squared radius must be positive, got {r2}")));
        }
        Ok(SphereSpectral { dim, r2, band_limit })
    }

    /// `λ_l = l(l+n-1)/r²`.
    pub fn eigenvalue(&self, l: usize) -> f64 {
        (l * (l + self.dim - 1)) as f64 / self.r2
    }

    pub fn volume(&self) -> f64 {
        unit_sphere_volume(self.dim) * self.r2.powf(self.dim as f64 / 2.0)
    }

    /// `∫ G_l² dμ` for the pole-normalized zonal harmonic.
    pub fn mode_norm(&self, l: usize) -> f64 {
        self.volume() / harmonic_multiplicity(self.dim, l)
    }

    /// Einstein constant: `Ric = (n-1)/r² g`.
    pub fn ricci_coefficient(&self) -> f64 {
        (self.dim as f64 - 1.0) / self.r2
    }

    fn density(&self, w: &Weights) -> Result<f64> {
        match w {
            Weights::Spectral { density } => Ok(*density),
            Weights::Grid(_) => Err(Error::Invalid("grid weights passed to the spectral sphere".into())),
        }
    }

    fn constant_density(&self, density: &ScalarField) -> Result<f64> {
        self.check_field(density)?;
        density.spectral_constant_value().ok_or_else(|| {
            Error::Unsupported("the spectral sphere supports only spatially uniform weights".into())
        })
    }

    fn modes<'a>(&self, u: &'a ScalarField) -> Result<&'a [super::Mode]> {
        self.check_field(u)?;
        Ok(u.modes().expect("checked spectral"))
    }

    fn weighted_sum(&self, u: &ScalarField, v: &ScalarField, factor: impl Fn(usize) -> f64) -> Result<f64> {
        let mu = self.modes(u)?;
        self.check_field(v)?;
        Ok(mu
            .iter()
            .map(|m| m.coeff * v.coeff(m.degree) * factor(m.degree) * self.mode_norm(m.degree))
            .sum())
    }

    fn max_degree(u: &ScalarField) -> Option<usize> {
        u.modes()?.iter().filter(|m| m.coeff != 0.0).map(|m| m.degree).max()
    }
}

/// Pointwise values of a zonal field along colatitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalSamples {
    pub theta: Vec<f64>,
    pub value: Vec<f64>,
    pub grad_sq: Vec<f64>,
    pub laplacian: Vec<f64>,
}

/// Evaluates `u(θ) = Σ c_l G_l(cos θ)`, `|∇u|² = (∂_θ u)²/r²` and `Δu`.
pub fn evaluate_zonal(sphere: &SphereSpectral, u: &ScalarField, thetas: &[f64]) -> Result<ZonalSamples> {
    let modes = sphere.modes(u)?;
    let mut out = ZonalSamples {
        theta: thetas.to_vec(),
        value: Vec::with_capacity(thetas.len()),
        grad_sq: Vec::with_capacity(thetas.len()),
        laplacian: Vec::with_capacity(thetas.len()),
    };
    for &theta in thetas {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::Domain(format!("colatitude {theta} outside [0, π]")));
        }
        let (x, s) = (theta.cos(), theta.sin());
        let (mut val, mut dtheta, mut lap) = (0.0, 0.0, 0.0);
        for m in modes {
            let (g, dg) = gegenbauer_normalized(sphere.dim, m.degree, x);
            val += m.coeff * g;
            dtheta -= m.coeff * s * dg;
            lap -= sphere.eigenvalue(m.degree) * m.coeff * g;
        }
        out.value.push(val);
        out.grad_sq.push(dtheta * dtheta / sphere.r2);
        out.laplacian.push(lap);
    }
    Ok(out)
}

impl Backend for SphereSpectral {
    fn kind(&self) -> BackendKind {
        BackendKind::Sphere
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn resolution(&self) -> usize {
        self.band_limit
    }

    fn spacing(&self) -> Option<f64> {
        None
    }

    fn field_len(&self) -> Option<usize> {
        None
    }

    fn check_field(&self, u: &ScalarField) -> Result<()> {
        match u {
            ScalarField::Spectral { modes } => {
                if let Some(m) = modes.iter().find(|m| m.degree > self.band_limit) {
                    return Err(Error::Resolution(format!(
                        "degree {} exceeds band limit {}",
                        m.degree, self.band_limit
                    )));
                }
                if !u.is_finite() {
                    return Err(Error::Domain("non-finite spectral coefficient".into()));
                }
                Ok(())
            }
            ScalarField::Grid { kind, .. } => Err(mismatch(BackendKind::Sphere, *kind)),
        }
    }

    fn constant_field(&self, c: f64) -> ScalarField {
        ScalarField::spectral_constant(c)
    }

    fn sample(&self, spec: &FieldSpec) -> Result<ScalarField> {
        let field = match spec {
            FieldSpec::Modes { modes } => ScalarField::spectral(modes.iter().copied())?,
            FieldSpec::Trig { constant, terms } if terms.is_empty() => ScalarField::spectral_constant(*constant),
            FieldSpec::Trig { .. } => {
                return Err(Error::Unsupported(
                    "trig expressions are grid data; the sphere takes a mode list".into(),
                ))
            }
        };
        self.check_field(&field)?;
        Ok(field)
    }

    fn scalar_curvature(&self) -> Result<ScalarField> {
        let n = self.dim as f64;
        Ok(ScalarField::spectral_constant(n * (n - 1.0) / self.r2))
    }

    fn laplacian(&self, u: &ScalarField) -> Result<ScalarField> {
        let modes = self.modes(u)?;
        ScalarField::spectral(modes.iter().map(|m| (m.degree, -self.eigenvalue(m.degree) * m.coeff)))
    }

    fn drift_laplacian(&self, density: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
        self.constant_density(density)?;
        self.laplacian(u)
    }

    fn gradient_norm_sq(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check_field(u)?;
        if u.spectral_constant_value().is_some() {
            return Ok(ScalarField::spectral_constant(0.0));
        }
        Err(Error::Unsupported(
            "|∇u|² of a non-constant zonal field has no coefficient form; use evaluate_zonal".into(),
        ))
    }

    fn dirichlet_form(&self, density: &ScalarField, u: &ScalarField, v: &ScalarField) -> Result<f64> {
        let k = self.constant_density(density)?;
        Ok(k * self.weighted_sum(u, v, |l| self.eigenvalue(l))?)
    }

    fn volume_weights(&self) -> Weights {
        Weights::Spectral { density: 1.0 }
    }

    fn measure(&self, density: &ScalarField) -> Result<Weights> {
        Ok(Weights::Spectral {
            density: self.constant_density(density)?,
        })
    }

    fn integrate(&self, field: &ScalarField, w: &Weights) -> Result<f64> {
        self.check_field(field)?;
        Ok(self.density(w)? * field.coeff(0) * self.volume())
    }

    fn inner(&self, u: &ScalarField, v: &ScalarField, w: &Weights) -> Result<f64> {
        Ok(self.density(w)? * self.weighted_sum(u, v, |_| 1.0)?)
    }

    fn hessian(&self, f: &ScalarField) -> Result<SymTensorField> {
        self.check_field(f)?;
        if f.spectral_constant_value().is_some() {
            Ok(SymTensorField::Spectral { coeff: 0.0 })
        } else {
            Err(Error::Unsupported(
                "Hessian of a non-constant zonal field is not a multiple of the metric".into(),
            ))
        }
    }

    fn hessian_energy(&self, u: &ScalarField, w: &Weights) -> Result<f64> {
        let ric = self.ricci_coefficient();
        let k = self.density(w)?;
        Ok(k * self.weighted_sum(u, u, |l| {
            let lam = self.eigenvalue(l);
            lam * lam - ric * lam
        })?)
    }

    fn ricci(&self) -> Result<SymTensorField> {
        Ok(SymTensorField::Spectral {
            coeff: self.ricci_coefficient(),
        })
    }

    fn tensor_energy(&self, t: &SymTensorField, u: &ScalarField, w: &Weights) -> Result<f64> {
        match t {
            SymTensorField::Spectral { coeff } => {
                Ok(coeff * self.density(w)? * self.weighted_sum(u, u, |l| self.eigenvalue(l))?)
            }
            SymTensorField::Grid { kind, .. } => Err(mismatch(BackendKind::Sphere, *kind)),
        }
    }

    fn eigen_extremes(&self, t: &SymTensorField) -> Result<(f64, f64)> {
        match t {
            SymTensorField::Spectral { coeff } => Ok((*coeff, *coeff)),
            SymTensorField::Grid { kind, .. } => Err(mismatch(BackendKind::Sphere, *kind)),
        }
    }

    fn pointwise(&self, u: &ScalarField, samples: usize) -> Result<PointSamples> {
        let samples = samples.max(2);
        let thetas: Vec<f64> = (0..samples).map(|j| PI * j as f64 / (samples - 1) as f64).collect();
        let z = evaluate_zonal(self, u, &thetas)?;
        Ok(PointSamples {
            value: z.value,
            grad_sq: z.grad_sq,
            laplacian: z.laplacian,
        })
    }

    fn first_eigenvalue(&self, density: &ScalarField) -> Result<f64> {
        self.constant_density(density)?;
        if self.band_limit < 1 {
            return Err(Error::Resolution("band limit 0 carries no nonconstant mode".into()));
        }
        Ok(self.eigenvalue(1))
    }

    fn volume_elements(&self) -> Vec<f64> {
        vec![self.volume()]
    }

    fn stable_step(&self, u: Option<&ScalarField>) -> f64 {
        match u.and_then(Self::max_degree) {
            Some(l) if l > 0 => 1.6 / self.eigenvalue(l),
            _ => f64::INFINITY,
        }
    }

    fn flow_vars(&self) -> Vec<f64> {
        vec![self.r2]
    }

    fn with_flow_vars(&self, vars: &[f64]) -> Result<Arc<dyn Backend>> {
        let r2 = *vars.first().ok_or_else(|| Error::Invalid("empty flow vector".into()))?;
        Ok(Arc::new(SphereSpectral::new(self.dim, r2, self.band_limit)?))
    }

    fn flow_rhs(&self, alpha: Option<f64>) -> Result<Vec<f64>> {
        if alpha.is_some() {
            return Err(Error::Unsupported(
                "the sphere backend carries no map field; Ricci-harmonic flow needs the warped torus".into(),
            ));
        }
        Ok(vec![-2.0 * (self.dim as f64 - 1.0)])
    }

    fn closed_form_flow(&self, dt: f64) -> Option<Result<Arc<dyn Backend>>> {
        let r2 = self.r2 - 2.0 * (self.dim as f64 - 1.0) * dt;
        Some(if r2 > 0.0 {
            SphereSpectral::new(self.dim, r2, self.band_limit).map(|s| Arc::new(s) as Arc<dyn Backend>)
        } else {
            Err(Error::Extinction { t: dt, r2, floor: 0.0 })
        })
    }

    fn min_metric_coefficient(&self) -> f64 {
        self.r2
    }

    fn as_sphere(&self) -> Option<&SphereSpectral> {
        Some(self)
    }
}
