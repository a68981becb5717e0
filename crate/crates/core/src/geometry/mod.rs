//! Discrete manifold backends.
//!
//! Every backend implements [`Backend`]: curvature, Laplace–Beltrami and
//! drift operators, quadrature, the Christoffel-corrected Hessian and the
//! flow right-hand sides. Downstream solvers only see `dyn Backend`, so a
//! new geometry family plugs in by implementing the trait and registering a
//! factory in [`registry`].
//!
//! Grid backends use second-order centered stencils in divergence form on a
//! periodic unit square, which makes discrete integration by parts exact.
//! The sphere backend is purely spectral over zonal modes.

mod conformal;
mod field;
mod grid;
pub mod registry;
mod sphere;
mod warped;

use std::fmt;
use std::sync::Arc;

pub use conformal::ConformalTorus;
pub use field::{BackendKind, FieldSpec, Mode, PointSamples, ScalarField, SymTensorField, Trig, TrigTerm, Weights};
pub use sphere::{
    evaluate_zonal, gegenbauer_normalized, harmonic_multiplicity, unit_sphere_volume, SphereSpectral, ZonalSamples,
};
pub use warped::WarpedTorus;

use crate::error::{Error, Result};

/// Default spectral band limit.
pub const DEFAULT_BAND_LIMIT: usize = 32;
/// Default grid resolution per axis.
pub const DEFAULT_RESOLUTION: usize = 128;
/// Stability factor in `dt <= CFL_FACTOR * dx^2 * min(metric)`.
pub const CFL_FACTOR: f64 = 0.2;
/// Smallest metric coefficient tolerated before a flow is declared divergent.
pub const MIN_METRIC: f64 = 1e-6;

/// A discrete geometry at one instant.
pub trait Backend: fmt::Debug + Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Manifold dimension `n`.
    fn dimension(&self) -> usize;

    /// Grid points per axis, or the band limit for spectral backends.
    fn resolution(&self) -> usize;

    /// Grid spacing, `None` for spectral backends.
    fn spacing(&self) -> Option<f64>;

    /// Number of samples in a grid field, `None` for spectral backends.
    fn field_len(&self) -> Option<usize>;

    /// Checks that `u` lives on this backend.
    fn check_field(&self, u: &ScalarField) -> Result<()>;

    fn constant_field(&self, c: f64) -> ScalarField;

    /// Samples initial data on this backend.
    fn sample(&self, spec: &FieldSpec) -> Result<ScalarField>;

    /// Scalar curvature `R`.
    fn scalar_curvature(&self) -> Result<ScalarField>;

    /// Laplace–Beltrami operator.
    fn laplacian(&self, u: &ScalarField) -> Result<ScalarField>;

    /// Drift Laplacian `Δu - <∇f, ∇u>` for `density ∝ e^{-f}`.
    fn drift_laplacian(&self, density: &ScalarField, u: &ScalarField) -> Result<ScalarField>;

    /// Pointwise `|∇u|²` from centered differences.
    fn gradient_norm_sq(&self, u: &ScalarField) -> Result<ScalarField>;

    /// Discrete Dirichlet form `∫<∇u,∇v> density dμ`, the exact adjoint partner of
    /// [`Backend::drift_laplacian`].
    fn dirichlet_form(&self, density: &ScalarField, u: &ScalarField, v: &ScalarField) -> Result<f64>;

    /// Weights of `dμ`.
    fn volume_weights(&self) -> Weights;

    /// Weights of `density · dμ`.
    fn measure(&self, density: &ScalarField) -> Result<Weights>;

    fn integrate(&self, field: &ScalarField, w: &Weights) -> Result<f64>;

    /// `∫ u v` against `w`.
    fn inner(&self, u: &ScalarField, v: &ScalarField, w: &Weights) -> Result<f64>;

    /// Covariant Hessian with Christoffel corrections.
    fn hessian(&self, f: &ScalarField) -> Result<SymTensorField>;

    /// `∫ |∇²u|² ` against `w`.
    fn hessian_energy(&self, u: &ScalarField, w: &Weights) -> Result<f64>;

    fn ricci(&self) -> Result<SymTensorField>;

    /// `∫ T(∇u, ∇u)` against `w`.
    fn tensor_energy(&self, t: &SymTensorField, u: &ScalarField, w: &Weights) -> Result<f64>;

    /// Smallest and largest eigenvalue of `T` relative to `g` over the manifold.
    fn eigen_extremes(&self, t: &SymTensorField) -> Result<(f64, f64)>;

    /// `dφ ⊗ dφ` for backends carrying a map field.
    fn map_differential(&self) -> Option<SymTensorField> {
        None
    }

    /// `|∇φ|²` for backends carrying a map field.
    fn map_energy_density(&self) -> Option<ScalarField> {
        None
    }

    /// Pointwise value, gradient norm and Laplacian. Spectral backends
    /// evaluate on `samples` equispaced colatitudes.
    fn pointwise(&self, u: &ScalarField, samples: usize) -> Result<PointSamples>;

    /// Smallest nonzero eigenvalue of `-Δ_f` in the `density · dμ` inner product.
    fn first_eigenvalue(&self, density: &ScalarField) -> Result<f64>;

    /// Volume elements (cell weights of `dμ`, or total volume for spectral backends).
    fn volume_elements(&self) -> Vec<f64>;

    /// Largest stable explicit step for parabolic problems on this geometry;
    /// `u` narrows the bound for spectral data.
    fn stable_step(&self, u: Option<&ScalarField>) -> f64;

    /// Variables advanced by the flow integrator.
    fn flow_vars(&self) -> Vec<f64>;

    fn with_flow_vars(&self, vars: &[f64]) -> Result<Arc<dyn Backend>>;

    /// Time derivative of [`Backend::flow_vars`]: Ricci flow when `alpha` is
    /// `None`, Ricci-harmonic flow with coupling `alpha` otherwise.
    fn flow_rhs(&self, alpha: Option<f64>) -> Result<Vec<f64>>;

    /// Exact flow by `dt`, when the backend has a closed form.
    fn closed_form_flow(&self, _dt: f64) -> Option<Result<Arc<dyn Backend>>> {
        None
    }

    /// Rejects fields that oscillate on the grid scale.
    fn check_resolved(&self, _u: &ScalarField) -> Result<()> {
        Ok(())
    }

    /// Smallest metric coefficient, watched for degeneration.
    fn min_metric_coefficient(&self) -> f64;

    fn as_sphere(&self) -> Option<&SphereSpectral> {
        None
    }
}

/// A backend geometry stamped with its flow time.
#[derive(Debug, Clone)]
pub struct ManifoldState {
    pub t: f64,
    pub geometry: Arc<dyn Backend>,
}

impl ManifoldState {
    pub fn new(t: f64, geometry: Arc<dyn Backend>) -> Self {
        ManifoldState { t, geometry }
    }

    pub fn kind(&self) -> BackendKind {
        self.geometry.kind()
    }

    pub fn dimension(&self) -> usize {
        self.geometry.dimension()
    }
}

pub fn scalar_curvature(state: &ManifoldState) -> Result<ScalarField> {
    state.geometry.scalar_curvature()
}

pub fn laplace_beltrami(state: &ManifoldState, u: &ScalarField) -> Result<ScalarField> {
    state.geometry.laplacian(u)
}

pub fn gradient_norm_sq(state: &ManifoldState, u: &ScalarField) -> Result<ScalarField> {
    state.geometry.gradient_norm_sq(u)
}

pub fn integrate(state: &ManifoldState, field: &ScalarField, w: &Weights) -> Result<f64> {
    state.geometry.integrate(field, w)
}

pub fn hessian_energy(state: &ManifoldState, u: &ScalarField, w: &Weights) -> Result<f64> {
    state.geometry.hessian_energy(u, w)
}

/// Values of a grid field, or the single value of a constant spectral field.
pub(crate) fn sample_values(field: &ScalarField) -> Result<Vec<f64>> {
    match field {
        ScalarField::Grid { values, .. } => Ok(values.clone()),
        ScalarField::Spectral { .. } => field
            .spectral_constant_value()
            .map(|c| vec![c])
            .ok_or_else(|| Error::Unsupported("pointwise values of a non-constant spectral field".into())),
    }
}
