//! Name-keyed backend factories.
//!
//! Scenario configs name a backend (`"sphere"`, `"conformal_torus"`,
//! `"warped_torus"`) together with a JSON parameter object. The registry
//! validates the parameters, fills in defaults and builds the initial
//! geometry.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    Backend, BackendKind, ConformalTorus, FieldSpec, SphereSpectral, WarpedTorus, DEFAULT_BAND_LIMIT,
    DEFAULT_RESOLUTION,
};
use crate::error::{Error, Result};

pub trait BackendFactory: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Validates `params` and returns them with defaults filled in.
    fn normalize(&self, params: &Value) -> Result<Value>;

    fn build(&self, params: &Value) -> Result<Arc<dyn Backend>>;
}

fn parse<T: DeserializeOwned>(params: &Value) -> Result<T> {
    let params = if params.is_null() {
        Value::Object(Default::default())
    } else {
        params.clone()
    };
    serde_json::from_value(params).map_err(|e| Error::config("backend.params", e.to_string()))
}

fn normalized<T: DeserializeOwned + Serialize>(params: &Value) -> Result<Value> {
    let p: T = parse(params)?;
    serde_json::to_value(p).map_err(|e| Error::config("backend.params", e.to_string()))
}

fn default_dimension() -> usize {
    2
}

fn one() -> f64 {
    1.0
}

fn default_band_limit() -> usize {
    DEFAULT_BAND_LIMIT
}

fn default_resolution() -> usize {
    DEFAULT_RESOLUTION
}

fn zero_spec() -> FieldSpec {
    FieldSpec::constant(0.0)
}

fn one_spec() -> FieldSpec {
    FieldSpec::constant(1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereParams {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "one")]
    pub r0sq: f64,
    #[serde(default = "default_band_limit")]
    pub band_limit: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalParams {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "zero_spec")]
    pub phi: FieldSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpedParams {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "one_spec")]
    pub a: FieldSpec,
    #[serde(default = "one_spec")]
    pub b: FieldSpec,
    #[serde(default = "zero_spec")]
    pub phi: FieldSpec,
}

struct SphereFactory;

impl BackendFactory for SphereFactory {
    fn kind(&self) -> BackendKind {
        BackendKind::Sphere
    }

    fn normalize(&self, params: &Value) -> Result<Value> {
        normalized::<SphereParams>(params)
    }

    fn build(&self, params: &Value) -> Result<Arc<dyn Backend>> {
        let p: SphereParams = parse(params)?;
        Ok(Arc::new(SphereSpectral::new(p.dimension, p.r0sq, p.band_limit)?))
    }
}

struct ConformalFactory;

impl BackendFactory for ConformalFactory {
    fn kind(&self) -> BackendKind {
        BackendKind::ConformalTorus
    }

    fn normalize(&self, params: &Value) -> Result<Value> {
        normalized::<ConformalParams>(params)
    }

    fn build(&self, params: &Value) -> Result<Arc<dyn Backend>> {
        let p: ConformalParams = parse(params)?;
        Ok(Arc::new(ConformalTorus::from_spec(p.resolution, &p.phi)?))
    }
}

struct WarpedFactory;

impl BackendFactory for WarpedFactory {
    fn kind(&self) -> BackendKind {
        BackendKind::WarpedTorus
    }

    fn normalize(&self, params: &Value) -> Result<Value> {
        normalized::<WarpedParams>(params)
    }

    fn build(&self, params: &Value) -> Result<Arc<dyn Backend>> {
        let p: WarpedParams = parse(params)?;
        Ok(Arc::new(WarpedTorus::from_spec(p.resolution, &p.a, &p.b, &p.phi)?))
    }
}

/// Factories keyed by backend name.
pub struct Registry {
    factories: BTreeMap<String, Box<dyn BackendFactory>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            factories: BTreeMap::new(),
        }
    }

    /// The three built-in backends.
    pub fn standard() -> Self {
        let mut r = Registry::empty();
        r.register("sphere", Box::new(SphereFactory));
        r.register("conformal_torus", Box::new(ConformalFactory));
        r.register("warped_torus", Box::new(WarpedFactory));
        r
    }

    pub fn register(&mut self, name: &str, factory: Box<dyn BackendFactory>) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn get(&self, name: &str) -> Result<&dyn BackendFactory> {
        self.factories.get(name).map(|f| f.as_ref()).ok_or_else(|| {
            Error::config(
                "backend.kind",
                format!(
                    "unknown backend `{name}` (known: {})",
                    self.names().collect::<Vec<_>>().join(", ")
                ),
            )
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &Value) -> Result<Arc<dyn Backend>> {
        self.get(name)?.build(params)
    }
}

/// Process-wide registry holding the built-in backends.
pub fn global() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(Registry::standard)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_are_filled_in() {
        let v = global().get("sphere").unwrap().normalize(&Value::Null).unwrap();
        assert_eq!(v, json!({"dimension": 2, "r0sq": 1.0, "band_limit": 32}));
    }

    #[test]
    fn unknown_names_and_keys_are_rejected() {
        assert!(global().get("klein_bottle").is_err());
        let e = global()
            .get("conformal_torus")
            .unwrap()
            .normalize(&json!({"resolution": 16, "radius": 2}))
            .unwrap_err();
        assert!(e.to_string().contains("radius"));
    }

    #[test]
    fn builds_each_backend() {
        for name in ["sphere", "conformal_torus", "warped_torus"] {
            let g = global().build(name, &json!({"resolution": 16})).or_else(|_| global().build(name, &Value::Null));
            assert_eq!(g.unwrap().kind().name(), name);
        }
    }
}
