//! Name-keyed registries of interchangeable algorithms.
//!
//! A strategy is selected at runtime from a spec string of the form
//! `name` or `name:key=value,key=value`, as accepted by the CLI and the
//! key=value pipeline configuration.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type Params = BTreeMap<String, String>;

pub type Factory<T> = fn(&Params) -> Result<Box<T>>;

pub struct StrategyRegistry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Factory<T>>,
}

impl<T: ?Sized> StrategyRegistry<T> {
    pub fn new(kind: &'static str) -> Self {
        StrategyRegistry {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: Factory<T>) -> &mut Self {
        self.entries.insert(name, factory);
        self
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn build(&self, name: &str, params: &Params) -> Result<Box<T>> {
        match self.entries.get(name) {
            Some(factory) => factory(params),
            None => Err(Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().iter().map(|s| s.to_string()).collect(),
            }),
        }
    }

    /// Builds from a `name:key=value,...` spec string.
    pub fn build_spec(&self, spec: &str) -> Result<Box<T>> {
        let (name, params) = parse_spec(spec)?;
        self.build(&name, &params)
    }
}

pub fn parse_spec(spec: &str) -> Result<(String, Params)> {
    let spec = spec.trim();
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n.trim(), r.trim()),
        None => (spec, ""),
    };
    if name.is_empty() {
        return Err(Error::config(format!("empty strategy name in `{spec}`")));
    }
    let mut params = Params::new();
    for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected key=value, got `{pair}` in `{spec}`")))?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((name.to_string(), params))
}

pub fn param_f64(params: &Params, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse::<f64>()
            .map_err(|_| Error::config(format!("parameter `{key}`: `{v}` is not a number"))),
    }
}

pub fn param_opt_f64(params: &Params, key: &str) -> Result<Option<f64>> {
    params
        .get(key)
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::config(format!("parameter `{key}`: `{v}` is not a number")))
        })
        .transpose()
}

pub fn param_usize(params: &Params, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| Error::config(format!("parameter `{key}`: `{v}` is not a count"))),
    }
}

/// Rejects keys a factory does not understand.
pub fn check_keys(params: &Params, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::config(format!(
                "unknown parameter `{key}` (expected one of: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}
