//! Model parameters and their configuration-file form.
//!
//! Defaults are the nominal values of the lateral-inhibition network:
//! `a1 = 11, a2 = 7, b1 = 5, b2 = 3.5, I = 0.9`, transient stimulus
//! `d1 = 0, d2 = 10, τ_ext = 2`, ring half-width `L = 4` with `n = 1000` neurons.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transient heterogeneous drive `d1 / cosh(d2 x)` applied on `[0, tau_ext)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stimulus {
    pub d1: f64,
    pub d2: f64,
    pub tau_ext: f64,
}

impl Default for Stimulus {
    fn default() -> Self {
        Self { d1: 0.0, d2: 10.0, tau_ext: 2.0 }
    }
}

/// Ring `ℝ / 2Lℤ` sampled by `n` evenly spaced neurons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Domain {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
}

impl Default for Domain {
    fn default() -> Self {
        Self { half_width: 4.0, n: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    #[serde(rename = "I")]
    pub drive: f64,
    /// Decay bound of the stability strip `Re z > -eta`.
    pub eta: f64,
    pub stimulus: Stimulus,
    pub domain: Domain,
}

impl Default for ModelParams {
    fn default() -> Self {
        let (b1, b2) = (5.0, 3.5);
        Self {
            beta: 4.5,
            a1: 11.0,
            a2: 7.0,
            b1,
            b2,
            drive: 0.9,
            eta: default_eta(b1, b2),
            stimulus: Stimulus::default(),
            domain: Domain::default(),
        }
    }
}

pub fn default_eta(b1: f64, b2: f64) -> f64 {
    b1.min(b2) - 0.1
}

impl ModelParams {
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Kernel as `(amplitude, rate)` pairs: `w(x) = Σ A e^{-b|x|}`.
    pub fn kernel_terms(&self) -> [(f64, f64); 2] {
        [(self.a1, self.b1), (-self.a2, self.b2)]
    }

    pub fn min_decay(&self) -> f64 {
        self.b1.min(self.b2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        let finite = [self.beta, self.a1, self.a2, self.b1, self.b2, self.drive, self.eta]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter");
        }
        if self.beta <= 0.0 {
            return bad("beta must be positive");
        }
        if self.b1 <= 0.0 || self.b2 <= 0.0 {
            return bad("kernel decay rates b1, b2 must be positive");
        }
        if self.a1 < 0.0 || self.a2 < 0.0 {
            return bad("kernel amplitudes a1, a2 must be non-negative");
        }
        if !(self.eta > 0.0 && self.eta < self.min_decay()) {
            return bad("eta must satisfy 0 < eta < min(b1, b2)");
        }
        if self.domain.n == 0 || self.domain.half_width <= 0.0 {
            return bad("domain needs n >= 1 and L > 0");
        }
        Ok(())
    }
}

/// Numerical settings shared by the solvers; every field has a default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Numerics {
    pub newton_tol: f64,
    pub max_iter: usize,
    pub threshold_margin: f64,
    pub finite_diff_step: f64,
    pub root_tol: f64,
    pub class_tol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            newton_tol: 1e-11,
            max_iter: 50,
            threshold_margin: 0.0,
            finite_diff_step: 1e-6,
            root_tol: 1e-9,
            class_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct ModelSection {
    beta: f64,
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    #[serde(rename = "I")]
    drive: f64,
    eta: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::default();
        Self { beta: p.beta, a1: p.a1, a2: p.a2, b1: p.b1, b2: p.b2, drive: p.drive, eta: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct ConfigFile {
    model: ModelSection,
    stimulus: Stimulus,
    domain: Domain,
    numerics: Numerics,
}

/// Parsed configuration: model parameters plus numerics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Config {
    pub params: ModelParams,
    pub numerics: Numerics,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let m = file.model;
        let params = ModelParams {
            beta: m.beta,
            a1: m.a1,
            a2: m.a2,
            b1: m.b1,
            b2: m.b2,
            drive: m.drive,
            eta: m.eta.unwrap_or_else(|| default_eta(m.b1, m.b2)),
            stimulus: file.stimulus,
            domain: file.domain,
        };
        params.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self { params, numerics: file.numerics })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let p = &self.params;
        let file = ConfigFile {
            model: ModelSection {
                beta: p.beta,
                a1: p.a1,
                a2: p.a2,
                b1: p.b1,
                b2: p.b2,
                drive: p.drive,
                eta: Some(p.eta),
            },
            stimulus: p.stimulus,
            domain: p.domain,
            numerics: self.numerics,
        };
        toml::to_string(&file).expect("config is always serialisable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = ModelParams::default();
        p.validate().unwrap();
        assert!((p.eta - 3.4).abs() < 1e-15);
    }

    #[test]
    fn empty_config_gives_defaults() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c.params, ModelParams::default());
    }

    #[test]
    fn partial_config_overrides() {
        let c = Config::from_toml_str(
            "[model]\nbeta = 10.0\nI = 0.82\n[domain]\nn = 500\nL = 3.0\n[numerics]\nmax_iter = 7\n",
        )
        .unwrap();
        assert_eq!(c.params.beta, 10.0);
        assert_eq!(c.params.drive, 0.82);
        assert_eq!(c.params.domain.n, 500);
        assert_eq!(c.params.domain.half_width, 3.0);
        assert_eq!(c.numerics.max_iter, 7);
        assert_eq!(c.params.a1, 11.0);
    }

    #[test]
    fn eta_outside_strip_is_rejected() {
        let err = Config::from_toml_str("[model]\neta = 3.6\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = Config::from_toml_str("[model]\nbeta = -1.0\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut c = Config::default();
        c.params.beta = 7.7;
        c.params.stimulus.d1 = 2.0;
        let back = Config::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }
}
