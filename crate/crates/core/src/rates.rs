//! Bath spectral rates Γ(ν), γ(ν), the dephasing rate and temperature.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone)]
pub enum RateFn {
    Constant(f64),
    /// Piecewise-linear in ν, clamped at the ends. Nodes must be sorted.
    Tabulated(Vec<(f64, f64)>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::Constant(r) => write!(f, "Constant({r})"),
            RateFn::Tabulated(t) => write!(f, "Tabulated({} nodes)", t.len()),
            RateFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl RateFn {
    pub fn tabulated(mut nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("empty rate table".into()));
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        if nodes.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate frequency in rate table".into()));
        }
        if nodes.iter().any(|&(nu, r)| !nu.is_finite() || !r.is_finite() || r < 0.0) {
            return Err(Error::InvalidParameter("rate table entries must be finite, rates non-negative".into()));
        }
        Ok(RateFn::Tabulated(nodes))
    }

    pub fn eval(&self, nu: f64) -> Result<f64> {
        let r = match self {
            RateFn::Constant(r) => *r,
            RateFn::Tabulated(t) => interpolate(t, nu),
            RateFn::Custom(f) => f(nu),
        };
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidParameter(format!("rate {r} at frequency {nu} is negative or not finite")));
        }
        Ok(r)
    }
}

fn interpolate(t: &[(f64, f64)], nu: f64) -> f64 {
    if nu <= t[0].0 {
        return t[0].1;
    }
    let last = t[t.len() - 1];
    if nu >= last.0 {
        return last.1;
    }
    let k = t.partition_point(|&(x, _)| x <= nu);
    let (x0, y0) = t[k - 1];
    let (x1, y1) = t[k];
    y0 + (y1 - y0) * (nu - x0) / (x1 - x0)
}

#[derive(Debug, Clone)]
pub struct RateFunctions {
    /// Γ(ν): oscillator bath.
    pub oscillator: RateFn,
    /// γ(ν): qubit bath.
    pub qubit: RateFn,
    pub gamma_f: f64,
    pub temperature: f64,
}

impl RateFunctions {
    pub fn flat(gamma_osc: f64, gamma_qubit: f64, gamma_f: f64) -> Result<Self> {
        let r = Self {
            oscillator: RateFn::Constant(gamma_osc),
            qubit: RateFn::Constant(gamma_qubit),
            gamma_f,
            temperature: 0.0,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        self.temperature = temperature;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_f.is_finite() && self.gamma_f >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma_f must be non-negative, got {}", self.gamma_f)));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::InvalidParameter(format!("temperature must be non-negative, got {}", self.temperature)));
        }
        if let RateFn::Constant(r) = self.oscillator {
            RateFn::Constant(r).eval(0.0)?;
        }
        if let RateFn::Constant(r) = self.qubit {
            RateFn::Constant(r).eval(0.0)?;
        }
        Ok(())
    }

    pub fn gamma_osc(&self, nu: f64) -> Result<f64> {
        self.oscillator.eval(nu)
    }

    pub fn gamma_qubit(&self, nu: f64) -> Result<f64> {
        self.qubit.eval(nu)
    }

    /// κ(ν) = γ(ν) + 4β²Γ(ν): total transfer rate between the two ladders.
    pub fn kappa(&self, beta: f64, nu: f64) -> Result<f64> {
        Ok(self.gamma_qubit(nu)? + 4.0 * beta * beta * self.gamma_osc(nu)?)
    }
}

/// Config-file form of a rate: a constant or a table of `[ν, rate]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateSpec {
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

impl RateSpec {
    pub fn build(&self) -> Result<RateFn> {
        match self {
            RateSpec::Constant(r) => {
                let f = RateFn::Constant(*r);
                f.eval(0.0)?;
                Ok(f)
            }
            RateSpec::Table(t) => RateFn::tabulated(t.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub oscillator: RateSpec,
    pub qubit: RateSpec,
    #[serde(default)]
    pub gamma_f: f64,
    #[serde(default)]
    pub temperature: f64,
}

impl RatesConfig {
    pub fn build(&self) -> Result<RateFunctions> {
        let r = RateFunctions {
            oscillator: self.oscillator.build()?,
            qubit: self.qubit.build()?,
            gamma_f: self.gamma_f,
            temperature: self.temperature,
        };
        r.validate()?;
        Ok(r)
    }
}

/// Bose occupation `1/(e^{ν/T} − 1)`; zero at T = 0.
pub fn thermal_occupation(nu: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (nu / temperature).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_forms() {
        let c: RatesConfig = serde_json::from_str(r#"{"oscillator": 0.002, "qubit": [[0.0, 1e-4], [1.0, 3e-4]], "gamma_f": 1e-4}"#).unwrap();
        let r = c.build().unwrap();
        assert_eq!(r.gamma_osc(0.3).unwrap(), 0.002);
        assert!((r.gamma_qubit(0.5).unwrap() - 2e-4).abs() < 1e-15);
        assert!(serde_json::from_str::<RatesConfig>(r#"{"oscillator": 1, "qubit": 1, "extra": 0}"#).is_err());
        let bad: RatesConfig = serde_json::from_str(r#"{"oscillator": -1, "qubit": 0}"#).unwrap();
        assert!(bad.build().is_err());
    }
    use approx::assert_abs_diff_eq;

    #[test]
    fn table_interpolates_and_clamps() {
        let t = RateFn::tabulated(vec![(1.0, 3.0), (0.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(t.eval(0.25).unwrap(), 1.5);
        assert_abs_diff_eq!(t.eval(-1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(t.eval(9.0).unwrap(), 3.0);
        assert!(RateFn::tabulated(vec![(0.0, -1.0)]).is_err());
    }

    #[test]
    fn negative_rates_rejected() {
        assert!(RateFunctions::flat(-1.0, 0.0, 0.0).is_err());
        let f = RateFn::Custom(Arc::new(|nu| nu - 1.0));
        assert!(f.eval(0.5).is_err());
        assert!(f.eval(2.0).is_ok());
    }

    #[test]
    fn occupation_limits() {
        assert_eq!(thermal_occupation(1.0, 0.0), 0.0);
        assert_abs_diff_eq!(thermal_occupation(1.0, 1.0), 1.0 / (std::f64::consts::E - 1.0), epsilon = 1e-15);
        // high temperature: n̄ ≈ T/ν
        assert_abs_diff_eq!(thermal_occupation(1e-3, 1.0), 1000.0, epsilon = 1.0);
    }

    #[test]
    fn kappa_combines_both_baths() {
        let r = RateFunctions::flat(0.0018, 2.28e-4, 6e-4).unwrap();
        assert_abs_diff_eq!(r.kappa(0.1, 0.3).unwrap(), 3e-4, epsilon = 1e-15);
    }
}
