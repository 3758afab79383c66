//! Two-tone spectroscopy: pump the `−` ladder, probe the cross-ladder
//! transitions and record the drop in steady-state excitation number.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adiabatic::{build_basis, transition_frequency, DressedBasis, EnergyMode};
use crate::dynamics::{
    dressed_observables, observables, steady_state_longtime, steady_state_nullspace, timeaveraged_with, Controls,
    Window, LONGTIME_RESIDUAL,
};
use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, SpaceDims};
use crate::lindblad::{build_driven_rotating, co_rotating_spectroscopy, Drive};
use crate::rabi::RabiParams;
use crate::rates::RateFunctions;
use crate::superop::{Liouvillian, MAX_DENSE_DIM};

/// `ω̃_N = ω₀(1 − 2β² − 4Nβ²)` for `N < n`.
pub fn predicted_resonances(p: &RabiParams, n: usize) -> Vec<f64> {
    (0..n).map(|k| transition_frequency(p, k)).collect()
}

/// `(ω₀ − ω_s)/(2ω₀β²)`; resonances sit at `2N + 1`.
pub fn normalized_position(p: &RabiParams, omega_s: f64) -> f64 {
    (p.omega0 - omega_s) / (2.0 * p.omega0 * p.beta * p.beta)
}

pub fn omega_s_at(p: &RabiParams, x: f64) -> f64 {
    p.omega0 - 2.0 * p.omega0 * p.beta * p.beta * x
}

/// `P = ω_p Γ(ω_p) N_ss / 2` (ħ = 1).
pub fn dissipated_power(n_ss: f64, omega_p: f64, rates: &RateFunctions) -> Result<f64> {
    if !(n_ss >= 0.0) {
        return Err(Error::InvalidParameter(format!("n_ss must be non-negative, got {n_ss}")));
    }
    Ok(omega_p * rates.gamma_osc(omega_p)? * n_ss / 2.0)
}

/// `4Ω_p²/Γ²`, the resonant-pump occupation of the `−` ladder.
pub fn pump_occupation(amplitude: f64, gamma: f64) -> f64 {
    4.0 * amplitude * amplitude / (gamma * gamma)
}

pub fn pump_amplitude_for(occupation: f64, gamma: f64) -> f64 {
    occupation.sqrt() * gamma / 2.0
}

/// Smallest level count whose Poisson(`occupation`) tail is below `tail`, at least `min`.
pub fn levels_for_occupation(occupation: f64, tail: f64, min: usize) -> usize {
    let mut term = (-occupation).exp();
    let mut cdf = 0.0;
    let mut n = 0;
    while 1.0 - cdf - term >= tail && n < 200 {
        cdf += term;
        n += 1;
        term *= occupation / n as f64;
    }
    (n + 1).max(min)
}

pub fn poisson_weight(occupation: f64, n: usize) -> f64 {
    let mut w = (-occupation).exp();
    for k in 1..=n {
        w *= occupation / k as f64;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSettings {
    /// Burn-in; defaults to `10/(slowest rate)`.
    pub t_start: Option<f64>,
    /// Averaging length; defaults to `20·2π/ω_s`.
    pub length: Option<f64>,
    pub dt: f64,
    pub tol: f64,
    pub check_stride: usize,
}

impl Default for WindowSettings {
    fn default() -> Self {
        Self { t_start: None, length: None, dt: 4.0, tol: 1e-7, check_stride: 64 }
    }
}

#[derive(Debug, Clone)]
pub struct SpectroscopyConfig {
    pub params: RabiParams,
    pub rates: RateFunctions,
    pub pump: Drive,
    pub spec_amp: f64,
    pub omega_s: Vec<f64>,
    pub n_levels: usize,
    pub window: WindowSettings,
}

pub const REFERENCE_POINTS: usize = 241;
pub const REFERENCE_X_MAX: f64 = 12.0;

/// `Γ = 6κ = 3γ_f = 3ω₀β²/5`, `γ = κ − 4β²Γ`, flat in frequency.
pub fn reference_rates(p: &RabiParams) -> Result<RateFunctions> {
    let g = 0.6 * p.omega0 * p.beta * p.beta;
    let kappa = g / 6.0;
    RateFunctions::flat(g, kappa - 4.0 * p.beta * p.beta * g, g / 3.0)
}

/// `n` points of `ω_s` evenly spaced in normalized position over `[0, x_max]`.
pub fn normalized_grid(p: &RabiParams, n: usize, x_max: f64) -> Vec<f64> {
    (0..n).map(|k| omega_s_at(p, x_max * k as f64 / (n - 1).max(1) as f64)).collect()
}

impl SpectroscopyConfig {
    /// ω₀ = 0.3ω, β = 0.1, reference rates, `Ω_s = κ`, resonant pump tuned to
    /// `occupation = 4Ω_p²/Γ²`, levels from the Poisson tail.
    pub fn reference(occupation: f64) -> Result<Self> {
        let params = RabiParams::new(1.0, 0.3, 0.1)?;
        let rates = reference_rates(&params)?;
        let (_, omega_minus) = crate::adiabatic::ladder_frequencies(&params);
        let gamma = rates.gamma_osc(omega_minus)?;
        let kappa = rates.kappa(params.beta, transition_frequency(&params, 0))?;
        let n_levels = levels_for_occupation(occupation, 1e-5, 8).min(crate::adiabatic::n_max(params.beta));
        Ok(Self {
            params,
            rates,
            pump: Drive { amplitude: pump_amplitude_for(occupation, gamma), frequency: omega_minus },
            spec_amp: kappa,
            omega_s: normalized_grid(&params, REFERENCE_POINTS, REFERENCE_X_MAX),
            n_levels,
            window: WindowSettings::default(),
        })
    }

    /// Hard errors, then soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.params.validate()?;
        self.rates.validate()?;
        if self.omega_s.is_empty() {
            return Err(Error::InvalidParameter("empty ω_s grid".into()));
        }
        let hi = 1.2 * self.params.omega0;
        if let Some(w) = self.omega_s.iter().find(|&&w| !(w > 0.0 && w <= hi)) {
            return Err(Error::InvalidParameter(format!("ω_s = {w} outside (0, {hi}]")));
        }
        if !(self.spec_amp >= 0.0) || !(self.pump.amplitude >= 0.0) {
            return Err(Error::InvalidParameter("drive amplitudes must be non-negative".into()));
        }
        let w = &self.window;
        if !(w.dt > 0.0 && w.tol > 0.0) || w.check_stride == 0 {
            return Err(Error::InvalidParameter("window dt, tol and check_stride must be positive".into()));
        }
        let mut warnings = Vec::new();
        let (_, wm) = crate::adiabatic::ladder_frequencies(&self.params);
        let g = self.rates.gamma_osc(wm)?;
        if (self.pump.frequency - wm).abs() > g {
            warnings.push(format!("pump frequency {} more than Γ away from ω_− = {wm}", self.pump.frequency));
        }
        Ok(warnings)
    }

    fn controls(&self, b: &DressedBasis) -> Controls {
        let mut c = Controls::new(self.window.dt).with_observables(dressed_observables(b));
        c.tol = self.window.tol;
        c.check_stride = self.window.check_stride;
        c
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointFailure {
    pub index: usize,
    pub omega_s: f64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSummary {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub kappa_0: f64,
    pub gamma_f: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanMetadata {
    pub params: RabiParams,
    pub pump: Drive,
    pub spec_amp: f64,
    pub n_levels: usize,
    pub window: WindowSettings,
    pub rates: RateSummary,
    pub baseline_method: String,
    pub baseline_residual: f64,
    pub baseline_edge_population: f64,
    pub max_peak_to_peak: f64,
    pub max_residual: f64,
    pub frame: String,
    pub normalization: String,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub omega_s: Vec<f64>,
    pub normalized_position: Vec<f64>,
    /// NaN where the point failed.
    pub n_ss: Vec<f64>,
    pub percent_reduction: Vec<f64>,
    pub peak_to_peak: Vec<f64>,
    pub baseline_n_ss: f64,
    /// `4Ω_p²/Γ(ω_−)²`.
    pub label_n_ss: f64,
    pub predicted_resonances: Vec<f64>,
    pub failures: Vec<PointFailure>,
    pub metadata: ScanMetadata,
}

/// Interior indices with `y[i−1] < y[i] ≥ y[i+1]`.
pub fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1]).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DipCheck {
    pub n: usize,
    /// `2N + 1`
    pub expected: f64,
    pub poisson_weight: f64,
    pub nearest_maximum: Option<f64>,
    pub reduction_at_maximum: Option<f64>,
    pub tolerance: f64,
    pub aligned: bool,
}

impl ScanResult {
    /// Normalized positions of the local maxima of the percent reduction.
    pub fn maxima_positions(&self) -> Vec<f64> {
        local_maxima(&self.percent_reduction).into_iter().map(|i| self.normalized_position[i]).collect()
    }

    /// Largest percent reduction within `half_width` of normalized position `x`.
    pub fn dip_at(&self, x: f64, half_width: f64) -> f64 {
        self.normalized_position
            .iter()
            .zip(&self.percent_reduction)
            .filter(|(p, r)| (*p - x).abs() <= half_width && r.is_finite())
            .map(|(_, &r)| r)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Γ(ω_−)/2` in normalized-position units.
    pub fn half_linewidth(&self) -> f64 {
        let p = &self.metadata.params;
        self.metadata.rates.gamma_minus / 2.0 / (2.0 * p.omega0 * p.beta * p.beta)
    }

    /// For each `N < n`, the local maximum nearest `2N + 1` and whether it is within `Γ/2`.
    pub fn dip_alignment(&self, n: usize) -> Vec<DipCheck> {
        let maxima: Vec<usize> = local_maxima(&self.percent_reduction);
        let tol = self.half_linewidth();
        (0..n)
            .map(|k| {
                let expected = (2 * k + 1) as f64;
                let nearest = maxima
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        (self.normalized_position[a] - expected).abs().total_cmp(&(self.normalized_position[b] - expected).abs())
                    });
                let pos = nearest.map(|i| self.normalized_position[i]);
                DipCheck {
                    n: k,
                    expected,
                    poisson_weight: poisson_weight(self.baseline_n_ss, k),
                    nearest_maximum: pos,
                    reduction_at_maximum: nearest.map(|i| self.percent_reduction[i]),
                    tolerance: tol,
                    aligned: pos.is_some_and(|x| (x - expected).abs() <= tol + 1e-9),
                }
            })
            .collect()
    }
}

fn baseline(me: &crate::lindblad::MasterEquation, b: &DressedBasis, cfg: &SpectroscopyConfig) -> Result<(CMatrix, String, f64)> {
    if b.dressed_dim() <= MAX_DENSE_DIM {
        let s = steady_state_nullspace(me)?.unique()?;
        return Ok((s.rho, "nullspace".into(), s.residual));
    }
    let start = b.unit(crate::adiabatic::Sector::Minus, 0, crate::adiabatic::Sector::Minus, 0);
    let t_max = 1e3 / me.slowest_rate().unwrap_or(1e-3);
    let s = steady_state_longtime(me, &start, &cfg.controls(b), LONGTIME_RESIDUAL, t_max)?;
    Ok((s.rho, "longtime".into(), s.residual))
}

/// Baseline by nullspace (long-time integration above the dense cap), then
/// each `ω_s` by a time-averaged run started from the baseline state.
/// Failed points are recorded and leave NaN in the tables.
pub fn run_scan(cfg: &SpectroscopyConfig) -> Result<ScanResult> {
    let warnings = cfg.validate()?;
    let p = cfg.params;
    let dims = SpaceDims::new(SpaceDims::default().n_cut().max(2 * cfg.n_levels + 10))?;
    let b = build_basis(&p, cfg.n_levels, dims, EnergyMode::Truncated)?;
    let base_me = build_driven_rotating(&b, &cfg.rates, cfg.pump)?;
    let (rho0, method, base_res) = baseline(&base_me, &b, cfg)?;
    let rec0 = observables(&rho0, &b)?;
    let n0 = rec0.n_total;
    if !(n0 > 0.0) {
        return Err(Error::InvalidParameter(format!("baseline N_ss = {n0} is not positive; is the pump on?")));
    }
    let controls = cfg.controls(&b);
    let points: Vec<Result<(f64, f64, f64)>> = cfg
        .omega_s
        .par_iter()
        .map(|&ws| {
            let probe = Drive { amplitude: cfg.spec_amp, frequency: ws };
            let me = co_rotating_spectroscopy(&b, &cfg.rates, cfg.pump, probe)?;
            let slow = me.slowest_rate().ok_or_else(|| Error::InvalidParameter("no dissipation".into()))?;
            let min = Window::minimal(slow, ws);
            let window = Window {
                t_start: cfg.window.t_start.unwrap_or(min.t_start),
                length: cfg.window.length.unwrap_or(min.length),
                reference_frequency: ws,
            };
            window.validate(Some(slow))?;
            let ta = timeaveraged_with(&Liouvillian::from_master(&me), &rho0, &window, &controls)?;
            let n = observables(&ta.steady.rho, &b)?.n_total;
            Ok((n, ta.peak_to_peak("n_total").unwrap_or(f64::NAN), ta.steady.residual))
        })
        .collect();
    let mut n_ss = Vec::with_capacity(points.len());
    let mut p2p = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    let mut max_res: f64 = 0.0;
    for (i, r) in points.into_iter().enumerate() {
        match r {
            Ok((n, pp, res)) => {
                n_ss.push(n);
                p2p.push(pp);
                max_res = max_res.max(res);
            }
            Err(e) => {
                failures.push(PointFailure { index: i, omega_s: cfg.omega_s[i], error: e.to_string() });
                n_ss.push(f64::NAN);
                p2p.push(f64::NAN);
            }
        }
    }
    let gm = cfg.rates.gamma_osc(b.omega_minus)?;
    let metadata = ScanMetadata {
        params: p,
        pump: cfg.pump,
        spec_amp: cfg.spec_amp,
        n_levels: cfg.n_levels,
        window: cfg.window,
        rates: RateSummary {
            gamma_plus: cfg.rates.gamma_osc(b.omega_plus)?,
            gamma_minus: gm,
            kappa_0: cfg.rates.kappa(p.beta, b.omega_tilde[0])?,
            gamma_f: cfg.rates.gamma_f,
            temperature: cfg.rates.temperature,
        },
        baseline_method: method,
        baseline_residual: base_res,
        baseline_edge_population: rec0.edge_population,
        max_peak_to_peak: p2p.iter().cloned().filter(|v| v.is_finite()).fold(0.0, f64::max),
        max_residual: max_res,
        frame: "co-rotating with the probe on the + ladder, pump frame on the − ladder".into(),
        normalization: "raw percent reduction; curves are not individually normalized".into(),
        notes: base_me.notes.clone(),
        warnings,
    };
    Ok(ScanResult {
        normalized_position: cfg.omega_s.iter().map(|&w| normalized_position(&p, w)).collect(),
        percent_reduction: n_ss.iter().map(|&n| 100.0 * (n0 - n) / n0).collect(),
        omega_s: cfg.omega_s.clone(),
        n_ss,
        peak_to_peak: p2p,
        baseline_n_ss: n0,
        label_n_ss: pump_occupation(cfg.pump.amplitude, gm),
        predicted_resonances: predicted_resonances(&p, cfg.n_levels),
        failures,
        metadata,
    })
}

/// One scan per pump amplitude, in the given order.
pub fn pump_family(cfg: &SpectroscopyConfig, amplitudes: &[f64]) -> Result<Vec<ScanResult>> {
    amplitudes
        .iter()
        .map(|&a| {
            let mut c = cfg.clone();
            c.pump.amplitude = a;
            run_scan(&c)
        })
        .collect()
}

/// The reference family for the given baseline occupations, each with its own level count.
pub fn reference_family(occupations: &[f64]) -> Result<Vec<ScanResult>> {
    occupations.iter().map(|&n| run_scan(&SpectroscopyConfig::reference(n)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> RabiParams {
        RabiParams::new(1.0, 0.3, 0.1).unwrap()
    }

    #[test]
    fn resonance_positions() {
        let r = predicted_resonances(&p(), 4);
        assert!((r[0] - 0.294).abs() < 1e-12);
        for (k, w) in r.iter().enumerate() {
            assert!((normalized_position(&p(), *w) - (2 * k + 1) as f64).abs() < 1e-9);
        }
        let p0 = RabiParams::new(1.0, 0.3, 0.0).unwrap();
        assert!(predicted_resonances(&p0, 5).iter().all(|&w| w == 0.3));
    }

    #[test]
    fn power_is_linear() {
        let r = reference_rates(&p()).unwrap();
        assert_eq!(dissipated_power(0.0, 1.0, &r).unwrap(), 0.0);
        let a = dissipated_power(1.3, 1.006, &r).unwrap();
        assert!((dissipated_power(2.6, 1.006, &r).unwrap() - 2.0 * a).abs() < 1e-18);
        assert!((dissipated_power(1.0, 1.006, &r).unwrap() - 1.006 * 0.0018 / 2.0).abs() < 1e-15);
        assert!(dissipated_power(-1.0, 1.0, &r).is_err());
    }

    #[test]
    fn reference_rates_ratios() {
        let r = reference_rates(&p()).unwrap();
        let g = r.gamma_osc(1.0).unwrap();
        assert!((g - 0.0018).abs() < 1e-15);
        assert!((r.kappa(0.1, 0.294).unwrap() - g / 6.0).abs() < 1e-15);
        assert!((r.gamma_f - g / 3.0).abs() < 1e-15);
    }

    #[test]
    fn grid_spans_normalized_range() {
        let g = normalized_grid(&p(), REFERENCE_POINTS, REFERENCE_X_MAX);
        assert_eq!(g.len(), 241);
        assert!((g[0] - 0.3).abs() < 1e-15);
        assert!((normalized_position(&p(), g[240]) - 12.0).abs() < 1e-9);
        assert!((normalized_position(&p(), g[20]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn poisson_levels() {
        assert_eq!(levels_for_occupation(0.5, 1e-5, 8), 8);
        assert_eq!(levels_for_occupation(4.0, 1e-5, 8), 16);
        let s: f64 = (0..60).map(|k| poisson_weight(3.0, k)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maxima_finder() {
        assert_eq!(local_maxima(&[0.0, 1.0, 0.5, 0.5, 2.0, 2.0, 1.0]), vec![1, 4]);
        assert!(local_maxima(&[1.0, 2.0]).is_empty());
    }

    #[test]
    fn grid_bounds_enforced() {
        let mut c = SpectroscopyConfig::reference(1.0).unwrap();
        c.omega_s = vec![0.37];
        assert!(c.validate().is_err());
        c.omega_s = vec![0.29];
        c.pump.frequency += 0.01;
        assert_eq!(c.validate().unwrap().len(), 1);
    }

    #[test]
    fn labels_follow_pump() {
        let c = SpectroscopyConfig::reference(2.0).unwrap();
        let g = c.rates.gamma_osc(c.pump.frequency).unwrap();
        assert!((pump_occupation(c.pump.amplitude, g) - 2.0).abs() < 1e-12);
    }

    fn short_scan(spec_amp: f64, xs: &[f64]) -> ScanResult {
        let mut c = SpectroscopyConfig::reference(1.0).unwrap();
        c.spec_amp = spec_amp;
        c.omega_s = xs.iter().map(|&x| omega_s_at(&p(), x)).collect();
        run_scan(&c).unwrap()
    }

    #[test]
    fn silent_probe_changes_nothing() {
        let r = short_scan(0.0, &[1.0, 6.0]);
        assert!(r.failures.is_empty());
        for v in &r.percent_reduction {
            assert!(v.abs() < 1e-5, "{v}");
        }
    }

    #[test]
    fn resonant_probe_reduces_far_probe_does_not() {
        let r = short_scan(3e-4, &[1.0, 11.9]);
        assert!(r.percent_reduction[0] > 0.1);
        assert!(r.percent_reduction[1].abs() < 1.0);
        assert!(r.n_ss[0] < r.baseline_n_ss);
    }
}
