use std::path::Path;

use dressed_core::rabi::RabiParams;
use dressed_core::rates::{RateFunctions, RateSpec, RatesConfig};
use dressed_core::spectroscopy::{reference_rates, WindowSettings, REFERENCE_POINTS, REFERENCE_X_MAX};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Fidelity,
    Relax,
    Drive,
    Spectroscopy,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Fidelity => "fidelity",
            Command::Relax => "relax",
            Command::Drive => "drive",
            Command::Spectroscopy => "spectroscopy",
            Command::Validate => "validate",
        }
    }
}

/// One run: model, dissipation, and exactly one experiment block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_params")]
    pub params: RabiParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cut: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_levels: Option<usize>,
    /// Omitted: the two-tone reference rates `Γ = 6κ = 3γ_f = 3ω₀β²/5`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RatesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelityBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relax: Option<RelaxBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectroscopy: Option<SpectroscopyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateBlock>,
}

fn default_params() -> RabiParams {
    RabiParams { omega: 1.0, omega0: 0.3, beta: 0.1 }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: default_params(),
            n_cut: None,
            n_levels: None,
            rates: None,
            spectrum: None,
            fidelity: None,
            relax: None,
            drive: None,
            spectroscopy: None,
            validate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumBlock {
    /// Number of exact eigenstates tabulated.
    pub levels: usize,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        Self { levels: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub omega0: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FidelityBlock {
    pub n_states: usize,
    /// Empty: the top-level parameters only.
    pub points: Vec<Point>,
}

impl Default for FidelityBlock {
    fn default() -> Self {
        Self { n_states: 6, points: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    DressedGround,
    ExactGround,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxBlock {
    pub initial: Initial,
    /// In units of 1/Γ.
    pub t_end: f64,
    pub samples: usize,
    pub tol: f64,
    pub beta_grid: Vec<f64>,
}

impl Default for RelaxBlock {
    fn default() -> Self {
        Self {
            initial: Initial::ExactGround,
            t_end: 5.0,
            samples: 100,
            tol: 1e-10,
            beta_grid: (1..=20).map(|k| 0.01 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveBlock {
    /// Empty: `Ω_p = Γ/2`.
    pub amplitudes: Vec<f64>,
    /// `Δ_− = ω_− − ω_p`.
    pub detunings: Vec<f64>,
}

impl Default for DriveBlock {
    fn default() -> Self {
        Self { amplitudes: Vec::new(), detunings: vec![0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectroscopyBlock {
    /// Baseline occupations `4Ω_p²/Γ²`; ignored when `pump_amplitudes` is set.
    pub occupations: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump_amplitudes: Option<Vec<f64>>,
    /// Probe amplitude; omitted means `κ` at the lowest transition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec_amp: Option<f64>,
    pub points: usize,
    pub x_max: f64,
    /// Poisson tail used to size the basis when `n_levels` is not given.
    pub level_tail: f64,
    pub min_levels: usize,
    pub window: WindowSettings,
}

impl Default for SpectroscopyBlock {
    fn default() -> Self {
        Self {
            occupations: vec![0.5, 1.0, 2.0, 4.0],
            pump_amplitudes: None,
            spec_amp: None,
            points: REFERENCE_POINTS,
            x_max: REFERENCE_X_MAX,
            level_tail: 1e-5,
            min_levels: 8,
            window: WindowSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateBlock {}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n_cut: Option<usize>,
    pub n_levels: Option<usize>,
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn default_n_cut(cmd: Command) -> usize {
    match cmd {
        Command::Relax => 16,
        _ => 40,
    }
}

fn default_n_levels(cmd: Command) -> Option<usize> {
    match cmd {
        Command::Drive => Some(12),
        Command::Spectroscopy => None,
        _ => Some(8),
    }
}

fn constant(rate: f64) -> RateSpec {
    RateSpec::Constant(rate)
}

impl RunConfig {
    /// Apply flag overrides and defaults, keep only the block for `cmd`, and
    /// validate. The result re-runs to identical tables.
    pub fn resolve(mut self, cmd: Command, o: &Overrides) -> Result<Self, CliError> {
        self.params.validate().map_err(CliError::from_core)?;
        let present: Vec<&str> = [
            (self.spectrum.is_some(), "spectrum"),
            (self.fidelity.is_some(), "fidelity"),
            (self.relax.is_some(), "relax"),
            (self.drive.is_some(), "drive"),
            (self.spectroscopy.is_some(), "spectroscopy"),
            (self.validate.is_some(), "validate"),
        ]
        .into_iter()
        .filter(|(p, _)| *p)
        .map(|(_, n)| n)
        .collect();
        if let Some(other) = present.iter().find(|&&n| n != cmd.name()) {
            return Err(CliError::Config(format!("config has a '{other}' block but the command is '{}'", cmd.name())));
        }
        self.n_cut = Some(o.n_cut.or(self.n_cut).unwrap_or(default_n_cut(cmd)));
        self.n_levels = o.n_levels.or(self.n_levels).or(default_n_levels(cmd));
        if self.n_cut == Some(0) || self.n_levels == Some(0) {
            return Err(CliError::Config("n_cut and n_levels must be positive".into()));
        }
        if self.rates.is_none() {
            match reference_rates(&self.params) {
                Ok(r) => {
                    let g = r.gamma_osc(0.0).map_err(CliError::from_core)?;
                    let q = r.gamma_qubit(0.0).map_err(CliError::from_core)?;
                    self.rates =
                        Some(RatesConfig { oscillator: constant(g), qubit: constant(q), gamma_f: r.gamma_f, temperature: 0.0 });
                }
                // the report is still useful without rates
                Err(_) if cmd == Command::Validate => {}
                Err(e) => {
                    return Err(CliError::Config(format!(
                        "default rates are undefined at beta = {} ({e}); set `rates` explicitly",
                        self.params.beta
                    )))
                }
            }
        }
        if self.rates.is_some() {
            self.rate_functions()?;
        }
        match cmd {
            Command::Spectrum => {
                let b = self.spectrum.get_or_insert_with(Default::default);
                if b.levels == 0 {
                    return Err(CliError::Config("spectrum.levels must be positive".into()));
                }
            }
            Command::Fidelity => {
                let b = self.fidelity.get_or_insert_with(Default::default);
                if b.n_states == 0 {
                    return Err(CliError::Config("fidelity.n_states must be positive".into()));
                }
                if b.points.is_empty() {
                    b.points.push(Point { omega0: self.params.omega0, beta: self.params.beta });
                }
                for p in &b.points {
                    RabiParams::new(self.params.omega, p.omega0, p.beta).map_err(CliError::from_core)?;
                }
            }
            Command::Relax => {
                let b = self.relax.get_or_insert_with(Default::default);
                if !(b.t_end > 0.0) || b.samples == 0 || !(b.tol > 0.0) {
                    return Err(CliError::Config("relax.t_end, relax.samples and relax.tol must be positive".into()));
                }
                if b.beta_grid.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                    return Err(CliError::Config("relax.beta_grid entries must be finite and non-negative".into()));
                }
            }
            Command::Drive => {
                let b = self.drive.get_or_insert_with(Default::default);
                if b.amplitudes.iter().any(|&a| !(a >= 0.0)) || b.detunings.iter().any(|d| !d.is_finite()) {
                    return Err(CliError::Config("drive amplitudes must be non-negative and detunings finite".into()));
                }
                if b.detunings.is_empty() {
                    return Err(CliError::Config("drive.detunings must not be empty".into()));
                }
            }
            Command::Spectroscopy => {
                let b = self.spectroscopy.get_or_insert_with(Default::default);
                let curves = b.pump_amplitudes.as_ref().map_or(b.occupations.len(), |a| a.len());
                if curves == 0 || b.points < 2 || !(b.x_max > 0.0) || b.min_levels == 0 {
                    return Err(CliError::Config(
                        "spectroscopy needs at least one curve, points ≥ 2, x_max > 0 and min_levels ≥ 1".into(),
                    ));
                }
                if b.occupations.iter().chain(b.pump_amplitudes.iter().flatten()).any(|&v| !(v > 0.0)) {
                    return Err(CliError::Config("occupations and pump amplitudes must be positive".into()));
                }
                if !(b.level_tail > 0.0 && b.level_tail < 1.0) {
                    return Err(CliError::Config("spectroscopy.level_tail must lie in (0, 1)".into()));
                }
            }
            Command::Validate => {
                self.validate.get_or_insert_with(Default::default);
            }
        }
        Ok(self)
    }

    pub fn rate_functions(&self) -> Result<RateFunctions, CliError> {
        match &self.rates {
            Some(r) => r.build().map_err(|e| CliError::Config(format!("rates: {e}"))),
            None => Err(CliError::Config("no rates configured".into())),
        }
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut.unwrap_or(40)
    }
}
