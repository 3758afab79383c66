#![allow(dead_code)]

use dressed_core::adiabatic::{build_basis, DressedBasis, EnergyMode};
use dressed_core::dynamics::{
    evolve, steady_state_longtime, steady_state_nullspace, Controls, SteadySolution,
};
use dressed_core::hilbert::{hermiticity_defect, trace, trace_norm_hermitian, CMatrix, SpaceDims, C64};
use dressed_core::lindblad::{
    add_spectroscopy_tone, build_dme_finite_t, build_dme_zero_t, build_driven_rotating, build_sme_with_rates, Drive,
    MasterEquation,
};
use dressed_core::rabi::RabiParams;
use dressed_core::rates::RateFunctions;
use proptest::prelude::*;

#[derive(Debug, Clone, Copy)]
pub enum Kind {
    ZeroT,
    FiniteT,
    Driven,
    Probed,
    Sme,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub kind: Kind,
    pub omega0: f64,
    pub beta: f64,
    pub n_levels: usize,
    pub gamma: f64,
    pub gamma_q: f64,
    pub gamma_f: f64,
    pub temperature: f64,
    pub pump: f64,
    pub detuning: f64,
    pub probe: f64,
    pub probe_x: f64,
    pub seed: Vec<f64>,
}

pub fn kind() -> impl Strategy<Value = Kind> {
    prop_oneof![Just(Kind::ZeroT), Just(Kind::FiniteT), Just(Kind::Driven), Just(Kind::Probed), Just(Kind::Sme)]
}

pub fn config_with(kind: impl Strategy<Value = Kind>) -> impl Strategy<Value = Config> {
    (
        kind,
        0.05..0.3f64,
        0.02..0.2f64,
        2usize..5,
        1e-3..3e-2f64,
        1e-4..1e-2f64,
        0.0..1e-2f64,
        0.05..0.5f64,
        0.0..0.02f64,
        -0.01..0.01f64,
        (0.0..0.01f64, 0.0..6.0f64),
        proptest::collection::vec(-1.0..1.0f64, 2 * 100),
    )
        .prop_map(|(kind, omega0, beta, n_levels, gamma, gamma_q, gamma_f, temperature, pump, detuning, (probe, probe_x), seed)| Config {
            kind,
            omega0,
            beta,
            n_levels,
            gamma,
            gamma_q,
            gamma_f,
            temperature,
            pump,
            detuning,
            probe,
            probe_x,
            seed,
        })
}

pub fn config() -> impl Strategy<Value = Config> {
    config_with(kind())
}

impl Config {
    pub fn params(&self) -> RabiParams {
        RabiParams::new(1.0, self.omega0, self.beta).unwrap()
    }

    pub fn basis(&self) -> DressedBasis {
        build_basis(&self.params(), self.n_levels, SpaceDims::new(24).unwrap(), EnergyMode::Truncated).unwrap()
    }

    pub fn rates(&self) -> RateFunctions {
        RateFunctions::flat(self.gamma, self.gamma_q, self.gamma_f).unwrap()
    }

    pub fn generator(&self) -> MasterEquation {
        let b = self.basis();
        let pump = Drive { amplitude: self.pump, frequency: b.omega_minus + self.detuning };
        match self.kind {
            Kind::ZeroT => build_dme_zero_t(&b, &self.rates()).unwrap(),
            Kind::FiniteT => {
                build_dme_finite_t(&b, &self.rates().with_temperature(self.temperature).unwrap()).unwrap()
            }
            Kind::Driven => build_driven_rotating(&b, &self.rates(), pump).unwrap(),
            Kind::Probed => {
                let me = build_driven_rotating(&b, &self.rates(), pump).unwrap();
                let p = self.params();
                let ws = p.omega0 * (1.0 - 2.0 * p.beta * p.beta * self.probe_x);
                add_spectroscopy_tone(me, &b, Drive { amplitude: self.probe, frequency: ws }).unwrap()
            }
            Kind::Sme => {
                build_sme_with_rates(&self.params(), SpaceDims::new(2 * self.n_levels + 2).unwrap(), self.gamma, self.gamma_q)
                    .unwrap()
            }
        }
    }

    /// Full-rank density matrix drawn from the seed.
    pub fn state(&self, d: usize) -> CMatrix {
        let a = CMatrix::from_fn(d, d, |i, j| {
            let k = (i * d + j) % 100;
            C64::new(self.seed[2 * k], self.seed[2 * k + 1])
        });
        let m = &a * a.adjoint() + CMatrix::identity(d, d).scale(0.05);
        let t = trace(&m);
        m.map(|z| z / t)
    }
}

pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    trace_norm_hermitian(&(a - b)) / 2.0
}

pub fn check_hygiene(c: &Config) -> Result<(), String> {
    let me = c.generator();
    let rho = c.state(me.dim());
    for t in [0.0, 3.7] {
        let out = me.apply(&rho, t).map_err(|e| e.to_string())?;
        let tr = trace(&out).norm();
        let herm = hermiticity_defect(&out);
        if tr > 1e-12 || herm > 1e-12 {
            return Err(format!("trace {tr:.2e}, hermiticity {herm:.2e}"));
        }
    }
    Ok(())
}

pub fn check_readout(c: &Config) -> Result<(), String> {
    let me = c.generator();
    if me.is_time_dependent() || me.dim() > 48 {
        return Ok(());
    }
    match steady_state_nullspace(&me).map_err(|e| e.to_string())? {
        SteadySolution::Unique(s) => {
            let eig = dressed_core::hilbert::hermitian_eigenvalues(&s.rho);
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            let tr = trace(&s.rho);
            if min < -(s.rho.nrows() as f64) * f64::EPSILON || (tr - C64::new(1.0, 0.0)).norm() > 1e-12 || hermiticity_defect(&s.rho) > 0.0 {
                return Err(format!("readout min eig {min:.2e}, trace {tr}"));
            }
            if s.clipped_weight > 1e-8 {
                return Err(format!("clipped weight {:.2e}", s.clipped_weight));
            }
            Ok(())
        }
        SteadySolution::Degenerate { basis, .. } => Err(format!("unexpected degeneracy ({})", basis.len())),
    }
}

/// Error ratio when halving `dt` against a fine reference; needs to be ≥ 8.
/// Steps are scaled to the spread of the Hamiltonian so every run sits in
/// the asymptotic regime.
pub fn convergence_ratio(c: &Config) -> f64 {
    let me = c.generator();
    let rho0 = c.state(me.dim());
    let e = dressed_core::hilbert::hermitian_eigenvalues(&me.hamiltonian);
    let spread = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - e.iter().cloned().fold(f64::INFINITY, f64::min);
    let dt = 0.4 / spread.max(0.05);
    let run = |h: f64| {
        let mut ctl = Controls::new(h);
        ctl.tol = 1.0;
        evolve(&me, &rho0, 40.0 * dt, &ctl).unwrap().final_state
    };
    let exact = run(dt / 32.0);
    let e1 = dressed_core::hilbert::max_abs(&(run(dt) - &exact));
    let e2 = dressed_core::hilbert::max_abs(&(run(dt / 2.0) - &exact));
    e1 / e2
}

pub fn check_order(c: &Config) -> Result<(), String> {
    let r = convergence_ratio(c);
    if r >= 8.0 {
        Ok(())
    } else {
        Err(format!("halving ratio {r:.2}"))
    }
}

pub fn check_nullspace_vs_longtime(c: &Config) -> Result<(), String> {
    let me = c.generator();
    if me.is_time_dependent() || me.dim() > 48 {
        return Ok(());
    }
    let ns = steady_state_nullspace(&me).map_err(|e| e.to_string())?.unique().map_err(|e| e.to_string())?;
    let slow = c.gamma.min(c.gamma_q + 4.0 * c.beta * c.beta * c.gamma);
    let lt = steady_state_longtime(&me, &c.state(me.dim()), &Controls::new(1.0), 1e-12, 400.0 / slow)
        .map_err(|e| e.to_string())?;
    let d = trace_distance(&ns.rho, &lt.rho);
    if d < 1e-6 {
        Ok(())
    } else {
        Err(format!("trace distance {d:.2e}"))
    }
}
