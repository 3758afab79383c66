use dressed_core::adiabatic::{build_basis, energy, n_max, validity_report, DressedBasis, EnergyMode, Sector};
use dressed_core::dynamics::{evolve_with, observables, steady_state_nullspace, Controls};
use dressed_core::hilbert::{hermitian_eigenvalues, CMatrix, CVector, Operator, SpaceDims, C64};
use dressed_core::lindblad::{
    build_dme_finite_t, build_dme_zero_t, build_driven_rotating, build_sme, ground_distance, Drive, MasterEquation,
};
use dressed_core::rabi::{ground_state, RabiParams};
use dressed_core::spectroscopy::{
    levels_for_occupation, normalized_grid, pump_amplitude_for, pump_occupation, run_scan, SpectroscopyConfig,
};
use dressed_core::superop::Liouvillian;
use dressed_core::sw::{fidelity_comparison, sw_constant, sw_energies};
use serde_json::{json, Value};

use crate::config::{Initial, RunConfig};
use crate::output::{Bundle, Table};
use crate::CliError;

type Out<T> = Result<T, CliError>;

fn core<T>(r: dressed_core::Result<T>) -> Out<T> {
    r.map_err(CliError::from_core)
}

fn branch(s: Sector) -> &'static str {
    match s {
        Sector::Plus => "+",
        Sector::Minus => "-",
    }
}

fn dims(c: &RunConfig) -> Out<SpaceDims> {
    core(SpaceDims::new(c.n_cut()))
}

fn report(c: &RunConfig, p: &RabiParams) -> Out<Value> {
    let rates = c.rates.as_ref().map(|_| c.rate_functions()).transpose()?;
    let r = validity_report(p, c.n_levels.unwrap_or(8), rates.as_ref());
    Ok(serde_json::to_value(r).expect("report serializes"))
}

pub fn spectrum(c: &RunConfig) -> Out<Bundle> {
    let p = c.params;
    let d = dims(c)?;
    let levels = c.spectrum.as_ref().map_or(10, |b| b.levels);
    if levels > d.total_dim() {
        return Err(CliError::Config(format!("{levels} levels exceed the truncated dimension {}", d.total_dim())));
    }
    let table = core(fidelity_comparison(&p, levels, d))?;
    let top = table.rows.iter().map(|r| r.adiabatic_label.0).max().unwrap_or(0) + 1;
    let sw = core(sw_energies(&p, top))?;
    // closed-form SW ladders carry +ω/2; the transformation adds a constant
    let shift = sw_constant(&p) - 0.5 * p.omega;
    let mut t = Table::new(
        "spectrum",
        vec!["index", "N", "branch", "E_exact", "E_adiabatic", "E_sw", "abs_err_adiabatic", "abs_err_sw"],
    );
    let mut worst_ad: f64 = 0.0;
    let mut worst_sw: f64 = 0.0;
    for r in &table.rows {
        let (n, s) = r.adiabatic_label;
        let e_ad = energy(&p, n, s, EnergyMode::ExactOverlap);
        let e_sw = sw.get(s, n) + shift;
        let (ea, es) = ((r.energy_exact - e_ad).abs(), (r.energy_exact - e_sw).abs());
        worst_ad = worst_ad.max(ea);
        worst_sw = worst_sw.max(es);
        t.push(vec![r.index.into(), n.into(), branch(s).into(), r.energy_exact.into(), e_ad.into(), e_sw.into(), ea.into(), es.into()]);
    }
    t.note("pairing", "exact states paired to (N, branch) by maximum-weight fidelity matching");
    Ok(Bundle {
        command: "spectrum",
        tables: vec![t],
        metadata: json!({
            "validity": report(c, &p)?,
            "max_abs_err_adiabatic": worst_ad,
            "max_abs_err_sw": worst_sw,
            "sw_constant": sw_constant(&p),
            "contested_pairings": table.contested_adiabatic,
        }),
    })
}

pub fn fidelity(c: &RunConfig) -> Out<Bundle> {
    let block = c.fidelity.clone().unwrap_or_default();
    let d = dims(c)?;
    let mut t = Table::new("fidelity", vec!["omega0", "beta", "index", "E_exact", "N", "branch", "f_adiabatic", "f_sw"]);
    let mut points = Vec::new();
    for pt in &block.points {
        let p = core(RabiParams::new(c.params.omega, pt.omega0, pt.beta))?;
        let table = core(fidelity_comparison(&p, block.n_states, d))?;
        for r in &table.rows {
            let (n, s) = r.adiabatic_label;
            t.push(vec![
                pt.omega0.into(),
                pt.beta.into(),
                r.index.into(),
                r.energy_exact.into(),
                n.into(),
                branch(s).into(),
                r.f_adiabatic.into(),
                r.f_sw.into(),
            ]);
        }
        points.push(json!({
            "omega0": pt.omega0,
            "beta": pt.beta,
            "mean_adiabatic": table.mean_adiabatic(block.n_states),
            "mean_sw": table.mean_sw(block.n_states),
            "contested_adiabatic": table.contested_adiabatic,
            "contested_sw": table.contested_sw,
            "validity": serde_json::to_value(validity_report(&p, c.n_levels.unwrap_or(8), None)).expect("report serializes"),
        }));
    }
    Ok(Bundle { command: "fidelity", tables: vec![t], metadata: json!({ "points": points }) })
}

fn spread(h: &CMatrix) -> f64 {
    let e = hermitian_eigenvalues(h);
    (e[e.len() - 1] - e[0]).max(1e-12)
}

/// Value of `f(ρ)` at each sample time, integrating segment by segment.
fn sampled(me: &MasterEquation, rho0: &CMatrix, times: &[f64], tol: f64, f: impl Fn(&CMatrix) -> f64) -> Out<(Vec<f64>, Value)> {
    let l = Liouvillian::from_master(me);
    let step = 0.4 / spread(&me.hamiltonian);
    let mut rho = rho0.clone();
    let mut out = vec![f(&rho)];
    let (mut drift, mut min_eig, mut steps): (f64, f64, usize) = (0.0, f64::INFINITY, 0);
    for w in times.windows(2) {
        let mut ctl = Controls::new(step.min(w[1] - w[0]));
        ctl.tol = tol;
        let tr = core(evolve_with(&l, &rho, w[0], w[1], &ctl))?;
        drift = drift.max(tr.trace_drift);
        min_eig = min_eig.min(tr.min_eigenvalue);
        steps += tr.steps;
        rho = tr.final_state;
        out.push(f(&rho));
    }
    Ok((out, json!({ "trace_drift": drift, "min_eigenvalue": min_eig, "steps": steps, "initial_dt": step })))
}

pub fn relax(c: &RunConfig) -> Out<Bundle> {
    let block = c.relax.clone().unwrap_or_default();
    let p = c.params;
    let rates = c.rate_functions()?;
    let d = dims(c)?;
    let nl = c.n_levels.unwrap_or(8);
    let b = core(build_basis(&p, nl, d, EnergyMode::Truncated))?;
    let dme = if rates.temperature > 0.0 { build_dme_finite_t(&b, &rates) } else { build_dme_zero_t(&b, &rates) };
    let dme = core(dme)?;
    let sme = core(build_sme(&p, &rates, d))?;
    let gamma = core(rates.gamma_osc(b.omega_minus))?;
    if !(gamma > 0.0) {
        return Err(CliError::Config("relax needs a positive oscillator rate".into()));
    }
    let psi = b.state(Sector::Minus, 0).clone();
    let full = match block.initial {
        Initial::DressedGround => psi.projector().into_matrix(),
        Initial::ExactGround => core(ground_state(&p, d))?.1.projector().into_matrix(),
    };
    let projected = core(b.to_dressed(&core(Operator::from_matrix(d, full.clone()))?))?;
    let kept = projected.trace().re;
    let dressed = projected.unscale(kept);
    let t_end = block.t_end / gamma;
    let times: Vec<f64> = (0..=block.samples).map(|k| t_end * k as f64 / block.samples as f64).collect();
    let g = b.index(Sector::Minus, 0);
    let (f_dme, diag_dme) = sampled(&dme, &dressed, &times, block.tol, |r| r[(g, g)].re)?;
    let v = psi.vector().clone();
    let (f_sme, diag_sme) = sampled(&sme, &full, &times, block.tol, |r| (v.adjoint() * r * &v)[(0, 0)].re)?;
    let mut series = Table::new("relax", vec!["t", "t_gamma", "fidelity_dme", "fidelity_sme"]);
    for (k, &t) in times.iter().enumerate() {
        series.push(vec![t.into(), (t * gamma).into(), f_dme[k].into(), f_sme[k].into()]);
    }
    series.note("initial", format!("{:?}", block.initial));
    series.note("target", "dressed ground state |Psi_0^->");
    let mut dist = Table::new("relax_distance", vec!["beta", "d", "closed_form", "half_beta_sq", "abs_err_closed", "abs_err_half"]);
    for &beta in &block.beta_grid {
        let q = core(RabiParams::new(p.omega, p.omega0, beta))?;
        let dv = core(ground_distance(&q, d))?;
        let closed = 1.0 - (-beta * beta / 2.0).exp();
        let half = beta * beta / 2.0;
        dist.push(vec![beta.into(), dv.into(), closed.into(), half.into(), (dv - closed).abs().into(), (dv - half).abs().into()]);
    }
    Ok(Bundle {
        command: "relax",
        tables: vec![series, dist],
        metadata: json!({
            "validity": report(c, &p)?,
            "gamma": gamma,
            "initial_weight_in_dressed_basis": kept,
            "dme": diag_dme,
            "sme": diag_sme,
        }),
    })
}

fn coherent_minus(b: &DressedBasis, alpha: C64) -> CVector {
    let mut v = CVector::zeros(b.dressed_dim());
    let mut z = C64::new(1.0, 0.0);
    for n in 0..b.n_levels {
        v[b.index(Sector::Minus, n)] = z;
        z *= alpha / ((n + 1) as f64).sqrt();
    }
    let norm = v.norm();
    v.unscale(norm)
}

fn basis_for(c: &RunConfig, p: &RabiParams, n_levels: usize) -> Out<DressedBasis> {
    let d = core(SpaceDims::new(c.n_cut().max(2 * n_levels + 10)))?;
    core(build_basis(p, n_levels, d, EnergyMode::Truncated))
}

pub fn drive(c: &RunConfig) -> Out<Bundle> {
    let block = c.drive.clone().unwrap_or_default();
    let p = c.params;
    let rates = c.rate_functions()?;
    let b = basis_for(c, &p, c.n_levels.unwrap_or(12))?;
    let gamma = core(rates.gamma_osc(b.omega_minus))?;
    let amps = if block.amplitudes.is_empty() { vec![gamma / 2.0] } else { block.amplitudes.clone() };
    let mut t = Table::new(
        "drive",
        vec![
            "amplitude", "detuning", "n_minus", "n_plus", "n_total", "n_predicted", "sector_plus", "sector_minus",
            "fidelity_alpha", "alpha_re", "alpha_im", "edge_population",
        ],
    );
    let mut solver = Vec::new();
    for &a in &amps {
        for &det in &block.detunings {
            let me = core(build_driven_rotating(&b, &rates, Drive { amplitude: a, frequency: b.omega_minus - det }))?;
            let s = core(steady_state_nullspace(&me).and_then(|s| s.unique()))?;
            let rec = core(observables(&s.rho, &b))?;
            let alpha = C64::new(a, 0.0) / C64::new(-det, gamma / 2.0);
            let v = coherent_minus(&b, alpha);
            let fid = (v.adjoint() * &s.rho * &v)[(0, 0)].re;
            t.push(vec![
                a.into(),
                det.into(),
                rec.n_minus.into(),
                rec.n_plus.into(),
                rec.n_total.into(),
                alpha.norm_sqr().into(),
                rec.sector_plus.into(),
                rec.sector_minus.into(),
                fid.into(),
                alpha.re.into(),
                alpha.im.into(),
                rec.edge_population.into(),
            ]);
            solver.push(json!({
                "amplitude": a,
                "detuning": det,
                "residual": s.residual,
                "min_raw_eigenvalue": s.min_raw_eigenvalue,
                "clipped_weight": s.clipped_weight,
            }));
        }
    }
    Ok(Bundle {
        command: "drive",
        tables: vec![t],
        metadata: json!({
            "validity": report(c, &p)?,
            "gamma_minus": gamma,
            "notes": build_driven_rotating(&b, &rates, Drive { amplitude: amps[0], frequency: b.omega_minus }).map(|m| m.notes).unwrap_or_default(),
            "solver": solver,
        }),
    })
}

pub fn spectroscopy(c: &RunConfig) -> Out<Bundle> {
    let block = c.spectroscopy.clone().unwrap_or_default();
    let p = c.params;
    let rates = c.rate_functions()?;
    let (_, omega_minus) = dressed_core::adiabatic::ladder_frequencies(&p);
    let gamma = core(rates.gamma_osc(omega_minus))?;
    let kappa = core(rates.kappa(p.beta, dressed_core::adiabatic::transition_frequency(&p, 0)))?;
    let curves: Vec<(f64, f64)> = match &block.pump_amplitudes {
        Some(a) => a.iter().map(|&a| (a, pump_occupation(a, gamma))).collect(),
        None => block.occupations.iter().map(|&n| (pump_amplitude_for(n, gamma), n)).collect(),
    };
    let grid = normalized_grid(&p, block.points, block.x_max);
    let mut combined = Table::new(
        "spectroscopy",
        vec!["curve", "occupation", "omega_s", "normalized_position", "n_ss", "percent_reduction", "peak_to_peak"],
    );
    let mut tables = Vec::new();
    let mut meta = Vec::new();
    for (k, &(amp, occ)) in curves.iter().enumerate() {
        let n_levels = c
            .n_levels
            .unwrap_or_else(|| levels_for_occupation(occ, block.level_tail, block.min_levels).min(n_max(p.beta)));
        let cfg = SpectroscopyConfig {
            params: p,
            rates: rates.clone(),
            pump: Drive { amplitude: amp, frequency: omega_minus },
            spec_amp: block.spec_amp.unwrap_or(kappa),
            omega_s: grid.clone(),
            n_levels,
            window: block.window,
        };
        let scan = core(run_scan(&cfg))?;
        let mut t = Table::new(
            format!("spectroscopy_{k}"),
            vec!["omega_s", "normalized_position", "n_ss", "percent_reduction", "peak_to_peak"],
        );
        t.note("pump_amplitude", amp);
        t.note("occupation", occ);
        t.note("baseline_n_ss", scan.baseline_n_ss);
        for i in 0..scan.omega_s.len() {
            let row = [scan.omega_s[i], scan.normalized_position[i], scan.n_ss[i], scan.percent_reduction[i], scan.peak_to_peak[i]];
            t.push(row.iter().map(|&v| v.into()).collect());
            let mut all = vec![k.into(), occ.into()];
            all.extend(row.iter().map(|&v| v.into()));
            combined.push(all);
        }
        for f in &scan.failures {
            eprintln!("warning: curve {k}, point {} (omega_s = {}): {}", f.index, f.omega_s, f.error);
        }
        meta.push(json!({
            "curve": k,
            "pump_amplitude": amp,
            "occupation": occ,
            "baseline_n_ss": scan.baseline_n_ss,
            "label_n_ss": scan.label_n_ss,
            "maxima_positions": scan.maxima_positions(),
            "dip_alignment": scan.dip_alignment(4.min(n_levels)),
            "predicted_resonances": scan.predicted_resonances,
            "failures": scan.failures,
            "scan": scan.metadata,
        }));
        tables.push(t);
    }
    tables.push(combined);
    Ok(Bundle { command: "spectroscopy", tables, metadata: json!({ "validity": report(c, &p)?, "curves": meta }) })
}

pub fn validate(c: &RunConfig) -> Out<Bundle> {
    let p = c.params;
    let report = report(c, &p)?;
    let mut t = Table::new("validate", vec!["check", "ok", "margin"]);
    let flag = |k: &str| report.get(k).and_then(Value::as_bool).map_or("n/a", |b| if b { "true" } else { "false" });
    let margin = |k: &str| report.get(k).and_then(Value::as_f64).unwrap_or(f64::NAN);
    for (check, ok, m) in [
        ("quasi_degenerate", "quasi_degenerate", "quasi_degenerate_margin"),
        ("beta_ok", "beta_ok", "beta_margin"),
        ("secular", "secular_ok", "secular_margin"),
    ] {
        t.push(vec![check.into(), flag(ok).into(), margin(m).into()]);
    }
    t.push(vec!["n_levels_ok".into(), flag("n_levels_ok").into(), (margin("n_max") - margin("n_levels")).into()]);
    Ok(Bundle { command: "validate", tables: vec![t], metadata: json!({ "validity": report }) })
}
