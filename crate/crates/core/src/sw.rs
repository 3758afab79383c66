//! Schrieffer–Wolff (dispersive, beyond RWA) comparison against the exact
//! spectrum and the adiabatic basis.

use serde::Serialize;

use crate::adiabatic::{build_basis, EnergyMode, Sector};
use crate::error::{Error, Result};
use crate::hilbert::{annihilation, expm, number, qubit_op, CMatrix, Ket, Operator, Pauli, SpaceDims};
use crate::matching::{contested_rows, max_weight_assignment};
use crate::rabi::{build_h_rabi, diagonalize, RabiParams};

fn check_resonance(p: &RabiParams) -> Result<()> {
    p.validate()?;
    if (p.omega - p.omega0).abs() < 1e-12 * p.omega {
        return Err(Error::Resonance(format!("omega0 = omega = {}", p.omega)));
    }
    Ok(())
}

/// `ω₀ω²β²/(ω₀² − ω²)`: coefficient of `σ_z(a + a†)²`.
pub fn dispersive_coupling(p: &RabiParams) -> f64 {
    p.omega0 * p.omega * p.omega * p.beta * p.beta / (p.omega0 * p.omega0 - p.omega * p.omega)
}

/// Constant `β²ω³/(ω₀² − ω²)` generated by the second-order transformation
/// alongside the displayed effective Hamiltonian.
pub fn sw_constant(p: &RabiParams) -> f64 {
    p.beta * p.beta * p.omega.powi(3) / (p.omega0 * p.omega0 - p.omega * p.omega)
}

/// `H_SW = ω₀σ_z/2 + ω a†a + ω₀(ω²β²/(ω₀²−ω²)) σ_z (a + a†)²`
pub fn build_h_sw(p: &RabiParams, dims: SpaceDims) -> Result<Operator> {
    check_resonance(p)?;
    let a = annihilation(dims);
    let x = &a + &a.dagger();
    let sz = qubit_op(Pauli::Z, dims);
    let h = &(&sz.scale_real(0.5 * p.omega0) + &number(dims).scale_real(p.omega))
        + &(&sz * &(&x * &x)).scale_real(dispersive_coupling(p));
    Ok(h)
}

/// `ω̃_± = ω √(1 ∓ 4ωω₀β²/(ω² − ω₀²))`
pub fn omega_tilde_pm(p: &RabiParams) -> Result<(f64, f64)> {
    check_resonance(p)?;
    let r = 4.0 * p.omega * p.omega0 * p.beta * p.beta / (p.omega * p.omega - p.omega0 * p.omega0);
    if r >= 1.0 || r <= -1.0 {
        return Err(Error::InvalidParameter(format!(
            "dispersive frequencies not real: 4ωω₀β²/(ω²−ω₀²) = {r:.4}"
        )));
    }
    Ok((p.omega * (1.0 - r).sqrt(), p.omega * (1.0 + r).sqrt()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SwEnergies {
    pub omega_tilde_plus: f64,
    pub omega_tilde_minus: f64,
    /// `Ẽ_N^± = ±ω₀/2 + ω̃_±(N + 1/2)`, indexed by N.
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    /// The same with `ω̃_± → ω ∓ 2ω₀β²`.
    pub plus_simplified: Vec<f64>,
    pub minus_simplified: Vec<f64>,
}

impl SwEnergies {
    pub fn get(&self, s: Sector, n: usize) -> f64 {
        match s {
            Sector::Plus => self.plus[n],
            Sector::Minus => self.minus[n],
        }
    }
}

pub fn sw_energies(p: &RabiParams, n_levels: usize) -> Result<SwEnergies> {
    let (wp, wm) = omega_tilde_pm(p)?;
    let (sp, sm) = crate::adiabatic::ladder_frequencies(p);
    let half = 0.5 * p.omega0;
    let ladder = |e0: f64, w: f64| (0..n_levels).map(|n| e0 + w * (n as f64 + 0.5)).collect::<Vec<_>>();
    Ok(SwEnergies {
        omega_tilde_plus: wp,
        omega_tilde_minus: wm,
        plus: ladder(half, wp),
        minus: ladder(-half, wm),
        plus_simplified: ladder(half, sp),
        minus_simplified: ladder(-half, sm),
    })
}

/// Anti-Hermitian generator with `e^{−S} H_Rabi e^{S} = H_SW + const + O(β³)`:
/// `S = βω[(a†σ_− − aσ_+)/(ω₀ − ω) + (aσ_− − a†σ_+)/(ω₀ + ω)]`.
pub fn sw_generator(p: &RabiParams, dims: SpaceDims) -> Result<Operator> {
    check_resonance(p)?;
    let a = annihilation(dims);
    let ad = a.dagger();
    let sp = qubit_op(Pauli::Raise, dims);
    let sm = qubit_op(Pauli::Lower, dims);
    let t1 = (&(&ad * &sm) - &(&a * &sp)).scale_real(p.beta * p.omega / (p.omega0 - p.omega));
    let t2 = (&(&a * &sm) - &(&ad * &sp)).scale_real(p.beta * p.omega / (p.omega0 + p.omega));
    Ok(&t1 + &t2)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConjugationResidual {
    /// max |·| of `e^{−S}H e^{S} − H_SW` on the protected block.
    pub raw: f64,
    /// The same after adding the generated constant to `H_SW`.
    pub shifted: f64,
}

/// Compares `e^{−S}H_Rabi e^{S}` with `H_SW` on Fock states `0..n_block`
/// (the lowest `2·n_block` bare levels).
pub fn conjugation_residual(p: &RabiParams, dims: SpaceDims, n_block: usize) -> Result<ConjugationResidual> {
    let s = sw_generator(p, dims)?;
    let u = expm(s.matrix());
    let u_inv = expm(&(-s.matrix()));
    let rotated = Operator::from_matrix(dims, &u_inv * build_h_rabi(p, dims).matrix() * &u)?;
    let h_sw = build_h_sw(p, dims)?;
    let diff = &rotated - &h_sw;
    let raw = crate::hilbert::max_abs(&diff.fock_block(n_block));
    let shifted_m = diff.fock_block(n_block) - CMatrix::identity(2 * n_block, 2 * n_block).scale(sw_constant(p));
    Ok(ConjugationResidual { raw, shifted: crate::hilbert::max_abs(&shifted_m) })
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityRow {
    pub index: usize,
    pub energy_exact: f64,
    pub f_adiabatic: f64,
    pub f_sw: f64,
    /// (N, sector) of the paired adiabatic state.
    pub adiabatic_label: (usize, Sector),
    pub sw_index: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityTable {
    pub params: RabiParams,
    pub rows: Vec<FidelityRow>,
    /// Exact states whose best approximant was also another state's best.
    pub contested_adiabatic: Vec<usize>,
    pub contested_sw: Vec<usize>,
}

impl FidelityTable {
    pub fn mean_adiabatic(&self, k: usize) -> f64 {
        mean(self.rows.iter().take(k).map(|r| r.f_adiabatic))
    }

    pub fn mean_sw(&self, k: usize) -> f64 {
        mean(self.rows.iter().take(k).map(|r| r.f_sw))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn fidelity_matrix(exact: &[Ket], approx: &[Ket]) -> Vec<Vec<f64>> {
    exact
        .iter()
        .map(|e| approx.iter().map(|a| a.fidelity(e).clamp(0.0, 1.0)).collect())
        .collect()
}

/// Fidelities of the lowest `n_states` exact eigenvectors against the
/// adiabatic states `|Ψ_N^±⟩` and the rotated SW eigenvectors `e^S|Ψ_SW⟩`,
/// each paired by global maximum-weight matching.
pub fn fidelity_comparison(p: &RabiParams, n_states: usize, dims: SpaceDims) -> Result<FidelityTable> {
    check_resonance(p)?;
    if n_states == 0 {
        return Err(Error::InvalidParameter("n_states must be at least 1".into()));
    }
    let exact = diagonalize(&build_h_rabi(p, dims), n_states)?;

    let n_levels = n_states.min(crate::adiabatic::n_max(p.beta)).min(dims.n_cut());
    let basis = build_basis(p, n_levels, dims, EnergyMode::ExactOverlap)?;
    let mut ad_states = Vec::new();
    let mut ad_labels = Vec::new();
    for n in 0..n_levels {
        for s in [Sector::Plus, Sector::Minus] {
            ad_states.push(basis.state(s, n).clone());
            ad_labels.push((n, s));
        }
    }

    let sw = diagonalize(&build_h_sw(p, dims)?, (2 * n_states).min(dims.total_dim()))?;
    let u = expm(sw_generator(p, dims)?.matrix());
    let sw_states: Vec<Ket> = sw
        .states
        .iter()
        .map(|k| Ket::from_vector(dims, &u * k.vector()))
        .collect::<Result<_>>()?;

    let w_ad = fidelity_matrix(&exact.states, &ad_states);
    let w_sw = fidelity_matrix(&exact.states, &sw_states);
    let pick_ad = max_weight_assignment(&w_ad)?;
    let pick_sw = max_weight_assignment(&w_sw)?;
    let rows = (0..exact.len())
        .map(|i| FidelityRow {
            index: i,
            energy_exact: exact.energies[i],
            f_adiabatic: w_ad[i][pick_ad[i]],
            f_sw: w_sw[i][pick_sw[i]],
            adiabatic_label: ad_labels[pick_ad[i]],
            sw_index: pick_sw[i],
        })
        .collect();
    Ok(FidelityTable {
        params: *p,
        rows,
        contested_adiabatic: contested_rows(&w_ad),
        contested_sw: contested_rows(&w_sw),
    })
}

/// Eigenvalues of the assembled `H_SW`, shifted by `+ω/2` to the closed-form convention.
pub fn h_sw_eigenvalues(p: &RabiParams, dims: SpaceDims, keep: usize) -> Result<Vec<f64>> {
    let spec = diagonalize(&build_h_sw(p, dims)?, keep)?;
    Ok(spec.energies.iter().map(|e| e + 0.5 * p.omega).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adiabatic::energy;
    use approx::assert_abs_diff_eq;

    fn params(w0: f64, beta: f64) -> RabiParams {
        RabiParams::new(1.0, w0, beta).unwrap()
    }

    #[test]
    fn resonance_rejected() {
        assert!(matches!(build_h_sw(&params(1.0, 0.1), SpaceDims::default()), Err(Error::Resonance(_))));
        assert!(sw_generator(&params(1.0, 0.1), SpaceDims::default()).is_err());
    }

    #[test]
    fn decoupled_limit() {
        let d = SpaceDims::new(12).unwrap();
        let p = params(0.3, 0.0);
        assert!((&build_h_sw(&p, d).unwrap() - &build_h_rabi(&p, d)).max_abs() < 1e-15);
        assert!(sw_generator(&p, d).unwrap().max_abs() == 0.0);
        let e = sw_energies(&p, 3).unwrap();
        assert_abs_diff_eq!(e.plus[2], 0.15 + 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(e.minus[0], -0.15 + 0.5, epsilon = 1e-15);
    }

    #[test]
    fn generator_is_anti_hermitian() {
        let s = sw_generator(&params(0.15, 0.1), SpaceDims::default()).unwrap();
        assert!((&s + &s.dagger()).max_abs() == 0.0);
    }

    #[test]
    fn closed_form_matches_matrix() {
        let p = params(0.15, 0.1);
        let e = sw_energies(&p, 8).unwrap();
        let mut closed: Vec<f64> = e.plus.iter().chain(e.minus.iter()).copied().collect();
        closed.sort_by(|a, b| a.total_cmp(b));
        let numeric = h_sw_eigenvalues(&p, SpaceDims::default(), 12).unwrap();
        for k in 0..12 {
            assert_abs_diff_eq!(numeric[k], closed[k], epsilon = 1e-8);
        }
    }

    #[test]
    fn harmonic_ladder_spacing() {
        let e = sw_energies(&params(0.15, 0.1), 6).unwrap();
        for n in 0..6 {
            assert_abs_diff_eq!(e.plus[n] - e.plus[0], n as f64 * e.omega_tilde_plus, epsilon = 1e-13);
            assert_abs_diff_eq!(e.minus[n] - e.minus[0], n as f64 * e.omega_tilde_minus, epsilon = 1e-13);
        }
    }

    #[test]
    fn quasi_degenerate_frequencies() {
        let p = params(0.1, 0.1);
        let (wp, wm) = omega_tilde_pm(&p).unwrap();
        let (sp, sm) = crate::adiabatic::ladder_frequencies(&p);
        // residual ~ 2ω₀³β²/ω² + 2ω₀²β⁴/ω
        let bound = 2.0 * p.omega0.powi(3) * 0.01 + 2.0 * 0.01 * 1e-4 + 1e-6;
        assert!((wp - sp).abs() < bound);
        assert!((wm - sm).abs() < bound);
    }

    #[test]
    fn simplified_energies_match_adiabatic() {
        let p = params(0.3, 0.1);
        let e = sw_energies(&p, 8).unwrap();
        for n in 0..8 {
            for s in [Sector::Plus, Sector::Minus] {
                let sim = if s == Sector::Plus { e.plus_simplified[n] } else { e.minus_simplified[n] };
                assert_abs_diff_eq!(sim - 0.5 * p.omega, energy(&p, n, s, EnergyMode::Truncated), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn residual_is_third_order() {
        let d = SpaceDims::default();
        let r1 = conjugation_residual(&params(0.15, 0.1), d, 5).unwrap();
        let r2 = conjugation_residual(&params(0.15, 0.05), d, 5).unwrap();
        // the constant is second order and shows in the raw residual
        assert!(r1.raw > 0.9 * sw_constant(&params(0.15, 0.1)).abs());
        let ratio = r1.shifted / r2.shifted;
        assert!(ratio > 6.0 && ratio < 10.0, "ratio {ratio}");
        assert!(r1.shifted < 3.0 * 0.1f64.powi(3), "{}", r1.shifted);
    }

    #[test]
    fn decoupled_fidelities_are_one() {
        let t = fidelity_comparison(&params(0.15, 0.0), 6, SpaceDims::new(20).unwrap()).unwrap();
        for r in &t.rows {
            assert_abs_diff_eq!(r.f_adiabatic, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.f_sw, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fidelities_bounded() {
        let t = fidelity_comparison(&params(0.15, 0.1), 6, SpaceDims::default()).unwrap();
        assert!(t.rows.iter().all(|r| (0.0..=1.0).contains(&r.f_adiabatic) && (0.0..=1.0).contains(&r.f_sw)));
        assert!(t.mean_adiabatic(6) > 0.99);
    }
}
