//! Master-equation generators: SME, zero- and finite-temperature DME,
//! dressed dephasing, the pumped rotating-frame equation and the
//! spectroscopy tone.
//!
//! Dissipator convention: `D[O]ρ = (2OρO† − O†Oρ − ρO†O)/2`, entering the
//! generator as `r·D[O]ρ` for a jump `(r, O)`. Tones add
//! `h(t) = Σ c e^{−iνt} O + c̄ e^{iνt} O†` to the Hamiltonian.

use serde::Serialize;

use crate::adiabatic::{
    cross_lowering_dressed, h_ad_dressed, half_splitting, ladders_dressed, sz_dressed, DressedBasis, Sector,
};
use crate::error::{Error, Result};
use crate::hilbert::{annihilation, commutator, hermiticity_defect, max_abs, qubit_op, CMatrix, Pauli, SpaceDims, C64, I};
use crate::rabi::{build_h_rabi, RabiParams};
use crate::rates::{thermal_occupation, RateFunctions};

const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Space {
    /// Full qubit ⊗ oscillator space.
    Full { n_cut: usize },
    /// Dressed coordinates of a basis with `n_levels` rungs per ladder.
    Dressed { n_levels: usize },
}

impl Space {
    pub fn dim(&self) -> usize {
        match *self {
            Space::Full { n_cut } => 2 * n_cut,
            Space::Dressed { n_levels } => 2 * n_levels,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Jump {
    pub rate: f64,
    pub op: CMatrix,
    pub label: String,
    /// Transition frequency the rate was evaluated at, when meaningful.
    pub frequency: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Dephasing {
    pub rate: f64,
    pub op: CMatrix,
}

#[derive(Debug, Clone)]
pub struct Tone {
    pub op: CMatrix,
    pub amplitude: C64,
    pub frequency: f64,
    pub label: String,
}

impl Tone {
    /// `c e^{−iνt} O + c̄ e^{iνt} O†`
    pub fn at(&self, t: f64) -> CMatrix {
        let ph = self.amplitude * C64::from_polar(1.0, -self.frequency * t);
        self.op.map(|z| z * ph) + self.op.adjoint().map(|z| z * ph.conj())
    }
}

#[derive(Debug, Clone)]
pub struct MasterEquation {
    pub space: Space,
    pub hamiltonian: CMatrix,
    pub jumps: Vec<Jump>,
    pub dephasing: Option<Dephasing>,
    pub tones: Vec<Tone>,
    pub notes: Vec<String>,
}

impl MasterEquation {
    pub fn new(space: Space, hamiltonian: CMatrix) -> Result<Self> {
        check_shape(space, &hamiltonian)?;
        let defect = hermiticity_defect(&hamiltonian);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { space, hamiltonian, jumps: Vec::new(), dephasing: None, tones: Vec::new(), notes: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn add_jump(&mut self, rate: f64, op: CMatrix, label: impl Into<String>, frequency: Option<f64>) -> Result<()> {
        check_rate(rate)?;
        check_shape(self.space, &op)?;
        self.jumps.push(Jump { rate, op, label: label.into(), frequency });
        Ok(())
    }

    pub fn set_dephasing(&mut self, rate: f64, op: CMatrix) -> Result<()> {
        check_rate(rate)?;
        check_shape(self.space, &op)?;
        let defect = hermiticity_defect(&op);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        self.dephasing = Some(Dephasing { rate, op });
        Ok(())
    }

    pub fn add_tone(&mut self, op: CMatrix, amplitude: C64, frequency: f64, label: impl Into<String>) -> Result<()> {
        check_shape(self.space, &op)?;
        if !frequency.is_finite() || !amplitude.re.is_finite() || !amplitude.im.is_finite() {
            return Err(Error::InvalidParameter("tone amplitude and frequency must be finite".into()));
        }
        self.tones.push(Tone { op, amplitude, frequency, label: label.into() });
        Ok(())
    }

    pub fn is_time_dependent(&self) -> bool {
        self.tones.iter().any(|t| t.amplitude != C64::new(0.0, 0.0))
    }

    pub fn hamiltonian_at(&self, t: f64) -> CMatrix {
        let mut h = self.hamiltonian.clone();
        for tone in &self.tones {
            h += tone.at(t);
        }
        h
    }

    /// `ρ̇ = −i[H(t), ρ] + Σ r D[L]ρ − (γ_f/2)[S_z, [S_z, ρ]]`
    pub fn apply(&self, rho: &CMatrix, t: f64) -> Result<CMatrix> {
        check_shape(self.space, rho)?;
        let h = self.hamiltonian_at(t);
        let mut out = commutator(&h, rho).map(|z| -I * z);
        for j in &self.jumps {
            if j.rate > 0.0 {
                out += dissipator_matrix(&j.op, rho).scale(0.5 * j.rate);
            }
        }
        if let Some(d) = &self.dephasing {
            if d.rate > 0.0 {
                let inner = commutator(&d.op, rho);
                out -= commutator(&d.op, &inner).scale(0.5 * d.rate);
            }
        }
        Ok(out)
    }

    /// The same generator with the double-commutator dephasing rewritten as
    /// the jump `(γ_f, S_z)`.
    pub fn dephasing_as_jump(&self) -> Self {
        let mut me = self.clone();
        if let Some(d) = me.dephasing.take() {
            me.jumps.push(Jump { rate: d.rate, op: d.op, label: "dephasing".into(), frequency: Some(0.0) });
        }
        me
    }

    /// Smallest positive jump rate (dephasing excluded).
    pub fn slowest_rate(&self) -> Option<f64> {
        self.jumps.iter().map(|j| j.rate).filter(|&r| r > 0.0).min_by(|a, b| a.total_cmp(b))
    }

    /// Re-express a dressed-coordinate generator on the full space via `V X V†`.
    pub fn embedded(&self, b: &DressedBasis) -> Result<Self> {
        if self.space != (Space::Dressed { n_levels: b.n_levels }) {
            return Err(Error::InvalidDims("generator is not in this basis' dressed coordinates".into()));
        }
        let lift = |x: &CMatrix| b.to_full(x).map(|o| o.into_matrix());
        let mut me = MasterEquation::new(Space::Full { n_cut: b.dims.n_cut() }, lift(&self.hamiltonian)?)?;
        for j in &self.jumps {
            me.jumps.push(Jump { rate: j.rate, op: lift(&j.op)?, label: j.label.clone(), frequency: j.frequency });
        }
        if let Some(d) = &self.dephasing {
            me.dephasing = Some(Dephasing { rate: d.rate, op: lift(&d.op)? });
        }
        for t in &self.tones {
            me.tones.push(Tone { op: lift(&t.op)?, amplitude: t.amplitude, frequency: t.frequency, label: t.label.clone() });
        }
        me.notes = self.notes.clone();
        Ok(me)
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::InvalidParameter(format!("rate must be finite and non-negative, got {rate}")));
    }
    Ok(())
}

fn check_shape(space: Space, m: &CMatrix) -> Result<()> {
    let d = space.dim();
    if m.shape() != (d, d) {
        return Err(Error::DimensionMismatch { expected: d, found: m.nrows().max(m.ncols()) });
    }
    Ok(())
}

fn dissipator_matrix(o: &CMatrix, rho: &CMatrix) -> CMatrix {
    let od = o.adjoint();
    let odo = &od * o;
    (o * rho * &od).scale(2.0) - &odo * rho - rho * &odo
}

/// `D[O]ρ = (2OρO† − O†Oρ − ρO†O)/2`
pub fn dissipator_apply(o: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
    if o.shape() != rho.shape() || !o.is_square() {
        return Err(Error::DimensionMismatch { expected: o.nrows(), found: rho.nrows() });
    }
    Ok(dissipator_matrix(o, rho).scale(0.5))
}

/// SME with the default rate arguments `κ = Γ(ω)`, `γ = γ(ω₀)`.
pub fn build_sme(p: &RabiParams, rates: &RateFunctions, dims: SpaceDims) -> Result<MasterEquation> {
    let kappa = rates.gamma_osc(p.omega)?;
    let gamma = rates.gamma_qubit(p.omega0)?;
    build_sme_with_rates(p, dims, kappa, gamma)
}

/// `ρ̇ = −i[H_Rabi, ρ] + κ D[a]ρ + γ D[σ_−]ρ`
pub fn build_sme_with_rates(p: &RabiParams, dims: SpaceDims, kappa: f64, gamma: f64) -> Result<MasterEquation> {
    let mut me = MasterEquation::new(Space::Full { n_cut: dims.n_cut() }, build_h_rabi(p, dims).into_matrix())?;
    me.add_jump(kappa, annihilation(dims).into_matrix(), "a", Some(p.omega))?;
    me.add_jump(gamma, qubit_op(Pauli::Lower, dims).into_matrix(), "sigma_minus", Some(p.omega0))?;
    Ok(me)
}

/// Zero-temperature DME in dressed coordinates:
/// `H_AD`, jumps `(Γ(ω_±), a_±)` and `(4β²Γ(ω̃_N) + γ(ω̃_N), |Ψ_N^−⟩⟨Ψ_N^+|)`.
pub fn build_dme_zero_t(b: &DressedBasis, rates: &RateFunctions) -> Result<MasterEquation> {
    let space = Space::Dressed { n_levels: b.n_levels };
    let mut me = MasterEquation::new(space, h_ad_dressed(b))?;
    let l = ladders_dressed(b);
    me.add_jump(rates.gamma_osc(b.omega_plus)?, l.a_plus, "a_plus", Some(b.omega_plus))?;
    me.add_jump(rates.gamma_osc(b.omega_minus)?, l.a_minus, "a_minus", Some(b.omega_minus))?;
    for n in 0..b.n_levels {
        let w = b.omega_tilde[n];
        let rate = rates.kappa(b.params.beta, w)?;
        me.add_jump(rate, b.unit(Sector::Minus, n, Sector::Plus, n), format!("cross_{n}"), Some(w))?;
    }
    Ok(me)
}

/// Each zero-T jump `(r, L)` at frequency ν becomes `(r(n̄+1), L)` and `(r n̄, L†)`.
pub fn build_dme_finite_t(b: &DressedBasis, rates: &RateFunctions) -> Result<MasterEquation> {
    let zero = build_dme_zero_t(b, rates)?;
    let t = rates.temperature;
    if t <= 0.0 {
        return Ok(zero);
    }
    let mut me = MasterEquation::new(zero.space, zero.hamiltonian.clone())?;
    for j in zero.jumps {
        let nu = j.frequency.expect("DME jumps carry frequencies");
        let nbar = thermal_occupation(nu, t);
        me.add_jump(j.rate * (nbar + 1.0), j.op.clone(), format!("{}_down", j.label), Some(nu))?;
        me.add_jump(j.rate * nbar, j.op.adjoint(), format!("{}_up", j.label), Some(-nu))?;
    }
    Ok(me)
}

/// `(rate_up / rate_down, e^{−ν/T})` for every thermal pair.
pub fn detailed_balance_ratios(me: &MasterEquation, temperature: f64) -> Vec<(f64, f64)> {
    me.jumps
        .chunks(2)
        .filter(|c| c.len() == 2 && c[0].rate > 0.0)
        .map(|c| {
            let nu = c[0].frequency.unwrap_or(0.0);
            (c[1].rate / c[0].rate, (-nu / temperature).exp())
        })
        .collect()
}

/// Gibbs state `e^{−H/T}/Z` of a Hermitian matrix.
pub fn gibbs_state(h: &CMatrix, temperature: f64) -> Result<CMatrix> {
    if temperature <= 0.0 {
        return Err(Error::InvalidParameter("Gibbs state needs T > 0".into()));
    }
    let (vals, vecs) = crate::rabi::eigh(h)?;
    let e0 = vals[0];
    let w: Vec<f64> = vals.iter().map(|e| (-(e - e0) / temperature).exp()).collect();
    let z: f64 = w.iter().sum();
    let d = h.nrows();
    let mut rho = CMatrix::zeros(d, d);
    for (wk, v) in w.iter().zip(vecs.iter()) {
        rho += (v * v.adjoint()).scale(wk / z);
    }
    Ok(rho)
}

/// `S_z` on the full space.
pub fn build_sz(b: &DressedBasis) -> Result<crate::hilbert::Operator> {
    b.to_full(&sz_dressed(b))
}

/// Adds `−(γ_f/2)[S_z, [S_z, ρ]]`.
pub fn add_dephasing(mut me: MasterEquation, gamma_f: f64, sz: CMatrix) -> Result<MasterEquation> {
    me.set_dephasing(gamma_f, sz)?;
    Ok(me)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Drive {
    pub amplitude: f64,
    pub frequency: f64,
}

fn driven_hamiltonian(b: &DressedBasis, pump: Drive, plus_shift: f64) -> CMatrix {
    let l = ladders_dressed(b);
    let e0 = half_splitting(&b.params);
    let dp = b.omega_plus - pump.frequency;
    let dm = b.omega_minus - pump.frequency;
    let n_plus = l.a_plus.adjoint() * &l.a_plus;
    let n_minus = l.a_minus.adjoint() * &l.a_minus;
    let x = &l.a_plus + l.a_plus.adjoint() + &l.a_minus + l.a_minus.adjoint();
    n_plus.scale(dp) + n_minus.scale(dm) + l.proj_plus.scale(e0 + plus_shift) - l.proj_minus.scale(e0)
        + x.scale(pump.amplitude)
}

/// Pumped DME in the frame rotating at `ω_p`:
/// `H = Σ_± [Δ_± a_±†a_± ± E₀ 1_± + Ω_p(a_± + a_±†)]`, `Δ_± = ω_± − ω_p`,
/// jumps `(Γ, a_±)`, `(κ, |Ψ_N^−⟩⟨Ψ_N^+|)` and dephasing `(γ_f, S_z)`.
pub fn build_driven_rotating(b: &DressedBasis, rates: &RateFunctions, pump: Drive) -> Result<MasterEquation> {
    driven_generator(b, rates, pump, 0.0)
}

fn driven_generator(b: &DressedBasis, rates: &RateFunctions, pump: Drive, plus_shift: f64) -> Result<MasterEquation> {
    if !pump.amplitude.is_finite() || !pump.frequency.is_finite() {
        return Err(Error::InvalidParameter("pump amplitude and frequency must be finite".into()));
    }
    let space = Space::Dressed { n_levels: b.n_levels };
    let mut me = MasterEquation::new(space, driven_hamiltonian(b, pump, plus_shift))?;
    let l = ladders_dressed(b);
    let gp = rates.gamma_osc(b.omega_plus)?;
    let gm = rates.gamma_osc(b.omega_minus)?;
    if (gp - gm).abs() > 1e-12 * gp.max(gm) {
        me.notes.push(format!("Γ(ω_+) = {gp:.6e} differs from Γ(ω_−) = {gm:.6e}"));
    }
    me.add_jump(gp, l.a_plus, "a_plus", Some(b.omega_plus))?;
    me.add_jump(gm, l.a_minus, "a_minus", Some(b.omega_minus))?;
    let k0 = rates.kappa(b.params.beta, b.omega_tilde[0])?;
    for n in 0..b.n_levels {
        let w = b.omega_tilde[n];
        let k = rates.kappa(b.params.beta, w)?;
        if n > 0 && (k - k0).abs() > 1e-12 * k0.max(k) {
            me.notes.push(format!("κ depends on N (κ_{n} = {k:.6e})"));
        }
        me.add_jump(k, b.unit(Sector::Minus, n, Sector::Plus, n), format!("cross_{n}"), Some(w))?;
    }
    me.set_dephasing(rates.gamma_f, sz_dressed(b))?;
    Ok(me)
}

/// Adds the cross-ladder spectroscopy tone `−2βΩ_s(Y + Y†)(e^{iω_s t} + e^{−iω_s t})`,
/// `Y = Σ_N |Ψ_N^−⟩⟨Ψ_N^+|`, to a generator in the `ω_p` frame. The
/// intra-ladder parts of the probe are not included.
pub fn add_spectroscopy_tone(mut me: MasterEquation, b: &DressedBasis, probe: Drive) -> Result<MasterEquation> {
    if me.space != (Space::Dressed { n_levels: b.n_levels }) {
        return Err(Error::InvalidDims("spectroscopy tone needs dressed coordinates".into()));
    }
    let y = cross_lowering_dressed(b);
    let o = &y + y.adjoint();
    let c = C64::new(-2.0 * b.params.beta * probe.amplitude, 0.0);
    me.add_tone(o, c, probe.frequency, "probe")?;
    me.notes.push("intra-ladder probe components dropped".into());
    Ok(me)
}

/// The pumped, probed generator after the further exact frame change
/// `U = e^{iω_s 1_+ t}`: the `+` ladder is shifted by `−ω_s`, the probe
/// becomes the static coupling `−2βΩ_s(Y + Y†)` plus one tone
/// `(Y, −2βΩ_s)` at `2ω_s`. Number operators and sector populations are
/// unchanged by this frame change.
pub fn co_rotating_spectroscopy(b: &DressedBasis, rates: &RateFunctions, pump: Drive, probe: Drive) -> Result<MasterEquation> {
    let mut me = driven_generator(b, rates, pump, -probe.frequency)?;
    let y = cross_lowering_dressed(b);
    let g = -2.0 * b.params.beta * probe.amplitude;
    me.hamiltonian += (&y + y.adjoint()).scale(g);
    me.add_tone(y, C64::new(g, 0.0), 2.0 * probe.frequency, "probe_counter_rotating")?;
    me.notes.push("intra-ladder probe components dropped".into());
    me.notes.push("frame co-rotating with the probe on the + ladder".into());
    Ok(me)
}

/// `d = 1 − |⟨Ψ_0^−|g, 0⟩|`: how far the dressed ground state sits from the
/// bare `|g, 0⟩` that the SME treats as its dark state. Equals `1 − e^{−β²/2}`.
pub fn ground_distance(p: &RabiParams, dims: SpaceDims) -> Result<f64> {
    let b = crate::adiabatic::build_basis(p, 1, dims, crate::adiabatic::EnergyMode::Truncated)?;
    let g0 = crate::hilbert::Ket::basis(dims, crate::hilbert::Qubit::Ground, 0)?;
    Ok(1.0 - b.state(Sector::Minus, 0).inner(&g0).norm())
}

/// Maximum deviation from trace preservation and Hermiticity preservation
/// of the generator applied to `rho` at time `t`.
pub fn hygiene(me: &MasterEquation, rho: &CMatrix, t: f64) -> Result<(f64, f64)> {
    let out = me.apply(rho, t)?;
    let tr = crate::hilbert::trace(&out).norm();
    Ok((tr, max_abs(&(&out - out.adjoint()))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adiabatic::{build_basis, overlap, EnergyMode};
    use crate::hilbert::{Ket, Qubit, ONE};
    use approx::assert_abs_diff_eq;

    fn reference_basis(n_levels: usize) -> DressedBasis {
        let p = RabiParams::new(1.0, 0.3, 0.1).unwrap();
        build_basis(&p, n_levels, SpaceDims::default(), EnergyMode::Truncated).unwrap()
    }

    fn reference_rates() -> RateFunctions {
        RateFunctions::flat(0.0018, 3e-4 - 0.04 * 0.0018, 6e-4).unwrap()
    }

    fn proj(d: usize, k: usize) -> CMatrix {
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = ONE;
        m
    }

    fn random_state(d: usize, seed: u64) -> CMatrix {
        // deterministic pseudo-random density matrix
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let g = CMatrix::from_fn(d, d, |_, _| C64::new(next(), next()));
        let r = &g * g.adjoint();
        let tr = crate::hilbert::trace(&r);
        r.map(|z| z / tr)
    }

    #[test]
    fn dissipator_examples() {
        let a = crate::hilbert::fock_annihilation(4);
        assert!(max_abs(&dissipator_apply(&a, &proj(4, 0)).unwrap()) == 0.0);
        let out = dissipator_apply(&a, &proj(4, 1)).unwrap();
        assert!(max_abs(&(out - proj(4, 0) + proj(4, 1))) < 1e-15);
        let rho = random_state(4, 3);
        assert!(crate::hilbert::trace(&dissipator_apply(&a, &rho).unwrap()).norm() < 1e-15);
        assert!(dissipator_apply(&a, &CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn sme_stationary_when_decoupled() {
        let d = SpaceDims::new(8).unwrap();
        let p = RabiParams::new(1.0, 0.3, 0.0).unwrap();
        let me = build_sme(&p, &RateFunctions::flat(0.01, 0.02, 0.0).unwrap(), d).unwrap();
        let g0 = Ket::basis(d, Qubit::Ground, 0).unwrap().projector().into_matrix();
        assert!(max_abs(&me.apply(&g0, 0.0).unwrap()) < 1e-16);
    }

    #[test]
    fn sme_moves_coupled_ground_state() {
        let d = SpaceDims::default();
        let p = RabiParams::new(1.0, 0.3, 0.1).unwrap();
        let gamma = 0.0018;
        let me = build_sme(&p, &RateFunctions::flat(gamma, gamma, 0.0).unwrap(), d).unwrap();
        let (_, gs) = crate::rabi::ground_state(&p, d).unwrap();
        let rho = gs.projector().into_matrix();
        assert!(max_abs(&me.apply(&rho, 0.0).unwrap()) > 1e-4 * gamma);
        let (tr, herm) = hygiene(&me, &random_state(80, 5), 0.0).unwrap();
        assert!(tr < 1e-12 && herm < 1e-12);
    }

    #[test]
    fn ground_distance_closed_form() {
        for beta in [0.0, 0.05, 0.1, 0.2] {
            let p = RabiParams::new(1.0, 0.15, beta).unwrap();
            let d = ground_distance(&p, SpaceDims::default()).unwrap();
            assert!((d - (1.0 - (-beta * beta / 2.0).exp())).abs() < 1e-10);
        }
        let p = RabiParams::new(1.0, 0.15, 0.1).unwrap();
        assert!((ground_distance(&p, SpaceDims::default()).unwrap() - 4.9875e-3).abs() < 1e-7);
    }

    #[test]
    fn dme_ground_state_is_dark() {
        let b = reference_basis(6);
        let me = build_dme_zero_t(&b, &reference_rates()).unwrap();
        let rho = proj(12, b.index(Sector::Minus, 0));
        assert!(max_abs(&me.apply(&rho, 0.0).unwrap()) < 1e-12 * 0.0018);
    }

    #[test]
    fn dme_excited_pair_decays_at_kappa() {
        let b = reference_basis(4);
        let rates = reference_rates();
        let me = build_dme_zero_t(&b, &rates).unwrap();
        let rho = proj(8, b.index(Sector::Plus, 0));
        let out = me.apply(&rho, 0.0).unwrap();
        let k = rates.kappa(0.1, b.omega_tilde[0]).unwrap();
        let m0 = b.index(Sector::Minus, 0);
        let p0 = b.index(Sector::Plus, 0);
        assert_abs_diff_eq!(out[(m0, m0)].re, k, epsilon = 1e-15);
        assert_abs_diff_eq!(out[(p0, p0)].re, -k, epsilon = 1e-15);
    }

    #[test]
    fn dme_decoupled_limit_damps_each_ladder() {
        let p = RabiParams::new(1.0, 0.3, 0.0).unwrap();
        let b = build_basis(&p, 4, SpaceDims::new(10).unwrap(), EnergyMode::Truncated).unwrap();
        let me = build_dme_zero_t(&b, &RateFunctions::flat(0.01, 0.0, 0.0).unwrap()).unwrap();
        for j in &me.jumps {
            if j.label.starts_with("cross") {
                assert_eq!(j.rate, 0.0);
            } else {
                assert_eq!(j.rate, 0.01);
            }
        }
    }

    #[test]
    fn embedding_matches_full_space_build() {
        let b = reference_basis(4);
        let me = build_dme_zero_t(&b, &reference_rates()).unwrap();
        let full = me.embedded(&b).unwrap();
        let h_full = crate::adiabatic::build_h_ad(&b).unwrap();
        assert!(max_abs(&(&full.hamiltonian - h_full.matrix())) < 1e-14);
        let l = crate::adiabatic::build_ladders(&b).unwrap();
        assert!(max_abs(&(&full.jumps[0].op - l.a_plus.matrix())) < 1e-14);
        let rho_d = random_state(8, 9);
        let lhs = b.embed_state(&me.apply(&rho_d, 0.0).unwrap()).unwrap();
        let rhs = full.apply(&b.embed_state(&rho_d).unwrap(), 0.0).unwrap();
        assert!(max_abs(&(lhs - rhs)) < 1e-14);
    }

    #[test]
    fn finite_t_reduces_and_balances() {
        let b = reference_basis(5);
        let cold = build_dme_finite_t(&b, &reference_rates()).unwrap();
        assert_eq!(cold.jumps.len(), build_dme_zero_t(&b, &reference_rates()).unwrap().jumps.len());
        let t = 0.3;
        let me = build_dme_finite_t(&b, &reference_rates().with_temperature(t).unwrap()).unwrap();
        for (ratio, boltzmann) in detailed_balance_ratios(&me, t) {
            assert_abs_diff_eq!(ratio, boltzmann, epsilon = 1e-15 * boltzmann.max(1.0));
        }
        let gibbs = gibbs_state(&me.hamiltonian, t).unwrap();
        assert!(max_abs(&me.apply(&gibbs, 0.0).unwrap()) < 1e-9);
    }

    #[test]
    fn sz_properties() {
        let b = reference_basis(4);
        let sz = build_sz(&b).unwrap();
        assert!(sz.hermiticity_defect() < 1e-14);
        for n in 0..4 {
            let v = sz.matrix_element(&b.states_plus[n], &b.states_plus[n]).re;
            assert_abs_diff_eq!(v, overlap(n, 0.1), epsilon = 1e-12);
            for m in 0..4 {
                assert!(sz.matrix_element(&b.states_plus[n], &b.states_minus[m]).norm() < 1e-12);
            }
        }
        let p0 = RabiParams::new(1.0, 0.3, 0.0).unwrap();
        let b0 = build_basis(&p0, 3, SpaceDims::new(8).unwrap(), EnergyMode::Truncated).unwrap();
        let l = ladders_dressed(&b0);
        assert!(max_abs(&(sz_dressed(&b0) - (&l.proj_plus - &l.proj_minus))) == 0.0);
    }

    #[test]
    fn dephasing_forms_agree() {
        let b = reference_basis(5);
        let me = add_dephasing(build_dme_zero_t(&b, &reference_rates()).unwrap(), 0.05, sz_dressed(&b)).unwrap();
        let alt = me.dephasing_as_jump();
        let rho = random_state(10, 11);
        let diff = me.apply(&rho, 0.0).unwrap() - alt.apply(&rho, 0.0).unwrap();
        assert!(max_abs(&diff) < 1e-12);
        let none = add_dephasing(build_dme_zero_t(&b, &reference_rates()).unwrap(), 0.0, sz_dressed(&b)).unwrap();
        let base = build_dme_zero_t(&b, &reference_rates()).unwrap();
        assert!(max_abs(&(none.apply(&rho, 0.0).unwrap() - base.apply(&rho, 0.0).unwrap())) == 0.0);
    }

    #[test]
    fn dephasing_rates_on_coherences() {
        let b = reference_basis(4);
        let gf = 1.0;
        let mut me = MasterEquation::new(Space::Dressed { n_levels: 4 }, CMatrix::zeros(8, 8)).unwrap();
        me.set_dephasing(gf, sz_dressed(&b)).unwrap();
        // ⟨Ψ_N^−|ρ|Ψ_M^+⟩ decays at (γ_f/2)(o_N + o_M)²
        for (n, m) in [(0, 0), (1, 2)] {
            let (i, j) = (b.index(Sector::Minus, n), b.index(Sector::Plus, m));
            let mut rho = CMatrix::zeros(8, 8);
            rho[(i, j)] = ONE;
            let rate = -me.apply(&rho, 0.0).unwrap()[(i, j)].re;
            let o = overlap(n, 0.1) + overlap(m, 0.1);
            assert_abs_diff_eq!(rate, 0.5 * gf * o * o, epsilon = 1e-14);
            if n == 0 && m == 0 {
                assert!((rate - 2.0 * gf).abs() < 0.1);
            }
        }
        // within a ladder the prefactor is (o_N − o_M)², O(β⁴)
        for n in 0..3 {
            for m in 0..3 {
                let (i, j) = (b.index(Sector::Plus, n), b.index(Sector::Plus, m));
                let mut rho = CMatrix::zeros(8, 8);
                rho[(i, j)] = ONE;
                let rate = -me.apply(&rho, 0.0).unwrap()[(i, j)].re;
                let pref = (overlap(n, 0.1) - overlap(m, 0.1)).powi(2);
                assert_abs_diff_eq!(rate, 0.5 * gf * pref, epsilon = 1e-14);
                assert!(pref <= 6.4e-3);
                let dn = (n as f64 - m as f64).abs();
                assert!(pref <= (4.0 * 0.01 * dn).powi(2) * 1.1 + 1e-15);
            }
        }
    }

    #[test]
    fn generators_are_hygienic() {
        let b = reference_basis(5);
        let rates = reference_rates().with_temperature(0.2).unwrap();
        let pump = Drive { amplitude: 0.001, frequency: b.omega_minus };
        let probe = Drive { amplitude: 3e-4, frequency: 0.29 };
        let gens = vec![
            build_dme_zero_t(&b, &rates).unwrap(),
            build_dme_finite_t(&b, &rates).unwrap(),
            build_driven_rotating(&b, &rates, pump).unwrap(),
            add_spectroscopy_tone(build_driven_rotating(&b, &rates, pump).unwrap(), &b, probe).unwrap(),
            co_rotating_spectroscopy(&b, &rates, pump, probe).unwrap(),
        ];
        for (k, me) in gens.iter().enumerate() {
            let rho = random_state(10, 20 + k as u64);
            let (tr, herm) = hygiene(me, &rho, 17.3).unwrap();
            assert!(tr < 1e-12 && herm < 1e-12, "generator {k}: {tr} {herm}");
        }
    }

    #[test]
    fn probe_off_is_identity() {
        let b = reference_basis(4);
        let pump = Drive { amplitude: 0.001, frequency: b.omega_minus };
        let base = build_driven_rotating(&b, &reference_rates(), pump).unwrap();
        let probed = add_spectroscopy_tone(base.clone(), &b, Drive { amplitude: 0.0, frequency: 0.29 }).unwrap();
        assert!(!probed.is_time_dependent());
        let rho = random_state(8, 1);
        assert!(max_abs(&(base.apply(&rho, 3.0).unwrap() - probed.apply(&rho, 3.0).unwrap())) == 0.0);
    }

    #[test]
    fn rejects_bad_terms() {
        let mut me = MasterEquation::new(Space::Dressed { n_levels: 2 }, CMatrix::zeros(4, 4)).unwrap();
        assert!(me.add_jump(-1.0, CMatrix::zeros(4, 4), "x", None).is_err());
        assert!(me.add_jump(1.0, CMatrix::zeros(3, 3), "x", None).is_err());
        let mut h = CMatrix::zeros(4, 4);
        h[(0, 1)] = ONE;
        assert!(MasterEquation::new(Space::Dressed { n_levels: 2 }, h).is_err());
    }
}
