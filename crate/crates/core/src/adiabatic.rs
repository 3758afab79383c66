//! Adiabatic dressed basis `|Ψ_N^±⟩ = (|+,N_+⟩ ± |−,N_−⟩)/√2`, the two
//! effective ladders and the operators built on them.
//!
//! Dressed coordinates: operators acting on the retained subspace are also
//! held as `2·n_levels` square matrices with index `s·n_levels + N`, where
//! `s = 0` is the `+` ladder and `s = 1` the `−` ladder. The isometry
//! `V` (columns `|Ψ_N^±⟩`) embeds them in the full space as `V X V†`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, displaced_fock, qubit_op, CMatrix, Ket, Operator, Pauli, SigmaX, SpaceDims, C64, ONE,
};
use crate::rabi::{RabiParams, BETA_LIMIT, QUASI_DEGENERATE_LIMIT};
use crate::rates::RateFunctions;

/// `L_N(x)` by the three-term recurrence.
pub fn laguerre(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `⟨N_−|N_+⟩ = e^{−2β²} L_N(4β²)`
pub fn overlap(n: usize, beta: f64) -> f64 {
    let b2 = beta * beta;
    (-2.0 * b2).exp() * laguerre(n, 4.0 * b2)
}

/// Largest N for which the truncated ladders keep `E_N^+ > E_N^−`: `⌊1/(2β)²⌋`.
pub fn n_max(beta: f64) -> usize {
    if beta == 0.0 {
        usize::MAX
    } else {
        (1.0 / (4.0 * beta * beta) + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    ExactOverlap,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sector {
    Plus,
    Minus,
}

impl Sector {
    pub fn sign(self) -> f64 {
        match self {
            Sector::Plus => 1.0,
            Sector::Minus => -1.0,
        }
    }

    fn slot(self) -> usize {
        match self {
            Sector::Plus => 0,
            Sector::Minus => 1,
        }
    }
}

/// `ω_± = ω ∓ 2ω₀β²`
pub fn ladder_frequencies(p: &RabiParams) -> (f64, f64) {
    let shift = 2.0 * p.omega0 * p.beta * p.beta;
    (p.omega - shift, p.omega + shift)
}

/// `ω̃_N = ω₀(1 − 2β² − 4Nβ²)`
pub fn transition_frequency(p: &RabiParams, n: usize) -> f64 {
    let b2 = p.beta * p.beta;
    p.omega0 * (1.0 - 2.0 * b2 - 4.0 * n as f64 * b2)
}

/// `(ω₀/2)(1 − 2β²)`: half the N = 0 splitting of the truncated ladders.
pub fn half_splitting(p: &RabiParams) -> f64 {
    0.5 * p.omega0 * (1.0 - 2.0 * p.beta * p.beta)
}

pub fn energy(p: &RabiParams, n: usize, s: Sector, mode: EnergyMode) -> f64 {
    let nf = n as f64;
    match mode {
        EnergyMode::ExactOverlap => {
            p.omega * (nf - p.beta * p.beta) + s.sign() * 0.5 * p.omega0 * overlap(n, p.beta)
        }
        EnergyMode::Truncated => {
            let (wp, wm) = ladder_frequencies(p);
            let w = if s == Sector::Plus { wp } else { wm };
            nf * w + s.sign() * half_splitting(p)
        }
    }
}

#[derive(Debug, Clone)]
pub struct DressedBasis {
    pub params: RabiParams,
    pub n_levels: usize,
    pub dims: SpaceDims,
    pub mode: EnergyMode,
    pub states_plus: Vec<Ket>,
    pub states_minus: Vec<Ket>,
    pub energies_plus: Vec<f64>,
    pub energies_minus: Vec<f64>,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub omega_tilde: Vec<f64>,
    /// Largest norm loss of a displaced Fock state under the truncation.
    pub truncation_defect: f64,
    pub warnings: Vec<String>,
}

const ORTHO_TOL: f64 = 1e-9;

pub fn build_basis(p: &RabiParams, n_levels: usize, dims: SpaceDims, mode: EnergyMode) -> Result<DressedBasis> {
    p.validate()?;
    if n_levels == 0 {
        return Err(Error::InvalidParameter("n_levels must be at least 1".into()));
    }
    if n_levels > dims.n_cut() {
        return Err(Error::InvalidDims(format!("n_levels {n_levels} exceeds n_cut {}", dims.n_cut())));
    }
    let mut warnings = Vec::new();
    let nmax = n_max(p.beta);
    if n_levels > nmax {
        return Err(Error::InvalidParameter(format!(
            "n_levels {n_levels} exceeds n_max = {nmax}; the ladders cross"
        )));
    }
    if p.beta != 0.0 {
        let x = 1.0 / (4.0 * p.beta * p.beta);
        let soft = (0.25 * x + 1e-9).floor() as usize;
        let warn = (0.1 * x + 1e-9).floor() as usize;
        if n_levels > soft {
            warnings.push(format!("n_levels {n_levels} exceeds the small-N bound {soft}"));
        } else if n_levels > warn {
            warnings.push(format!("n_levels {n_levels} above the comfortable bound {warn}"));
        }
    }

    let mut states_plus = Vec::with_capacity(n_levels);
    let mut states_minus = Vec::with_capacity(n_levels);
    let mut defect: f64 = 0.0;
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for n in 0..n_levels {
        let kp = displaced_fock(n, SigmaX::Plus, p.beta, dims)?;
        let km = displaced_fock(n, SigmaX::Minus, p.beta, dims)?;
        defect = defect.max((1.0 - kp.norm()).abs()).max((1.0 - km.norm()).abs());
        states_plus.push(kp.add_scaled(&km, ONE).scale(h));
        states_minus.push(kp.add_scaled(&km, -ONE).scale(h));
    }
    if defect > 1e-10 {
        warnings.push(format!("displaced Fock states lose norm {defect:.3e} under the truncation"));
    }

    let energies_plus: Vec<f64> = (0..n_levels).map(|n| energy(p, n, Sector::Plus, mode)).collect();
    let energies_minus: Vec<f64> = (0..n_levels).map(|n| energy(p, n, Sector::Minus, mode)).collect();
    for n in 0..n_levels {
        let gap = energies_plus[n] - energies_minus[n];
        let bad = if p.omega0 > 0.0 { gap <= 0.0 } else { gap < 0.0 };
        if bad {
            return Err(Error::InvalidParameter(format!("E_{n}^+ ≤ E_{n}^− (gap {gap:.3e})")));
        }
    }
    let (omega_plus, omega_minus) = ladder_frequencies(p);
    for w in &warnings {
        log::warn!("{w}");
    }
    let b = DressedBasis {
        params: *p,
        n_levels,
        dims,
        mode,
        states_plus,
        states_minus,
        energies_plus,
        energies_minus,
        omega_plus,
        omega_minus,
        omega_tilde: (0..n_levels).map(|n| transition_frequency(p, n)).collect(),
        truncation_defect: defect,
        warnings,
    };
    let ortho = b.orthonormality_defect();
    if ortho > ORTHO_TOL {
        return Err(Error::InvalidState(format!("dressed basis not orthonormal (defect {ortho:.3e})")));
    }
    Ok(b)
}

impl DressedBasis {
    pub fn dressed_dim(&self) -> usize {
        2 * self.n_levels
    }

    pub fn index(&self, s: Sector, n: usize) -> usize {
        s.slot() * self.n_levels + n
    }

    pub fn state(&self, s: Sector, n: usize) -> &Ket {
        match s {
            Sector::Plus => &self.states_plus[n],
            Sector::Minus => &self.states_minus[n],
        }
    }

    pub fn energy(&self, s: Sector, n: usize) -> f64 {
        match s {
            Sector::Plus => self.energies_plus[n],
            Sector::Minus => self.energies_minus[n],
        }
    }

    /// Columns `|Ψ_0^+⟩ … |Ψ_{n−1}^+⟩, |Ψ_0^−⟩ … |Ψ_{n−1}^−⟩`.
    pub fn isometry(&self) -> CMatrix {
        let cols: Vec<_> = self
            .states_plus
            .iter()
            .chain(self.states_minus.iter())
            .map(|k| k.vector().clone())
            .collect();
        CMatrix::from_columns(&cols)
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let v = self.isometry();
        let g = v.adjoint() * &v;
        crate::hilbert::max_abs(&(g - CMatrix::identity(self.dressed_dim(), self.dressed_dim())))
    }

    /// `V X V†`
    pub fn to_full(&self, x: &CMatrix) -> Result<Operator> {
        if x.shape() != (self.dressed_dim(), self.dressed_dim()) {
            return Err(Error::DimensionMismatch { expected: self.dressed_dim(), found: x.nrows() });
        }
        let v = self.isometry();
        Operator::from_matrix(self.dims, &v * x * v.adjoint())
    }

    /// `V† O V`
    pub fn to_dressed(&self, op: &Operator) -> Result<CMatrix> {
        if op.dims() != self.dims {
            return Err(Error::DimensionMismatch { expected: self.dims.total_dim(), found: op.dims().total_dim() });
        }
        let v = self.isometry();
        Ok(v.adjoint() * op.matrix() * &v)
    }

    /// `V ρ V†` for a density matrix in dressed coordinates.
    pub fn embed_state(&self, rho: &CMatrix) -> Result<CMatrix> {
        Ok(self.to_full(rho)?.into_matrix())
    }

    /// Weight of a full-space state outside the retained subspace: `1 − tr(V†ρV)/tr ρ`.
    pub fn leakage(&self, rho_full: &CMatrix) -> f64 {
        let v = self.isometry();
        let kept = crate::hilbert::trace(&(v.adjoint() * rho_full * &v)).re;
        let total = crate::hilbert::trace(rho_full).re;
        1.0 - kept / total
    }

    /// `|Ψ_n^s⟩⟨Ψ_m^t|` in dressed coordinates.
    pub fn unit(&self, s: Sector, n: usize, t: Sector, m: usize) -> CMatrix {
        let d = self.dressed_dim();
        let mut x = CMatrix::zeros(d, d);
        x[(self.index(s, n), self.index(t, m))] = ONE;
        x
    }
}

#[derive(Debug, Clone)]
pub struct Ladders<T> {
    pub a_plus: T,
    pub a_minus: T,
    pub proj_plus: T,
    pub proj_minus: T,
}

/// `a_± = Σ √(N+1)|Ψ_N^±⟩⟨Ψ_{N+1}^±|`, `1_± = Σ |Ψ_N^±⟩⟨Ψ_N^±|` in dressed coordinates.
pub fn ladders_dressed(b: &DressedBasis) -> Ladders<CMatrix> {
    let d = b.dressed_dim();
    let build = |s: Sector, lower: bool| {
        let mut m = CMatrix::zeros(d, d);
        for n in 0..b.n_levels {
            if lower {
                if n + 1 < b.n_levels {
                    m[(b.index(s, n), b.index(s, n + 1))] = C64::new(((n + 1) as f64).sqrt(), 0.0);
                }
            } else {
                m[(b.index(s, n), b.index(s, n))] = ONE;
            }
        }
        m
    };
    Ladders {
        a_plus: build(Sector::Plus, true),
        a_minus: build(Sector::Minus, true),
        proj_plus: build(Sector::Plus, false),
        proj_minus: build(Sector::Minus, false),
    }
}

pub fn build_ladders(b: &DressedBasis) -> Result<Ladders<Operator>> {
    let l = ladders_dressed(b);
    Ok(Ladders {
        a_plus: b.to_full(&l.a_plus)?,
        a_minus: b.to_full(&l.a_minus)?,
        proj_plus: b.to_full(&l.proj_plus)?,
        proj_minus: b.to_full(&l.proj_minus)?,
    })
}

/// `H_AD = ω_+ a_+†a_+ + E₀ 1_+ + ω_− a_−†a_− − E₀ 1_−`, `E₀ = (ω₀/2)(1−2β²)`.
pub fn h_ad_dressed(b: &DressedBasis) -> CMatrix {
    let d = b.dressed_dim();
    let e0 = half_splitting(&b.params);
    let mut h = CMatrix::zeros(d, d);
    for n in 0..b.n_levels {
        let nf = n as f64;
        h[(b.index(Sector::Plus, n), b.index(Sector::Plus, n))] = C64::new(nf * b.omega_plus + e0, 0.0);
        h[(b.index(Sector::Minus, n), b.index(Sector::Minus, n))] = C64::new(nf * b.omega_minus - e0, 0.0);
    }
    h
}

pub fn build_h_ad(b: &DressedBasis) -> Result<Operator> {
    b.to_full(&h_ad_dressed(b))
}

/// `Y = Σ_N |Ψ_N^−⟩⟨Ψ_N^+|`
pub fn cross_lowering_dressed(b: &DressedBasis) -> CMatrix {
    let d = b.dressed_dim();
    let mut y = CMatrix::zeros(d, d);
    for n in 0..b.n_levels {
        y[(b.index(Sector::Minus, n), b.index(Sector::Plus, n))] = ONE;
    }
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Position,
    SigmaX,
}

#[derive(Debug, Clone)]
pub struct ElementTable {
    pub kind: ElementKind,
    /// Closed-form elements in dressed coordinates.
    pub analytic: CMatrix,
    /// Elements evaluated by brute-force inner products.
    pub numeric: CMatrix,
    pub operator: Operator,
}

impl ElementTable {
    pub fn max_discrepancy(&self) -> f64 {
        crate::hilbert::max_abs(&(&self.analytic - &self.numeric))
    }
}

pub fn dressed_matrix_elements(b: &DressedBasis, kind: ElementKind) -> Result<ElementTable> {
    let d = b.dressed_dim();
    let mut analytic = CMatrix::zeros(d, d);
    for n in 0..b.n_levels {
        for m in 0..b.n_levels {
            for (s, t) in [(Sector::Plus, Sector::Plus), (Sector::Minus, Sector::Minus)] {
                let v = match kind {
                    ElementKind::Position if m == n + 1 => (m as f64).sqrt(),
                    ElementKind::Position if n == m + 1 => (n as f64).sqrt(),
                    _ => 0.0,
                };
                analytic[(b.index(s, n), b.index(t, m))] = C64::new(v, 0.0);
            }
            if n == m {
                let v = match kind {
                    ElementKind::Position => -2.0 * b.params.beta,
                    ElementKind::SigmaX => 1.0,
                };
                analytic[(b.index(Sector::Minus, n), b.index(Sector::Plus, n))] = C64::new(v, 0.0);
                analytic[(b.index(Sector::Plus, n), b.index(Sector::Minus, n))] = C64::new(v, 0.0);
            }
        }
    }
    let full = match kind {
        ElementKind::Position => {
            let a = annihilation(b.dims);
            &a + &a.dagger()
        }
        ElementKind::SigmaX => qubit_op(Pauli::X, b.dims),
    };
    let numeric = b.to_dressed(&full)?;
    let operator = b.to_full(&analytic)?;
    Ok(ElementTable { kind, analytic, numeric, operator })
}

/// `S = a_− + a_+ − 2β Σ_N |Ψ_N^−⟩⟨Ψ_N^+|` in dressed coordinates.
pub fn dressed_lowering_dressed(b: &DressedBasis) -> CMatrix {
    let l = ladders_dressed(b);
    &l.a_minus + &l.a_plus - cross_lowering_dressed(b).scale(2.0 * b.params.beta)
}

pub fn dressed_lowering_s(b: &DressedBasis) -> Result<Operator> {
    b.to_full(&dressed_lowering_dressed(b))
}

/// `S_z = Σ_N ⟨N_+|N_−⟩ (|Ψ_N^+⟩⟨Ψ_N^+| − |Ψ_N^−⟩⟨Ψ_N^−|)` in dressed coordinates.
pub fn sz_dressed(b: &DressedBasis) -> CMatrix {
    let d = b.dressed_dim();
    let mut s = CMatrix::zeros(d, d);
    for n in 0..b.n_levels {
        let o = C64::new(overlap(n, b.params.beta), 0.0);
        s[(b.index(Sector::Plus, n), b.index(Sector::Plus, n))] = o;
        s[(b.index(Sector::Minus, n), b.index(Sector::Minus, n))] = -o;
    }
    s
}

/// Secular ratio threshold: relaxation rates must sit below this fraction of
/// the smallest nonzero separation between distinct transition frequencies.
pub const SECULAR_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Serialize)]
pub struct ValidityReport {
    pub quasi_degenerate: bool,
    pub quasi_degenerate_margin: f64,
    pub beta_ok: bool,
    pub beta_margin: f64,
    pub n_max: usize,
    pub n_levels: usize,
    pub n_levels_ok: bool,
    pub secular_ok: Option<bool>,
    pub max_rate: Option<f64>,
    pub min_frequency_separation: Option<f64>,
    pub secular_margin: Option<f64>,
    pub warnings: Vec<String>,
}

/// Diagnostic only; never fails.
pub fn validity_report(p: &RabiParams, n_levels: usize, rates: Option<&RateFunctions>) -> ValidityReport {
    let mut warnings = Vec::new();
    let qd_margin = QUASI_DEGENERATE_LIMIT * p.omega - p.omega0;
    let beta_margin = BETA_LIMIT - p.beta.abs();
    let nmax = n_max(p.beta);
    let n_levels_ok = n_levels <= nmax;
    if qd_margin < 0.0 {
        warnings.push(format!("omega0 = {} is above the quasi-degenerate limit {}", p.omega0, QUASI_DEGENERATE_LIMIT * p.omega));
    }
    if beta_margin < 0.0 {
        warnings.push(format!("|beta| = {} exceeds {}", p.beta.abs(), BETA_LIMIT));
    }
    if p.omega0 == 0.0 {
        warnings.push("omega0 = 0: degenerate qubit, the ± pairs are degenerate".into());
    }
    if !n_levels_ok {
        warnings.push(format!("n_levels {n_levels} exceeds n_max {nmax}"));
    }
    let mut report = ValidityReport {
        quasi_degenerate: qd_margin >= 0.0,
        quasi_degenerate_margin: qd_margin,
        beta_ok: beta_margin >= 0.0,
        beta_margin,
        n_max: nmax,
        n_levels,
        n_levels_ok,
        secular_ok: None,
        max_rate: None,
        min_frequency_separation: None,
        secular_margin: None,
        warnings,
    };
    if let Some(r) = rates {
        match secular_check(p, n_levels.min(nmax), r) {
            Ok((max_rate, sep)) => {
                let ok = max_rate <= SECULAR_FRACTION * sep;
                if !ok {
                    report.warnings.push(format!(
                        "secular condition: max rate {max_rate:.3e} vs separation {sep:.3e}"
                    ));
                }
                report.secular_ok = Some(ok);
                report.max_rate = Some(max_rate);
                report.min_frequency_separation = Some(sep);
                report.secular_margin = Some(sep / max_rate.max(f64::MIN_POSITIVE));
            }
            Err(e) => report.warnings.push(format!("secular check skipped: {e}")),
        }
    }
    report.warnings.push("Born and Markov approximations are assumed, not checked".into());
    report
}

/// (largest relaxation rate, smallest nonzero gap between distinct transition frequencies)
fn secular_check(p: &RabiParams, n_levels: usize, r: &RateFunctions) -> Result<(f64, f64)> {
    let (wp, wm) = ladder_frequencies(p);
    let mut freqs = vec![wp, wm];
    let mut max_rate = r.gamma_osc(wp)?.max(r.gamma_osc(wm)?).max(r.gamma_f);
    for n in 0..n_levels.max(1) {
        let w = transition_frequency(p, n);
        freqs.push(w);
        max_rate = max_rate.max(r.kappa(p.beta, w)?);
    }
    let mut sep = f64::INFINITY;
    for i in 0..freqs.len() {
        for j in 0..i {
            let d = (freqs[i] - freqs[j]).abs();
            if d > 1e-12 * p.omega {
                sep = sep.min(d);
            }
        }
    }
    Ok((max_rate, sep))
}
