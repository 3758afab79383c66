//! Operator algebra on the truncated qubit ⊗ oscillator space.
//!
//! Basis ordering is qubit ⊗ oscillator with the qubit index slowest:
//! `index = q * n_cut + n`, where `q = 0` is the excited state `|e⟩`
//! and `q = 1` is the ground state `|g⟩` (so `σ_z|e⟩ = |e⟩`,
//! `σ_z|g⟩ = −|g⟩`). The oscillator keeps Fock states `|0⟩ … |n_cut−1⟩`.
//!
//! Units: ħ = 1 everywhere; frequencies and energies share one scale.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Unitarity defect above which a displacement is flagged as unreliable.
pub const DISPLACEMENT_DEFECT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceDims {
    n_cut: usize,
}

impl SpaceDims {
    pub fn new(n_cut: usize) -> Result<Self> {
        if n_cut < 2 {
            return Err(Error::InvalidDims(format!("n_cut must be at least 2, got {n_cut}")));
        }
        Ok(Self { n_cut })
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut
    }

    pub fn total_dim(&self) -> usize {
        2 * self.n_cut
    }

    /// The same space with `extra` more Fock states.
    pub fn enlarged(&self, extra: usize) -> Self {
        Self { n_cut: self.n_cut + extra }
    }

    pub fn index(&self, qubit: Qubit, n: usize) -> Result<usize> {
        if n >= self.n_cut {
            return Err(Error::IndexOutOfRange { index: n, limit: self.n_cut });
        }
        Ok(qubit.slot() * self.n_cut + n)
    }
}

impl Default for SpaceDims {
    fn default() -> Self {
        Self { n_cut: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Qubit {
    Excited,
    Ground,
}

impl Qubit {
    fn slot(self) -> usize {
        match self {
            Qubit::Excited => 0,
            Qubit::Ground => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    Raise,
    Lower,
    Identity,
}

impl Pauli {
    /// The 2×2 matrix in the (|e⟩, |g⟩) basis.
    pub fn matrix(self) -> CMatrix {
        let (a, b, c, d) = match self {
            Pauli::X => (ZERO, ONE, ONE, ZERO),
            Pauli::Y => (ZERO, -I, I, ZERO),
            Pauli::Z => (ONE, ZERO, ZERO, -ONE),
            // σ+ = |e⟩⟨g|
            Pauli::Raise => (ZERO, ONE, ZERO, ZERO),
            Pauli::Lower => (ZERO, ZERO, ONE, ZERO),
            Pauli::Identity => (ONE, ZERO, ZERO, ONE),
        };
        CMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }
}

/// Kronecker product with `a` as the slow factor.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Schatten-1 norm of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|v| v.abs()).sum()
}

/// Matrix exponential (Padé approximant with scaling and squaring).
pub fn expm(m: &CMatrix) -> CMatrix {
    m.clone().exp()
}

/// Oscillator annihilation operator on `n` Fock states.
pub fn fock_annihilation(n: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dims: SpaceDims,
    m: CMatrix,
}

impl Operator {
    pub fn from_matrix(dims: SpaceDims, m: CMatrix) -> Result<Self> {
        let n = dims.total_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.nrows().max(m.ncols()) });
        }
        Ok(Self { dims, m })
    }

    pub fn zeros(dims: SpaceDims) -> Self {
        let n = dims.total_dim();
        Self { dims, m: CMatrix::zeros(n, n) }
    }

    pub fn identity(dims: SpaceDims) -> Self {
        let n = dims.total_dim();
        Self { dims, m: CMatrix::identity(n, n) }
    }

    /// `qubit ⊗ oscillator`.
    pub fn tensor(dims: SpaceDims, qubit: &CMatrix, oscillator: &CMatrix) -> Result<Self> {
        if qubit.shape() != (2, 2) {
            return Err(Error::DimensionMismatch { expected: 2, found: qubit.nrows() });
        }
        if oscillator.shape() != (dims.n_cut(), dims.n_cut()) {
            return Err(Error::DimensionMismatch { expected: dims.n_cut(), found: oscillator.nrows() });
        }
        Ok(Self { dims, m: kron(qubit, oscillator) })
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn dagger(&self) -> Self {
        Self { dims: self.dims, m: self.m.adjoint() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dims: self.dims, m: self.m.map(|z| z * s) }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { dims: self.dims, m: self.m.scale(s) }
    }

    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        self.check(other)?;
        Ok(Self { dims: self.dims, m: commutator(&self.m, &other.m) })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.m)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.m)
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        if ket.dims != self.dims {
            return Err(Error::DimensionMismatch { expected: self.dims.total_dim(), found: ket.dims.total_dim() });
        }
        Ok(Ket { dims: self.dims, v: &self.m * &ket.v })
    }

    /// ⟨bra|O|ket⟩
    pub fn matrix_element(&self, bra: &Ket, ket: &Ket) -> C64 {
        bra.v.dotc(&(&self.m * &ket.v))
    }

    /// Restriction to Fock states `0..n_keep` in both qubit sectors.
    pub fn fock_block(&self, n_keep: usize) -> CMatrix {
        let n_cut = self.dims.n_cut();
        let n_keep = n_keep.min(n_cut);
        let idx: Vec<usize> = (0..2).flat_map(|q| (0..n_keep).map(move |n| q * n_cut + n)).collect();
        CMatrix::from_fn(idx.len(), idx.len(), |i, j| self.m[(idx[i], idx[j])])
    }

    fn check(&self, other: &Operator) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.total_dim(),
                found: other.dims.total_dim(),
            });
        }
        Ok(())
    }
}

// Arithmetic between operators of mismatched dims is a programming error, hence the asserts.
impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "operator dimension mismatch");
        Operator { dims: self.dims, m: &self.m + &rhs.m }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "operator dimension mismatch");
        Operator { dims: self.dims, m: &self.m - &rhs.m }
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dims, rhs.dims, "operator dimension mismatch");
        Operator { dims: self.dims, m: &self.m * &rhs.m }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { dims: self.dims, m: -&self.m }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    dims: SpaceDims,
    v: CVector,
}

impl Ket {
    pub fn from_vector(dims: SpaceDims, v: CVector) -> Result<Self> {
        if v.len() != dims.total_dim() {
            return Err(Error::DimensionMismatch { expected: dims.total_dim(), found: v.len() });
        }
        Ok(Self { dims, v })
    }

    /// `|q⟩ ⊗ |n⟩`
    pub fn basis(dims: SpaceDims, qubit: Qubit, n: usize) -> Result<Self> {
        let mut v = CVector::zeros(dims.total_dim());
        v[dims.index(qubit, n)?] = ONE;
        Ok(Self { dims, v })
    }

    /// `qubit ⊗ oscillator` for explicit factor amplitudes.
    pub fn product(dims: SpaceDims, qubit: [C64; 2], oscillator: &CVector) -> Result<Self> {
        let n_cut = dims.n_cut();
        if oscillator.len() != n_cut {
            return Err(Error::DimensionMismatch { expected: n_cut, found: oscillator.len() });
        }
        let v = CVector::from_fn(2 * n_cut, |k, _| qubit[k / n_cut] * oscillator[k % n_cut]);
        Ok(Self { dims, v })
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn vector(&self) -> &CVector {
        &self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub fn normalize(mut self) -> Self {
        let n = self.v.norm();
        if n > 0.0 {
            self.v.unscale_mut(n);
        }
        self
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Ket) -> C64 {
        self.v.dotc(&other.v)
    }

    pub fn fidelity(&self, other: &Ket) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn add_scaled(&self, other: &Ket, s: C64) -> Ket {
        Ket { dims: self.dims, v: &self.v + other.v.map(|z| z * s) }
    }

    pub fn scale(&self, s: C64) -> Ket {
        Ket { dims: self.dims, v: self.v.map(|z| z * s) }
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix { dims: self.dims, m: &self.v * self.v.adjoint() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: SpaceDims,
    m: CMatrix,
}

pub const STATE_HERMITICITY_TOL: f64 = 1e-10;
pub const STATE_TRACE_TOL: f64 = 1e-10;
pub const STATE_POSITIVITY_TOL: f64 = 1e-8;

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(dims: SpaceDims, m: CMatrix) -> Result<Self> {
        let n = dims.total_dim();
        if m.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
        }
        let herm = hermiticity_defect(&m);
        if herm > STATE_HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("hermiticity defect {herm:.3e}")));
        }
        let tr = trace(&m);
        if (tr - ONE).norm() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min_eig = hermitian_eigenvalues(&m)[0];
        if min_eig < -STATE_POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(Self { dims, m })
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> C64 {
        trace(&self.m)
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.m * &self.m)).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.m)[0]
    }

    pub fn fidelity_with_pure(&self, ket: &Ket) -> f64 {
        ket.v.dotc(&(&self.m * &ket.v)).re
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub imaginary_defect: f64,
}

impl Expectation {
    pub const IMAG_TOL: f64 = 1e-9;

    pub fn flagged(&self) -> bool {
        self.imaginary_defect > Self::IMAG_TOL
    }
}

/// tr(O ρ) on raw matrices.
pub fn expectation_matrix(op: &CMatrix, rho: &CMatrix) -> Result<Expectation> {
    if op.shape() != rho.shape() {
        return Err(Error::DimensionMismatch { expected: op.nrows(), found: rho.nrows() });
    }
    let n = op.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += op[(i, k)] * rho[(k, i)];
        }
    }
    let e = Expectation { value: acc.re, imaginary_defect: acc.im.abs() };
    if e.flagged() {
        log::warn!("expectation has imaginary part {:.3e}", acc.im);
    }
    Ok(e)
}

pub fn expectation(op: &Operator, rho: &DensityMatrix) -> Result<Expectation> {
    if op.dims != rho.dims {
        return Err(Error::DimensionMismatch { expected: op.dims.total_dim(), found: rho.dims.total_dim() });
    }
    expectation_matrix(&op.m, &rho.m)
}

/// ½‖ρ − σ‖₁ for Hermitian arguments.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    0.5 * trace_norm_hermitian(&(rho - sigma))
}

pub fn annihilation(dims: SpaceDims) -> Operator {
    Operator { dims, m: kron(&Pauli::Identity.matrix(), &fock_annihilation(dims.n_cut())) }
}

pub fn number(dims: SpaceDims) -> Operator {
    let a = annihilation(dims);
    &a.dagger() * &a
}

pub fn qubit_op(which: Pauli, dims: SpaceDims) -> Operator {
    Operator { dims, m: kron(&which.matrix(), &CMatrix::identity(dims.n_cut(), dims.n_cut())) }
}

/// `D(α)` on the oscillator factor alone, with its unitarity defect on the
/// lowest `n/2` Fock block.
pub fn oscillator_displacement(alpha: C64, n_cut: usize) -> (CMatrix, f64) {
    let a = fock_annihilation(n_cut);
    let generator = a.adjoint().map(|z| z * alpha) - a.map(|z| z * alpha.conj());
    let d = expm(&generator);
    let half = (n_cut / 2).max(1);
    let dd = d.adjoint() * &d;
    let mut defect: f64 = 0.0;
    for i in 0..half {
        for j in 0..half {
            let target = if i == j { ONE } else { ZERO };
            defect = defect.max((dd[(i, j)] - target).norm());
        }
    }
    (d, defect)
}

#[derive(Debug, Clone)]
pub struct Displacement {
    pub operator: Operator,
    pub unitarity_defect: f64,
}

impl Displacement {
    pub fn unreliable(&self) -> bool {
        self.unitarity_defect > DISPLACEMENT_DEFECT_TOL
    }
}

/// `D(α) = exp(α a† − α* a)` acting on the oscillator factor.
pub fn displacement(alpha: C64, dims: SpaceDims) -> Displacement {
    if 4.0 * alpha.norm_sqr() > 0.25 * dims.n_cut() as f64 {
        log::warn!("displacement |α|² = {:.3} is large for n_cut = {}", alpha.norm_sqr(), dims.n_cut());
    }
    let (d, defect) = oscillator_displacement(alpha, dims.n_cut());
    if defect > DISPLACEMENT_DEFECT_TOL {
        log::warn!("displacement unitarity defect {defect:.3e} exceeds tolerance");
    }
    Displacement {
        operator: Operator { dims, m: kron(&Pauli::Identity.matrix(), &d) },
        unitarity_defect: defect,
    }
}

/// σ_x eigenvalue label `m = ±1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaX {
    Plus,
    Minus,
}

impl SigmaX {
    pub fn sign(self) -> f64 {
        match self {
            SigmaX::Plus => 1.0,
            SigmaX::Minus => -1.0,
        }
    }

    /// Amplitudes of `|±⟩ = (|e⟩ ± |g⟩)/√2` in the (|e⟩, |g⟩) basis.
    pub fn qubit_amplitudes(self) -> [C64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [C64::new(s, 0.0), C64::new(self.sign() * s, 0.0)]
    }
}

/// `|N_m⟩ = D(−mβ)|N⟩` as an oscillator vector.
pub fn displaced_fock_oscillator(n: usize, m: SigmaX, beta: f64, n_cut: usize) -> Result<CVector> {
    if n >= n_cut {
        return Err(Error::IndexOutOfRange { index: n, limit: n_cut });
    }
    let (d, _) = oscillator_displacement(C64::new(-m.sign() * beta, 0.0), n_cut);
    Ok(d.column(n).into_owned())
}

/// `|m⟩ ⊗ |N_m⟩` in the joint space.
pub fn displaced_fock(n: usize, m: SigmaX, beta: f64, dims: SpaceDims) -> Result<Ket> {
    let osc = displaced_fock_oscillator(n, m, beta, dims.n_cut())?;
    Ket::product(dims, m.qubit_amplitudes(), &osc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dims(n: usize) -> SpaceDims {
        SpaceDims::new(n).unwrap()
    }

    #[test]
    fn rejects_tiny_truncation() {
        assert!(SpaceDims::new(1).is_err());
        assert_eq!(dims(7).total_dim(), 14);
    }

    #[test]
    fn annihilation_ladder() {
        let d = dims(6);
        let a = annihilation(d);
        let one = Ket::basis(d, Qubit::Ground, 1).unwrap();
        let zero = Ket::basis(d, Qubit::Ground, 0).unwrap();
        let out = a.apply(&one).unwrap();
        assert_abs_diff_eq!((out.inner(&zero) - ONE).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.apply(&zero).unwrap().norm(), 0.0);

        let d = dims(8);
        let a = annihilation(d);
        let k3 = Ket::basis(d, Qubit::Excited, 3).unwrap();
        let k4 = Ket::basis(d, Qubit::Excited, 4).unwrap();
        assert_abs_diff_eq!(a.matrix_element(&k3, &k4).re, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn number_operator_is_exact_below_top() {
        let d = dims(10);
        let n = number(d);
        for k in 0..9 {
            let ket = Ket::basis(d, Qubit::Excited, k).unwrap();
            let out = n.apply(&ket).unwrap();
            assert_abs_diff_eq!((out.vector() - ket.vector().scale(k as f64)).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn canonical_commutator_on_protected_block() {
        let d = dims(12);
        let a = annihilation(d);
        let c = a.commutator(&a.dagger()).unwrap();
        let block = c.fock_block(11);
        assert_abs_diff_eq!(max_abs(&(block - CMatrix::identity(22, 22))), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pauli_algebra() {
        let d = dims(3);
        let plus = Ket::product(d, SigmaX::Plus.qubit_amplitudes(), &CVector::from_element(3, ONE / 3f64.sqrt())).unwrap();
        let sx = qubit_op(Pauli::X, d);
        assert_abs_diff_eq!((sx.apply(&plus).unwrap().vector() - plus.vector()).norm(), 0.0, epsilon = 1e-15);

        let sp = qubit_op(Pauli::Raise, d);
        let sm = qubit_op(Pauli::Lower, d);
        let anti = &(&sp * &sm) + &(&sm * &sp);
        assert_abs_diff_eq!(max_abs(&(anti.matrix() - CMatrix::identity(6, 6))), 0.0);

        let zx = &qubit_op(Pauli::Z, d) * &sx;
        let iy = qubit_op(Pauli::Y, d).scale(I);
        assert_abs_diff_eq!(max_abs(&(zx.matrix() - iy.matrix())), 0.0);

        let e = Ket::basis(d, Qubit::Excited, 0).unwrap();
        let g = Ket::basis(d, Qubit::Ground, 0).unwrap();
        let sz = qubit_op(Pauli::Z, d);
        assert_eq!(sz.matrix_element(&e, &e), ONE);
        assert_eq!(sz.matrix_element(&g, &g), -ONE);
        // σ+ raises g to e
        assert_eq!(sp.matrix_element(&e, &g), ONE);
    }

    #[test]
    fn displacement_basics() {
        let d = dims(40);
        let zero = displacement(ZERO, d);
        assert_abs_diff_eq!(max_abs(&(zero.operator.matrix() - CMatrix::identity(80, 80))), 0.0, epsilon = 1e-15);

        // ⟨0|D(−β)|0⟩ = e^{−β²/2}; β = 0.1 → 0.995012479...
        let dm = displacement(C64::new(-0.1, 0.0), d);
        let vac = Ket::basis(d, Qubit::Ground, 0).unwrap();
        let amp = dm.operator.matrix_element(&vac, &vac);
        assert_abs_diff_eq!(amp.re, 0.995_012_479_192_682_3, epsilon = 1e-14);
        assert_abs_diff_eq!(amp.im, 0.0, epsilon = 1e-15);

        let alpha = C64::new(0.2, 0.0);
        let p = displacement(alpha, d);
        let m = displacement(-alpha, d);
        assert!(!p.unreliable());
        let prod = (&p.operator * &m.operator).fock_block(20);
        assert_abs_diff_eq!(max_abs(&(prod - CMatrix::identity(40, 40))), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn displacement_matches_coherent_state_series() {
        // D(α)|0⟩ = e^{−|α|²/2} Σ αⁿ/√n! |n⟩
        let alpha = C64::new(0.3, -0.2);
        let (d, _) = oscillator_displacement(alpha, 30);
        let mut coeff = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..15 {
            if n > 0 {
                coeff = coeff * alpha / (n as f64).sqrt();
            }
            assert_abs_diff_eq!((d[(n, 0)] - coeff).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn displaced_fock_at_zero_coupling_is_fock() {
        let osc = displaced_fock_oscillator(3, SigmaX::Minus, 0.0, 10).unwrap();
        assert_abs_diff_eq!((osc[3] - ONE).norm(), 0.0, epsilon = 1e-15);
        assert!(displaced_fock_oscillator(10, SigmaX::Plus, 0.1, 10).is_err());
    }

    #[test]
    fn vacuum_overlap_of_opposite_displacements() {
        let p = displaced_fock_oscillator(0, SigmaX::Plus, 0.1, 40).unwrap();
        let m = displaced_fock_oscillator(0, SigmaX::Minus, 0.1, 40).unwrap();
        // e^{−0.02}
        assert_abs_diff_eq!(m.dotc(&p).re, 0.980_198_673_306_755_2, epsilon = 1e-13);
    }

    #[test]
    fn expectation_of_number_state() {
        let d = dims(5);
        let rho = Ket::basis(d, Qubit::Ground, 2).unwrap().projector();
        let e = expectation(&number(d), &rho).unwrap();
        assert_abs_diff_eq!(e.value, 2.0, epsilon = 1e-14);
        assert!(!e.flagged());
        assert!(expectation(&number(dims(6)), &rho).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let d = dims(3);
        let mut m = CMatrix::zeros(6, 6);
        m[(0, 0)] = C64::new(0.5, 0.0);
        m[(1, 1)] = C64::new(0.5, 0.0);
        let rho = DensityMatrix::new(d, m.clone()).unwrap();
        assert_abs_diff_eq!(rho.purity(), 0.5, epsilon = 1e-15);
        m[(0, 0)] = C64::new(0.6, 0.0);
        assert!(DensityMatrix::new(d, m.clone()).is_err());
        m[(0, 0)] = C64::new(1.2, 0.0);
        m[(1, 1)] = C64::new(-0.2, 0.0);
        assert!(DensityMatrix::new(d, m).is_err());
    }

    #[test]
    fn operator_arithmetic_rejects_mismatch() {
        let a = annihilation(dims(3));
        let b = annihilation(dims(4));
        assert!(a.commutator(&b).is_err());
        assert!(Operator::from_matrix(dims(3), CMatrix::zeros(5, 5)).is_err());
    }
}
