//! Exact numerical oracle: the Rabi Hamiltonian on the truncated space and
//! its dense diagonalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, kron, max_abs, number, qubit_op, CMatrix, Ket, Operator, Pauli, SpaceDims, C64,
};

/// Largest qubit splitting (in units of ω) treated as quasi-degenerate.
pub const QUASI_DEGENERATE_LIMIT: f64 = 0.3;
/// Largest |β| treated as in scope.
pub const BETA_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiParams {
    pub omega: f64,
    pub omega0: f64,
    pub beta: f64,
}

impl RabiParams {
    pub fn new(omega: f64, omega0: f64, beta: f64) -> Result<Self> {
        let p = Self { omega, omega0, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.omega0.is_finite() && self.omega0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("omega0 must be non-negative, got {}", self.omega0)));
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidParameter("beta must be finite".into()));
        }
        Ok(())
    }

    pub fn quasi_degenerate(&self) -> bool {
        self.omega0 <= QUASI_DEGENERATE_LIMIT * self.omega
    }

    pub fn coupling_ok(&self) -> bool {
        self.beta.abs() <= BETA_LIMIT
    }
}

/// `H = ω₀σ_z/2 + ω a†a + βω(a + a†)σ_x`
pub fn build_h_rabi(p: &RabiParams, dims: SpaceDims) -> Operator {
    let a = annihilation(dims);
    let x = &a + &a.dagger();
    let sz = qubit_op(Pauli::Z, dims).scale_real(0.5 * p.omega0);
    let n = number(dims).scale_real(p.omega);
    let coupling = (&x * &qubit_op(Pauli::X, dims)).scale_real(p.beta * p.omega);
    &(&sz + &n) + &coupling
}

/// `Π = σ_z e^{iπ a†a}`
pub fn parity(dims: SpaceDims) -> Operator {
    let n = dims.n_cut();
    let osc = CMatrix::from_fn(n, n, |i, j| {
        if i != j {
            C64::new(0.0, 0.0)
        } else if i % 2 == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(-1.0, 0.0)
        }
    });
    Operator::from_matrix(dims, kron(&Pauli::Z.matrix(), &osc)).expect("parity shape")
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    pub states: Vec<Ket>,
    /// Per-eigenpair convergence under a larger truncation; `None` when not checked.
    pub converged: Vec<Option<bool>>,
    pub shifts: Vec<Option<f64>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| c.unwrap_or(true))
    }
}

const HERMITIAN_TOL: f64 = 1e-10;
const CLUSTER_TOL: f64 = 1e-9;

/// Full ascending eigen-decomposition. Phases are fixed so the first
/// significant amplitude of each vector is real and positive.
pub fn eigh(h: &CMatrix) -> Result<(Vec<f64>, Vec<nalgebra::DVector<C64>>)> {
    let defect = crate::hilbert::hermiticity_defect(h);
    if defect > HERMITIAN_TOL * max_abs(h).max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = order.iter().map(|&k| fix_phase(eig.eigenvectors.column(k).into_owned())).collect();
    Ok((vals, vecs))
}

pub(crate) fn fix_phase(mut v: nalgebra::DVector<C64>) -> nalgebra::DVector<C64> {
    let peak = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-6 * peak).copied() {
        let phase = z.conj() / z.norm();
        v.iter_mut().for_each(|c| *c *= phase);
    }
    v
}

/// Lowest `keep` eigenpairs of a Hermitian operator, ascending. Degenerate
/// clusters are rotated into eigenstates of `Π` so the output is deterministic.
pub fn diagonalize(h: &Operator, keep: usize) -> Result<Spectrum> {
    let dims = h.dims();
    let (vals, mut vecs) = eigh(h.matrix())?;
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    resolve_degeneracies(&vals, &mut vecs, &parity(dims), CLUSTER_TOL * scale);
    let keep = keep.min(vals.len());
    let states = vecs
        .into_iter()
        .take(keep)
        .map(|v| Ket::from_vector(dims, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        energies: vals[..keep].to_vec(),
        states,
        converged: vec![None; keep],
        shifts: vec![None; keep],
    })
}

fn resolve_degeneracies(vals: &[f64], vecs: &mut [nalgebra::DVector<C64>], pi: &Operator, tol: f64) {
    let mut start = 0;
    while start < vals.len() {
        let mut end = start + 1;
        while end < vals.len() && vals[end] - vals[end - 1] < tol {
            end += 1;
        }
        if end - start > 1 {
            let block = CMatrix::from_columns(&vecs[start..end]);
            let sub = block.adjoint() * pi.matrix() * &block;
            if let Ok((_, rot)) = eigh(&sub) {
                // descending parity: Π = +1 first
                for (k, r) in rot.iter().rev().enumerate() {
                    vecs[start + k] = fix_phase(&block * r);
                }
            }
        }
        start = end;
    }
}

/// Eigen-decomposition of `H_Rabi` with the convergence rule: an eigenpair is
/// accepted when its energy moves by less than `1e−8·ω` on enlarging `n_cut` by 10.
pub fn rabi_spectrum(p: &RabiParams, dims: SpaceDims, keep: usize) -> Result<Spectrum> {
    p.validate()?;
    let mut spec = diagonalize(&build_h_rabi(p, dims), keep)?;
    let bigger = diagonalize(&build_h_rabi(p, dims.enlarged(10)), keep)?;
    for k in 0..spec.len() {
        let shift = (spec.energies[k] - bigger.energies[k]).abs();
        let ok = shift < 1e-8 * p.omega;
        if !ok {
            log::warn!("eigenpair {k} not converged: shift {shift:.3e}");
        }
        spec.converged[k] = Some(ok);
        spec.shifts[k] = Some(shift);
    }
    Ok(spec)
}

pub fn ground_state(p: &RabiParams, dims: SpaceDims) -> Result<(f64, Ket)> {
    p.validate()?;
    let spec = diagonalize(&build_h_rabi(p, dims), 1)?;
    Ok((spec.energies[0], spec.states[0].clone()))
}
