//! Vectorized generators.
//!
//! Column stacking: `vec(ρ)[i + d·j] = ρ_ij`, which is nalgebra's native
//! column-major layout, so `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, C64};
use crate::lindblad::MasterEquation;

/// Largest Hilbert dimension accepted by dense superoperator solves.
pub const MAX_DENSE_DIM: usize = 48;

fn nonzeros(m: &CMatrix) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                out.push((i, j, z));
            }
        }
    }
    out
}

struct Builder {
    d: usize,
    coo: CooMatrix<C64>,
}

impl Builder {
    fn new(d: usize) -> Self {
        Self { d, coo: CooMatrix::new(d * d, d * d) }
    }

    /// `X ↦ s·A X`
    fn left(&mut self, a: &[(usize, usize, C64)], s: C64) {
        let d = self.d;
        for &(i, k, z) in a {
            for j in 0..d {
                self.coo.push(i + d * j, k + d * j, s * z);
            }
        }
    }

    /// `X ↦ s·X B`
    fn right(&mut self, b: &[(usize, usize, C64)], s: C64) {
        let d = self.d;
        for &(l, j, z) in b {
            for i in 0..d {
                self.coo.push(i + d * j, i + d * l, s * z);
            }
        }
    }

    /// `X ↦ s·A X B`
    fn sandwich(&mut self, a: &[(usize, usize, C64)], b: &[(usize, usize, C64)], s: C64) {
        let d = self.d;
        for &(i, k, za) in a {
            for &(l, j, zb) in b {
                self.coo.push(i + d * j, k + d * l, s * za * zb);
            }
        }
    }

    /// `X ↦ −i[H, X]`
    fn commutator(&mut self, h: &CMatrix) {
        let nz = nonzeros(h);
        self.left(&nz, C64::new(0.0, -1.0));
        self.right(&nz, C64::new(0.0, 1.0));
    }

    /// `X ↦ r(J X J† − ½J†J X − ½X J†J)`
    fn dissipator(&mut self, r: f64, j: &CMatrix) {
        let jd = j.adjoint();
        let jdj = &jd * j;
        self.sandwich(&nonzeros(j), &nonzeros(&jd), C64::new(r, 0.0));
        let m = nonzeros(&jdj);
        self.left(&m, C64::new(-0.5 * r, 0.0));
        self.right(&m, C64::new(-0.5 * r, 0.0));
    }

    fn finish(self) -> CsrMatrix<C64> {
        CsrMatrix::from(&self.coo)
    }

    fn triplets(self) -> Vec<(usize, usize, C64)> {
        self.finish().triplet_iter().map(|(i, j, v)| (i, j, *v)).collect()
    }
}

/// Tone superoperators kept as triplets: they are too sparse per row for CSR to pay off.
#[derive(Debug, Clone)]
pub struct ToneSuper {
    /// `X ↦ −i[O, X]`
    pub k: Vec<(usize, usize, C64)>,
    /// `X ↦ −i[O†, X]`
    pub k_dag: Vec<(usize, usize, C64)>,
    pub amplitude: C64,
    pub frequency: f64,
    k_upper: Vec<(usize, usize, C64)>,
    k_dag_upper: Vec<(usize, usize, C64)>,
}

/// `L(t) = L₀ + Σ c e^{−iνt} K_O + c̄ e^{iνt} K_{O†}`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub d: usize,
    pub static_part: CsrMatrix<C64>,
    pub tones: Vec<ToneSuper>,
    // rows (i, j) with i ≤ j, enough for Hermitian arguments
    upper: CsrMatrix<C64>,
    upper_rows: Vec<usize>,
}

fn is_upper(r: usize, d: usize) -> bool {
    r % d <= r / d
}

impl Liouvillian {
    pub fn from_master(me: &MasterEquation) -> Self {
        let d = me.dim();
        let mut b = Builder::new(d);
        b.commutator(&me.hamiltonian);
        for j in &me.jumps {
            if j.rate > 0.0 {
                b.dissipator(j.rate, &j.op);
            }
        }
        if let Some(dp) = &me.dephasing {
            if dp.rate > 0.0 {
                b.dissipator(dp.rate, &dp.op);
            }
        }
        let tones = me
            .tones
            .iter()
            .filter(|t| t.amplitude != C64::new(0.0, 0.0))
            .map(|t| {
                let mut k = Builder::new(d);
                k.commutator(&t.op);
                let mut kd = Builder::new(d);
                kd.commutator(&t.op.adjoint());
                let (k, k_dag) = (k.triplets(), kd.triplets());
                let up = |v: &[(usize, usize, C64)]| v.iter().copied().filter(|&(r, _, _)| is_upper(r, d)).collect();
                ToneSuper {
                    k_upper: up(&k),
                    k_dag_upper: up(&k_dag),
                    k,
                    k_dag,
                    amplitude: t.amplitude,
                    frequency: t.frequency,
                }
            })
            .collect();
        let static_part = b.finish();
        let (upper, upper_rows) = upper_rows_of(&static_part, d);
        Self { d, static_part, tones, upper, upper_rows }
    }

    pub fn vec_dim(&self) -> usize {
        self.d * self.d
    }

    pub fn is_time_dependent(&self) -> bool {
        !self.tones.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.static_part.nnz() + self.tones.iter().map(|t| t.k.len() + t.k_dag.len()).sum::<usize>()
    }

    /// `y = L(t) x`
    pub fn apply(&self, t: f64, x: &[C64], y: &mut [C64]) {
        spmv(&self.static_part, x, y);
        for tone in &self.tones {
            let f = tone.amplitude * C64::from_polar(1.0, -tone.frequency * t);
            for &(i, j, v) in &tone.k {
                y[i] += f * v * x[j];
            }
            let fc = f.conj();
            for &(i, j, v) in &tone.k_dag {
                y[i] += fc * v * x[j];
            }
        }
    }

    /// `y = L(t) x` for `x = vec(X)` with `X` Hermitian: only rows `i ≤ j`
    /// are computed, the rest follow from `L(X)† = L(X)`.
    pub fn apply_hermitian(&self, t: f64, x: &[C64], y: &mut [C64]) {
        let (offs, cols, vals) = (self.upper.row_offsets(), self.upper.col_indices(), self.upper.values());
        for (w, &r) in offs.windows(2).zip(&self.upper_rows) {
            y[r] = cols[w[0]..w[1]]
                .iter()
                .zip(&vals[w[0]..w[1]])
                .fold(C64::new(0.0, 0.0), |acc, (&c, &v)| acc + v * x[c]);
        }
        for tone in &self.tones {
            let f = tone.amplitude * C64::from_polar(1.0, -tone.frequency * t);
            for &(i, j, v) in &tone.k_upper {
                y[i] += f * v * x[j];
            }
            let fc = f.conj();
            for &(i, j, v) in &tone.k_dag_upper {
                y[i] += fc * v * x[j];
            }
        }
        let d = self.d;
        for j in 0..d {
            for i in 0..j {
                y[j + d * i] = y[i + d * j].conj();
            }
        }
    }

    pub fn dense_static(&self) -> Result<CMatrix> {
        if self.d > MAX_DENSE_DIM {
            return Err(Error::TooLarge(self.d));
        }
        let n = self.vec_dim();
        let mut m = CMatrix::zeros(n, n);
        for (i, j, v) in self.static_part.triplet_iter() {
            m[(i, j)] += *v;
        }
        Ok(m)
    }
}

fn upper_rows_of(a: &CsrMatrix<C64>, d: usize) -> (CsrMatrix<C64>, Vec<usize>) {
    let (offs, cols, vals) = (a.row_offsets(), a.col_indices(), a.values());
    let rows: Vec<usize> = (0..a.nrows()).filter(|&r| is_upper(r, d)).collect();
    let mut o = vec![0];
    let mut c = Vec::new();
    let mut v = Vec::new();
    for &r in &rows {
        c.extend_from_slice(&cols[offs[r]..offs[r + 1]]);
        v.extend_from_slice(&vals[offs[r]..offs[r + 1]]);
        o.push(c.len());
    }
    let m = CsrMatrix::try_from_csr_data(rows.len(), a.ncols(), o, c, v).expect("row subset of a valid CSR matrix");
    (m, rows)
}

/// `y = L₀ x`, the static part only.
pub fn spmv_static(l: &Liouvillian, x: &[C64], y: &mut [C64]) {
    spmv(&l.static_part, x, y);
}

fn spmv(a: &CsrMatrix<C64>, x: &[C64], y: &mut [C64]) {
    let (offs, cols, vals) = (a.row_offsets(), a.col_indices(), a.values());
    for (w, out) in offs.windows(2).zip(y.iter_mut()) {
        *out = cols[w[0]..w[1]]
            .iter()
            .zip(&vals[w[0]..w[1]])
            .fold(C64::new(0.0, 0.0), |acc, (&c, &v)| acc + v * x[c]);
    }
}

pub fn vectorize(rho: &CMatrix) -> Vec<C64> {
    rho.as_slice().to_vec()
}

pub fn unvectorize(v: &[C64], d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v)
}

/// `tr ρ` from `vec(ρ)`.
pub fn vec_trace(v: &[C64], d: usize) -> C64 {
    (0..d).map(|i| v[i + d * i]).sum()
}
