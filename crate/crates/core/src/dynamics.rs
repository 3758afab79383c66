//! Time integration and steady states for [`MasterEquation`] generators.

use serde::Serialize;

use crate::adiabatic::DressedBasis;
use crate::error::{Error, Result};
use crate::hilbert::{hermitian_eigenvalues, CMatrix, C64};
use crate::lindblad::MasterEquation;
use crate::superop::{unvectorize, vec_trace, vectorize, Liouvillian};

pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;
pub const POSITIVITY_LIMIT: f64 = -1e-7;
pub const NULLSPACE_RESIDUAL: f64 = 1e-10;
pub const LONGTIME_RESIDUAL: f64 = 1e-7;
const PIVOT_RATIO: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct Observable {
    pub name: String,
    pub op: CMatrix,
    entries: Vec<(usize, usize, C64)>,
}

impl Observable {
    pub fn new(name: impl Into<String>, op: CMatrix) -> Self {
        let mut entries = Vec::new();
        for j in 0..op.ncols() {
            for i in 0..op.nrows() {
                let z = op[(i, j)];
                if z != C64::new(0.0, 0.0) {
                    entries.push((i, j, z));
                }
            }
        }
        Self { name: name.into(), op, entries }
    }

    /// `tr(O ρ)` straight from `vec(ρ)`.
    pub fn eval_vec(&self, v: &[C64], d: usize) -> C64 {
        self.entries.iter().map(|&(i, k, z)| z * v[k + d * i]).sum()
    }
}

/// `N⁻`, `N⁺`, `N` and the sector populations, for generators in dressed coordinates.
pub fn dressed_observables(b: &DressedBasis) -> Vec<Observable> {
    let d = b.dressed_dim();
    let nl = b.n_levels;
    let diag = |f: &dyn Fn(usize) -> f64| {
        let mut m = CMatrix::zeros(d, d);
        for k in 0..d {
            m[(k, k)] = C64::new(f(k), 0.0);
        }
        m
    };
    vec![
        Observable::new("n_minus", diag(&|k| if k >= nl { (k - nl) as f64 } else { 0.0 })),
        Observable::new("n_plus", diag(&|k| if k < nl { k as f64 } else { 0.0 })),
        Observable::new("n_total", diag(&|k| (k % nl) as f64)),
        Observable::new("pop_plus", diag(&|k| if k < nl { 1.0 } else { 0.0 })),
        Observable::new("pop_minus", diag(&|k| if k >= nl { 1.0 } else { 0.0 })),
    ]
}

#[derive(Debug, Clone)]
pub struct Controls {
    pub dt: f64,
    /// Absolute per-step tolerance of the step-doubling estimate.
    pub tol: f64,
    pub min_dt: f64,
    /// Steps between step-doubling checks.
    pub check_stride: usize,
    /// Steps between stored samples.
    pub store_stride: usize,
    pub store_states: bool,
    pub observables: Vec<Observable>,
}

impl Controls {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            tol: 1e-10,
            min_dt: dt * 1e-6,
            check_stride: 16,
            store_stride: 1,
            store_states: false,
            observables: Vec::new(),
        }
    }

    pub fn with_observables(mut self, obs: Vec<Observable>) -> Self {
        self.observables = obs;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.tol > 0.0) || !(self.min_dt > 0.0) {
            return Err(Error::InvalidParameter("dt, tol and min_dt must be positive".into()));
        }
        if self.check_stride == 0 || self.store_stride == 0 {
            return Err(Error::InvalidParameter("strides must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub observables: Vec<Series>,
    pub states: Vec<CMatrix>,
    pub final_state: CMatrix,
    pub trace_drift: f64,
    pub min_eigenvalue: f64,
    /// Largest imaginary part seen in any observable.
    pub imaginary_defect: f64,
    pub steps: usize,
    pub final_dt: f64,
}

impl Trajectory {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.observables.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }
}

struct Stepper<'a> {
    l: &'a Liouvillian,
    hermitian: bool,
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
    full: Vec<C64>,
    half: Vec<C64>,
}

impl<'a> Stepper<'a> {
    fn new(l: &'a Liouvillian, hermitian: bool) -> Self {
        let n = l.vec_dim();
        let z = vec![C64::new(0.0, 0.0); n];
        Self { l, hermitian, k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z.clone(), full: z.clone(), half: z }
    }

    fn rk4(&mut self, t: f64, y: &[C64], h: f64, out: &mut [C64]) {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        let (l, herm) = (self.l, self.hermitian);
        let apply = |t: f64, x: &[C64], y: &mut [C64]| {
            if herm {
                l.apply_hermitian(t, x, y)
            } else {
                l.apply(t, x, y)
            }
        };
        apply(t, y, k1);
        for i in 0..y.len() {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        apply(t + 0.5 * h, tmp, k2);
        for i in 0..y.len() {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        apply(t + 0.5 * h, tmp, k3);
        for i in 0..y.len() {
            tmp[i] = y[i] + k3[i] * h;
        }
        apply(t + h, tmp, k4);
        let c = h / 6.0;
        for i in 0..y.len() {
            out[i] = y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * c;
        }
    }

    /// One step of at most `dt`, halving `dt` until the doubling estimate
    /// passes when `check` is set. Returns the step taken.
    fn step(&mut self, t: f64, y: &mut Vec<C64>, dt: &mut f64, h_max: f64, check: bool, c: &Controls) -> Result<f64> {
        loop {
            let h = dt.min(h_max);
            if !check {
                let mut out = std::mem::take(&mut self.full);
                self.rk4(t, y, h, &mut out);
                std::mem::swap(y, &mut out);
                self.full = out;
                return Ok(h);
            }
            let mut full = std::mem::take(&mut self.full);
            let mut half = std::mem::take(&mut self.half);
            self.rk4(t, y, h, &mut full);
            self.rk4(t, y, 0.5 * h, &mut half);
            let mid = half.clone();
            self.rk4(t + 0.5 * h, &mid, 0.5 * h, &mut half);
            let err = full.iter().zip(&half).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / 15.0;
            self.full = full;
            if err.is_finite() && err <= c.tol {
                std::mem::swap(y, &mut half);
                self.half = half;
                return Ok(h);
            }
            self.half = half;
            *dt *= 0.5;
            if *dt < c.min_dt {
                return Err(Error::StepUnderflow { t, dt: *dt });
            }
        }
    }
}

/// Integrates `y` from `t0` to `t1`, calling `each(t, h, y)` after every step.
fn advance(
    st: &mut Stepper,
    y: &mut Vec<C64>,
    t0: f64,
    t1: f64,
    dt: &mut f64,
    c: &Controls,
    steps: &mut usize,
    mut each: impl FnMut(f64, f64, &[C64]) -> Result<()>,
) -> Result<()> {
    let d = st.l.d;
    let tr0 = vec_trace(y, d);
    let mut t = t0;
    let eps = 1e-12 * t1.abs().max(1.0);
    while t1 - t > eps {
        let check = *steps % c.check_stride == 0;
        let h = st.step(t, y, dt, t1 - t, check, c)?;
        t = if t1 - t - h <= eps { t1 } else { t + h };
        *steps += 1;
        if check {
            let drift = (vec_trace(y, d) - tr0).norm();
            if !(drift < TRACE_DRIFT_LIMIT) {
                return Err(Error::InvariantBreach { t, what: format!("trace drift {drift:.3e}") });
            }
        }
        each(t, h, y)?;
    }
    Ok(())
}

fn min_eig(rho: &CMatrix) -> f64 {
    let h = (rho + rho.adjoint()).scale(0.5);
    hermitian_eigenvalues(&h).into_iter().fold(f64::INFINITY, f64::min)
}

const HERMITIAN_INPUT: f64 = 1e-12;

/// Validates the shape; a state Hermitian to within `1e-12` is Hermitized so
/// the integrator can use the Hermitian fast path.
fn prepare_state(me_dim: usize, rho0: &CMatrix) -> Result<(CMatrix, bool)> {
    if rho0.shape() != (me_dim, me_dim) {
        return Err(Error::DimensionMismatch { expected: me_dim, found: rho0.nrows() });
    }
    if crate::hilbert::hermiticity_defect(rho0) <= HERMITIAN_INPUT {
        Ok(((rho0 + rho0.adjoint()).scale(0.5), true))
    } else {
        Ok((rho0.clone(), false))
    }
}

pub fn evolve(me: &MasterEquation, rho0: &CMatrix, t_end: f64, controls: &Controls) -> Result<Trajectory> {
    evolve_with(&Liouvillian::from_master(me), rho0, 0.0, t_end, controls)
}

/// Fixed-step RK4 with step halving; no renormalization, tones evaluated at stage times.
pub fn evolve_with(l: &Liouvillian, rho0: &CMatrix, t0: f64, t_end: f64, controls: &Controls) -> Result<Trajectory> {
    controls.validate()?;
    let (rho0, herm) = prepare_state(l.d, rho0)?;
    let rho0 = &rho0;
    if !(t_end >= t0) {
        return Err(Error::InvalidParameter("t_end precedes t0".into()));
    }
    let d = l.d;
    let mut traj = Trajectory {
        times: Vec::new(),
        observables: controls.observables.iter().map(|o| Series { name: o.name.clone(), values: Vec::new() }).collect(),
        states: Vec::new(),
        final_state: rho0.clone(),
        trace_drift: 0.0,
        min_eigenvalue: f64::INFINITY,
        imaginary_defect: 0.0,
        steps: 0,
        final_dt: controls.dt,
    };
    let record = |traj: &mut Trajectory, t: f64, y: &[C64]| -> Result<()> {
        traj.times.push(t);
        for (s, o) in traj.observables.iter_mut().zip(&controls.observables) {
            let v = o.eval_vec(y, d);
            traj.imaginary_defect = traj.imaginary_defect.max(v.im.abs());
            s.values.push(v.re);
        }
        if controls.store_states {
            let rho = unvectorize(y, d);
            let m = min_eig(&rho);
            traj.min_eigenvalue = traj.min_eigenvalue.min(m);
            if m < POSITIVITY_LIMIT {
                return Err(Error::InvariantBreach { t, what: format!("stored state eigenvalue {m:.3e}") });
            }
            traj.states.push(rho);
        }
        Ok(())
    };
    let mut y = vectorize(rho0);
    let tr0 = vec_trace(&y, d);
    record(&mut traj, t0, &y)?;
    let mut st = Stepper::new(l, herm);
    let mut dt = controls.dt;
    let mut steps = 0;
    let mut since = 0usize;
    advance(&mut st, &mut y, t0, t_end, &mut dt, controls, &mut steps, |t, _, y| {
        since += 1;
        if since == controls.store_stride || (t_end - t).abs() <= 1e-12 * t_end.abs().max(1.0) {
            since = 0;
            record(&mut traj, t, y)?;
        }
        Ok(())
    })?;
    traj.trace_drift = (vec_trace(&y, d) - tr0).norm();
    traj.final_state = unvectorize(&y, d);
    let m = min_eig(&traj.final_state);
    traj.min_eigenvalue = traj.min_eigenvalue.min(m);
    if m < POSITIVITY_LIMIT {
        return Err(Error::InvariantBreach { t: t_end, what: format!("final state eigenvalue {m:.3e}") });
    }
    traj.steps = steps;
    traj.final_dt = dt;
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    Nullspace,
    Longtime,
    Timeaveraged,
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: CMatrix,
    /// `‖L[ρ]‖_max` of the static generator.
    pub residual: f64,
    pub method: SteadyMethod,
    /// Most negative eigenvalue before clipping.
    pub min_raw_eigenvalue: f64,
    /// Total negative weight removed by clipping.
    pub clipped_weight: f64,
}

#[derive(Debug, Clone)]
pub enum SteadySolution {
    Unique(SteadyState),
    /// Null space of dimension > 1; raw basis matrices, not normalized states.
    Degenerate { basis: Vec<CMatrix>, singular_values: Vec<f64> },
}

impl SteadySolution {
    pub fn unique(self) -> Result<SteadyState> {
        match self {
            SteadySolution::Unique(s) => Ok(s),
            SteadySolution::Degenerate { basis, .. } => {
                Err(Error::Degenerate(format!("steady-state null space has dimension {}", basis.len())))
            }
        }
    }
}

/// Hermitize, clip negative eigenvalues, renormalize.
fn readout(rho: &CMatrix) -> (CMatrix, f64, f64) {
    let h = (rho + rho.adjoint()).scale(0.5);
    let eig = h.clone().symmetric_eigen();
    let min_raw = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let clipped: f64 = eig.eigenvalues.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    if clipped == 0.0 {
        let tr = crate::hilbert::trace(&h).re;
        return (h.unscale(tr), min_raw, 0.0);
    }
    let vals = eig.eigenvalues.map(|v| C64::new(v.max(0.0), 0.0));
    let out = &eig.eigenvectors * CMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint();
    let out = (&out + out.adjoint()).scale(0.5);
    let tr = crate::hilbert::trace(&out).re;
    (out.unscale(tr), min_raw, clipped)
}

fn residual(l: &Liouvillian, rho: &CMatrix) -> f64 {
    let x = vectorize(rho);
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    crate::superop::spmv_static(l, &x, &mut y);
    y.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn finish(l: &Liouvillian, raw: &CMatrix, method: SteadyMethod) -> SteadyState {
    let (rho, min_raw, clipped) = readout(raw);
    let residual = residual(l, &rho);
    SteadyState { rho, residual, method, min_raw_eigenvalue: min_raw, clipped_weight: clipped }
}

/// Solves `L vec(ρ) = 0` with `tr ρ = 1` replacing the first row, by dense LU.
/// A vanishing pivot triggers an SVD; a null space of dimension > 1 is
/// returned as [`SteadySolution::Degenerate`].
pub fn steady_state_nullspace(me: &MasterEquation) -> Result<SteadySolution> {
    if me.is_time_dependent() {
        return Err(Error::InvalidParameter("nullspace solve needs a time-independent generator".into()));
    }
    let l = Liouvillian::from_master(me);
    let d = l.d;
    let dense = l.dense_static()?;
    let mut a = dense.clone();
    let n = d * d;
    for j in 0..n {
        a[(0, j)] = C64::new(0.0, 0.0);
    }
    for i in 0..d {
        a[(0, i + d * i)] = C64::new(1.0, 0.0);
    }
    let lu = a.lu();
    let u = lu.u();
    let piv: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let pmax = piv.iter().cloned().fold(0.0, f64::max);
    let pmin = piv.iter().cloned().fold(f64::INFINITY, f64::min);
    if pmin > PIVOT_RATIO * pmax {
        let mut rhs = crate::hilbert::CVector::zeros(n);
        rhs[0] = C64::new(1.0, 0.0);
        if let Some(x) = lu.solve(&rhs) {
            let s = finish(&l, &unvectorize(x.as_slice(), d), SteadyMethod::Nullspace);
            return check_nullspace(s);
        }
    }
    let svd = dense.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Singular("SVD failed".into()))?;
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let null: Vec<usize> = (0..n).filter(|&k| svd.singular_values[k] <= PIVOT_RATIO * smax.max(1.0) * 1e3).collect();
    let basis: Vec<CMatrix> = null
        .iter()
        .map(|&k| {
            let row: Vec<C64> = v_t.row(k).iter().map(|z| z.conj()).collect();
            unvectorize(&row, d)
        })
        .collect();
    match basis.len() {
        0 => Err(Error::Singular("no null vector found".into())),
        1 => {
            let b = &basis[0];
            let tr = crate::hilbert::trace(b);
            if tr.norm() < 1e-12 {
                return Err(Error::Singular("null vector is traceless".into()));
            }
            check_nullspace(finish(&l, &b.map(|z| z / tr), SteadyMethod::Nullspace))
        }
        _ => Ok(SteadySolution::Degenerate {
            singular_values: null.iter().map(|&k| svd.singular_values[k]).collect(),
            basis,
        }),
    }
}

fn check_nullspace(s: SteadyState) -> Result<SteadySolution> {
    if s.residual > NULLSPACE_RESIDUAL {
        return Err(Error::InvariantBreach { t: f64::INFINITY, what: format!("nullspace residual {:.3e}", s.residual) });
    }
    Ok(SteadySolution::Unique(s))
}

/// Integrates in chunks of `1/slowest rate` until `‖L[ρ]‖_max < residual_tol`.
pub fn steady_state_longtime(
    me: &MasterEquation,
    rho0: &CMatrix,
    controls: &Controls,
    residual_tol: f64,
    t_max: f64,
) -> Result<SteadyState> {
    if me.is_time_dependent() {
        return Err(Error::InvalidParameter("long-time solve needs a time-independent generator".into()));
    }
    controls.validate()?;
    let (rho0, herm) = prepare_state(me.dim(), rho0)?;
    let rho0 = &rho0;
    let l = Liouvillian::from_master(me);
    let chunk = me.slowest_rate().map(|r| 1.0 / r).unwrap_or(100.0).clamp(10.0 * controls.dt, 2000.0 * controls.dt);
    let mut st = Stepper::new(&l, herm);
    let mut y = vectorize(rho0);
    let mut dt = controls.dt;
    let mut steps = 0;
    let mut t = 0.0;
    loop {
        let t1 = (t + chunk).min(t_max);
        advance(&mut st, &mut y, t, t1, &mut dt, controls, &mut steps, |_, _, _| Ok(()))?;
        t = t1;
        let rho = unvectorize(&y, l.d);
        let r = residual(&l, &rho);
        if r < residual_tol {
            let mut s = finish(&l, &rho, SteadyMethod::Longtime);
            s.residual = s.residual.max(r);
            return Ok(s);
        }
        if t >= t_max {
            return Err(Error::InvariantBreach { t, what: format!("long-time residual {r:.3e} above {residual_tol:.1e}") });
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Window {
    pub t_start: f64,
    pub length: f64,
    /// Frequency whose period sets the minimum window length.
    pub reference_frequency: f64,
}

impl Window {
    pub const MIN_PERIODS: f64 = 20.0;
    pub const MIN_RELAXATION_TIMES: f64 = 10.0;

    /// The shortest admissible window.
    pub fn minimal(slowest_rate: f64, reference_frequency: f64) -> Self {
        Self {
            t_start: Self::MIN_RELAXATION_TIMES / slowest_rate,
            length: Self::MIN_PERIODS * std::f64::consts::TAU / reference_frequency,
            reference_frequency,
        }
    }

    pub fn validate(&self, slowest_rate: Option<f64>) -> Result<()> {
        if !(self.reference_frequency > 0.0) {
            return Err(Error::Window("reference frequency must be positive".into()));
        }
        let need = Self::MIN_PERIODS * std::f64::consts::TAU / self.reference_frequency;
        if !(self.length >= need * (1.0 - 1e-12)) {
            return Err(Error::Window(format!("length {:.4e} shorter than {need:.4e}", self.length)));
        }
        if let Some(r) = slowest_rate {
            let need = Self::MIN_RELAXATION_TIMES / r;
            if !(self.t_start >= need * (1.0 - 1e-12)) {
                return Err(Error::Window(format!("t_start {:.4e} shorter than {need:.4e}", self.t_start)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TimeAveraged {
    pub steady: SteadyState,
    pub averages: Vec<(String, f64)>,
    pub peak_to_peak: Vec<(String, f64)>,
    pub steps: usize,
    pub trace_drift: f64,
}

impl TimeAveraged {
    pub fn average(&self, name: &str) -> Option<f64> {
        self.averages.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn peak_to_peak(&self, name: &str) -> Option<f64> {
        self.peak_to_peak.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }
}

pub fn steady_state_timeaveraged(
    me: &MasterEquation,
    rho0: &CMatrix,
    window: &Window,
    controls: &Controls,
) -> Result<TimeAveraged> {
    window.validate(me.slowest_rate())?;
    timeaveraged_with(&Liouvillian::from_master(me), rho0, window, controls)
}

/// Trapezoid average of `ρ(t)` over `[t_start, t_start + length]`; the
/// residual reported is that of the static part of the generator.
pub fn timeaveraged_with(l: &Liouvillian, rho0: &CMatrix, window: &Window, controls: &Controls) -> Result<TimeAveraged> {
    controls.validate()?;
    let (rho0, herm) = prepare_state(l.d, rho0)?;
    let rho0 = &rho0;
    let d = l.d;
    let mut st = Stepper::new(l, herm);
    let mut y = vectorize(rho0);
    let tr0 = vec_trace(&y, d);
    let mut dt = controls.dt;
    let mut steps = 0;
    advance(&mut st, &mut y, 0.0, window.t_start, &mut dt, controls, &mut steps, |_, _, _| Ok(()))?;
    let n = y.len();
    let mut acc = vec![C64::new(0.0, 0.0); n];
    let mut prev = y.clone();
    let obs = &controls.observables;
    let mut lo: Vec<f64> = obs.iter().map(|o| o.eval_vec(&y, d).re).collect();
    let mut hi = lo.clone();
    advance(&mut st, &mut y, window.t_start, window.t_start + window.length, &mut dt, controls, &mut steps, |_, h, y| {
        let w = 0.5 * h;
        for i in 0..n {
            acc[i] += (prev[i] + y[i]) * w;
        }
        prev.copy_from_slice(y);
        for (k, o) in obs.iter().enumerate() {
            let v = o.eval_vec(y, d).re;
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
        Ok(())
    })?;
    let mean: Vec<C64> = acc.iter().map(|z| z / window.length).collect();
    let rho_bar = unvectorize(&mean, d);
    let steady = finish(l, &rho_bar, SteadyMethod::Timeaveraged);
    let mv = vectorize(&rho_bar);
    Ok(TimeAveraged {
        averages: obs.iter().map(|o| (o.name.clone(), o.eval_vec(&mv, d).re)).collect(),
        peak_to_peak: obs.iter().enumerate().map(|(k, o)| (o.name.clone(), hi[k] - lo[k])).collect(),
        steady,
        steps,
        trace_drift: (vec_trace(&y, d) - tr0).norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DressedRecord {
    pub n_minus: f64,
    pub n_plus: f64,
    pub n_total: f64,
    pub sector_plus: f64,
    pub sector_minus: f64,
    /// Weight outside the retained dressed states (zero for dressed-coordinate states).
    pub leakage: f64,
    /// Population of the highest retained level in either ladder.
    pub edge_population: f64,
}

/// Dressed-ladder observables of `rho`, given in dressed coordinates or on the full space.
pub fn observables(rho: &CMatrix, b: &DressedBasis) -> Result<DressedRecord> {
    let dd = b.dressed_dim();
    let (r, leakage) = if rho.nrows() == dd && rho.ncols() == dd {
        (rho.clone(), 0.0)
    } else if rho.nrows() == b.dims.total_dim() && rho.ncols() == rho.nrows() {
        let v = b.isometry();
        (v.adjoint() * rho * &v, b.leakage(rho))
    } else {
        return Err(Error::DimensionMismatch { expected: dd, found: rho.nrows() });
    };
    let nl = b.n_levels;
    let p = |k: usize| r[(k, k)].re;
    let mut rec = DressedRecord {
        n_minus: 0.0,
        n_plus: 0.0,
        n_total: 0.0,
        sector_plus: 0.0,
        sector_minus: 0.0,
        leakage,
        edge_population: p(nl - 1) + p(2 * nl - 1),
    };
    for n in 0..nl {
        rec.n_plus += n as f64 * p(n);
        rec.n_minus += n as f64 * p(nl + n);
        rec.sector_plus += p(n);
        rec.sector_minus += p(nl + n);
    }
    rec.n_total = rec.n_plus + rec.n_minus;
    Ok(rec)
}
