//! Time evolution: Lindblad master equation, quantum-jump trajectories,
//! deterministic jump injection and the closed-form SNAP propagator.

pub mod ode;

use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{driven_subspace_projector, snap_operator, JumpLabel, JumpOp, SnapHamiltonian};
use crate::error::{Error, Result};
use crate::hilbert::{ancilla, c64, kron, CMat, CVec, DensityMatrix, Level, Op, StateVector, TensorSpace, C64};
use crate::rng;
use crate::units::Angle;

pub use ode::{integrate, Dopri5, OdeOptions};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Clone)]
pub enum Hamiltonian {
    Static(Op),
    TimeDependent { space: TensorSpace, f: Arc<dyn Fn(f64) -> CMat + Send + Sync> },
}

impl Hamiltonian {
    pub fn space(&self) -> TensorSpace {
        match self {
            Hamiltonian::Static(op) => op.space(),
            Hamiltonian::TimeDependent { space, .. } => *space,
        }
    }

    pub fn at(&self, t: f64) -> CMat {
        match self {
            Hamiltonian::Static(op) => op.matrix().clone(),
            Hamiltonian::TimeDependent { f, .. } => f(t),
        }
    }

    pub fn snap(h: SnapHamiltonian, space: TensorSpace) -> Self {
        Hamiltonian::TimeDependent { space, f: h.into_callable() }
    }
}

impl From<Op> for Hamiltonian {
    fn from(op: Op) -> Self {
        Hamiltonian::Static(op)
    }
}

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hamiltonian::Static(op) => write!(f, "Static({})", op.label()),
            Hamiltonian::TimeDependent { space, .. } => write!(f, "TimeDependent({space:?})"),
        }
    }
}

/// Evolution from `t_start` to `t_final` (absolute times, seconds).
#[derive(Clone, Debug)]
pub struct EvolutionSpec {
    pub hamiltonian: Hamiltonian,
    pub jumps: Vec<JumpOp>,
    pub t_start: f64,
    pub t_final: f64,
    pub tolerance: f64,
    pub max_step: Option<f64>,
}

impl EvolutionSpec {
    pub fn new(hamiltonian: impl Into<Hamiltonian>, jumps: Vec<JumpOp>, t_final: f64) -> Self {
        Self { hamiltonian: hamiltonian.into(), jumps, t_start: 0.0, t_final, tolerance: DEFAULT_TOLERANCE, max_step: None }
    }

    pub fn starting_at(mut self, t_start: f64) -> Self {
        self.t_start = t_start;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = Some(h);
        self
    }

    /// Step cap resolving the fastest comb tone: 1 / (50 f_max).
    pub fn resolving(mut self, h: &SnapHamiltonian) -> Self {
        let f = h.max_frequency_hz();
        if f > 0.0 {
            let cap = 1.0 / (50.0 * f);
            self.max_step = Some(self.max_step.map_or(cap, |m| m.min(cap)));
        }
        self
    }

    pub fn space(&self) -> TensorSpace {
        self.hamiltonian.space()
    }

    pub fn duration(&self) -> f64 {
        self.t_final - self.t_start
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || !(self.t_final >= self.t_start) || !self.t_final.is_finite() {
            return Err(Error::param("t_final", "must be finite, > 0 and ≥ t_start"));
        }
        if !(self.tolerance > 1e-12 && self.tolerance < 1e-4) {
            return Err(Error::param("tolerance", "must lie in (1e-12, 1e-4)"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::param("max_step", "must be > 0"));
            }
        }
        let space = self.space();
        for j in &self.jumps {
            space.ensure_same(&j.op.space())?;
        }
        Ok(())
    }

    fn options(&self) -> OdeOptions {
        let span = self.duration().max(f64::MIN_POSITIVE);
        let cap = self.max_step.unwrap_or(span / 10.0).min(span / 10.0);
        OdeOptions::new(self.tolerance, cap)
    }

    fn collapse(&self) -> (Vec<CMat>, CMat) {
        let n = self.space().dim();
        let mut g = CMat::zeros(n, n);
        let ls: Vec<CMat> = self
            .jumps
            .iter()
            .filter(|j| j.rate > 0.0)
            .map(|j| {
                let l = j.collapse_matrix();
                g += l.adjoint() * &l;
                l
            })
            .collect();
        (ls, g)
    }
}

/// ρ(t_final) for an arbitrary operator input (the map is linear).
pub fn evolve_lindblad_matrix(spec: &EvolutionSpec, rho0: &CMat) -> Result<CMat> {
    spec.validate()?;
    let (ls, g) = spec.collapse();
    let half_g = &g * c64(0.5, 0.0);
    let static_k = match &spec.hamiltonian {
        Hamiltonian::Static(h) => Some(h.matrix() * c64(0.0, -1.0) - &half_g),
        Hamiltonian::TimeDependent { .. } => None,
    };
    let rhs = |t: f64, rho: &CMat| -> CMat {
        let k = match &static_k {
            Some(k) => k.clone(),
            None => spec.hamiltonian.at(t) * c64(0.0, -1.0) - &half_g,
        };
        let kr = &k * rho;
        let mut out = kr + rho * k.adjoint();
        for l in &ls {
            out += l * rho * l.adjoint();
        }
        out
    };
    // the equation is linear: evolve at unit scale so that the absolute
    // tolerance means the same thing for small unnormalized branches
    let scale = rho0.trace().re.abs().max(crate::hilbert::max_abs(rho0));
    if scale == 0.0 {
        return Ok(rho0.clone());
    }
    let out = integrate(rhs, spec.t_start, spec.t_final, rho0 * c64(1.0 / scale, 0.0), spec.options())?;
    Ok(out * c64(scale, 0.0))
}

pub fn evolve_lindblad(spec: &EvolutionSpec, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    spec.space().ensure_same(&rho0.space())?;
    let m = evolve_lindblad_matrix(spec, rho0.matrix())?;
    DensityMatrix::from_matrix_unchecked(rho0.space(), m)
}

fn column(psi: &StateVector) -> CMat {
    let a = psi.amplitudes();
    CMat::from_column_slice(a.len(), 1, a.as_slice())
}

fn to_state(space: TensorSpace, y: &CMat) -> Result<StateVector> {
    StateVector::new(space, CVec::from_column_slice(y.as_slice()))
}

/// Closed-system evolution under the Hamiltonian alone.
pub fn evolve_schrodinger(spec: &EvolutionSpec, psi0: &StateVector) -> Result<StateVector> {
    spec.validate()?;
    let rhs = |t: f64, y: &CMat| spec.hamiltonian.at(t) * y * c64(0.0, -1.0);
    let y = integrate(rhs, spec.t_start, spec.t_final, column(psi0), spec.options())?;
    to_state(spec.space(), &y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub label: JumpLabel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub final_state: StateVector,
    pub jumps: Vec<JumpEvent>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    seed: u64,
    jumps: Vec<JumpEvent>,
    cavity_dim: usize,
    ancilla_dim: usize,
    amplitudes: Vec<[f64; 2]>,
}

impl TrajectoryRecord {
    pub fn to_json_line(&self) -> String {
        let s = self.final_state.space();
        let line = RecordLine {
            seed: self.seed,
            jumps: self.jumps.clone(),
            cavity_dim: s.cavity_dim(),
            ancilla_dim: s.ancilla_dim(),
            amplitudes: self.final_state.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
        };
        serde_json::to_string(&line).expect("record serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let r: RecordLine = serde_json::from_str(line).map_err(|e| Error::Config(e.to_string()))?;
        let space = TensorSpace::new(r.cavity_dim, r.ancilla_dim)?;
        let amps = CVec::from_iterator(r.amplitudes.len(), r.amplitudes.iter().map(|a| c64(a[0], a[1])));
        Ok(Self { final_state: StateVector::new(space, amps)?, jumps: r.jumps, seed: r.seed })
    }
}

fn norm_sqr(y: &CMat) -> f64 {
    y.iter().map(|z| z.norm_sqr()).sum()
}

/// Monte-Carlo wavefunction unraveling (waiting-time algorithm).
pub fn evolve_trajectory(spec: &EvolutionSpec, psi0: &StateVector, seed: u64) -> Result<TrajectoryRecord> {
    spec.validate()?;
    spec.space().ensure_same(&psi0.space())?;
    let (ls, g) = spec.collapse();
    let labels: Vec<JumpLabel> = spec.jumps.iter().filter(|j| j.rate > 0.0).map(|j| j.label).collect();
    let half_g = &g * c64(0.5, 0.0);
    let drift = |t: f64, y: &CMat| -> CMat { (spec.hamiltonian.at(t) * c64(0.0, -1.0) - &half_g) * y };
    let opts = spec.options();
    let time_tol = 1e-10 * spec.duration().max(f64::MIN_POSITIVE);

    let mut rng = rng::seeded(seed);
    let mut threshold: f64 = rng.random();
    let mut jumps = Vec::new();
    let mut solver = Dopri5::new(&drift, spec.t_start, column(psi0), opts);

    while solver.t() < spec.t_final {
        let (t_prev, y_prev) = (solver.t(), solver.y().clone());
        solver.step(spec.t_final)?;
        if ls.is_empty() || norm_sqr(solver.y()) > threshold {
            continue;
        }
        let (mut lo, mut hi, mut y_lo) = (t_prev, solver.t(), y_prev);
        while hi - lo > time_tol {
            let mid = 0.5 * (lo + hi);
            let y_mid = integrate(&drift, lo, mid, y_lo.clone(), opts)?;
            if norm_sqr(&y_mid) > threshold {
                lo = mid;
                y_lo = y_mid;
            } else {
                hi = mid;
            }
        }
        let candidates: Vec<CMat> = ls.iter().map(|l| l * &y_lo).collect();
        let weights: Vec<f64> = candidates.iter().map(norm_sqr).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NonPhysical("jump triggered with zero total jump rate".into()));
        }
        let mut pick = rng.random::<f64>() * total;
        let mut k = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                k = i;
                break;
            }
            pick -= w;
        }
        let mut y = candidates[k].clone();
        y *= c64(1.0 / weights[k].sqrt(), 0.0);
        jumps.push(JumpEvent { time: lo, label: labels[k] });
        threshold = rng.random();
        solver = Dopri5::new(&drift, lo, y, opts);
    }

    let mut y = solver.into_state();
    let n = norm_sqr(&y).sqrt();
    y *= c64(1.0 / n, 0.0);
    Ok(TrajectoryRecord { final_state: to_state(spec.space(), &y)?, jumps, seed })
}

/// Run `count` trajectories in parallel; stream `i` uses the seed derived
/// from (`root_seed`, i). Returns the averaged density matrix and the records
/// in index order.
pub fn trajectory_ensemble(
    spec: &EvolutionSpec,
    psi0: &StateVector,
    count: usize,
    root_seed: u64,
) -> Result<(DensityMatrix, Vec<TrajectoryRecord>)> {
    let records: Vec<TrajectoryRecord> = (0..count)
        .into_par_iter()
        .map(|i| evolve_trajectory(spec, psi0, rng::derive_seed(root_seed, i as u64)))
        .collect::<Result<_>>()?;
    let n = spec.space().dim();
    let mut acc = CMat::zeros(n, n);
    for r in &records {
        let a = r.final_state.amplitudes();
        acc += a * a.adjoint();
    }
    acc /= c64(count.max(1) as f64, 0.0);
    Ok((DensityMatrix::from_matrix_unchecked(spec.space(), acc)?, records))
}

/// Hamiltonian evolution interrupted by the listed jumps (label, absolute
/// time), renormalizing after each jump. The first jump operator carrying a
/// given label is used.
pub fn inject_jumps(spec: &EvolutionSpec, psi0: &StateVector, events: &[(JumpLabel, f64)]) -> Result<StateVector> {
    spec.validate()?;
    spec.space().ensure_same(&psi0.space())?;
    let mut events = events.to_vec();
    events.sort_by(|a, b| a.1.total_cmp(&b.1));
    let rhs = |t: f64, y: &CMat| spec.hamiltonian.at(t) * y * c64(0.0, -1.0);
    let opts = spec.options();
    let mut y = column(psi0);
    let mut t = spec.t_start;
    for (label, tj) in events {
        if !(tj >= spec.t_start && tj <= spec.t_final) {
            return Err(Error::param("t_jump", format!("{tj:e} outside [{:e}, {:e}]", spec.t_start, spec.t_final)));
        }
        y = integrate(rhs, t, tj, y, opts)?;
        let j = spec
            .jumps
            .iter()
            .find(|j| j.label == label)
            .ok_or_else(|| Error::param("jump_label", format!("no jump operator labelled {label}")))?;
        let after = j.op.matrix() * &y;
        let n = norm_sqr(&after).sqrt();
        if !(n > 1e-14) {
            return Err(Error::ZeroNorm(label.to_string()));
        }
        y = after * c64(1.0 / n, 0.0);
        t = tj;
    }
    let y = integrate(rhs, t, spec.t_final, y, opts)?;
    let mut out = to_state(spec.space(), &y)?;
    out.normalize()?;
    Ok(out)
}

pub fn inject_jump(spec: &EvolutionSpec, psi0: &StateVector, label: JumpLabel, t_jump: f64) -> Result<StateVector> {
    inject_jumps(spec, psi0, &[(label, t_jump)])
}

/// (I−P) + cos(area) P − i sin(area) (S(θ⃗)⊗|f⟩⟨g| + S(−θ⃗)⊗|g⟩⟨f|).
pub fn analytic_propagator(space: TensorSpace, theta_phases: &[(usize, Angle)], area: f64) -> Result<Op> {
    for &(k, _) in theta_phases {
        if k % 2 == 1 || k > 4 || k >= space.cavity_dim() {
            return Err(Error::param("theta_phases", format!("photon number {k} not in {{0, 2, 4}}")));
        }
    }
    let p = driven_subspace_projector(space, theta_phases)?;
    let n = space.dim();
    let dc = space.cavity_dim();
    let da = space.ancilla_dim();
    let up = kron(&snap_operator(dc, theta_phases, 1.0), &ancilla::transition(da, Level::G, Level::F));
    let flip = &up + up.adjoint();
    let m = CMat::identity(n, n) - p.matrix() + p.matrix() * c64(area.cos(), 0.0) + flip * C64::new(0.0, -area.sin());
    Op::new(space, m, "U_snap")
}
