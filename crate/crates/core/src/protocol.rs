//! Gate protocol: SNAP, g↔f swap, ancilla measurement, reset and conditional
//! repeat, with the outcome-dependent cavity frame update applied in
//! software.
//!
//! Everything runs in the lab frame of the dispersive Hamiltonian. The cavity
//! picks up e^{−iχ_l t a†a} while the ancilla sits in level l, so each
//! recorded outcome has a known nominal history and a known rotation to undo:
//!
//! * g: f during the SNAP and the first half of the swap,
//! * e: relaxed during the SNAP (χ_f while the transparency drive is on), then
//!   e through swap and measurement,
//! * f: ancilla left in g by the SNAP, f from mid-swap through measurement.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::codes::LogicalBasis;
use crate::device::{
    build_error_transparency_shift, build_h0, build_h0_matched, build_jump_ops, snap_hamiltonian_with_h0,
    DeviceParams, DriveModel, DriveParams, EnvelopeShape, EtShift, JumpOp, PulseEnvelope,
};
use crate::dynamics::{evolve_lindblad_matrix, EvolutionSpec, Hamiltonian};
use crate::error::{Error, Result};
use crate::hilbert::{ancilla, annihilation, c64, kron, CMat, CVec, DensityMatrix, Level, Op, TensorSpace};
use crate::rng;
use crate::units::{AngularFrequency, Angle, Seconds};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// SNAP and swap only.
    Nc,
    /// SNAP with transparency drive, swap, measurement, reset and repeat.
    C,
}

/// How the NC variant treats an ancilla left outside |g⟩ at the end of the
/// gate. Nothing resets it, so the cavity keeps rotating at an unknown
/// dispersive rate until the ancilla decays: `Dephase` (default) removes all
/// Fock-basis coherence of that part. `Trace` keeps the cavity as it is at
/// the end of the swap; `Depolarize` counts the run as lost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NcExcitedPolicy {
    #[default]
    Dephase,
    Trace,
    Depolarize,
}

fn default_swap() -> Seconds {
    Seconds::ns(100.0)
}

fn default_measurement() -> Seconds {
    Seconds::us(1.0)
}

fn identity3() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn default_repeats() -> usize {
    5
}

fn default_repeat_on() -> Vec<Level> {
    vec![Level::F]
}

fn default_true() -> bool {
    true
}

fn default_envelope() -> EnvelopeShape {
    EnvelopeShape::Gaussian
}

/// Tighter than the single-evolution default: tomography stacks several
/// segments and checks positivity at −1e−7.
pub const PROTOCOL_TOLERANCE: f64 = 1e-9;

fn default_tolerance() -> f64 {
    PROTOCOL_TOLERANCE
}

fn default_g() -> AngularFrequency {
    AngularFrequency::from_mhz(3.0)
}

fn default_delta() -> AngularFrequency {
    AngularFrequency::from_mhz(10.0)
}

fn default_raman() -> AngularFrequency {
    AngularFrequency::from_mhz(45.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub variant: Variant,
    pub theta: Angle,
    #[serde(default = "default_true")]
    pub et_drive_on: bool,
    pub snap_duration: Seconds,
    #[serde(default = "default_swap")]
    pub swap_duration: Seconds,
    #[serde(default = "default_measurement")]
    pub measurement_duration: Seconds,
    /// Confusion matrix, row = true level (g, e, f), column = recorded level.
    #[serde(default = "identity3")]
    pub measurement_fidelity: [[f64; 3]; 3],
    #[serde(default = "default_repeats")]
    pub max_repeats: usize,
    #[serde(default = "default_repeat_on")]
    pub repeat_on: Vec<Level>,
    #[serde(default = "default_envelope")]
    pub envelope: EnvelopeShape,
    #[serde(default)]
    pub drive_model: DriveModel,
    #[serde(default = "default_g")]
    pub sideband_g: AngularFrequency,
    #[serde(default = "default_delta")]
    pub sideband_delta: AngularFrequency,
    #[serde(default = "default_raman")]
    pub detuning_delta_raman: AngularFrequency,
    #[serde(default)]
    pub nc_excited: NcExcitedPolicy,
    /// Probability per readout that the cavity is fully dephased in the Fock
    /// basis (readout-photon cross-Kerr), applied after every measurement.
    #[serde(default)]
    pub readout_dephasing: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl ProtocolConfig {
    pub fn new(variant: Variant, theta: f64, snap_duration: Seconds) -> Self {
        Self {
            variant,
            theta: Angle(theta),
            et_drive_on: variant == Variant::C,
            snap_duration,
            swap_duration: default_swap(),
            measurement_duration: default_measurement(),
            measurement_fidelity: identity3(),
            max_repeats: default_repeats(),
            repeat_on: default_repeat_on(),
            envelope: default_envelope(),
            drive_model: DriveModel::Effective,
            sideband_g: default_g(),
            sideband_delta: default_delta(),
            detuning_delta_raman: default_raman(),
            nc_excited: NcExcitedPolicy::Dephase,
            readout_dephasing: 0.0,
            tolerance: PROTOCOL_TOLERANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("snap_duration", self.snap_duration),
            ("swap_duration", self.swap_duration),
            ("measurement_duration", self.measurement_duration),
        ] {
            if !(t.0 > 0.0) || !t.0.is_finite() {
                return Err(Error::param(name, "must be finite and > 0"));
            }
        }
        for (i, row) in self.measurement_fidelity.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::param("measurement_fidelity", format!("row {i} is not a probability vector")));
            }
        }
        if !(0.0..=1.0).contains(&self.readout_dephasing) {
            return Err(Error::param("readout_dephasing", "must be a probability"));
        }
        if self.repeat_on.iter().any(|l| l.index() > 2) {
            return Err(Error::param("repeat_on", "levels must be g, e or f"));
        }
        Ok(())
    }

    pub fn envelope(&self) -> PulseEnvelope {
        match self.envelope {
            EnvelopeShape::Constant => PulseEnvelope::constant(self.snap_duration),
            EnvelopeShape::Gaussian => PulseEnvelope::gaussian(self.snap_duration),
        }
    }

    /// Drive for a logical S(θ): phases {0: 0, 2: θ, 4: 0}, area π/2.
    pub fn drive(&self) -> DriveParams {
        let mut d = DriveParams::snap(self.theta.0, self.envelope());
        d.sideband_g = self.sideband_g;
        d.sideband_delta = self.sideband_delta;
        d.detuning_delta_raman = self.detuning_delta_raman;
        d
    }

    fn transparency(&self) -> bool {
        self.variant == Variant::C && self.et_drive_on
    }
}

/// Deterministic jump forced during the first SNAP (time measured from the
/// start of the pulse).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub kind: InjectedJump,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectedJump {
    /// |f⟩⟨f| projection (g–f dephasing).
    Dephasing,
    /// |e⟩⟨f|.
    RelaxEf,
    /// |g⟩⟨e|.
    RelaxGe,
    /// a.
    CavityLoss,
}

impl InjectedJump {
    fn matrix(self, space: TensorSpace) -> CMat {
        let dc = space.cavity_dim();
        let da = space.ancilla_dim();
        let anc = |from, to| kron(&CMat::identity(dc, dc), &ancilla::transition(da, from, to));
        match self {
            InjectedJump::Dephasing => anc(Level::F, Level::F),
            InjectedJump::RelaxEf => anc(Level::F, Level::E),
            InjectedJump::RelaxGe => anc(Level::E, Level::G),
            InjectedJump::CavityLoss => annihilation(space).into_matrix(),
        }
    }
}

const MEASURED: [Level; 3] = [Level::G, Level::E, Level::F];

/// One single-attempt branch: recorded outcome, its probability and the
/// renormalized, frame-corrected cavity state after reset.
#[derive(Clone, Debug)]
pub struct Branch {
    pub level: Level,
    pub probability: f64,
    pub cavity_rho: CMat,
}

#[derive(Clone, Debug)]
pub struct GateOutcome {
    pub measured_levels: Vec<Level>,
    pub repeats_used: usize,
    /// Total software rotation angle per photon applied over all attempts.
    pub phase_correction: f64,
    /// Joint state at the end: cavity ⊗ |g⟩ after reset (C), or the state
    /// after the swap with the frame update applied (NC).
    pub final_rho: DensityMatrix,
    pub success: bool,
}

impl GateOutcome {
    pub fn cavity_rho(&self) -> CMat {
        self.final_rho.cavity_reduced()
    }
}

/// Precomputed operators for repeated protocol runs on one space.
pub struct GateSimulator {
    config: ProtocolConfig,
    params: DeviceParams,
    space: TensorSpace,
    drive: DriveParams,
    snap_h: Hamiltonian,
    snap_max_step: Option<f64>,
    snap_jumps: Vec<JumpOp>,
    swap_jumps: Vec<JumpOp>,
    meas_jumps: Vec<JumpOp>,
    h0: Op,
    swap_u: CMat,
    et: Option<EtShift>,
}

fn native(params: &DeviceParams) -> DeviceParams {
    DeviceParams {
        injected_dephasing_rate: Default::default(),
        injected_ef_noise_rate: Default::default(),
        ..params.clone()
    }
}

/// Ideal g↔f exchange on the ancilla, identity on the cavity and on |e⟩, |h⟩.
pub fn gf_swap(space: TensorSpace) -> Result<Op> {
    space.check_level(Level::F)?;
    let da = space.ancilla_dim();
    let mut anc = CMat::identity(da, da);
    anc[(0, 0)] = c64(0.0, 0.0);
    anc[(2, 2)] = c64(0.0, 0.0);
    anc[(0, 2)] = c64(1.0, 0.0);
    anc[(2, 0)] = c64(1.0, 0.0);
    let dc = space.cavity_dim();
    Op::new(space, kron(&CMat::identity(dc, dc), &anc), "swap_gf")
}

impl GateSimulator {
    pub fn new(config: &ProtocolConfig, params: &DeviceParams, space: TensorSpace) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        if space.ancilla_dim() < 3 {
            return Err(Error::InvalidSpace("protocol needs ancilla_dim ≥ 3".into()));
        }
        let drive = config.drive();
        drive.validate(space.cavity_dim())?;
        let et = if config.transparency() {
            Some(build_error_transparency_shift(config.sideband_g.0, config.sideband_delta.0)?.value)
        } else {
            None
        };
        let h_snap0 = if et.is_some() { build_h0_matched(params, space)? } else { build_h0(params, space)? };
        let snap = snap_hamiltonian_with_h0(h_snap0, params, &drive, space, config.drive_model)?;
        let snap_max_step = match config.drive_model {
            DriveModel::FullComb => Some(1.0 / (50.0 * snap.max_frequency_hz().max(1.0 / config.snap_duration.0))),
            DriveModel::Effective => None,
        };
        let snap_h = Hamiltonian::snap(snap, space);
        let snap_jumps = build_jump_ops(params, space, et.as_ref())?;
        let swap_jumps = build_jump_ops(params, space, None)?;
        let meas_jumps = build_jump_ops(&native(params), space, None)?;
        Ok(Self {
            config: config.clone(),
            params: params.clone(),
            space,
            drive,
            snap_h,
            snap_max_step,
            snap_jumps,
            swap_jumps,
            meas_jumps,
            h0: build_h0(params, space)?,
            swap_u: gf_swap(space)?.into_matrix(),
            et,
        })
    }

    pub fn space(&self) -> TensorSpace {
        self.space
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn drive(&self) -> &DriveParams {
        &self.drive
    }

    pub fn et_shift(&self) -> Option<EtShift> {
        self.et
    }

    fn t_snap(&self) -> f64 {
        self.config.snap_duration.0
    }

    fn t_swap(&self) -> f64 {
        self.config.swap_duration.0
    }

    fn t_meas(&self) -> f64 {
        self.config.measurement_duration.0
    }

    fn snap_spec(&self, t0: f64, t1: f64) -> EvolutionSpec {
        EvolutionSpec { max_step: self.snap_max_step, ..self.spec(self.snap_h.clone(), &self.snap_jumps, t0, t1) }
    }

    fn spec(&self, h: Hamiltonian, jumps: &[JumpOp], t0: f64, t1: f64) -> EvolutionSpec {
        EvolutionSpec {
            hamiltonian: h,
            jumps: jumps.to_vec(),
            t_start: t0,
            t_final: t1,
            tolerance: self.config.tolerance,
            max_step: None,
        }
    }

    /// SNAP segment with optional forced jumps. Input and output need not be
    /// normalized (forced jumps are not renormalized here).
    pub fn snap(&self, rho: &CMat, injections: &[Injection]) -> Result<CMat> {
        let t_end = self.t_snap();
        let mut events = injections.to_vec();
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut t = 0.0;
        let mut rho = rho.clone();
        for inj in events {
            if !(0.0..=t_end).contains(&inj.time) {
                return Err(Error::param("injection.time", format!("{:e} outside the SNAP pulse", inj.time)));
            }
            if inj.time > t {
                rho = evolve_lindblad_matrix(&self.snap_spec(t, inj.time), &rho)?;
            }
            let l = inj.kind.matrix(self.space);
            rho = &l * rho * l.adjoint();
            t = inj.time;
        }
        if t < t_end {
            rho = evolve_lindblad_matrix(&self.snap_spec(t, t_end), &rho)?;
        }
        Ok(rho)
    }

    /// Decoherence for half the swap, the ideal exchange, then the other half.
    pub fn swap(&self, rho: &CMat) -> Result<CMat> {
        let t0 = self.t_snap();
        let half = 0.5 * self.t_swap();
        let h = Hamiltonian::Static(self.h0.clone());
        let rho = evolve_lindblad_matrix(&self.spec(h.clone(), &self.swap_jumps, t0, t0 + half), rho)?;
        let rho = &self.swap_u * rho * self.swap_u.adjoint();
        evolve_lindblad_matrix(&self.spec(h, &self.swap_jumps, t0 + half, t0 + 2.0 * half), &rho)
    }

    fn dwell(&self, rho: &CMat) -> Result<CMat> {
        let t0 = self.t_snap() + self.t_swap();
        let h = Hamiltonian::Static(self.h0.clone());
        evolve_lindblad_matrix(&self.spec(h, &self.meas_jumps, t0, t0 + self.t_meas()), rho)
    }

    /// Nominal rotation angle per photon for a recorded outcome.
    pub fn phase_correction(&self, level: Level) -> f64 {
        let (ts, tw, tm) = (self.t_snap(), self.t_swap(), self.t_meas());
        let chi_f = self.params.chi_f.0;
        let chi_e = self.params.chi_e.0;
        let chi_e_snap = if self.et.is_some() { chi_f } else { chi_e };
        match (self.config.variant, level) {
            (Variant::Nc, _) => chi_f * (ts + 0.5 * tw),
            (Variant::C, Level::G) => chi_f * (ts + 0.5 * tw),
            (Variant::C, Level::E) => chi_e_snap * ts + chi_e * (tw + tm),
            (Variant::C, _) => chi_f * (0.5 * tw + tm),
        }
    }

    fn total_time(&self) -> f64 {
        match self.config.variant {
            Variant::Nc => self.t_snap() + self.t_swap(),
            Variant::C => self.t_snap() + self.t_swap() + self.t_meas(),
        }
    }

    /// Cavity unitary undoing the nominal dispersive and Kerr evolution.
    pub fn correction_unitary(&self, level: Level) -> CMat {
        let dc = self.space.cavity_dim();
        let phi = self.phase_correction(level);
        let k = if self.params.kerr_enabled { self.params.kerr_k.0 } else { 0.0 };
        let t = self.total_time();
        let diag = CVec::from_iterator(
            dc,
            (0..dc).map(|n| {
                let nf = n as f64;
                c64(0.0, phi * nf + 0.5 * k * nf * (nf - 1.0) * t).exp()
            }),
        );
        CMat::from_diagonal(&diag)
    }

    fn correct(&self, rho: &CMat, level: Level) -> CMat {
        let da = self.space.ancilla_dim();
        let u = kron(&self.correction_unitary(level), &CMat::identity(da, da));
        &u * rho * u.adjoint()
    }

    fn project(&self, rho: &CMat, level: Level) -> CMat {
        let dc = self.space.cavity_dim();
        let da = self.space.ancilla_dim();
        let p = kron(&CMat::identity(dc, dc), &ancilla::transition(da, level, level));
        &p * rho * &p
    }

    fn cavity_trace(&self, rho: &CMat) -> CMat {
        DensityMatrix::from_matrix_unchecked(self.space, rho.clone()).expect("dims").cavity_reduced()
    }

    fn readout_dephase(&self, cav: CMat) -> CMat {
        let p = self.config.readout_dephasing;
        if p == 0.0 {
            return cav;
        }
        let diag = CMat::from_diagonal(&cav.diagonal());
        cav * c64(1.0 - p, 0.0) + diag * c64(p, 0.0)
    }

    fn with_ground(&self, cav: &CMat) -> CMat {
        kron(cav, &ancilla::transition(self.space.ancilla_dim(), Level::G, Level::G))
    }

    /// One C-variant attempt: unnormalized frame-corrected cavity states per
    /// recorded level (their traces are the outcome probabilities).
    fn attempt_c(&self, rho: &CMat, injections: &[Injection]) -> Result<Vec<(Level, CMat)>> {
        let after = self.swap(&self.snap(rho, injections)?)?;
        let mut dwelled = Vec::with_capacity(3);
        for l in MEASURED {
            let p = self.project(&after, l);
            let tr = p.trace().re;
            dwelled.push(if tr > 0.0 { self.dwell(&p)? } else { p });
        }
        let conf = &self.config.measurement_fidelity;
        let n = self.space.dim();
        let mut out = Vec::with_capacity(3);
        for (r, &rec) in MEASURED.iter().enumerate() {
            let mut sigma = CMat::zeros(n, n);
            for (l, d) in dwelled.iter().enumerate() {
                let w = conf[l][r];
                if w != 0.0 {
                    sigma += d * c64(w, 0.0);
                }
            }
            let corrected = self.correct(&sigma, rec);
            out.push((rec, self.readout_dephase(self.cavity_trace(&corrected))));
        }
        Ok(out)
    }

    /// NC variant: joint state after SNAP and swap, frame corrected.
    fn run_nc(&self, rho: &CMat, injections: &[Injection]) -> Result<CMat> {
        let after = self.swap(&self.snap(rho, injections)?)?;
        Ok(self.correct(&after, Level::G))
    }

    /// Single attempt, outcome-resolved.
    pub fn conditioned(&self, rho_in: &DensityMatrix, injections: &[Injection]) -> Result<Vec<Branch>> {
        self.space.ensure_same(&rho_in.space())?;
        let norm = rho_in.trace().re;
        let branches = match self.config.variant {
            Variant::C => self.attempt_c(rho_in.matrix(), injections)?,
            Variant::Nc => {
                let joint = self.run_nc(rho_in.matrix(), injections)?;
                let d = DensityMatrix::from_matrix_unchecked(self.space, joint)?;
                MEASURED.iter().map(|&l| (l, d.cavity_block(l))).collect()
            }
        };
        Ok(branches
            .into_iter()
            .map(|(level, cav)| {
                let p = cav.trace().re;
                let cavity_rho = if p > 0.0 { cav * c64(1.0 / p, 0.0) } else { cav };
                Branch { level, probability: p / norm, cavity_rho }
            })
            .collect())
    }

    /// Full protocol with outcomes chosen by `choose(attempt, probabilities)`.
    pub fn run_with<F>(&self, rho_in: &DensityMatrix, injections: &[Injection], mut choose: F) -> Result<GateOutcome>
    where
        F: FnMut(usize, &[(Level, f64)]) -> Level,
    {
        self.space.ensure_same(&rho_in.space())?;
        if self.config.variant == Variant::Nc {
            let joint = self.run_nc(rho_in.matrix(), injections)?;
            return Ok(GateOutcome {
                measured_levels: vec![],
                repeats_used: 0,
                phase_correction: self.phase_correction(Level::G),
                final_rho: DensityMatrix::from_matrix_unchecked(self.space, joint)?,
                success: true,
            });
        }
        let mut rho = rho_in.matrix().clone();
        let mut measured = Vec::new();
        let mut phase = 0.0;
        let mut attempt = 0;
        loop {
            let inj: &[Injection] = if attempt == 0 { injections } else { &[] };
            let branches = self.attempt_c(&rho, inj)?;
            let total: f64 = branches.iter().map(|b| b.1.trace().re).sum();
            let probs: Vec<(Level, f64)> = branches.iter().map(|b| (b.0, b.1.trace().re / total)).collect();
            let level = choose(attempt, &probs);
            let (_, cav) = branches
                .into_iter()
                .find(|b| b.0 == level)
                .ok_or_else(|| Error::param("outcome", format!("{level} is not a measurable level")))?;
            let p = cav.trace().re;
            if !(p > 0.0) {
                return Err(Error::NonPhysical(format!("chose outcome {level} with zero probability")));
            }
            measured.push(level);
            phase += self.phase_correction(level);
            rho = self.with_ground(&(cav * c64(1.0 / p, 0.0)));
            let repeat = self.config.repeat_on.contains(&level);
            if !repeat || attempt >= self.config.max_repeats {
                return Ok(GateOutcome {
                    repeats_used: attempt,
                    phase_correction: phase,
                    final_rho: DensityMatrix::from_matrix_unchecked(self.space, rho)?,
                    success: !repeat,
                    measured_levels: measured,
                });
            }
            attempt += 1;
        }
    }

    /// Full protocol with outcomes sampled from a seeded stream.
    pub fn run(&self, rho_in: &DensityMatrix, injections: &[Injection], seed: u64) -> Result<GateOutcome> {
        let mut r = rng::seeded(seed);
        self.run_with(rho_in, injections, |_, probs| {
            let u: f64 = r.random();
            let mut acc = 0.0;
            for &(l, p) in probs {
                acc += p;
                if u < acc {
                    return l;
                }
            }
            probs.iter().rev().find(|x| x.1 > 0.0).map(|x| x.0).unwrap_or(Level::G)
        })
    }

    /// Outcome-averaged cavity state including all repeat branches, as seen
    /// by the next logical operation. `rho_in` is the joint cavity ⊗ ancilla
    /// state.
    pub fn average_cavity_output(&self, rho_in: &CMat) -> Result<CMat> {
        match self.config.variant {
            Variant::Nc => {
                let joint = self.run_nc(rho_in, &[])?;
                let d = DensityMatrix::from_matrix_unchecked(self.space, joint)?;
                let ground = d.cavity_block(Level::G);
                match self.config.nc_excited {
                    NcExcitedPolicy::Trace => Ok(d.cavity_reduced()),
                    NcExcitedPolicy::Dephase => {
                        let excited = d.cavity_reduced() - &ground;
                        Ok(&ground + CMat::from_diagonal(&excited.diagonal()))
                    }
                    NcExcitedPolicy::Depolarize => {
                        let excited = d.trace().re - ground.trace().re;
                        let basis = LogicalBasis::new(self.space.cavity_dim())?;
                        Ok(ground + basis.projector() * c64(0.5 * excited, 0.0))
                    }
                }
            }
            Variant::C => {
                let dc = self.space.cavity_dim();
                let mut acc = CMat::zeros(dc, dc);
                let mut rho = rho_in.clone();
                for attempt in 0..=self.config.max_repeats {
                    let mut carry: Option<CMat> = None;
                    for (level, cav) in self.attempt_c(&rho, &[])? {
                        if self.config.repeat_on.contains(&level) && attempt < self.config.max_repeats {
                            carry = Some(carry.map_or(cav.clone(), |c| c + &cav));
                        } else {
                            acc += cav;
                        }
                    }
                    match carry {
                        Some(c) if c.trace().re > 1e-15 => rho = self.with_ground(&c),
                        _ => break,
                    }
                }
                Ok(acc)
            }
        }
    }
}

pub fn run_gate(config: &ProtocolConfig, params: &DeviceParams, rho_in: &DensityMatrix, seed: u64) -> Result<GateOutcome> {
    GateSimulator::new(config, params, rho_in.space())?.run(rho_in, &[], seed)
}

/// Single attempt, no repeat; map from recorded level to (probability,
/// renormalized cavity state).
pub fn run_gate_conditioned(
    config: &ProtocolConfig,
    params: &DeviceParams,
    rho_in: &DensityMatrix,
) -> Result<BTreeMap<Level, (f64, CMat)>> {
    let sim = GateSimulator::new(config, params, rho_in.space())?;
    Ok(sim.conditioned(rho_in, &[])?.into_iter().map(|b| (b.level, (b.probability, b.cavity_rho))).collect())
}

/// Logical target of the gate: diag(1, e^{iθ}).
pub fn target_unitary(config: &ProtocolConfig) -> CMat {
    crate::codes::logical_z_rotation(config.theta.0)
}

/// Tomographic logical channel of the full (outcome-averaged) protocol.
pub fn protocol_channel(
    config: &ProtocolConfig,
    params: &DeviceParams,
    space: TensorSpace,
) -> Result<crate::error::Checked<crate::codes::LogicalChannel>> {
    let sim = GateSimulator::new(config, params, space)?;
    let basis = LogicalBasis::new(space.cavity_dim())?;
    crate::codes::channel_tomography(&basis, |psi| {
        let rho = kron(&(psi * psi.adjoint()), &ancilla::transition(space.ancilla_dim(), Level::G, Level::G));
        sim.average_cavity_output(&rho)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{channel_tomography, encode, logical_s_theta, state_fidelity, LogicalChannel};
    use crate::units::Rate;
    use std::f64::consts::PI;

    const PLUS_X: [f64; 3] = [1.0, 0.0, 0.0];

    fn space() -> TensorSpace {
        TensorSpace::new(5, 3).unwrap()
    }

    fn input(bloch: [f64; 3]) -> (DensityMatrix, CVec) {
        let s = space();
        let b = LogicalBasis::new(5).unwrap();
        let psi = encode(&b, bloch).unwrap();
        (DensityMatrix::product(s, &(&psi * psi.adjoint()), Level::G).unwrap(), psi)
    }

    fn config(variant: Variant) -> ProtocolConfig {
        let mut c = ProtocolConfig::new(variant, PI / 2.0, Seconds::us(1.0));
        c.tolerance = 1e-10;
        c
    }

    #[test]
    fn noiseless_c_gate_is_exact() {
        let (rho, psi) = input(PLUS_X);
        let p = DeviceParams::noiseless();
        let out = run_gate(&config(Variant::C), &p, &rho, 1).unwrap();
        assert_eq!(out.measured_levels, vec![Level::G]);
        assert!(out.success);
        let target = logical_s_theta(5, PI / 2.0) * psi;
        assert!(state_fidelity(&out.cavity_rho(), &target) > 1.0 - 1e-6);

        let cond = run_gate_conditioned(&config(Variant::C), &p, &rho).unwrap();
        assert!((cond[&Level::G].0 - 1.0).abs() < 1e-8, "{}", cond[&Level::G].0);
        let total: f64 = cond.values().map(|v| v.0).sum();
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn nc_and_c_agree_without_noise() {
        let s = space();
        let p = DeviceParams::noiseless();
        let b = LogicalBasis::new(5).unwrap();
        let chans: Vec<LogicalChannel> = [Variant::Nc, Variant::C]
            .iter()
            .map(|&v| {
                let sim = GateSimulator::new(&config(v), &p, s).unwrap();
                channel_tomography(&b, |psi| {
                    let rho = kron(&(psi * psi.adjoint()), &ancilla::transition(3, Level::G, Level::G));
                    sim.average_cavity_output(&rho)
                })
                .unwrap()
                .value
            })
            .collect();
        let diff = (chans[0].matrix() - chans[1].matrix()).abs().max();
        assert!(diff < 1e-8, "{diff:e}\n{}\n{}", chans[0].matrix(), chans[1].matrix());
        assert!((chans[0].average_gate_fidelity(&target_unitary(&config(Variant::C))) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn dephasing_mid_snap_is_repeated_away() {
        let (rho, psi) = input(PLUS_X);
        let p = DeviceParams::noiseless();
        let sim = GateSimulator::new(&config(Variant::C), &p, space()).unwrap();
        let inj = [Injection { kind: InjectedJump::Dephasing, time: 0.5e-6 }];
        let cond = sim.conditioned(&rho, &inj).unwrap();
        let f = cond.iter().find(|b| b.level == Level::F).unwrap();
        assert!(f.probability > 0.1);
        let fid = state_fidelity(&f.cavity_rho, &psi);
        assert!(fid > 1.0 - 1e-6, "{fid} {}", f.probability);

        let out = sim
            .run_with(&rho, &inj, |attempt, _| if attempt == 0 { Level::F } else { Level::G })
            .unwrap();
        assert_eq!(out.measured_levels, vec![Level::F, Level::G]);
        assert_eq!(out.repeats_used, 1);
        let target = logical_s_theta(5, PI / 2.0) * &psi;
        assert!(state_fidelity(&out.cavity_rho(), &target) > 1.0 - 1e-3);
    }

    #[test]
    fn relaxation_with_transparency_still_applies_gate() {
        let (rho, psi) = input(PLUS_X);
        let p = DeviceParams::noiseless();
        let mut cfg = config(Variant::C);
        cfg.sideband_g = AngularFrequency(0.0);
        let sim = GateSimulator::new(&cfg, &p, space()).unwrap();
        let inj = [Injection { kind: InjectedJump::RelaxEf, time: 0.37e-6 }];
        let out = sim.run_with(&rho, &inj, |_, _| Level::E).unwrap();
        assert!(out.success);
        let target = logical_s_theta(5, PI / 2.0) * &psi;
        assert!(state_fidelity(&out.cavity_rho(), &target) > 1.0 - 1e-3);
    }

    #[test]
    fn exhausted_repeats_report_failure() {
        let (rho, _) = input(PLUS_X);
        let mut cfg = config(Variant::C);
        cfg.max_repeats = 2;
        let p = DeviceParams::noiseless();
        let sim = GateSimulator::new(&cfg, &p, space()).unwrap();
        let inj = [Injection { kind: InjectedJump::Dephasing, time: 0.2e-6 }];
        let out = sim.run_with(&rho, &inj, |_, _| Level::F).unwrap();
        assert_eq!(out.measured_levels.len(), 3);
        assert_eq!(out.repeats_used, 2);
        assert!(!out.success);
        // a zero-probability outcome cannot be chosen
        assert!(sim.run_with(&rho, &[], |_, _| Level::E).is_err());
    }

    #[test]
    fn swap_examples() {
        let s = space();
        let u = gf_swap(s).unwrap();
        let uu = u.mul(&u).unwrap();
        assert!((uu.matrix() - CMat::identity(15, 15)).iter().all(|z| z.norm() < 1e-12));
        let psi = crate::hilbert::StateVector::basis(s, 2, Level::G).unwrap();
        let out = crate::hilbert::apply(&u, &psi).unwrap();
        assert!((out.level_population(Level::F) - 1.0).abs() < 1e-12);

        let p = DeviceParams { t1_ef: Seconds::us(47.0), ..DeviceParams::noiseless() };
        let sim = GateSimulator::new(&config(Variant::C), &p, s).unwrap();
        let rho = crate::hilbert::StateVector::basis(s, 2, Level::F).unwrap().to_density();
        let after = sim.swap(rho.matrix()).unwrap();
        let pop_g = after[(s.index(2, Level::G), s.index(2, Level::G))].re;
        assert!(1.0 - pop_g < 3e-3);
        assert!(1.0 - pop_g > 0.0);
    }

    #[test]
    fn conditioned_states_under_heavy_noise() {
        let (rho, psi) = input(PLUS_X);
        let p = DeviceParams {
            injected_ef_noise_rate: Rate::per_us(0.25),
            injected_dephasing_rate: Rate::per_us(0.25),
            ..DeviceParams::noiseless()
        };
        let mut cfg = config(Variant::C);
        cfg.sideband_g = AngularFrequency(0.0);
        let cond = run_gate_conditioned(&cfg, &p, &rho).unwrap();
        let target = logical_s_theta(5, PI / 2.0) * &psi;
        assert!(cond[&Level::E].0 > 0.05 && cond[&Level::F].0 > 0.02, "{:?}", cond.values().map(|v| v.0).collect::<Vec<_>>());
        assert!(state_fidelity(&cond[&Level::G].1, &target) > 0.95);
        assert!(state_fidelity(&cond[&Level::E].1, &target) > 0.9);
        assert!(state_fidelity(&cond[&Level::F].1, &psi) > 0.9);
    }

    #[test]
    fn phase_corrections_are_deterministic() {
        let cfg = config(Variant::C);
        let p = DeviceParams::default();
        let a = GateSimulator::new(&cfg, &p, space()).unwrap();
        let b = GateSimulator::new(&cfg, &p, space()).unwrap();
        for l in MEASURED {
            assert_eq!(a.phase_correction(l), b.phase_correction(l));
        }
    }

    #[test]
    fn config_rejects_bad_confusion() {
        let mut cfg = config(Variant::C);
        cfg.measurement_fidelity[1] = [0.5, 0.6, 0.0];
        assert!(cfg.validate().is_err());
        let text = toml::to_string(&cfg).unwrap();
        let back: ProtocolConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.variant, cfg.variant);
    }
}
