//! Device parameters and Hamiltonian / collapse-operator builders.
//!
//! All frequencies are angular (rad/s) in the lab frame rotating at the bare
//! cavity and ancilla transition frequencies, so the static interaction is
//! H0 = a†a (χ_e|e⟩⟨e| + χ_f|f⟩⟨f|) + (K/2) a†²a².

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Checked, Diagnostic, Error, Result};
use crate::hilbert::{
    ancilla, annihilation, c64, cavity, kron, Level, Op, TensorSpace, CMat, CVec, C64, ONE, ZERO,
};
use crate::units::{AngularFrequency, Angle, Rate, Seconds};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DephasingModel {
    /// D[b†b] with b†b = Σ n|n⟩⟨n|.
    #[default]
    NumberOperator,
    /// Level projectors D[|e⟩⟨e|], D[|f⟩⟨f|].
    Projector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    pub chi_e: AngularFrequency,
    pub chi_f: AngularFrequency,
    #[serde(rename = "kerr_K")]
    pub kerr_k: AngularFrequency,
    pub anharmonicity_alpha: AngularFrequency,
    pub t1_ge: Seconds,
    pub t1_ef: Seconds,
    pub tphi_ge: Seconds,
    pub tphi_gf: Seconds,
    pub t1_cavity: Seconds,
    pub nbar_thermal: f64,
    pub injected_dephasing_rate: Rate,
    pub injected_ef_noise_rate: Rate,
    pub kerr_enabled: bool,
    pub dephasing_model: DephasingModel,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            chi_e: AngularFrequency::from_mhz(-0.9),
            chi_f: AngularFrequency::from_mhz(-1.2),
            kerr_k: AngularFrequency::from_khz(-2.2),
            anharmonicity_alpha: AngularFrequency::from_mhz(-137.0),
            t1_ge: Seconds::us(50.0),
            t1_ef: Seconds::us(47.0),
            tphi_ge: Seconds::us(200.0),
            tphi_gf: Seconds::us(40.0),
            t1_cavity: Seconds::ms(1.0),
            nbar_thermal: 0.004,
            injected_dephasing_rate: Rate(0.0),
            injected_ef_noise_rate: Rate(0.0),
            kerr_enabled: true,
            dephasing_model: DephasingModel::NumberOperator,
        }
    }
}

fn inv(t: Seconds) -> f64 {
    if t.0.is_infinite() {
        0.0
    } else {
        1.0 / t.0
    }
}

impl DeviceParams {
    /// Table values with every decoherence channel switched off.
    pub fn noiseless() -> Self {
        let inf = Seconds(f64::INFINITY);
        Self {
            t1_ge: inf,
            t1_ef: inf,
            tphi_ge: inf,
            tphi_gf: inf,
            t1_cavity: inf,
            nbar_thermal: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("t1_ge", self.t1_ge),
            ("t1_ef", self.t1_ef),
            ("tphi_ge", self.tphi_ge),
            ("tphi_gf", self.tphi_gf),
            ("t1_cavity", self.t1_cavity),
        ] {
            if !(t.0 > 0.0) {
                return Err(Error::param(name, "must be > 0"));
            }
        }
        for (name, r) in [
            ("nbar_thermal", self.nbar_thermal),
            ("injected_dephasing_rate", self.injected_dephasing_rate.0),
            ("injected_ef_noise_rate", self.injected_ef_noise_rate.0),
        ] {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::param(name, "must be finite and ≥ 0"));
            }
        }
        Ok(())
    }

    pub fn gamma_cavity(&self) -> f64 {
        inv(self.t1_cavity)
    }

    pub fn gamma_ge(&self) -> f64 {
        inv(self.t1_ge)
    }

    pub fn gamma_ef(&self) -> f64 {
        inv(self.t1_ef)
    }

    pub fn gamma_thermal(&self) -> f64 {
        self.nbar_thermal * self.gamma_ge()
    }

    /// Total g–f coherence decay rate (native + injected).
    pub fn gf_dephasing_rate(&self) -> f64 {
        inv(self.tphi_gf) + self.injected_dephasing_rate.0
    }

    pub fn chi_e(&self) -> f64 {
        self.chi_e.0
    }

    pub fn chi_f(&self) -> f64 {
        self.chi_f.0
    }

    /// Copy with χ_e set equal to χ_f, the condition the error-transparency
    /// drive establishes.
    pub fn matched(&self) -> Self {
        Self { chi_e: self.chi_f, ..self.clone() }
    }

    /// Copy with all decoherence removed but couplings kept.
    pub fn without_decoherence(&self) -> Self {
        let n = Self::noiseless();
        Self {
            chi_e: self.chi_e,
            chi_f: self.chi_f,
            kerr_k: self.kerr_k,
            anharmonicity_alpha: self.anharmonicity_alpha,
            kerr_enabled: self.kerr_enabled,
            dephasing_model: self.dephasing_model,
            ..n
        }
    }
}

// ---------------------------------------------------------------------------
// Drive description
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeShape {
    Constant,
    Gaussian,
}

/// Peak-normalized pulse shape. The Gaussian is offset so that it starts and
/// ends at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseEnvelope {
    pub shape: EnvelopeShape,
    pub duration: Seconds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Seconds>,
}

const QUAD_INTERVALS: usize = 4096;

impl PulseEnvelope {
    pub fn constant(duration: Seconds) -> Self {
        Self { shape: EnvelopeShape::Constant, duration, sigma: None }
    }

    /// Gaussian with σ = duration / 4.
    pub fn gaussian(duration: Seconds) -> Self {
        Self { shape: EnvelopeShape::Gaussian, duration, sigma: Some(Seconds(duration.0 / 4.0)) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.0 > 0.0) {
            return Err(Error::param("envelope.duration", "must be > 0"));
        }
        if self.shape == EnvelopeShape::Gaussian {
            let sigma = self.sigma.ok_or_else(|| Error::param("envelope.sigma", "required for gaussian"))?;
            if !(sigma.0 > 0.0) {
                return Err(Error::param("envelope.sigma", "must be > 0"));
            }
            if self.duration.0 < 4.0 * sigma.0 * (1.0 - 1e-12) {
                return Err(Error::param("envelope.duration", "gaussian requires duration ≥ 4σ"));
            }
        }
        Ok(())
    }

    /// Shape value in [0, 1]; zero outside the pulse.
    pub fn shape_at(&self, t: f64) -> f64 {
        let dur = self.duration.0;
        if !(0.0..=dur).contains(&t) {
            return 0.0;
        }
        match self.shape {
            EnvelopeShape::Constant => 1.0,
            EnvelopeShape::Gaussian => {
                let s = self.sigma.map(|s| s.0).unwrap_or(dur / 4.0);
                let x = t - dur / 2.0;
                let edge = (-(dur * dur) / (8.0 * s * s)).exp();
                ((-(x * x) / (2.0 * s * s)).exp() - edge) / (1.0 - edge)
            }
        }
    }

    /// ∫_0^t shape by composite Simpson quadrature.
    pub fn integral_to(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration.0);
        if t == 0.0 {
            return 0.0;
        }
        if self.shape == EnvelopeShape::Constant {
            return t;
        }
        let n = QUAD_INTERVALS;
        let h = t / n as f64;
        let mut acc = self.shape_at(0.0) + self.shape_at(t);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.shape_at(i as f64 * h);
        }
        acc * h / 3.0
    }

    pub fn integral(&self) -> f64 {
        self.integral_to(self.duration.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveParams {
    /// Peak effective g–f Rabi rate Ω.
    pub omega: AngularFrequency,
    /// (photon number k, phase θ_k) for each driven Fock state.
    pub theta_phases: Vec<(usize, Angle)>,
    pub detuning_delta_raman: AngularFrequency,
    pub sideband_g: AngularFrequency,
    /// Signed ET sideband detuning δ.
    pub sideband_delta: AngularFrequency,
    pub envelope: PulseEnvelope,
}

impl DriveParams {
    /// Logical S(θ) drive: phases {0: 0, 2: θ, 4: 0}, peak rate chosen so the
    /// pulse area is π/2 (full g → f transfer).
    pub fn snap(theta: f64, envelope: PulseEnvelope) -> Self {
        let omega = (PI / 2.0) / envelope.integral();
        Self {
            omega: AngularFrequency(omega),
            theta_phases: vec![(0, Angle(0.0)), (2, Angle(theta)), (4, Angle(0.0))],
            detuning_delta_raman: AngularFrequency::from_mhz(45.0),
            sideband_g: AngularFrequency::from_mhz(3.0),
            sideband_delta: AngularFrequency::from_mhz(10.0),
            envelope,
        }
    }

    pub fn with_area(mut self, area: f64) -> Self {
        self.omega = AngularFrequency(area / self.envelope.integral());
        self
    }

    pub fn validate(&self, cavity_dim: usize) -> Result<()> {
        self.envelope.validate()?;
        for &(k, _) in &self.theta_phases {
            if k % 2 == 1 {
                return Err(Error::param("theta_phases", format!("phase on odd photon number {k}")));
            }
            if k > 4 {
                return Err(Error::param("theta_phases", format!("photon number {k} outside logical support {{0,2,4}}")));
            }
            if k >= cavity_dim {
                return Err(Error::param("theta_phases", format!("photon number {k} ≥ cavity_dim")));
            }
        }
        let mut ks: Vec<usize> = self.theta_phases.iter().map(|p| p.0).collect();
        ks.sort_unstable();
        ks.dedup();
        if ks.len() != self.theta_phases.len() {
            return Err(Error::param("theta_phases", "duplicate photon number"));
        }
        Ok(())
    }

    /// Integrated Rabi area ∫Ω(t)dt.
    pub fn area(&self) -> f64 {
        self.omega.0 * self.envelope.integral()
    }

    pub fn area_to(&self, t: f64) -> f64 {
        self.omega.0 * self.envelope.integral_to(t)
    }

    pub fn omega_at(&self, t: f64) -> f64 {
        self.omega.0 * self.envelope.shape_at(t)
    }

    /// Ω / (2|χ_f|), the figure of merit for the rotating-wave approximation.
    pub fn rwa_ratio(&self, params: &DeviceParams) -> f64 {
        self.omega.0 / (2.0 * params.chi_f.0.abs())
    }
}

/// S(θ⃗) = Σ_k e^{iθ_k}|k⟩⟨k| over the driven photon numbers only.
pub fn snap_operator(cavity_dim: usize, phases: &[(usize, Angle)], sign: f64) -> CMat {
    let mut d = CVec::zeros(cavity_dim);
    for &(k, th) in phases {
        d[k] = C64::from_polar(1.0, sign * th.0);
    }
    CMat::from_diagonal(&d)
}

fn driven_projector(cavity_dim: usize, phases: &[(usize, Angle)]) -> CMat {
    let mut d = CVec::zeros(cavity_dim);
    for &(k, _) in phases {
        d[k] = ONE;
    }
    CMat::from_diagonal(&d)
}

/// P: projector onto the driven subspace span{|k,g⟩, |k,f⟩ : k driven}.
pub fn driven_subspace_projector(space: TensorSpace, phases: &[(usize, Angle)]) -> Result<Op> {
    space.check_level(Level::F)?;
    let da = space.ancilla_dim();
    let anc = ancilla::transition(da, Level::G, Level::G) + ancilla::transition(da, Level::F, Level::F);
    Op::new(space, kron(&driven_projector(space.cavity_dim(), phases), &anc), "P")
}

// ---------------------------------------------------------------------------
// Hamiltonians
// ---------------------------------------------------------------------------

fn h0_with(params: &DeviceParams, space: TensorSpace, chi_e: f64) -> Result<Op> {
    if space.ancilla_dim() < 3 {
        return Err(Error::InvalidSpace("H0 needs ancilla_dim ≥ 3".into()));
    }
    let dc = space.cavity_dim();
    let da = space.ancilla_dim();
    let n = cavity::number(dc);
    let anc = ancilla::transition(da, Level::E, Level::E) * c64(chi_e, 0.0)
        + ancilla::transition(da, Level::F, Level::F) * c64(params.chi_f.0, 0.0);
    let mut h = kron(&n, &anc);
    if params.kerr_enabled && params.kerr_k.0 != 0.0 {
        h += kron(&kerr_cavity(params, dc), &CMat::identity(da, da));
    }
    Op::new(space, h, "H0")
}

/// (K/2) a†² a² on the cavity factor.
pub fn kerr_cavity(params: &DeviceParams, cavity_dim: usize) -> CMat {
    let k = params.kerr_k.0;
    CMat::from_diagonal(&CVec::from_iterator(
        cavity_dim,
        (0..cavity_dim).map(|n| c64(0.5 * k * (n * n.saturating_sub(1)) as f64, 0.0)),
    ))
}

pub fn build_h0(params: &DeviceParams, space: TensorSpace) -> Result<Op> {
    h0_with(params, space, params.chi_e.0)
}

/// H0 with the error-transparency shift added to χ_e.
pub fn build_h0_shifted(params: &DeviceParams, space: TensorSpace, shift: &EtShift) -> Result<Op> {
    h0_with(params, space, params.chi_e.0 + shift.shift)
}

/// H0 with χ_e set to χ_f.
pub fn build_h0_matched(params: &DeviceParams, space: TensorSpace) -> Result<Op> {
    h0_with(params, space, params.chi_f.0)
}

/// Ω(S(θ⃗)⊗|f⟩⟨g| + S(−θ⃗)⊗|g⟩⟨f|) at the peak rate Ω.
pub fn build_h_int_effective(drive: &DriveParams, space: TensorSpace) -> Result<Op> {
    drive.validate(space.cavity_dim())?;
    space.check_level(Level::F)?;
    let dc = space.cavity_dim();
    let da = space.ancilla_dim();
    let up = kron(&snap_operator(dc, &drive.theta_phases, 1.0), &ancilla::transition(da, Level::G, Level::F));
    let h = &up + up.adjoint();
    Op::new(space, h * c64(drive.omega.0, 0.0), "H_int")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriveModel {
    /// Only the resonant term of each comb tone is kept: the effective
    /// Hamiltonian expressed in the lab frame.
    #[default]
    Effective,
    /// Every comb tone acts on every photon number.
    FullComb,
}

/// Lab-frame SNAP Hamiltonian H0 + Ω(t) Σ_k e^{i(θ_k − χ_f k t)} X_k ⊗ |f⟩⟨g| + h.c.
/// with X_k = I (full comb) or |k⟩⟨k| (effective).
#[derive(Clone)]
pub struct SnapHamiltonian {
    h0: CMat,
    tones: Vec<(f64, f64, CMat)>,
    drive: DriveParams,
    time_offset: f64,
}

impl SnapHamiltonian {
    pub fn at(&self, t: f64) -> CMat {
        let tau = t - self.time_offset;
        let omega = self.drive.omega_at(tau);
        let mut h = self.h0.clone();
        if omega != 0.0 {
            let mut up = CMat::zeros(h.nrows(), h.ncols());
            for (theta, freq, m) in &self.tones {
                let c = C64::from_polar(omega, theta - freq * tau);
                up += m * c;
            }
            h += &up + up.adjoint();
        }
        h
    }

    /// Largest frequency present in the drive, in Hz.
    pub fn max_frequency_hz(&self) -> f64 {
        self.tones.iter().map(|(_, f, _)| f.abs()).fold(0.0, f64::max) / (2.0 * PI)
    }

    /// Shift the pulse so that it starts at absolute time `offset`.
    pub fn starting_at(mut self, offset: f64) -> Self {
        self.time_offset = offset;
        self
    }

    pub fn drive(&self) -> &DriveParams {
        &self.drive
    }

    pub fn into_callable(self) -> Arc<dyn Fn(f64) -> CMat + Send + Sync> {
        Arc::new(move |t| self.at(t))
    }
}

pub fn build_h_snap_timedependent(
    params: &DeviceParams,
    drive: &DriveParams,
    space: TensorSpace,
    model: DriveModel,
) -> Result<SnapHamiltonian> {
    snap_hamiltonian_with_h0(build_h0(params, space)?, params, drive, space, model)
}

/// Same as [`build_h_snap_timedependent`] on top of a caller-supplied static
/// part (e.g. H0 with the error-transparency shift).
pub fn snap_hamiltonian_with_h0(
    h0: Op,
    params: &DeviceParams,
    drive: &DriveParams,
    space: TensorSpace,
    model: DriveModel,
) -> Result<SnapHamiltonian> {
    drive.validate(space.cavity_dim())?;
    space.ensure_same(&h0.space())?;
    let dc = space.cavity_dim();
    let da = space.ancilla_dim();
    let fg = ancilla::transition(da, Level::G, Level::F);
    let tones = drive
        .theta_phases
        .iter()
        .map(|&(k, th)| {
            let cav = match model {
                DriveModel::Effective => cavity::fock(dc, k) * cavity::fock(dc, k).adjoint(),
                DriveModel::FullComb => CMat::identity(dc, dc),
            };
            (th.0, params.chi_f.0 * k as f64, kron(&cav, &fg))
        })
        .collect();
    Ok(SnapHamiltonian { h0: h0.into_matrix(), tones, drive: drive.clone(), time_offset: 0.0 })
}

// ---------------------------------------------------------------------------
// Raman and error-transparency drive algebra
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamanDrive {
    /// Effective g–f Rabi rate Ω_ge Ω_ef / Δ.
    pub omega: f64,
    /// Intermediate-state population estimate Ω_ge Ω_ef / Δ².
    pub e_leakage: f64,
}

pub fn build_raman_params(omega_ge: f64, omega_ef: f64, delta: f64) -> Result<Checked<RamanDrive>> {
    if delta == 0.0 {
        return Err(Error::param("delta", "Raman detuning must be non-zero"));
    }
    let omega = omega_ge * omega_ef / delta;
    let e_leakage = (omega_ge * omega_ef / (delta * delta)).abs();
    let mut diagnostics = Vec::new();
    let strongest = omega_ge.abs().max(omega_ef.abs());
    if strongest > 0.0 && delta.abs() / strongest < 5.0 {
        diagnostics.push(Diagnostic::new(
            "raman_detuning",
            format!("Δ / max(Ω_ge, Ω_ef) = {:.2} < 5; adiabatic elimination is marginal", delta.abs() / strongest),
        ));
    }
    Ok(Checked { value: RamanDrive { omega, e_leakage }, diagnostics })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtShift {
    /// g²/δ, added to χ_e.
    pub shift: f64,
    /// |e⟩–|h⟩ hybridization probability g²/δ².
    pub leakage: f64,
}

impl EtShift {
    pub const NONE: EtShift = EtShift { shift: 0.0, leakage: 0.0 };
}

pub fn build_error_transparency_shift(g: f64, delta: f64) -> Result<Checked<EtShift>> {
    if g == 0.0 {
        return Ok(Checked::clean(EtShift::NONE));
    }
    if delta == 0.0 {
        return Err(Error::param("sideband_delta", "must be non-zero when g ≠ 0"));
    }
    let shift = g * g / delta;
    let leakage = (g / delta).powi(2);
    let mut diagnostics = Vec::new();
    if (g / delta).abs() > 0.5 {
        diagnostics.push(Diagnostic::new(
            "et_detuning",
            format!("g/δ = {:.2} > 0.5; dispersive elimination of |h⟩ is marginal", (g / delta).abs()),
        ));
    }
    Ok(Checked { value: EtShift { shift, leakage }, diagnostics })
}

/// Signed δ for which g²/δ = χ_f − χ_e.
pub fn matched_sideband_detuning(g: f64, params: &DeviceParams) -> Result<f64> {
    let diff = params.chi_f.0 - params.chi_e.0;
    if diff == 0.0 {
        return Err(Error::param("chi", "χ_e = χ_f already; no sideband detuning needed"));
    }
    Ok(g * g / diff)
}

// ---------------------------------------------------------------------------
// Collapse operators
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpLabel {
    CavityLoss,
    AncillaRelaxEf,
    AncillaRelaxGe,
    Dephasing,
    ThermalExcite,
    InjectedDephasing,
    InjectedEfUp,
    InjectedEfDown,
}

impl JumpLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            JumpLabel::CavityLoss => "cavity_loss",
            JumpLabel::AncillaRelaxEf => "ancilla_relax_ef",
            JumpLabel::AncillaRelaxGe => "ancilla_relax_ge",
            JumpLabel::Dephasing => "dephasing",
            JumpLabel::ThermalExcite => "thermal_excite",
            JumpLabel::InjectedDephasing => "injected_dephasing",
            JumpLabel::InjectedEfUp => "injected_ef_up",
            JumpLabel::InjectedEfDown => "injected_ef_down",
        }
    }
}

impl fmt::Display for JumpLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Collapse operator √rate · op.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpOp {
    pub op: Op,
    pub rate: f64,
    pub label: JumpLabel,
}

impl JumpOp {
    pub fn new(op: Op, rate: f64, label: JumpLabel) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::param("rate", format!("{rate} for {label}")));
        }
        Ok(Self { op, rate, label })
    }

    /// √rate · op as a bare matrix.
    pub fn collapse_matrix(&self) -> CMat {
        self.op.matrix() * c64(self.rate.sqrt(), 0.0)
    }
}

fn anc_op(space: TensorSpace, m: CMat, label: &str) -> Op {
    Op::new(space, kron(&CMat::identity(space.cavity_dim(), space.cavity_dim()), &m), label)
        .expect("dimensions fixed by construction")
}

/// Push an f→e type jump, splitting off the hybridization branch when the
/// error-transparency drive is on. The hybridized part carries a Fock-basis
/// projection: the cavity acquires a random phase-space rotation.
fn push_relaxation(
    out: &mut Vec<JumpOp>,
    space: TensorSpace,
    m: &CMat,
    rate: f64,
    label: JumpLabel,
    et: Option<&EtShift>,
) {
    if rate <= 0.0 {
        return;
    }
    let leak = et.map(|s| s.leakage.clamp(0.0, 1.0)).unwrap_or(0.0);
    let base = anc_op(space, m.clone(), label.as_str());
    if leak == 0.0 {
        out.push(JumpOp { op: base, rate, label });
        return;
    }
    if leak < 1.0 {
        out.push(JumpOp { op: base, rate: rate * (1.0 - leak), label });
    }
    let dc = space.cavity_dim();
    for n in 0..dc {
        let proj = cavity::fock(dc, n) * cavity::fock(dc, n).adjoint();
        let op = Op::new(space, kron(&proj, m), format!("{}⊗|{n}⟩⟨{n}|", label.as_str())).expect("dims");
        out.push(JumpOp { op, rate: rate * leak, label });
    }
}

/// Collapse operators for the given parameters. `et` switches on the
/// error-transparency hybridization branch for transitions into |e⟩.
pub fn build_jump_ops(params: &DeviceParams, space: TensorSpace, et: Option<&EtShift>) -> Result<Vec<JumpOp>> {
    params.validate()?;
    let da = space.ancilla_dim();
    let mut out = Vec::new();

    let g_cav = params.gamma_cavity();
    if g_cav > 0.0 {
        out.push(JumpOp { op: annihilation(space), rate: g_cav, label: JumpLabel::CavityLoss });
    }

    let g_ge = params.gamma_ge();
    if g_ge > 0.0 {
        let m = ancilla::transition(da, Level::E, Level::G);
        out.push(JumpOp { op: anc_op(space, m, "|g⟩⟨e|"), rate: g_ge, label: JumpLabel::AncillaRelaxGe });
    }

    if da >= 3 {
        let m = ancilla::transition(da, Level::F, Level::E);
        push_relaxation(&mut out, space, &m, params.gamma_ef(), JumpLabel::AncillaRelaxEf, et);
    }

    out.extend(dephasing_ops(params, space, inv(params.tphi_ge), inv(params.tphi_gf), JumpLabel::Dephasing));

    let g_th = params.gamma_thermal();
    if g_th > 0.0 {
        let m = ancilla::transition(da, Level::G, Level::E);
        out.push(JumpOp { op: anc_op(space, m, "|e⟩⟨g|"), rate: g_th, label: JumpLabel::ThermalExcite });
    }

    let r_inj = params.injected_dephasing_rate.0;
    if r_inj > 0.0 && da >= 3 {
        out.push(injected_dephasing_op(params.dephasing_model, space, r_inj));
    }

    let r_ef = params.injected_ef_noise_rate.0;
    if r_ef > 0.0 && da >= 3 {
        let up = ancilla::transition(da, Level::E, Level::F);
        out.push(JumpOp { op: anc_op(space, up, "|f⟩⟨e|"), rate: r_ef, label: JumpLabel::InjectedEfUp });
        let down = ancilla::transition(da, Level::F, Level::E);
        push_relaxation(&mut out, space, &down, r_ef, JumpLabel::InjectedEfDown, et);
    }

    Ok(out)
}

/// Native dephasing from the two coherence times.
///
/// * number-operator model: two D[b†b] terms. The first reproduces the g–e
///   coherence time, the second tops the g–f decay up to 1/T_φ^gf.
/// * projector model: D[|e⟩⟨e|] and D[|f⟩⟨f|], which fix the g–e and g–f
///   coherence times independently.
fn dephasing_ops(params: &DeviceParams, space: TensorSpace, r_ge: f64, r_gf: f64, label: JumpLabel) -> Vec<JumpOp> {
    let da = space.ancilla_dim();
    let mut out = Vec::new();
    match params.dephasing_model {
        DephasingModel::NumberOperator => {
            // coherence n–m of D[√γ b†b] decays at γ (n−m)² / 2
            let gamma_ge = 2.0 * r_ge;
            let gamma_gf = if da >= 3 { (0.5 * r_gf - gamma_ge).max(0.0) } else { 0.0 };
            for (gamma, tag) in [(gamma_ge, "ge"), (gamma_gf, "gf")] {
                if gamma > 0.0 {
                    out.push(JumpOp {
                        op: anc_op(space, ancilla::number(da), &format!("b†b[{tag}]")),
                        rate: gamma,
                        label,
                    });
                }
            }
        }
        DephasingModel::Projector => {
            for (level, r) in [(Level::E, r_ge), (Level::F, r_gf)] {
                if r > 0.0 && level.index() < da {
                    out.push(JumpOp {
                        op: anc_op(space, ancilla::transition(da, level, level), &format!("|{level}⟩⟨{level}|")),
                        rate: 2.0 * r,
                        label,
                    });
                }
            }
        }
    }
    out
}

/// White dephasing adding `rate` to the g–f coherence decay.
fn injected_dephasing_op(model: DephasingModel, space: TensorSpace, rate: f64) -> JumpOp {
    let da = space.ancilla_dim();
    match model {
        DephasingModel::NumberOperator => JumpOp {
            op: anc_op(space, ancilla::number(da), "b†b[inj]"),
            rate: 0.5 * rate,
            label: JumpLabel::InjectedDephasing,
        },
        DephasingModel::Projector => JumpOp {
            op: anc_op(space, ancilla::transition(da, Level::F, Level::F), "|f⟩⟨f|[inj]"),
            rate: 2.0 * rate,
            label: JumpLabel::InjectedDephasing,
        },
    }
}

/// Matrix of zeros sized for `space`, handy for callers assembling operators.
pub fn zero_matrix(space: TensorSpace) -> CMat {
    CMat::from_element(space.dim(), space.dim(), ZERO)
}
