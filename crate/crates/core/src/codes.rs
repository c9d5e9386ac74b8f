//! Binomial kitten code, logical operations, Wigner functions and logical
//! channels.
//!
//! |0⟩_L = (|0⟩ + |4⟩)/√2, |1⟩_L = |2⟩. Bloch vectors follow
//! |ψ⟩ = cos(ϑ/2)|0⟩_L + e^{iφ} sin(ϑ/2)|1⟩_L.
//!
//! Logical channels are stored as Pauli transfer matrices
//! R_ij = ½ Tr[P_i E(P_j)] in the basis (I, X, Y, Z).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Checked, Diagnostic, Error, Result};
use crate::hilbert::{c64, cavity, hermitian_eigenvalues, kron, CMat, CVec, Op, TensorSpace, C64, I, ONE, ZERO};

pub const LOGICAL_FOCK: [usize; 3] = [0, 2, 4];

#[derive(Clone, Debug, PartialEq)]
pub struct LogicalBasis {
    pub zero_l: CVec,
    pub one_l: CVec,
}

impl LogicalBasis {
    pub fn new(cavity_dim: usize) -> Result<Self> {
        if cavity_dim < 5 {
            return Err(Error::InvalidSpace(format!("cavity_dim {cavity_dim} < 5 cannot hold the code")));
        }
        let zero_l = (cavity::fock(cavity_dim, 0) + cavity::fock(cavity_dim, 4)) * c64(FRAC_1_SQRT_2, 0.0);
        let one_l = cavity::fock(cavity_dim, 2);
        Ok(Self { zero_l, one_l })
    }

    pub fn cavity_dim(&self) -> usize {
        self.zero_l.len()
    }

    /// Isometry V = [|0⟩_L, |1⟩_L] (cavity_dim × 2).
    pub fn isometry(&self) -> CMat {
        let mut v = CMat::zeros(self.cavity_dim(), 2);
        v.set_column(0, &self.zero_l);
        v.set_column(1, &self.one_l);
        v
    }

    /// Projector onto the code space.
    pub fn projector(&self) -> CMat {
        let v = self.isometry();
        &v * v.adjoint()
    }

    /// Embed a 2×2 logical operator into the cavity space.
    pub fn embed(&self, logical: &CMat) -> CMat {
        let v = self.isometry();
        &v * logical * v.adjoint()
    }

    /// Compress a cavity operator to the code space: V† ρ V.
    pub fn compress(&self, rho: &CMat) -> CMat {
        let v = self.isometry();
        v.adjoint() * rho * v
    }
}

fn check_bloch(b: [f64; 3]) -> Result<()> {
    let n = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::param("bloch", format!("norm {n} is not 1")));
    }
    Ok(())
}

/// Qubit amplitudes (c0, c1) for a unit Bloch vector.
pub fn bloch_to_amplitudes(b: [f64; 3]) -> Result<[C64; 2]> {
    check_bloch(b)?;
    let theta = b[2].clamp(-1.0, 1.0).acos();
    let phi = b[1].atan2(b[0]);
    Ok([c64((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)])
}

/// Cavity state for a unit Bloch vector.
pub fn encode(basis: &LogicalBasis, bloch: [f64; 3]) -> Result<CVec> {
    let [c0, c1] = bloch_to_amplitudes(bloch)?;
    Ok(&basis.zero_l * c0 + &basis.one_l * c1)
}

/// 2×2 logical density matrix from a Bloch vector (any length ≤ 1).
pub fn bloch_to_density(b: [f64; 3]) -> CMat {
    let mut m = CMat::zeros(2, 2);
    m[(0, 0)] = c64(0.5 * (1.0 + b[2]), 0.0);
    m[(1, 1)] = c64(0.5 * (1.0 - b[2]), 0.0);
    m[(0, 1)] = c64(0.5 * b[0], -0.5 * b[1]);
    m[(1, 0)] = c64(0.5 * b[0], 0.5 * b[1]);
    m
}

/// Bloch vector of a 2×2 matrix, normalized by its trace.
pub fn density_to_bloch(rho_l: &CMat) -> [f64; 3] {
    let tr = (rho_l[(0, 0)] + rho_l[(1, 1)]).re;
    if tr <= 0.0 {
        return [0.0; 3];
    }
    let r01 = rho_l[(0, 1)] / tr;
    [2.0 * r01.re, -2.0 * r01.im, ((rho_l[(0, 0)] - rho_l[(1, 1)]).re) / tr]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    /// Bloch vector of the state restricted to and renormalized on the code.
    pub bloch: [f64; 3],
    /// Population outside the code space.
    pub leakage: f64,
}

/// Decode a cavity density matrix.
pub fn decode(basis: &LogicalBasis, rho_cavity: &CMat) -> Decoded {
    let rho_l = basis.compress(rho_cavity);
    let total = rho_cavity.trace().re;
    let inside = (rho_l[(0, 0)] + rho_l[(1, 1)]).re;
    Decoded { bloch: density_to_bloch(&rho_l), leakage: (total - inside).max(0.0) }
}

pub fn decode_state(basis: &LogicalBasis, psi: &CVec) -> Decoded {
    decode(basis, &(psi * psi.adjoint()))
}

/// S(θ) on the cavity: e^{iθ} on |2⟩, identity elsewhere.
pub fn logical_s_theta(cavity_dim: usize, theta: f64) -> CMat {
    let mut m = CMat::identity(cavity_dim, cavity_dim);
    m[(2, 2)] = C64::from_polar(1.0, theta);
    m
}

/// S(θ) ⊗ I_ancilla.
pub fn logical_s_theta_op(space: TensorSpace, theta: f64) -> Result<Op> {
    let da = space.ancilla_dim();
    Op::new(space, kron(&logical_s_theta(space.cavity_dim(), theta), &CMat::identity(da, da)), format!("S({theta})"))
}

/// diag(1, e^{iθ}) on the logical qubit.
pub fn logical_z_rotation(theta: f64) -> CMat {
    let mut m = CMat::identity(2, 2);
    m[(1, 1)] = C64::from_polar(1.0, theta);
    m
}

/// ⟨ψ|ρ|ψ⟩.
pub fn state_fidelity(rho: &CMat, psi: &CVec) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re
}

// ---------------------------------------------------------------------------
// Wigner function
// ---------------------------------------------------------------------------

/// Generalized Laguerre polynomials L_0^{(k)}(x) .. L_nmax^{(k)}(x).
fn laguerre_all(nmax: usize, k: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(1.0);
    if nmax >= 1 {
        out.push(1.0 + k - x);
    }
    for i in 1..nmax {
        let i_f = i as f64;
        let next = ((2.0 * i_f + 1.0 + k - x) * out[i] - (i_f + k) * out[i - 1]) / (i_f + 1.0);
        out.push(next);
    }
    out
}

/// W(α) = (2/π) Tr[D(α) Π D(−α) ρ], evaluated exactly from the Fock-basis
/// Wigner functions of |m⟩⟨n|:
/// W_{mn}(α) = (2/π)(−1)^n √(n!/m!) (2α*)^{m−n} e^{−2|α|²} L_n^{(m−n)}(4|α|²), m ≥ n.
pub fn wigner_point(rho: &CMat, alpha: C64) -> f64 {
    let d = rho.nrows();
    let r2 = alpha.norm_sqr();
    let x = 4.0 * r2;
    let gauss = (-2.0 * r2).exp();
    let two_ac = alpha.conj() * 2.0;
    let mut acc = 0.0;
    for k in 0..d {
        // pairs (m, n) = (n + k, n)
        let lag = laguerre_all(d - 1 - k, k as f64, x);
        let mut pow = ONE;
        for _ in 0..k {
            pow *= two_ac;
        }
        // ratio √(n!/(n+k)!) updated incrementally
        let mut ratio: f64 = (1..=k).map(|j| 1.0 / (j as f64).sqrt()).product();
        for n in 0..d - k {
            if n > 0 {
                ratio *= (n as f64 / (n + k) as f64).sqrt();
            }
            let m = n + k;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let w = pow * (sign * ratio * lag[n]);
            if k == 0 {
                acc += (rho[(n, n)] * w).re;
            } else {
                // ρ_mn W_{mn} + ρ_nm W_{nm}, W_{nm} = conj(W_{mn})
                acc += 2.0 * (rho[(m, n)] * w).re;
            }
        }
    }
    acc * gauss * 2.0 / PI
}

/// Square grid with `points` samples per axis over [−extent, extent]².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    pub extent: f64,
    pub points: usize,
}

impl AlphaGrid {
    pub fn new(extent: f64, points: usize) -> Result<Self> {
        if !(extent > 0.0) || points < 2 {
            return Err(Error::param("grid", "extent must be > 0 and points ≥ 2"));
        }
        Ok(Self { extent, points })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.extent / (self.points - 1) as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.points).map(|i| -self.extent + i as f64 * self.step()).collect()
    }

    /// Points ordered with Im α slowest, Re α fastest.
    pub fn alphas(&self) -> Vec<C64> {
        let ax = self.axis();
        ax.iter().flat_map(|&y| ax.iter().map(move |&x| c64(x, y))).collect()
    }
}

/// Wigner function over arbitrary points. Warns when the state has weight
/// at the top of the truncated Fock space.
pub fn wigner(rho_cavity: &CMat, alphas: &[C64]) -> Checked<Vec<f64>> {
    let values: Vec<f64> = alphas.par_iter().map(|&a| wigner_point(rho_cavity, a)).collect();
    let d = rho_cavity.nrows();
    let mut diagnostics = Vec::new();
    let edge = rho_cavity[(d - 1, d - 1)].re;
    if edge > 1e-6 {
        diagnostics.push(Diagnostic::new(
            "fock_truncation",
            format!("population {edge:.2e} in the highest Fock state {}; the state may be truncated", d - 1),
        ));
    }
    Checked { value: values, diagnostics }
}

pub fn wigner_csv(alphas: &[C64], values: &[f64]) -> String {
    let mut s = String::from("alpha_re,alpha_im,W\n");
    for (a, w) in alphas.iter().zip(values) {
        s.push_str(&format!("{},{},{}\n", a.re, a.im, w));
    }
    s
}

// ---------------------------------------------------------------------------
// Logical channels
// ---------------------------------------------------------------------------

pub fn paulis() -> [CMat; 4] {
    let mut x = CMat::zeros(2, 2);
    x[(0, 1)] = ONE;
    x[(1, 0)] = ONE;
    let mut y = CMat::zeros(2, 2);
    y[(0, 1)] = -I;
    y[(1, 0)] = I;
    let mut z = CMat::identity(2, 2);
    z[(1, 1)] = -ONE;
    [CMat::identity(2, 2), x, y, z]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalChannel {
    /// Pauli transfer matrix rows.
    pub ptm: [[f64; 4]; 4],
    /// Population that left the code space (replaced by I/2) during
    /// reconstruction, averaged over inputs.
    pub leakage: f64,
}

impl LogicalChannel {
    pub fn from_ptm(m: Matrix4<f64>) -> Self {
        let mut ptm = [[0.0; 4]; 4];
        for (i, row) in ptm.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
        Self { ptm, leakage: 0.0 }
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.ptm[i][j])
    }

    pub fn identity() -> Self {
        Self::from_ptm(Matrix4::identity())
    }

    /// Unitary channel ρ ↦ U ρ U†.
    pub fn unitary(u: &CMat) -> Self {
        Self::from_map(|m| u * m * u.adjoint())
    }

    /// ρ ↦ (1−p) ρ + p I/2.
    pub fn depolarizing(p: f64) -> Self {
        let l = 1.0 - p;
        Self::from_ptm(Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, l, l, l)))
    }

    /// Depolarizing channel whose RB decay contribution is exactly γ:
    /// Bloch shrink factor e^{−γ}.
    pub fn depolarizing_decay(gamma: f64) -> Self {
        Self::depolarizing(1.0 - (-gamma).exp())
    }

    /// PTM of an arbitrary linear map on 2×2 matrices.
    pub fn from_map(mut f: impl FnMut(&CMat) -> CMat) -> Self {
        let p = paulis();
        let images: Vec<CMat> = p.iter().map(&mut f).collect();
        Self::from_ptm(Matrix4::from_fn(|i, j| 0.5 * (&p[i] * &images[j]).trace().re))
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let p = paulis();
        let coeffs: Vec<f64> = p.iter().map(|pj| 0.5 * (pj * rho).trace().re).collect();
        let r = self.matrix();
        let mut out = CMat::zeros(2, 2);
        for i in 0..4 {
            let c: f64 = (0..4).map(|j| r[(i, j)] * coeffs[j]).sum();
            out += &p[i] * c64(c, 0.0);
        }
        out
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &LogicalChannel) -> LogicalChannel {
        let mut out = Self::from_ptm(next.matrix() * self.matrix());
        out.leakage = 1.0 - (1.0 - self.leakage) * (1.0 - next.leakage);
        out
    }

    /// Normalized Choi matrix Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|) / 2.
    pub fn choi(&self) -> CMat {
        let mut j = CMat::zeros(4, 4);
        for a in 0..2 {
            for b in 0..2 {
                let mut e = CMat::zeros(2, 2);
                e[(a, b)] = ONE;
                let img = self.apply_general(&e);
                for r in 0..2 {
                    for c in 0..2 {
                        j[(2 * a + r, 2 * b + c)] = img[(r, c)] * 0.5;
                    }
                }
            }
        }
        j
    }

    /// Apply to a non-Hermitian operator (complex Pauli coefficients).
    fn apply_general(&self, m: &CMat) -> CMat {
        let p = paulis();
        let coeffs: Vec<C64> = p.iter().map(|pj| (pj * m).trace() * 0.5).collect();
        let r = self.matrix();
        let mut out = CMat::zeros(2, 2);
        for i in 0..4 {
            let c: C64 = (0..4).map(|j| coeffs[j] * r[(i, j)]).sum();
            out += &p[i] * c;
        }
        out
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.choi()).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Deviation of the first PTM row from (1, 0, 0, 0).
    pub fn trace_deviation(&self) -> f64 {
        let r = self.ptm[0];
        (r[0] - 1.0).abs().max(r[1].abs()).max(r[2].abs()).max(r[3].abs())
    }

    /// Process fidelity to a target unitary (phase-blind).
    pub fn process_fidelity(&self, target: &CMat) -> f64 {
        let t = Self::unitary(target).matrix();
        (t.transpose() * self.matrix()).trace() / 4.0
    }

    pub fn average_gate_fidelity(&self, target: &CMat) -> f64 {
        (2.0 * self.process_fidelity(target) + 1.0) / 3.0
    }

    /// Depolarizing-equivalent Bloch shrink factor λ = (4 F_pro − 1)/3.
    pub fn shrink_factor(&self, target: &CMat) -> f64 {
        (4.0 * self.process_fidelity(target) - 1.0) / 3.0
    }

    /// Error in the RB decay-rate convention: −ln λ. Equals the increase of
    /// γ in A e^{−γn} + 1/2 when the channel is interleaved.
    pub fn decay_error(&self, target: &CMat) -> f64 {
        let l = self.shrink_factor(target);
        if l > 0.0 {
            -l.ln()
        } else {
            f64::INFINITY
        }
    }
}

/// Tomography inputs: logical |0⟩, |1⟩, |+⟩, |+i⟩ as Bloch vectors.
pub const TOMOGRAPHY_INPUTS: [[f64; 3]; 4] = [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];

/// Reconstruct the logical channel of `runner`, which maps an encoded cavity
/// state to an output cavity density matrix. Population outside the code is
/// replaced by the maximally mixed logical state.
pub fn channel_tomography<F>(basis: &LogicalBasis, runner: F) -> Result<Checked<LogicalChannel>>
where
    F: Fn(&CVec) -> Result<CMat> + Sync,
{
    let outputs: Vec<(CMat, f64)> = TOMOGRAPHY_INPUTS
        .par_iter()
        .map(|&b| -> Result<(CMat, f64)> {
            let psi = encode(basis, b)?;
            let rho = runner(&psi)?;
            let mut rho_l = basis.compress(&rho);
            let inside = (rho_l[(0, 0)] + rho_l[(1, 1)]).re;
            let leak = (rho.trace().re - inside).max(0.0);
            rho_l[(0, 0)] += c64(0.5 * leak, 0.0);
            rho_l[(1, 1)] += c64(0.5 * leak, 0.0);
            Ok((rho_l, leak))
        })
        .collect::<Result<_>>()?;
    let e0 = &outputs[0].0;
    let e1 = &outputs[1].0;
    let ep = &outputs[2].0;
    let ei = &outputs[3].0;
    let images = [e0 + e1, ep * c64(2.0, 0.0) - e0 - e1, ei * c64(2.0, 0.0) - e0 - e1, e0 - e1];
    let p = paulis();
    let mut chan = LogicalChannel::from_ptm(Matrix4::from_fn(|i, j| 0.5 * (&p[i] * &images[j]).trace().re));
    chan.leakage = outputs.iter().map(|o| o.1).sum::<f64>() / 4.0;

    let mut diagnostics = Vec::new();
    let min_eig = chan.min_choi_eigenvalue();
    if min_eig < -1e-7 {
        return Err(Error::NonPhysical(format!("reconstructed channel has Choi eigenvalue {min_eig:.3e}")));
    }
    if chan.trace_deviation() > 1e-8 {
        diagnostics.push(Diagnostic::new(
            "trace_deviation",
            format!("channel deviates from trace preservation by {:.3e}", chan.trace_deviation()),
        ));
    }
    if chan.leakage > 0.0 {
        diagnostics.push(Diagnostic::new("leakage", format!("mean code-space leakage {:.3e}", chan.leakage)));
    }
    Ok(Checked { value: chan, diagnostics })
}

/// Convenience for tests and callers: code-space embedding of a logical
/// state's density matrix.
pub fn encoded_density(basis: &LogicalBasis, bloch: [f64; 3]) -> Result<CMat> {
    let psi = encode(basis, bloch)?;
    Ok(&psi * psi.adjoint())
}

pub fn zero_logical() -> CMat {
    CMat::from_element(2, 2, ZERO)
}
