//! Randomized benchmarking on the logical qubit with ideal Clifford channels,
//! an optional depolarizing floor, and an optional interleaved gate.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::LogicalChannel;
use crate::error::{Diagnostic, Error, Result};
use crate::hilbert::{c64, max_abs, CMat};
use crate::rng;

/// The 24 single-qubit Cliffords modulo global phase, generated from H and S.
pub fn clifford_group() -> Vec<CMat> {
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let h = CMat::from_row_slice(2, 2, &[c64(s2, 0.0), c64(s2, 0.0), c64(s2, 0.0), c64(-s2, 0.0)]);
    let s = CMat::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 1.0)]);
    let mut group = vec![CMat::identity(2, 2)];
    let mut frontier = group.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for u in &frontier {
            for g in [&h, &s] {
                let v = canonical_phase(&(g * u));
                if !group.iter().any(|w| max_abs(&(w - &v)) < 1e-9) {
                    group.push(v.clone());
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    group
}

fn canonical_phase(u: &CMat) -> CMat {
    let pivot = u.iter().find(|z| z.norm() > 1e-6).copied().unwrap_or(c64(1.0, 0.0));
    u * (pivot.conj() / pivot.norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    pub n_sequences: usize,
    #[serde(default)]
    pub seed: u64,
    /// Background error per Clifford as a decay contribution γ.
    #[serde(default = "default_clifford_error")]
    pub clifford_error: f64,
    /// Finite measurement shots per sequence; exact probabilities when absent.
    #[serde(default)]
    pub shots: Option<u32>,
    /// Symmetric readout assignment error.
    #[serde(default)]
    pub assignment_error: f64,
}

fn default_clifford_error() -> f64 {
    0.025
}

impl Default for RbConfig {
    fn default() -> Self {
        Self {
            lengths: vec![1, 5, 10, 20, 40, 70, 100],
            n_sequences: 50,
            seed: 0,
            clifford_error: default_clifford_error(),
            shots: None,
            assignment_error: 0.0,
        }
    }
}

impl RbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sequences < 20 {
            return Err(Error::param("n_sequences", "must be at least 20"));
        }
        if self.lengths.is_empty() || self.lengths.len() < 3 {
            return Err(Error::param("lengths", "need at least three sequence lengths"));
        }
        if !(0.0..=0.5).contains(&self.assignment_error) {
            return Err(Error::param("assignment_error", "must lie in [0, 0.5]"));
        }
        if !(self.clifford_error >= 0.0 && self.clifford_error.is_finite()) {
            return Err(Error::param("clifford_error", "must be non-negative"));
        }
        if self.shots == Some(0) {
            return Err(Error::param("shots", "must be positive"));
        }
        Ok(())
    }
}

/// Gate under test: its simulated channel and the ideal logical unitary.
#[derive(Clone, Debug)]
pub struct Interleaved {
    pub channel: LogicalChannel,
    pub target: CMat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub a: f64,
    pub gamma: f64,
    pub a_stderr: f64,
    pub gamma_stderr: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbResult {
    pub interleaved: bool,
    pub lengths: Vec<usize>,
    pub survival: Vec<f64>,
    pub survival_stderr: Vec<f64>,
    pub fit: Option<ExpFit>,
    pub diagnostics: Vec<Diagnostic>,
}

impl RbResult {
    pub fn gamma(&self) -> Option<(f64, f64)> {
        self.fit.as_ref().map(|f| (f.gamma, f.gamma_stderr))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        if let Some(f) = &self.fit {
            s.push_str(&format!(
                "# model: A*exp(-gamma*n) + 1/2; A = {:.8e} +- {:.3e}; gamma = {:.8e} +- {:.3e}; rms_residual = {:.3e}\n",
                f.a, f.a_stderr, f.gamma, f.gamma_stderr, f.rms_residual
            ));
        } else {
            s.push_str("# fit did not converge; raw data only\n");
        }
        s.push_str("length,survival,stderr,model\n");
        for (i, n) in self.lengths.iter().enumerate() {
            let model = self.fit.as_ref().map(|f| f.a * (-f.gamma * *n as f64).exp() + 0.5);
            s.push_str(&format!(
                "{},{:.10},{:.10},{}\n",
                n,
                self.survival[i],
                self.survival_stderr[i],
                model.map(|m| format!("{m:.10}")).unwrap_or_default()
            ));
        }
        s
    }
}

/// Probability of decoding |0⟩ after the Clifford sequence `indices`
/// (each followed by the floor and, if present, the interleaved gate) and
/// the ideal inverse.
pub fn sequence_survival(
    cliffords: &[CMat],
    ptms: &[Matrix4<f64>],
    indices: &[usize],
    floor: &Matrix4<f64>,
    gate: Option<(&Matrix4<f64>, &CMat)>,
) -> f64 {
    let mut bloch = Vector4::new(1.0, 0.0, 0.0, 1.0);
    let mut net = CMat::identity(2, 2);
    for &k in indices {
        bloch = floor * (ptms[k] * bloch);
        net = &cliffords[k] * net;
        if let Some((g, t)) = gate {
            bloch = g * bloch;
            net = t * net;
        }
    }
    let inv = LogicalChannel::unitary(&net.adjoint()).matrix();
    bloch = floor * (inv * bloch);
    (0.5 * (bloch[0] + bloch[3])).clamp(0.0, 1.0)
}

pub fn run_rb(gate: Option<&Interleaved>, config: &RbConfig) -> Result<RbResult> {
    config.validate()?;
    let cliffords = clifford_group();
    let ptms: Vec<Matrix4<f64>> = cliffords.iter().map(|u| LogicalChannel::unitary(u).matrix()).collect();
    let floor = LogicalChannel::depolarizing_decay(config.clifford_error).matrix();
    let gate_ptm = gate.map(|g| (g.channel.matrix(), g.target.clone()));
    let eps = config.assignment_error;

    let per_length: Vec<(f64, f64)> = config
        .lengths
        .par_iter()
        .enumerate()
        .map(|(li, &n)| {
            let samples: Vec<f64> = (0..config.n_sequences)
                .into_par_iter()
                .map(|si| {
                    let mut r = rng::stream(config.seed, (li * config.n_sequences + si) as u64);
                    let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..cliffords.len())).collect();
                    let p0 = sequence_survival(&cliffords, &ptms, &idx, &floor, gate_ptm.as_ref().map(|(m, t)| (m, t)));
                    let p = (1.0 - eps) * p0 + eps * (1.0 - p0);
                    match config.shots {
                        None => p,
                        Some(shots) => (0..shots).filter(|_| r.random_bool(p)).count() as f64 / shots as f64,
                    }
                })
                .collect();
            mean_stderr(&samples)
        })
        .collect();

    let lengths = config.lengths.clone();
    let survival: Vec<f64> = per_length.iter().map(|p| p.0).collect();
    let survival_stderr: Vec<f64> = per_length.iter().map(|p| p.1).collect();
    let xs: Vec<f64> = lengths.iter().map(|&n| n as f64).collect();
    let mut diagnostics = Vec::new();
    let fit = match fit_exponential(&xs, &survival, &survival_stderr) {
        Ok(f) => Some(f),
        Err(e) => {
            diagnostics.push(Diagnostic::new("fit_failed", e.to_string()));
            None
        }
    };
    Ok(RbResult { interleaved: gate.is_some(), lengths, survival, survival_stderr, fit, diagnostics })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrbResult {
    pub reference: RbResult,
    pub interleaved: RbResult,
    /// γ_IRB − γ_RB and its standard error.
    pub gate_error: Option<(f64, f64)>,
}

/// Reference and interleaved runs with the same Clifford sequences.
pub fn run_irb(gate: &Interleaved, config: &RbConfig) -> Result<IrbResult> {
    let reference = run_rb(None, config)?;
    let interleaved = run_rb(Some(gate), config)?;
    let gate_error = match (reference.gamma(), interleaved.gamma()) {
        (Some((g0, s0)), Some((g1, s1))) => Some((g1 - g0, s0.hypot(s1))),
        _ => None,
    };
    Ok(IrbResult { reference, interleaved, gate_error })
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Levenberg–Marquardt fit of y = A e^{−γx} + 1/2. Points are weighted by
/// 1/σ² when every σ is positive; parameter errors are scaled by the
/// reduced χ².
pub fn fit_exponential(xs: &[f64], ys: &[f64], sigmas: &[f64]) -> Result<ExpFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::FitFailed("need at least three points".into()));
    }
    let weighted = sigmas.len() == xs.len() && sigmas.iter().all(|s| *s > 0.0);
    let w: Vec<f64> = if weighted { sigmas.iter().map(|s| 1.0 / (s * s)).collect() } else { vec![1.0; xs.len()] };

    // log-linear start from points clearly above the asymptote
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(_, y)| **y - 0.5 > 1e-3).map(|(x, y)| (*x, (y - 0.5).ln())).collect();
    let (mut a, mut g) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = if sxx > 0.0 { pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx } else { 0.0 };
        ((my - slope * mx).exp(), -slope)
    } else {
        (0.5, 0.01)
    };

    let cost = |a: f64, g: f64| -> f64 {
        xs.iter().zip(ys).zip(&w).map(|((x, y), wi)| wi * (a * (-g * x).exp() + 0.5 - y).powi(2)).sum()
    };
    let normal = |a: f64, g: f64| -> (Matrix2<f64>, Vector2<f64>) {
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for ((x, y), wi) in xs.iter().zip(ys).zip(&w) {
            let e = (-g * x).exp();
            let jrow = Vector2::new(e, -a * x * e);
            let r = y - (a * e + 0.5);
            jtj += jrow * jrow.transpose() * *wi;
            jtr += jrow * (r * wi);
        }
        (jtj, jtr)
    };

    let mut lambda = 1e-3;
    let mut c = cost(a, g);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 500 {
        iterations += 1;
        let (jtj, jtr) = normal(a, g);
        let damped = jtj + Matrix2::from_diagonal(&jtj.diagonal()) * lambda;
        let Some(step) = damped.lu().solve(&jtr) else {
            lambda *= 10.0;
            continue;
        };
        let (na, ng) = (a + step[0], g + step[1]);
        let nc = cost(na, ng);
        if nc <= c {
            let small = step[0].abs() <= 1e-13 * (1.0 + a.abs()) && step[1].abs() <= 1e-13 * (1.0 + g.abs());
            let flat = c - nc <= 1e-15 * c.max(1e-300);
            a = na;
            g = ng;
            c = nc;
            lambda = (lambda / 10.0).max(1e-12);
            if small || flat || c < 1e-30 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }
    if !converged || !a.is_finite() || !g.is_finite() {
        return Err(Error::FitFailed(format!("no convergence after {iterations} iterations")));
    }
    let (jtj, _) = normal(a, g);
    let dof = (xs.len() - 2) as f64;
    let cov = jtj.try_inverse().ok_or_else(|| Error::FitFailed("singular normal matrix".into()))? * (c / dof);
    let unweighted: f64 =
        xs.iter().zip(ys).map(|(x, y)| (a * (-g * x).exp() + 0.5 - y).powi(2)).sum::<f64>() / xs.len() as f64;
    Ok(ExpFit {
        a,
        gamma: g,
        a_stderr: cov[(0, 0)].max(0.0).sqrt(),
        gamma_stderr: cov[(1, 1)].max(0.0).sqrt(),
        rms_residual: unweighted.sqrt(),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::logical_z_rotation;

    #[test]
    fn clifford_group_has_24_elements_and_is_closed() {
        let g = clifford_group();
        assert_eq!(g.len(), 24);
        for u in &g {
            for v in &g {
                let w = canonical_phase(&(u * v));
                assert!(g.iter().any(|x| max_abs(&(x - &w)) < 1e-9));
            }
        }
    }

    #[test]
    fn ideal_cliffords_give_zero_decay() {
        let cfg = RbConfig { clifford_error: 0.0, n_sequences: 20, ..RbConfig::default() };
        let r = run_rb(None, &cfg).unwrap();
        assert!(r.survival.iter().all(|s| (s - 1.0).abs() < 1e-12));
        let (g, se) = r.gamma().unwrap();
        assert!(g.abs() <= se.max(1e-9), "{g} {se}");
    }

    #[test]
    fn synthetic_exponential_recovered() {
        let xs: Vec<f64> = [1.0, 3.0, 8.0, 15.0, 30.0, 60.0].to_vec();
        let ys: Vec<f64> = xs.iter().map(|x| 0.47 * (-0.0312 * x).exp() + 0.5).collect();
        let f = fit_exponential(&xs, &ys, &[]).unwrap();
        assert!((f.gamma - 0.0312).abs() < 1e-6);
        assert!((f.a - 0.47).abs() < 1e-6);
    }

    #[test]
    fn depolarizing_interleave_matches_composition() {
        let cfg = RbConfig { n_sequences: 20, ..RbConfig::default() };
        let gate = Interleaved {
            channel: LogicalChannel::depolarizing_decay(0.05).then(&LogicalChannel::unitary(&logical_z_rotation(0.3))),
            target: logical_z_rotation(0.3),
        };
        let irb = run_irb(&gate, &cfg).unwrap();
        let (d, _) = irb.gate_error.unwrap();
        assert!((d - 0.05).abs() < 1e-6, "{d}");
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = RbConfig { n_sequences: 20, shots: Some(50), seed: 11, ..RbConfig::default() };
        let gate = Interleaved { channel: LogicalChannel::depolarizing_decay(0.02), target: CMat::identity(2, 2) };
        let a = run_rb(Some(&gate), &cfg).unwrap();
        let b = run_rb(Some(&gate), &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_rb(Some(&gate), &RbConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.survival, c.survival);
    }

    #[test]
    fn too_few_sequences_rejected() {
        let cfg = RbConfig { n_sequences: 5, ..RbConfig::default() };
        assert!(run_rb(None, &cfg).is_err());
    }
}
