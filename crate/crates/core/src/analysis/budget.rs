//! Analytic error budget of the corrected gate as a four-layer tree:
//! single SNAP-segment events, second-order events, ancilla transitions
//! during readout, and readout errors independent of the ancilla.
//!
//! Event probabilities are Poisson, 1 − e^{−∫rate}, with the |f⟩ occupation
//! taken from the ideal pulse area, P_f(t) = sin²A(t). During the swap the
//! ancilla is in |f⟩ for the first half.

use serde::Serialize;

use crate::analysis::rwa::fock_spread;
use crate::codes::LogicalBasis;
use crate::device::{build_error_transparency_shift, DeviceParams, DriveModel};
use crate::error::Result;
use crate::hilbert::{cavity, c64, TensorSpace};
use crate::protocol::ProtocolConfig;

const QUAD: usize = 4000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorBudgetNode {
    pub label: String,
    pub p_coherent: f64,
    pub p_dephased: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ErrorBudgetNode>,
    #[serde(skip)]
    excited: bool,
}

impl ErrorBudgetNode {
    pub fn probability(&self) -> f64 {
        self.p_coherent + self.p_dephased
    }

    /// Nodes at depth `d` (root is depth 0).
    pub fn layer(&self, d: usize) -> Vec<&ErrorBudgetNode> {
        if d == 0 {
            return vec![self];
        }
        self.children.iter().flat_map(|c| c.layer(d - 1)).collect()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }
}

/// Integrated quantities the tree is built from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetInputs {
    pub snap_duration_s: f64,
    pub swap_duration_s: f64,
    pub measurement_duration_s: f64,
    pub time_in_f_s: f64,
    pub time_in_g_s: f64,
    pub gf_overlap_s: f64,
    pub remaining_after_f_s: f64,
    pub mean_photon_number: f64,
    pub fock_spread: f64,
    pub et_leakage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub inputs: BudgetInputs,
    pub tree: ErrorBudgetNode,
    pub layer_sums: Vec<f64>,
    /// Dephased probability after the last layer.
    pub total_error: f64,
    /// Probability of the "No Error" branch of the first layer: every other
    /// branch dephases the uncorrected gate.
    pub nc_fidelity: f64,
}

impl ErrorBudget {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("budget serializes")
    }
}

struct Event {
    label: &'static str,
    p: f64,
    dephases: bool,
    excited: bool,
}

fn poisson(x: f64) -> f64 {
    1.0 - (-x).exp()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / QUAD as f64;
    let mut s = f(a) + f(b);
    for i in 1..QUAD {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Splits `parent` over `events` (conditional probabilities); the remainder
/// goes to a "No Error" child that keeps the parent's ancilla state.
fn split(parent: &ErrorBudgetNode, events: &[Event]) -> Vec<ErrorBudgetNode> {
    let mass = parent.probability();
    let parent_dephased = parent.p_dephased > 0.0 && parent.p_coherent == 0.0;
    let mut out = Vec::new();
    let mut used = 0.0;
    for e in events.iter().filter(|e| e.p > 0.0) {
        used += e.p;
        out.push(node(e.label, mass * e.p, parent_dephased || e.dephases, e.excited));
    }
    let rest = mass * (1.0 - used);
    if rest > 0.0 || out.is_empty() {
        out.push(node("No Error", rest, parent_dephased, parent.excited));
    }
    out
}

fn node(label: &str, p: f64, dephased: bool, excited: bool) -> ErrorBudgetNode {
    let (p_coherent, p_dephased) = if dephased { (0.0, p) } else { (p, 0.0) };
    ErrorBudgetNode { label: label.into(), p_coherent, p_dephased, children: Vec::new(), excited }
}

/// Mean photon number of the code words.
fn code_photon_number(cavity_dim: usize) -> Result<f64> {
    let basis = LogicalBasis::new(cavity_dim)?;
    let iso = basis.isometry();
    let n = cavity::number(cavity_dim);
    let m = iso.adjoint() * n * &iso;
    Ok(((m[(0, 0)] + m[(1, 1)]) * c64(0.5, 0.0)).re)
}

pub fn build_error_budget(params: &DeviceParams, config: &ProtocolConfig, cavity_dim: usize) -> Result<ErrorBudget> {
    config.validate()?;
    params.validate()?;
    let drive = config.drive();
    let ts = config.snap_duration.0;
    let tsw = config.swap_duration.0;
    let tm = config.measurement_duration.0;
    let t_end = ts + tsw;
    let p_f = |t: f64| {
        if t <= ts {
            drive.area_to(t).sin().powi(2)
        } else if t <= ts + 0.5 * tsw {
            1.0
        } else {
            0.0
        }
    };
    let tau_f = simpson(|t| drive.area_to(t).sin().powi(2), 0.0, ts) + 0.5 * tsw;
    let tau_g = t_end - tau_f;
    let overlap = simpson(|t| (drive.area_to(t).sin() * drive.area_to(t).cos()).powi(2), 0.0, ts);
    let remaining = if tau_f > 0.0 {
        (simpson(|t| p_f(t) * (t_end - t), 0.0, ts) + simpson(|t| t_end - t, ts, ts + 0.5 * tsw)) / tau_f
    } else {
        0.0
    };
    let nbar = code_photon_number(cavity_dim)?;
    let et_on = config.et_drive_on;
    let leakage = if et_on {
        build_error_transparency_shift(config.sideband_g.0, config.sideband_delta.0)?.value.leakage
    } else {
        0.0
    };
    let has_noise = params.gamma_ef() + params.injected_ef_noise_rate.0 + params.gf_dephasing_rate() > 0.0;
    let spread = if config.drive_model == DriveModel::FullComb && has_noise {
        fock_spread(params, &drive, TensorSpace::new(cavity_dim, 3)?, 101)?.mean
    } else {
        0.0
    };

    let g_ef = params.gamma_ef() + params.injected_ef_noise_rate.0;
    let p_fe = poisson(g_ef * tau_f);
    let p_deph = poisson(2.0 * params.gf_dephasing_rate() * overlap);
    let p_loss = poisson(params.gamma_cavity() * nbar * t_end);
    let p_th = poisson(params.gamma_thermal() * tau_g);

    let mut root = node("Start", 1.0, false, false);
    root.children = split(
        &root,
        &[
            Event { label: "f→e relaxation", p: p_fe, dephases: !et_on, excited: true },
            Event { label: "g–f dephasing", p: p_deph, dephases: false, excited: false },
            Event { label: "cavity loss (SNAP)", p: p_loss, dephases: true, excited: false },
            Event { label: "thermal g→e (SNAP)", p: p_th, dephases: true, excited: true },
        ],
    );
    let nc_fidelity = root.children.iter().find(|c| c.label == "No Error").map_or(0.0, |c| c.probability());

    let q_eg = poisson(params.gamma_ge() * remaining);
    let q_up = poisson(params.injected_ef_noise_rate.0 * remaining);
    for c in &mut root.children {
        let events = match c.label.as_str() {
            "f→e relaxation" => vec![
                Event { label: "e→g (SNAP)", p: q_eg, dephases: true, excited: false },
                Event { label: "e→f re-excitation", p: q_up, dephases: true, excited: false },
                Event { label: "|h⟩ hybridization", p: leakage, dephases: true, excited: true },
                Event { label: "back-action", p: spread, dephases: true, excited: true },
            ],
            "g–f dephasing" => vec![Event { label: "back-action", p: spread, dephases: true, excited: false }],
            _ => vec![],
        };
        c.children = split(c, &events);
    }

    let r_eg = poisson(params.gamma_ge() * tm);
    let r_th = poisson(params.gamma_thermal() * tm);
    let r_loss = poisson(params.gamma_cavity() * nbar * tm);
    for l1 in &mut root.children {
        for l2 in &mut l1.children {
            let anc = if l2.excited {
                Event { label: "e→g (readout)", p: r_eg, dephases: true, excited: false }
            } else {
                Event { label: "thermal g→e (readout)", p: r_th, dephases: true, excited: true }
            };
            l2.children = split(l2, &[anc, Event { label: "cavity loss (readout)", p: r_loss, dephases: true, excited: false }]);
            for l3 in &mut l2.children {
                l3.children = split(
                    l3,
                    &[Event { label: "readout cross-Kerr", p: config.readout_dephasing, dephases: true, excited: false }],
                );
            }
        }
    }

    let depth = root.depth();
    let layer_sums: Vec<f64> = (1..depth).map(|d| root.layer(d).iter().map(|n| n.probability()).sum()).collect();
    let total_error = root.layer(depth - 1).iter().map(|n| n.p_dephased).sum();
    Ok(ErrorBudget {
        inputs: BudgetInputs {
            snap_duration_s: ts,
            swap_duration_s: tsw,
            measurement_duration_s: tm,
            time_in_f_s: tau_f,
            time_in_g_s: tau_g,
            gf_overlap_s: overlap,
            remaining_after_f_s: remaining,
            mean_photon_number: nbar,
            fock_spread: spread,
            et_leakage: leakage,
        },
        tree: root,
        layer_sums,
        total_error,
        nc_fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Variant;
    use crate::units::Seconds;

    fn cfg() -> ProtocolConfig {
        let mut c = ProtocolConfig::new(Variant::C, std::f64::consts::FRAC_PI_2, Seconds::us(2.0));
        c.measurement_duration = Seconds::us(2.0);
        c.readout_dephasing = 0.005;
        c
    }

    #[test]
    fn noiseless_budget_is_a_single_path() {
        let mut c = cfg();
        c.readout_dephasing = 0.0;
        let b = build_error_budget(&DeviceParams::noiseless(), &c, 5).unwrap();
        assert_eq!(b.total_error, 0.0);
        assert_eq!(b.nc_fidelity, 1.0);
        for d in 1..b.tree.depth() {
            let layer = b.tree.layer(d);
            assert_eq!(layer.len(), 1);
            assert_eq!(layer[0].label, "No Error");
        }
    }

    #[test]
    fn layers_sum_to_one() {
        let b = build_error_budget(&DeviceParams::default(), &cfg(), 5).unwrap();
        assert_eq!(b.layer_sums.len(), 4);
        for s in &b.layer_sums {
            assert!((s - 1.0).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn code_words_carry_two_photons() {
        assert!((code_photon_number(5).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn time_in_f_for_constant_pulse() {
        // sin² of a linear ramp to π/2 averages to 1/2
        let mut c = cfg();
        c.envelope = crate::device::EnvelopeShape::Constant;
        let b = build_error_budget(&DeviceParams::default(), &c, 5).unwrap();
        let want = 0.5 * c.snap_duration.0 + 0.5 * c.swap_duration.0;
        assert!((b.inputs.time_in_f_s - want).abs() < 1e-12);
        // ∫ sin²cos² over the ramp is T/8
        assert!((b.inputs.gf_overlap_s - c.snap_duration.0 / 8.0).abs() < 1e-12);
    }
}
