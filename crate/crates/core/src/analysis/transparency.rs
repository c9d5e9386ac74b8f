//! Error-transparency classification of jump operators against H0.
//!
//! For each jump J the commutator C = [H0, J] is compared with J·H_A. If C
//! vanishes the jump is transparent; if C = J·H_A for some H_A commuting with
//! H0 the jump only imprints a known rotation, which is ancilla-only when H_A
//! acts trivially on the cavity. Residuals are relative to ‖H0‖·‖J‖.

use serde::Serialize;

use crate::device::{JumpLabel, JumpOp};
use crate::hilbert::{c64, kron, max_abs, CMat, Op, TensorSpace};
use crate::error::Result;

const TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Transparency {
    Zero,
    /// [H0, J] = J·(I ⊗ h) with h on the ancilla.
    AncillaOnly {
        #[serde(skip)]
        h_a: CMat,
        residual: f64,
    },
    /// [H0, J] = J·H_A with H_A acting on the cavity; H_A is the minimum-norm
    /// solution (defined on the support of J).
    CavityDependent {
        #[serde(skip)]
        h_a: CMat,
        residual: f64,
    },
    Violation { residual: f64 },
}

impl Transparency {
    pub fn h_a(&self) -> Option<&CMat> {
        match self {
            Transparency::AncillaOnly { h_a, .. } | Transparency::CavityDependent { h_a, .. } => Some(h_a),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Transparency::Zero => "zero",
            Transparency::AncillaOnly { .. } => "ancilla_only",
            Transparency::CavityDependent { .. } => "cavity_dependent",
            Transparency::Violation { .. } => "violation",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TransparencyEntry {
    pub label: String,
    pub op_label: String,
    #[serde(flatten)]
    pub class: Transparency,
}

fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Least-squares h (d_a × d_a) for J·(I⊗h) = C, with its relative residual.
fn ancilla_factor(space: TensorSpace, j: &CMat, c: &CMat, scale: f64) -> (CMat, f64) {
    let da = space.ancilla_dim();
    let dc = space.cavity_dim();
    let n = space.dim();
    let mut design = CMat::zeros(n * n, da * da);
    for p in 0..da {
        for q in 0..da {
            let mut e = CMat::zeros(da, da);
            e[(p, q)] = c64(1.0, 0.0);
            let col = j * kron(&CMat::identity(dc, dc), &e);
            for (r, z) in col.iter().enumerate() {
                design[(r, p * da + q)] = *z;
            }
        }
    }
    let rhs = CMat::from_iterator(n * n, 1, c.iter().copied());
    let sol = design.clone().pseudo_inverse(1e-12).expect("svd") * &rhs;
    let resid = fro(&(design * &sol - rhs)) / scale;
    let h = CMat::from_fn(da, da, |p, q| sol[(p * da + q, 0)]);
    (kron(&CMat::identity(dc, dc), &h), resid)
}

pub fn classify(h0: &Op, j: &Op) -> Result<Transparency> {
    h0.space().ensure_same(&j.space())?;
    let space = h0.space();
    let (h, jm) = (h0.matrix(), j.matrix());
    let c = h * jm - jm * h;
    let scale = (fro(h) * fro(jm)).max(f64::MIN_POSITIVE);
    if fro(&c) / scale < TOL {
        return Ok(Transparency::Zero);
    }
    let (h_anc, r_anc) = ancilla_factor(space, jm, &c, scale);
    if r_anc < TOL && max_abs(&(h * &h_anc - &h_anc * h)) / fro(h) < TOL {
        return Ok(Transparency::AncillaOnly { h_a: h_anc, residual: r_anc });
    }
    let h_a = jm.clone().pseudo_inverse(1e-12 * fro(jm)).expect("svd") * &c;
    let residual = fro(&(jm * &h_a - &c)) / scale;
    let commutes = fro(&(h * &h_a - &h_a * h)) / (fro(h) * fro(&h_a)).max(f64::MIN_POSITIVE) < TOL;
    if residual < TOL && commutes {
        Ok(Transparency::CavityDependent { h_a, residual })
    } else {
        Ok(Transparency::Violation { residual: residual.max(if commutes { 0.0 } else { 1.0 }) })
    }
}

/// Classifies every jump operator (rates are irrelevant here).
pub fn check_error_transparency(h0: &Op, jumps: &[JumpOp]) -> Result<Vec<TransparencyEntry>> {
    jumps
        .iter()
        .map(|jo| {
            Ok(TransparencyEntry {
                label: jo.label.as_str().to_string(),
                op_label: jo.op.label().to_string(),
                class: classify(h0, &jo.op)?,
            })
        })
        .collect()
}

/// Convenience: wrap a bare operator as a unit-rate jump for reporting.
pub fn as_jump(op: Op, label: JumpLabel) -> Result<JumpOp> {
    JumpOp::new(op, 1.0, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{build_h0, DeviceParams};
    use crate::hilbert::{ancilla_projector, ancilla_transition, annihilation, number, Level};

    fn setup() -> (TensorSpace, DeviceParams, Op) {
        let s = TensorSpace::new(6, 3).unwrap();
        let p = DeviceParams { kerr_enabled: false, ..DeviceParams::default() };
        let h0 = build_h0(&p, s).unwrap();
        (s, p, h0)
    }

    #[test]
    fn dephasing_projector_commutes() {
        let (s, _, h0) = setup();
        let j = ancilla_projector(s, Level::F).unwrap();
        assert!(matches!(classify(&h0, &j).unwrap(), Transparency::Zero));
    }

    #[test]
    fn ef_relaxation_gives_cavity_rotation() {
        let (s, p, h0) = setup();
        let j = ancilla_transition(s, Level::F, Level::E).unwrap();
        let c = classify(&h0, &j).unwrap();
        let Transparency::CavityDependent { h_a, residual } = &c else { panic!("{c:?}") };
        assert!(*residual < 1e-9);
        let expected = number(s).scale_real(p.chi_e.0 - p.chi_f.0).into_matrix();
        let got = j.matrix() * h_a;
        let want = j.matrix() * &expected;
        assert!(max_abs(&(got - want)) < 1e-9 * p.chi_f.0.abs());

        // matched shifts: transparent
        let hm = build_h0(&p.matched(), s).unwrap();
        assert!(matches!(classify(&hm, &j).unwrap(), Transparency::Zero));
    }

    #[test]
    fn cavity_loss_gives_ancilla_factor() {
        let (s, p, h0) = setup();
        let a = annihilation(s);
        let c = classify(&h0, &a).unwrap();
        let Transparency::AncillaOnly { h_a, .. } = &c else { panic!("{c:?}") };
        let pe = ancilla_projector(s, Level::E).unwrap().scale_real(p.chi_e.0);
        let pf = ancilla_projector(s, Level::F).unwrap().scale_real(p.chi_f.0);
        let expected = pe.add(&pf).unwrap().scale_real(-1.0);
        assert!(max_abs(&(h_a - expected.matrix())) < 1e-9 * p.chi_f.0.abs());
    }

    #[test]
    fn kerr_makes_loss_cavity_dependent() {
        let s = TensorSpace::new(6, 3).unwrap();
        let h0 = build_h0(&DeviceParams::default(), s).unwrap();
        let c = classify(&h0, &annihilation(s)).unwrap();
        assert_eq!(c.name(), "cavity_dependent");
    }
}
