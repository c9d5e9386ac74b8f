//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use snapsim::analysis::budget::build_error_budget;
use snapsim::analysis::graph::{bundled_graphs, check_path_independence, TransitionGraph};
use snapsim::analysis::rb::{run_irb, Interleaved, RbConfig};
use snapsim::analysis::rwa::{fock_spread, rwa_deficit};
use snapsim::analysis::sweep::{sweep_injected_noise, sweep_point, SweepResult};
use snapsim::analysis::transparency::{classify, Transparency};
use snapsim::codes::{logical_z_rotation, LogicalChannel};
use snapsim::device::{
    build_h0, build_h_int_effective, build_h_snap_timedependent, snap_operator, DeviceParams, DriveModel,
    DriveParams, JumpLabel, JumpOp, PulseEnvelope,
};
use snapsim::dynamics::{analytic_propagator, inject_jump, inject_jumps, EvolutionSpec, Hamiltonian};
use snapsim::hilbert::{
    ancilla, ancilla_transition, annihilation, c64, cavity, expm, kron, op_norm, CMat, Level, Op, StateVector,
    TensorSpace, C64,
};
use snapsim::units::{Angle, Seconds};
use snapsim_cli::config::RunConfig;

type Outcome = Result<String, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn config(name: &str) -> Result<RunConfig, String> {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    RunConfig::load(&p).map_err(err)
}

fn fidelity(a: &StateVector, b: &StateVector) -> f64 {
    a.inner(b).expect("same space").norm_sqr()
}

fn plus_x(s: TensorSpace) -> StateVector {
    let dc = s.cavity_dim();
    let cav = (cavity::fock(dc, 0) + cavity::fock(dc, 4)) * c64(0.5, 0.0) + cavity::fock(dc, 2) * c64(0.5f64.sqrt(), 0.0);
    StateVector::product(s, &cav, Level::G).expect("product")
}

fn snapped(s: TensorSpace, psi: &StateVector, drive: &DriveParams, level: Level) -> StateVector {
    let cav = snap_operator(s.cavity_dim(), &drive.theta_phases, 1.0) * psi.cavity_component(Level::G);
    StateVector::product(s, &cav, level).expect("product")
}

/// Effective rotating-frame drive with unit-rate jumps, 1 us square pulse.
fn rotating_frame(theta: f64, jumps: &[(CMat, JumpLabel)]) -> (TensorSpace, EvolutionSpec, DriveParams) {
    let s = TensorSpace::new(6, 3).expect("space");
    let drive = DriveParams::snap(theta, PulseEnvelope::constant(Seconds::us(1.0)));
    let h = build_h_int_effective(&drive, s).expect("h_int");
    let id = CMat::identity(6, 6);
    let ops = jumps
        .iter()
        .map(|(m, l)| {
            let op = if m.nrows() == s.dim() { m.clone() } else { kron(&id, m) };
            JumpOp::new(Op::new(s, op, l.as_str()).expect("op"), 1.0, *l).expect("jump")
        })
        .collect();
    (s, EvolutionSpec::new(h, ops, 1e-6).with_tolerance(1e-11), drive)
}

fn criterion_1() -> Outcome {
    let s = TensorSpace::new(12, 3).map_err(err)?;
    let mut rng = snapsim::rng::seeded(11);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let phases: Vec<(usize, Angle)> =
            [0usize, 2, 4].iter().map(|&k| (k, Angle(rng.random_range(-PI..PI)))).collect();
        let area = rng.random_range(0.0..2.0 * PI);
        let mut drive = DriveParams::snap(0.0, PulseEnvelope::constant(Seconds::us(1.0)));
        drive.theta_phases = phases.clone();
        let t = area / drive.omega.0;
        let h = build_h_int_effective(&drive, s).map_err(err)?;
        let numeric = expm(&(h.matrix() * C64::new(0.0, -t)));
        let analytic = analytic_propagator(s, &phases, area).map_err(err)?;
        worst = worst.max(op_norm(&(numeric - analytic.matrix())));
    }
    let line = format!("max operator-norm difference {worst:.2e} over 10 draws");
    if worst < 1e-9 { Ok(line) } else { Err(line) }
}

fn criterion_2() -> Outcome {
    let s = TensorSpace::new(8, 3).map_err(err)?;
    let p = DeviceParams { kerr_enabled: false, ..DeviceParams::default() };
    let h0 = build_h0(&p, s).map_err(err)?;
    let n = kron(&cavity::number(8), &CMat::identity(3, 3));
    let scale = op_norm(h0.matrix());

    let ff = snapsim::hilbert::ancilla_projector(s, Level::F).map_err(err)?;
    let ok_ff = matches!(classify(&h0, &ff).map_err(err)?, Transparency::Zero);

    let ef = ancilla_transition(s, Level::F, Level::E).map_err(err)?;
    let (ok_ef, r_ef) = match classify(&h0, &ef).map_err(err)? {
        Transparency::CavityDependent { h_a, residual } => {
            let want = ef.matrix() * &n * c64(p.chi_e() - p.chi_f(), 0.0);
            let diff = op_norm(&(ef.matrix() * &h_a - want)) / scale;
            (diff < 1e-9 && residual < 1e-9, diff.max(residual))
        }
        _ => (false, f64::NAN),
    };

    let a = annihilation(s);
    let (ok_a, r_a) = match classify(&h0, &a).map_err(err)? {
        Transparency::AncillaOnly { h_a, residual } => {
            let mut h = CMat::zeros(3, 3);
            h[(1, 1)] = c64(-p.chi_e(), 0.0);
            h[(2, 2)] = c64(-p.chi_f(), 0.0);
            let diff = op_norm(&(&h_a - kron(&CMat::identity(8, 8), &h))) / scale;
            (diff < 1e-9 && residual < 1e-9, diff.max(residual))
        }
        _ => (false, f64::NAN),
    };
    let line = format!(
        "|f><f| zero: {ok_ff}; |e><f| cavity-dependent (resid {r_ef:.1e}): {ok_ef}; a ancilla-only (resid {r_a:.1e}): {ok_a}"
    );
    if ok_ff && ok_ef && ok_a { Ok(line) } else { Err(line) }
}

fn criterion_3() -> Outcome {
    let s = TensorSpace::new(6, 3).map_err(err)?;
    let times: Vec<f64> = (1..=10).map(|i| i as f64 * 0.1e-6 - 0.05e-6).collect();
    let psi = plus_x(s);
    let mut min_fid: f64 = 1.0;
    let mut worst_phase: f64 = 0.0;
    for matched in [true, false] {
        let base = DeviceParams { kerr_enabled: false, ..DeviceParams::noiseless() };
        let p = if matched { base.matched() } else { base };
        let drive = DriveParams::snap(PI / 2.0, PulseEnvelope::constant(Seconds::us(1.0)));
        let h = build_h_snap_timedependent(&p, &drive, s, DriveModel::Effective).map_err(err)?;
        let jumps = vec![JumpOp::new(
            ancilla_transition(s, Level::F, Level::E).map_err(err)?,
            1.0,
            JumpLabel::AncillaRelaxEf,
        )
        .map_err(err)?];
        let spec = EvolutionSpec::new(Hamiltonian::snap(h, s), jumps, 1e-6).with_tolerance(1e-11);
        let outs = times
            .iter()
            .map(|&t| inject_jump(&spec, &psi, JumpLabel::AncillaRelaxEf, t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let rel_phase = |v: &StateVector| {
            let c = v.cavity_component(Level::E);
            (c[2] / c[0]).arg()
        };
        for (i, out) in outs.iter().enumerate() {
            if matched {
                for other in &outs[i + 1..] {
                    min_fid = min_fid.min(fidelity(out, other));
                }
            } else {
                let dphi = rel_phase(out) - rel_phase(&outs[0]);
                // Δn = 2 between the driven Fock components
                let want = -2.0 * (p.chi_f() - p.chi_e()) * (times[i] - times[0]);
                let wrapped = (dphi - want + PI).rem_euclid(2.0 * PI) - PI;
                worst_phase = worst_phase.max(wrapped.abs());
            }
        }
    }
    let line = format!("matched: min pairwise fidelity {min_fid:.10}; unmatched: max phase error {worst_phase:.1e} rad");
    if min_fid > 1.0 - 1e-6 && worst_phase < 1e-6 { Ok(line) } else { Err(line) }
}

fn criterion_4() -> Outcome {
    let mut min_fid: f64 = 1.0;
    let mut cases = 0;
    let models = [
        ("projector", ancilla::transition(3, Level::F, Level::F)),
        ("number", ancilla::number(3)),
    ];
    for (_, m) in &models {
        let (s, spec, drive) = rotating_frame(PI / 2.0, &[(m.clone(), JumpLabel::Dephasing)]);
        let psi = plus_x(s);
        let target = snapped(s, &psi, &drive, Level::F);
        let mut events: Vec<Vec<(JumpLabel, f64)>> =
            (1..=9).map(|i| vec![(JumpLabel::Dephasing, i as f64 * 0.1e-6)]).collect();
        for (t1, t2) in [(0.2e-6, 0.7e-6), (0.45e-6, 0.5e-6), (0.1e-6, 0.95e-6), (0.3e-6, 0.31e-6)] {
            events.push(vec![(JumpLabel::Dephasing, t1), (JumpLabel::Dephasing, t2)]);
        }
        for ev in &events {
            let out = inject_jumps(&spec, &psi, ev).map_err(err)?;
            let g = StateVector::product(s, &out.cavity_component(Level::G), Level::G).map_err(err)?;
            let f = StateVector::product(s, &out.cavity_component(Level::F), Level::F).map_err(err)?;
            let (pg, pf) = (g.norm().powi(2), f.norm().powi(2));
            if (pg + pf - 1.0).abs() > 1e-9 {
                return Err(format!("population outside g, f after {ev:?}: {}", 1.0 - pg - pf));
            }
            if pg > 1e-9 {
                min_fid = min_fid.min(fidelity(&g.normalized().map_err(err)?, &psi));
            }
            if pf > 1e-9 {
                min_fid = min_fid.min(fidelity(&f.normalized().map_err(err)?, &target));
            }
            cases += 1;
        }
    }
    let line = format!("{cases} single/double event patterns, two dephasing models: min branch fidelity {min_fid:.10}");
    if min_fid > 1.0 - 1e-6 { Ok(line) } else { Err(line) }
}

fn criterion_5() -> Outcome {
    let (s, spec, drive) = rotating_frame(PI / 3.0, &[(annihilation(TensorSpace::new(6, 3).unwrap()).into_matrix(), JumpLabel::CavityLoss)]);
    let dc = s.cavity_dim();
    let s2 = 0.5f64.sqrt();
    let zero_l = (cavity::fock(dc, 0) + cavity::fock(dc, 4)) * c64(s2, 0.0);
    let psi = StateVector::product(s, &zero_l, Level::G).map_err(err)?;
    let mut worst: f64 = 0.0;
    for i in 1..=9 {
        let tj = i as f64 * 0.1e-6;
        let out = inject_jump(&spec, &psi, JumpLabel::CavityLoss, tj).map_err(err)?;
        let w = drive.omega.0 * tj;
        let pg = out.level_population(Level::G);
        let pf = out.level_population(Level::F);
        worst = worst.max((pg - w.cos().powi(2)).abs()).max((pf - w.sin().powi(2)).abs());
    }
    let line = format!("max branch-weight deviation {worst:.1e} over 9 jump times");
    if worst < 1e-4 { Ok(line) } else { Err(line) }
}

fn criterion_6() -> Outcome {
    let graphs = bundled_graphs();
    let gate = check_path_independence(&TransitionGraph::from_json(graphs["gate_graph.json"]).map_err(err)?)
        .map_err(err)?;
    let bad = check_path_independence(&TransitionGraph::from_json(graphs["complete_graph_with_eg.json"]).map_err(err)?)
        .map_err(err)?;
    let theta = PI / 2.0;
    // a loop may be traversed either way round, giving S(θ) or its inverse
    let is_s_theta = |m: &CMat| {
        [theta, -theta].iter().any(|&t| (m.adjoint() * logical_z_rotation(t)).trace().norm() / 2.0 > 1.0 - 1e-9)
    };
    let all_s = !bad.violations.is_empty() && bad.violations.iter().all(|v| is_s_theta(&v.net_action));
    let line = format!(
        "gate graph: {} loops, {} violations; with e->g edges: {} violations, all S(theta) up to phase: {all_s}",
        gate.loops_checked,
        gate.violations.len(),
        bad.violations.len()
    );
    if gate.passed() && all_s { Ok(line) } else { Err(line) }
}

fn criterion_7() -> Outcome {
    let cfg = config("reproduction.toml")?;
    let proto = cfg.protocol().map_err(err)?;
    let row = sweep_point(proto, &cfg.device, cfg.cavity_dim).map_err(err)?;
    let b = build_error_budget(&cfg.device, proto, cfg.cavity_dim).map_err(err)?;
    let (nc, c) = (100.0 * row.error_nc, 100.0 * row.error_c);
    let (tot, fid) = (100.0 * b.total_error, 100.0 * b.nc_fidelity);
    let ok = (3.5..=6.0).contains(&nc)
        && (1.5..=3.5).contains(&c)
        && c < nc
        && (1.6..=2.6).contains(&tot)
        && (96.0..=97.5).contains(&fid);
    let line = format!("NC error {nc:.2}%, C error {c:.2}%, budget total {tot:.3}%, budget NC fidelity {fid:.2}%");
    if ok { Ok(line) } else { Err(line) }
}

fn run_sweep(name: &str) -> Result<SweepResult, String> {
    let cfg = config(name)?;
    let sw = cfg.sweep.as_ref().ok_or("missing [sweep] section")?;
    sweep_injected_noise(sw.axis, &sw.rates, cfg.protocol().map_err(err)?, &cfg.device, cfg.cavity_dim).map_err(err)
}

fn criterion_8() -> Outcome {
    let relax = run_sweep("sweep_relaxation.toml")?;
    let deph = run_sweep("sweep_dephasing.toml")?;
    let pe_max = 100.0 * relax.rows.iter().map(|r| r.p_e).fold(0.0, f64::max);
    let pf_max = 100.0 * deph.rows.iter().map(|r| r.p_f).fold(0.0, f64::max);
    let ok = (4.0..=8.0).contains(&relax.slope_ratio)
        && (3.0..=6.0).contains(&deph.slope_ratio)
        && (pe_max - 25.0).abs() <= 5.0
        && (pf_max - 14.0).abs() <= 5.0;
    let line = format!(
        "relaxation ratio {:.2} +- {:.2}, dephasing ratio {:.2} +- {:.2}, max P_e {pe_max:.1}%, max P_f {pf_max:.1}%",
        relax.slope_ratio, relax.slope_ratio_stderr, deph.slope_ratio, deph.slope_ratio_stderr
    );
    if ok { Ok(line) } else { Err(line) }
}

fn criterion_9() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, p) in [0.01, 0.05, 0.1].into_iter().enumerate() {
        let cfg = RbConfig { n_sequences: 50, shots: Some(100), seed: 900 + i as u64, ..RbConfig::default() };
        let gate = Interleaved { channel: LogicalChannel::depolarizing_decay(p), target: CMat::identity(2, 2) };
        let r = run_irb(&gate, &cfg).map_err(err)?;
        match r.gate_error {
            Some((d, sigma)) => {
                ok &= (d - p).abs() <= 2.0 * sigma;
                parts.push(format!("p {p}: {d:.4} +- {sigma:.4}"));
            }
            None => {
                ok = false;
                parts.push(format!("p {p}: fit failed"));
            }
        }
    }
    let line = parts.join("; ");
    if ok { Ok(line) } else { Err(line) }
}

fn criterion_10() -> Outcome {
    let p = DeviceParams::default();
    let s = TensorSpace::new(6, 3).map_err(err)?;
    let mut deficits = Vec::new();
    let mut ratios = Vec::new();
    for t in [2.0, 4.0, 8.0] {
        let drive = DriveParams::snap(PI / 2.0, PulseEnvelope::gaussian(Seconds::us(t)));
        ratios.push(drive.rwa_ratio(&p));
        deficits.push(rwa_deficit(&p, &drive, s).map_err(err)?);
    }
    let q: Vec<f64> = deficits.windows(2).map(|w| w[0] / w[1]).collect();
    let fast = DriveParams::snap(PI / 2.0, PulseEnvelope::gaussian(Seconds::us(1.0)));
    let spread = fock_spread(&p, &fast, s, 101).map_err(err)?;
    let ok = q.iter().all(|r| (3.0..=5.0).contains(r)) && (0.05..=0.20).contains(&spread.mean);
    let line = format!(
        "deficits {:.2e}, {:.2e}, {:.2e} at Omega/2chi_f {:.3}, {:.3}, {:.3}: halving ratios {:.2}, {:.2}; mean Fock spread {:.1}% at {:.3}",
        deficits[0],
        deficits[1],
        deficits[2],
        ratios[0],
        ratios[1],
        ratios[2],
        q[0],
        q[1],
        100.0 * spread.mean,
        spread.rwa_ratio
    );
    if ok { Ok(line) } else { Err(line) }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("analytic SNAP propagator", criterion_1),
        ("error-transparency classes", criterion_2),
        ("relaxation jump-time dependence", criterion_3),
        ("dephasing branches", criterion_4),
        ("cavity-loss branch weights", criterion_5),
        ("path independence", criterion_6),
        ("reproduction errors and budget", criterion_7),
        ("injected-noise sweeps", criterion_8),
        ("interleaved RB recovery", criterion_9),
        ("rotating-wave validity", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(m) => println!("criterion {:>2} PASS  {name}: {m} [{secs:.1} s]", i + 1),
            Err(m) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {m} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
