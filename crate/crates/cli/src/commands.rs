//! One function per subcommand. Each returns the result as JSON, an optional
//! CSV rendering, and a short human-readable summary.

use std::path::Path;

use serde_json::{json, Value};
use snapsim::analysis::budget::build_error_budget;
use snapsim::analysis::graph::{bundled_graphs, check_path_independence, TransitionGraph};
use snapsim::analysis::rb::{run_irb, run_rb, Interleaved};
use snapsim::analysis::sweep::sweep_injected_noise;
use snapsim::analysis::transparency::check_error_transparency;
use snapsim::codes::{
    decode, encode, encoded_density, logical_s_theta, state_fidelity, wigner, wigner_csv, AlphaGrid, LogicalBasis,
    LogicalChannel,
};
use snapsim::device::{build_h0, build_h0_matched, build_jump_ops};
use snapsim::hilbert::{DensityMatrix, Level, TensorSpace};
use snapsim::protocol::{protocol_channel, target_unitary, GateSimulator};

use crate::config::{InterleaveSpec, RunConfig};
use crate::{CliError, VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

pub struct Output {
    pub command: &'static str,
    pub result: Value,
    pub csv: Option<String>,
    pub summary: String,
}

impl Output {
    /// File contents with the version and resolved config embedded. JSON is
    /// used when no CSV rendering exists.
    pub fn render(&self, config: &RunConfig, format: Format) -> (Format, String) {
        match (format, &self.csv) {
            (Format::Csv, Some(csv)) => {
                let cfg = serde_json::to_string(&config.to_json()).expect("json");
                let header = format!(
                    "# snapsim {VERSION}\n# command: {}\n# units: rates 1/s, times s, probabilities and errors dimensionless\n# config: {cfg}\n",
                    self.command
                );
                (Format::Csv, header + csv)
            }
            _ => {
                let doc = json!({
                    "snapsim_version": VERSION,
                    "command": self.command,
                    "config": config.to_json(),
                    "result": self.result,
                });
                (Format::Json, serde_json::to_string_pretty(&doc).expect("json") + "\n")
            }
        }
    }
}

fn space(config: &RunConfig) -> Result<TensorSpace, CliError> {
    Ok(TensorSpace::new(config.cavity_dim, 3)?)
}

pub fn simulate_gate(config: &RunConfig) -> Result<Output, CliError> {
    let proto = config.protocol()?;
    let s = space(config)?;
    let basis = LogicalBasis::new(config.cavity_dim)?;
    let input = config.simulate.clone().unwrap_or_default().input;
    let psi = encode(&basis, input)?;
    let target = logical_s_theta(config.cavity_dim, proto.theta.0) * &psi;
    let cav_in = &psi * psi.adjoint();
    let rho = DensityMatrix::product(s, &cav_in, Level::G)?;
    let sim = GateSimulator::new(proto, &config.device, s)?;

    let fid = |m: &snapsim::hilbert::CMat| {
        let tr = m.trace().re;
        if tr > 0.0 {
            state_fidelity(m, &target) / tr
        } else {
            0.0
        }
    };
    let shot = sim.run(&rho, &[], config.seed)?;
    let shot_rho = shot.cavity_rho();
    let avg = sim.average_cavity_output(rho.matrix())?;
    let fidelity = fid(&avg);
    let decoded = decode(&basis, &avg);

    let branches = sim.conditioned(&rho, &[])?;
    let mut csv = String::from("level,probability,fidelity\n");
    let table: Vec<Value> = branches
        .iter()
        .map(|b| {
            // a branch that never occurs has no meaningful conditioned state
            let f = (b.probability > 1e-12).then(|| fid(&b.cavity_rho));
            csv.push_str(&format!("{},{:.10},{}\n", b.level, b.probability, f.map(|f| format!("{f:.10}")).unwrap_or_default()));
            json!({"level": b.level, "probability": b.probability, "fidelity": f})
        })
        .collect();

    let result = json!({
        "input_bloch": input,
        "logical_fidelity": fidelity,
        "output_bloch": decoded.bloch,
        "leakage": decoded.leakage,
        "single_shot": {
            "measured_levels": shot.measured_levels,
            "repeats_used": shot.repeats_used,
            "phase_correction_rad": shot.phase_correction,
            "success": shot.success,
            "fidelity": fid(&shot_rho),
        },
        "conditioned": table,
    });
    let mut summary = format!("logical fidelity {fidelity:.6}\nlevel  probability  fidelity\n");
    for b in &branches {
        let f = if b.probability > 1e-12 { format!("{:>8.6}", fid(&b.cavity_rho)) } else { "       -".into() };
        summary.push_str(&format!("{:<5}  {:>11.6}  {f}\n", b.level, b.probability));
    }
    Ok(Output { command: "simulate-gate", result, csv: Some(csv), summary })
}

pub fn wigner_grid(config: &RunConfig) -> Result<Output, CliError> {
    let w = config.wigner.as_ref().ok_or_else(|| CliError::Validation("missing [wigner] section".into()))?;
    let basis = LogicalBasis::new(config.cavity_dim)?;
    let mut rho = encoded_density(&basis, w.input)?;
    if w.after_gate {
        let s = space(config)?;
        let sim = GateSimulator::new(config.protocol()?, &config.device, s)?;
        rho = sim.average_cavity_output(DensityMatrix::product(s, &rho, Level::G)?.matrix())?;
    }
    let grid = AlphaGrid::new(w.extent, w.points)?;
    let alphas = grid.alphas();
    let values = wigner(&rho, &alphas);
    let origin = snapsim::codes::wigner_point(&rho, snapsim::hilbert::c64(0.0, 0.0));
    let max = values.value.iter().copied().fold(f64::MIN, f64::max);
    let min = values.value.iter().copied().fold(f64::MAX, f64::min);
    let result = json!({
        "axis": grid.axis(),
        "values": values.value,
        "w_origin": origin,
        "max": max,
        "min": min,
        "diagnostics": values.diagnostics,
    });
    let summary = format!("W(0) = {origin:.6}, max {max:.6}, min {min:.6} on {}x{} grid", w.points, w.points);
    Ok(Output { command: "wigner", result, csv: Some(wigner_csv(&alphas, &values.value)), summary })
}

pub fn rb(config: &RunConfig) -> Result<Output, CliError> {
    let section = config.rb.as_ref().ok_or_else(|| CliError::Validation("missing [rb] section".into()))?;
    let rb_cfg = section.rb_config(config.seed);
    let gate = match &section.interleave {
        InterleaveSpec::None => None,
        InterleaveSpec::Depolarizing { p } => Some(Interleaved {
            channel: LogicalChannel::depolarizing_decay(*p),
            target: snapsim::hilbert::CMat::identity(2, 2),
        }),
        InterleaveSpec::Protocol => {
            let proto = config.protocol()?;
            let channel = protocol_channel(proto, &config.device, space(config)?)?.value;
            Some(Interleaved { channel, target: target_unitary(proto) })
        }
    };
    match gate {
        None => {
            let r = run_rb(None, &rb_cfg)?;
            let summary = match r.gamma() {
                Some((g, s)) => format!("gamma_RB = {g:.6} +- {s:.6}"),
                None => "fit did not converge".into(),
            };
            let csv = r.to_csv();
            Ok(Output { command: "rb", result: serde_json::to_value(&r).expect("json"), csv: Some(csv), summary })
        }
        Some(g) => {
            let r = run_irb(&g, &rb_cfg)?;
            let summary = match r.gate_error {
                Some((d, s)) => format!("gamma_IRB - gamma_RB = {d:.6} +- {s:.6}"),
                None => "fit did not converge".into(),
            };
            let csv = format!("# reference\n{}# interleaved\n{}", r.reference.to_csv(), r.interleaved.to_csv());
            Ok(Output { command: "rb", result: serde_json::to_value(&r).expect("json"), csv: Some(csv), summary })
        }
    }
}

pub fn sweep(config: &RunConfig) -> Result<Output, CliError> {
    let section = config.sweep.as_ref().ok_or_else(|| CliError::Validation("missing [sweep] section".into()))?;
    let r = sweep_injected_noise(section.axis, &section.rates, config.protocol()?, &config.device, config.cavity_dim)?;
    let summary = format!(
        "{} axis: slope NC {:.4}, slope C {:.4}, ratio {:.3} +- {:.3}",
        section.axis.name(),
        r.fit_nc.slope,
        r.fit_c.slope,
        r.slope_ratio,
        r.slope_ratio_stderr
    );
    Ok(Output { command: "sweep", result: serde_json::to_value(&r).expect("json"), csv: Some(r.to_csv()), summary })
}

fn load_graph(name: &str, base: &Path) -> Result<TransitionGraph, CliError> {
    let bundled = bundled_graphs();
    let text = match bundled.get(name) {
        Some(t) => t.to_string(),
        None => {
            let p = base.join(name);
            std::fs::read_to_string(&p)
                .map_err(|e| CliError::Validation(format!("graph {name:?}: not bundled and unreadable ({e})")))?
        }
    };
    Ok(TransitionGraph::from_json(&text)?)
}

/// `base` resolves relative graph paths (the config file's directory).
pub fn check(config: &RunConfig, base: &Path) -> Result<Output, CliError> {
    let section = config.check.as_ref().ok_or_else(|| CliError::Validation("missing [check] section".into()))?;
    let mut csv = String::from("kind,name,result,detail\n");
    let mut summary = String::new();
    let mut graphs = Vec::new();
    for name in &section.graphs {
        let report = check_path_independence(&load_graph(name, base)?)?;
        let verdict = if report.passed() { "pass" } else { "fail" };
        let detail = format!("{} loops, {} violations", report.loops_checked, report.violations.len());
        csv.push_str(&format!("path_independence,{name},{verdict},{detail}\n"));
        summary.push_str(&format!("{name}: {verdict} ({detail})\n"));
        graphs.push(json!({"graph": name, "passed": report.passed(), "report": report}));
    }
    let mut transparency = Value::Null;
    if section.transparency {
        let s = space(config)?;
        let jumps = build_jump_ops(&config.device, s, None)?;
        let mut sets = serde_json::Map::new();
        for (label, h0) in [("bare", build_h0(&config.device, s)?), ("matched", build_h0_matched(&config.device, s)?)] {
            let entries = check_error_transparency(&h0, &jumps)?;
            for e in &entries {
                csv.push_str(&format!("transparency_{label},{},{},{}\n", e.label, e.class.name(), e.op_label));
                summary.push_str(&format!("{label} H0, {}: {}\n", e.label, e.class.name()));
            }
            sets.insert(label.into(), serde_json::to_value(&entries).expect("json"));
        }
        transparency = Value::Object(sets);
    }
    let result = json!({"path_independence": graphs, "error_transparency": transparency});
    Ok(Output { command: "check", result, csv: Some(csv), summary })
}

pub fn budget(config: &RunConfig) -> Result<Output, CliError> {
    let b = build_error_budget(&config.device, config.protocol()?, config.cavity_dim)?;
    let mut csv = String::from("layer,label,p_coherent,p_dephased\n");
    for d in 1..b.tree.depth() {
        for n in b.tree.layer(d) {
            csv.push_str(&format!("{d},{},{:.8},{:.8}\n", n.label, n.p_coherent, n.p_dephased));
        }
    }
    let summary = format!(
        "total predicted error {:.3}%, NC fidelity {:.2}%",
        100.0 * b.total_error,
        100.0 * b.nc_fidelity
    );
    Ok(Output { command: "budget", result: serde_json::to_value(&b).expect("json"), csv: Some(csv), summary })
}
