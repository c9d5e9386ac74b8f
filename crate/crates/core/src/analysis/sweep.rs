//! Injected-noise sweeps: ancilla populations and NC/C gate errors versus an
//! injected dephasing or ef-relaxation rate, with linear slope extraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::{encoded_density, LogicalBasis};
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, Level, TensorSpace};
use crate::protocol::{protocol_channel, run_gate_conditioned, target_unitary, ProtocolConfig, Variant};
use crate::units::Rate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Extra g–f dephasing; errors are fitted against P_f.
    Dephasing,
    /// Symmetric e↔f noise at the given rate per direction; errors are fitted
    /// against P_e.
    Relaxation,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Dephasing => "dephasing",
            SweepAxis::Relaxation => "relaxation",
        }
    }

    pub fn apply(self, params: &DeviceParams, rate: Rate) -> DeviceParams {
        let mut p = params.clone();
        match self {
            SweepAxis::Dephasing => p.injected_dephasing_rate = rate,
            SweepAxis::Relaxation => p.injected_ef_noise_rate = rate,
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate: f64,
    pub p_e: f64,
    pub p_f: f64,
    pub error_nc: f64,
    pub error_c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// Errors are −ln λ of the tomographic channel, standing in for IRB.
    pub error_metric: String,
    pub rows: Vec<SweepRow>,
    pub fit_nc: LinearFit,
    pub fit_c: LinearFit,
    pub slope_ratio: f64,
    pub slope_ratio_stderr: f64,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# axis = {}; error = {}; x = {}; slope_nc = {:.6e} +- {:.2e}; slope_c = {:.6e} +- {:.2e}; ratio = {:.4} +- {:.4}\n",
            self.axis.name(),
            self.error_metric,
            if self.axis == SweepAxis::Relaxation { "p_e" } else { "p_f" },
            self.fit_nc.slope,
            self.fit_nc.slope_stderr,
            self.fit_c.slope,
            self.fit_c.slope_stderr,
            self.slope_ratio,
            self.slope_ratio_stderr
        );
        s.push_str("rate_per_s,p_e,p_f,error_nc,error_c\n");
        for r in &self.rows {
            s.push_str(&format!("{:.6e},{:.8},{:.8},{:.8},{:.8}\n", r.rate, r.p_e, r.p_f, r.error_nc, r.error_c));
        }
        s
    }
}

/// Ordinary least squares y = a + b x with the standard error of b.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::FitFailed("linear fit needs two or more points".into()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::FitFailed("x values do not vary".into()));
    }
    let slope = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit { slope, intercept, slope_stderr })
}

fn variant(config: &ProtocolConfig, v: Variant) -> ProtocolConfig {
    let mut c = config.clone();
    c.variant = v;
    if v == Variant::Nc {
        c.et_drive_on = false;
    }
    c
}

/// One sweep point: conditioned populations of S_C on |+X⟩ and both channel
/// errors.
pub fn sweep_point(config: &ProtocolConfig, params: &DeviceParams, cavity_dim: usize) -> Result<SweepRow> {
    let space = TensorSpace::new(cavity_dim, 3)?;
    let basis = LogicalBasis::new(cavity_dim)?;
    let rho = DensityMatrix::product(space, &encoded_density(&basis, [1.0, 0.0, 0.0])?, Level::G)?;
    let c_cfg = variant(config, Variant::C);
    let nc_cfg = variant(config, Variant::Nc);
    let target = target_unitary(config);
    let pops = run_gate_conditioned(&c_cfg, params, &rho)?;
    let pop = |l: Level| pops.get(&l).map_or(0.0, |p| p.0);
    let error_nc = protocol_channel(&nc_cfg, params, space)?.value.decay_error(&target);
    let error_c = protocol_channel(&c_cfg, params, space)?.value.decay_error(&target);
    Ok(SweepRow { rate: 0.0, p_e: pop(Level::E), p_f: pop(Level::F), error_nc, error_c })
}

pub fn sweep_injected_noise(
    axis: SweepAxis,
    rates: &[Rate],
    config: &ProtocolConfig,
    params: &DeviceParams,
    cavity_dim: usize,
) -> Result<SweepResult> {
    if rates.len() < 2 {
        return Err(Error::param("rates", "need at least two rates"));
    }
    if rates.iter().any(|r| !(r.0 >= 0.0) || !r.0.is_finite()) || rates.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::param("rates", "must be non-negative and strictly ascending"));
    }
    let rows: Vec<SweepRow> = rates
        .par_iter()
        .map(|&r| {
            let row = sweep_point(config, &axis.apply(params, r), cavity_dim)?;
            Ok(SweepRow { rate: r.0, ..row })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| if axis == SweepAxis::Relaxation { r.p_e } else { r.p_f }).collect();
    let nc: Vec<f64> = rows.iter().map(|r| r.error_nc).collect();
    let c: Vec<f64> = rows.iter().map(|r| r.error_c).collect();
    let fit_nc = linear_fit(&xs, &nc)?;
    let fit_c = linear_fit(&xs, &c)?;
    let slope_ratio = fit_nc.slope / fit_c.slope;
    let slope_ratio_stderr =
        slope_ratio.abs() * ((fit_nc.slope_stderr / fit_nc.slope).powi(2) + (fit_c.slope_stderr / fit_c.slope).powi(2)).sqrt();
    Ok(SweepResult {
        axis,
        error_metric: "channel_proxy".into(),
        rows,
        fit_nc,
        fit_c,
        slope_ratio,
        slope_ratio_stderr,
    })
}
