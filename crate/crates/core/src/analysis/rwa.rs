//! Rotating-wave checks for the Raman SNAP: Fock dependence of the |f⟩
//! trajectory under the full comb drive, and the effective-vs-full-comb
//! state deficit.

use rayon::prelude::*;
use serde::Serialize;

use crate::codes::{encode, LogicalBasis};
use crate::device::{build_h_snap_timedependent, DeviceParams, DriveModel, DriveParams};
use crate::dynamics::{evolve_schrodinger, EvolutionSpec, Hamiltonian};
use crate::error::{Error, Result};
use crate::hilbert::{Level, StateVector, TensorSpace};

const TOL: f64 = 1e-10;

fn evolve(
    params: &DeviceParams,
    drive: &DriveParams,
    space: TensorSpace,
    model: DriveModel,
    psi: &StateVector,
    t0: f64,
    t1: f64,
) -> Result<StateVector> {
    let h = build_h_snap_timedependent(params, drive, space, model)?;
    let spec = EvolutionSpec::new(Hamiltonian::snap(h.clone(), space), vec![], t1)
        .starting_at(t0)
        .with_tolerance(TOL)
        .resolving(&h);
    evolve_schrodinger(&spec, psi)
}

#[derive(Clone, Debug, Serialize)]
pub struct FockSpread {
    pub rwa_ratio: f64,
    pub photons: Vec<usize>,
    pub times: Vec<f64>,
    /// P_f(t) per photon number, indexed [photon][time].
    pub p_f: Vec<Vec<f64>>,
    /// max_t (max_k P_f − min_k P_f).
    pub peak: f64,
    /// Time average of the same spread over the pulse.
    pub mean: f64,
}

/// Noiseless full-comb SNAP trajectories for each driven Fock state.
pub fn fock_spread(params: &DeviceParams, drive: &DriveParams, space: TensorSpace, samples: usize) -> Result<FockSpread> {
    if samples < 2 {
        return Err(Error::param("samples", "need at least two"));
    }
    let p = params.without_decoherence();
    let t_end = drive.envelope.duration.0;
    let photons: Vec<usize> = drive.theta_phases.iter().map(|(k, _)| *k).collect();
    let times: Vec<f64> = (0..samples).map(|i| t_end * i as f64 / (samples - 1) as f64).collect();
    let p_f: Vec<Vec<f64>> = photons
        .par_iter()
        .map(|&k| {
            let mut psi = StateVector::basis(space, k, Level::G)?;
            let mut out = vec![0.0];
            for w in times.windows(2) {
                psi = evolve(&p, drive, space, DriveModel::FullComb, &psi, w[0], w[1])?;
                out.push(psi.level_population(Level::F));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let spread: Vec<f64> = (0..samples)
        .map(|i| {
            let col = p_f.iter().map(|r| r[i]);
            col.clone().fold(f64::MIN, f64::max) - col.fold(f64::MAX, f64::min)
        })
        .collect();
    let peak = spread.iter().copied().fold(0.0, f64::max);
    let mean = spread.iter().sum::<f64>() / samples as f64;
    Ok(FockSpread { rwa_ratio: drive.rwa_ratio(params), photons, times, p_f, peak, mean })
}

/// 1 − |⟨ψ_eff|ψ_full⟩|² after one noiseless SNAP on the encoded |+X⟩ state.
pub fn rwa_deficit(params: &DeviceParams, drive: &DriveParams, space: TensorSpace) -> Result<f64> {
    let p = params.without_decoherence();
    let basis = LogicalBasis::new(space.cavity_dim())?;
    let cav = encode(&basis, [1.0, 0.0, 0.0])?;
    let psi = StateVector::product(space, &cav, Level::G)?;
    let t = drive.envelope.duration.0;
    let eff = evolve(&p, drive, space, DriveModel::Effective, &psi, 0.0, t)?;
    let full = evolve(&p, drive, space, DriveModel::FullComb, &psi, 0.0, t)?;
    Ok((1.0 - eff.inner(&full)?.norm_sqr()).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::PulseEnvelope;
    use crate::units::Seconds;

    #[test]
    fn slow_pulse_is_nearly_fock_independent() {
        let s = TensorSpace::new(6, 3).unwrap();
        let p = DeviceParams::default();
        let slow = DriveParams::snap(1.0, PulseEnvelope::gaussian(Seconds::us(3.0)));
        let fast = DriveParams::snap(1.0, PulseEnvelope::gaussian(Seconds::us(1.0)));
        let a = fock_spread(&p, &slow, s, 31).unwrap();
        let b = fock_spread(&p, &fast, s, 31).unwrap();
        assert!(a.peak < b.peak);
        assert!(rwa_deficit(&p, &slow, s).unwrap() < rwa_deficit(&p, &fast, s).unwrap());
    }
}
