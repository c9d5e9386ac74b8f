//! Dormand–Prince 5(4) with first-same-as-last stages and standard step control.

use crate::error::{Error, Result};
use crate::hilbert::{c64, CMat};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th-order minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

impl OdeOptions {
    pub fn new(tol: f64, max_step: f64) -> Self {
        Self { rtol: tol, atol: tol, max_step }
    }
}

fn comb(y: &CMat, h: f64, terms: &[(f64, &CMat)]) -> CMat {
    let mut out = y.clone();
    for &(c, k) in terms {
        if c != 0.0 {
            out.zip_apply(k, |o, kv| *o += kv * c64(h * c, 0.0));
        }
    }
    out
}

/// Adaptive integrator for dy/dt = f(t, y) over complex matrices.
pub struct Dopri5<F> {
    f: F,
    t: f64,
    y: CMat,
    k1: CMat,
    h: f64,
    opts: OdeOptions,
}

impl<F: FnMut(f64, &CMat) -> CMat> Dopri5<F> {
    pub fn new(mut f: F, t0: f64, y0: CMat, opts: OdeOptions) -> Self {
        let k1 = f(t0, &y0);
        Self { f, t: t0, y: y0, k1, h: opts.max_step, opts }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &CMat {
        &self.y
    }

    pub fn into_state(self) -> CMat {
        self.y
    }

    /// Take one accepted step, never passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<()> {
        loop {
            let remaining = t_end - self.t;
            if remaining <= 0.0 {
                return Ok(());
            }
            // a gap at the rounding level of t is not worth a step
            if remaining <= 1e-13 * self.t.abs() {
                self.t = t_end;
                return Ok(());
            }
            let mut h = self.h.min(self.opts.max_step);
            // stretch rather than leave a sliver behind
            let last = h >= remaining * (1.0 - 1e-6);
            if last {
                h = remaining;
            }
            if h <= 1e-13 * self.t.abs().max(remaining) || h.is_nan() {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            let (t, y, k1) = (self.t, &self.y, &self.k1);
            let f = &mut self.f;
            let k2 = f(t + C2 * h, &comb(y, h, &[(A21, k1)]));
            let k3 = f(t + C3 * h, &comb(y, h, &[(A31, k1), (A32, &k2)]));
            let k4 = f(t + C4 * h, &comb(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(t + C5 * h, &comb(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(t + h, &comb(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y_new = comb(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + h, &y_new);
            let err = comb(&CMat::zeros(y.nrows(), y.ncols()), h, &[
                (E1, k1),
                (E3, &k3),
                (E4, &k4),
                (E5, &k5),
                (E6, &k6),
                (E7, &k7),
            ]);
            let mut acc = 0.0;
            for ((e, a), b) in err.iter().zip(y.iter()).zip(y_new.iter()) {
                let sc = self.opts.atol + self.opts.rtol * a.norm().max(b.norm());
                acc += (e.norm() / sc).powi(2);
            }
            let err_norm = (acc / err.len().max(1) as f64).sqrt();
            let factor = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
            if err_norm <= 1.0 {
                self.t = if last { t_end } else { t + h };
                self.y = y_new;
                self.k1 = k7;
                // keep the controller's proposal, not the truncated final step
                self.h = if last { self.h.max(h) } else { h * factor };
                return Ok(());
            }
            self.h = h * factor.min(1.0);
        }
    }

    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            self.step(t_end)?;
        }
        Ok(())
    }
}

/// Integrate from t0 to t1 and return y(t1).
pub fn integrate<F: FnMut(f64, &CMat) -> CMat>(f: F, t0: f64, t1: f64, y0: CMat, opts: OdeOptions) -> Result<CMat> {
    if t1 <= t0 {
        return Ok(y0);
    }
    let mut solver = Dopri5::new(f, t0, y0, opts);
    solver.advance_to(t1)?;
    Ok(solver.into_state())
}
