//! Adaptive Dormand–Prince 5(4) integration for matrix-valued ODEs.

use crate::error::{MonopoleError, Result};
use crate::matrix_kit::{CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { rtol: tol, atol: tol * 1e-3, h_init: 1e-3, h_min: 1e-13, max_steps: 200_000 }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self::with_tol(1e-10)
    }
}

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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &CMat, terms: &[(f64, &CMat)], h: f64) -> CMat {
    let mut out = y.clone();
    for (a, k) in terms {
        if *a != 0.0 {
            out += *k * C64::new(a * h, 0.0);
        }
    }
    out
}

/// Integrates `y' = f(z, y)` from `z0` and returns `y` at each requested
/// output point. Outputs must be monotone in the direction of travel.
pub fn integrate<F>(f: F, z0: f64, y0: &CMat, outputs: &[f64], opts: &OdeOptions) -> Result<Vec<CMat>>
where
    F: Fn(f64, &CMat) -> Result<CMat>,
{
    let mut out = Vec::with_capacity(outputs.len());
    let mut z = z0;
    let mut y = y0.clone();
    let mut h = opts.h_init;
    let mut k1 = f(z, &y)?;
    let mut steps = 0usize;
    for &target in outputs {
        let dir = if target >= z { 1.0 } else { -1.0 };
        while (target - z) * dir > 1e-15 * (1.0 + z.abs()) {
            steps += 1;
            if steps > opts.max_steps {
                return Err(MonopoleError::ConvergenceFailure { needed: steps as f64, cap: opts.max_steps as f64 });
            }
            let remaining = (target - z).abs();
            let hs = h.min(remaining) * dir;
            let k2 = f(z + C2 * hs, &axpy(&y, &[(A21, &k1)], hs))?;
            let k3 = f(z + C3 * hs, &axpy(&y, &[(A31, &k1), (A32, &k2)], hs))?;
            let k4 = f(z + C4 * hs, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs))?;
            let k5 = f(z + C5 * hs, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs))?;
            let k6 = f(z + hs, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], hs))?;
            let ynew = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], hs);
            let k7 = f(z + hs, &ynew)?;
            let err = axpy(
                &CMat::zeros(y.nrows(), y.ncols()),
                &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
                hs,
            );
            let mut en: f64 = 0.0;
            for ((e, a), b) in err.iter().zip(y.iter()).zip(ynew.iter()) {
                let sc = opts.atol + opts.rtol * a.norm().max(b.norm());
                en = en.max(e.norm() / sc);
            }
            if !en.is_finite() {
                h *= 0.25;
                if h < opts.h_min {
                    return Err(MonopoleError::StepSizeUnderflow { z });
                }
                continue;
            }
            if en <= 1.0 {
                z = if hs.abs() >= remaining { target } else { z + hs };
                y = ynew;
                k1 = k7;
                let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                if hs.abs() >= h * 0.999 || fac < 1.0 {
                    h *= fac;
                }
            } else {
                h *= (0.9 * en.powf(-0.2)).clamp(0.1, 0.9);
                if h < opts.h_min {
                    return Err(MonopoleError::StepSizeUnderflow { z });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
