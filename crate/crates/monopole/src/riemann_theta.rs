//! Riemann theta functions by truncated lattice summation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MonopoleError, Result};
use crate::matrix_kit::{CMat, C64, I, ZERO};
use crate::report::{Check, Report};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest admissible summation radius, in lattice units.
pub const DEFAULT_RADIUS_CAP: f64 = 12.0;

/// Symmetric `g×g` period matrix with positive definite imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodMatrix {
    tau: CMat,
    im: DMatrix<f64>,
    im_inv: DMatrix<f64>,
    lambda_min: f64,
}

impl PeriodMatrix {
    pub fn new(tau: CMat) -> Result<Self> {
        let g = tau.nrows();
        if g == 0 || tau.ncols() != g {
            return Err(MonopoleError::InvalidInput("period matrix must be square and non-empty".into()));
        }
        let asym = (&tau - tau.transpose()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if asym > 1e-10 * (1.0 + tau.iter().map(|v| v.norm()).fold(0.0, f64::max)) {
            return Err(MonopoleError::InvalidInput(format!("period matrix not symmetric ({asym:.2e})")));
        }
        let im = DMatrix::from_fn(g, g, |i, j| 0.5 * (tau[(i, j)].im + tau[(j, i)].im));
        let lambda_min = im.clone().symmetric_eigenvalues().min();
        if !(lambda_min > 0.0) {
            return Err(MonopoleError::InvalidInput(format!(
                "imaginary part of period matrix is not positive definite (min eigenvalue {lambda_min:.3e})"
            )));
        }
        let im_inv = im.clone().try_inverse().ok_or(MonopoleError::SingularMatrix { cond: f64::INFINITY })?;
        Ok(PeriodMatrix { tau, im, im_inv, lambda_min })
    }

    pub fn scalar(tau: C64) -> Result<Self> {
        Self::new(CMat::from_element(1, 1, tau))
    }

    pub fn genus(&self) -> usize {
        self.tau.nrows()
    }

    pub fn tau(&self) -> &CMat {
        &self.tau
    }

    /// `τ·m` for an integer vector.
    pub fn tau_times(&self, m: &[i64]) -> Vec<C64> {
        let g = self.genus();
        (0..g).map(|i| (0..g).map(|j| self.tau[(i, j)] * m[j] as f64).sum()).collect()
    }
}

/// Half-characteristic `½p + ½τq`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaChar {
    pub p: Vec<i64>,
    pub q: Vec<i64>,
}

impl ThetaChar {
    pub fn is_odd(&self) -> bool {
        self.p.iter().zip(&self.q).map(|(a, b)| a * b).sum::<i64>().rem_euclid(2) == 1
    }

    /// The point `½p + ½τq` of `ℂᵍ`.
    pub fn point(&self, tau: &PeriodMatrix) -> Vec<C64> {
        let tq = tau.tau_times(&self.q);
        self.p.iter().zip(tq).map(|(&p, t)| C64::new(0.5 * p as f64, 0.0) + t * 0.5).collect()
    }
}

/// Theta value stored as `mantissa · exp(log_scale)` so that large
/// arguments do not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledValue {
    pub mantissa: C64,
    pub log_scale: f64,
    /// Largest term magnitude relative to `exp(log_scale)`.
    pub max_term: f64,
}

impl ScaledValue {
    pub fn value(&self) -> C64 {
        self.mantissa * self.log_scale.exp()
    }
}

struct Lattice {
    points: Vec<Vec<i64>>,
}

fn lattice(w: &[C64], tau: &PeriodMatrix, eps: f64, cap: f64) -> Result<Lattice> {
    let g = tau.genus();
    if w.len() != g {
        return Err(MonopoleError::InvalidInput(format!("theta argument has length {}, genus is {g}", w.len())));
    }
    let imw = DVector::from_iterator(g, w.iter().map(|v| v.im));
    let center = -(&tau.im_inv * imw);
    // Gaussian tail: terms beyond radius R in the Im τ metric are below
    // exp(−πR²); the extra log term bounds the shell count.
    let shells = g as f64 * (2.0 + 2.0 / tau.lambda_min.sqrt()).ln();
    let r2 = ((-eps.max(1e-300).ln()) + shells).max(1.0) / PI;
    let r = r2.sqrt();
    let lattice_radius = r / tau.lambda_min.sqrt();
    if !lattice_radius.is_finite() || lattice_radius > cap {
        return Err(MonopoleError::ConvergenceFailure { needed: lattice_radius, cap });
    }
    let half: Vec<f64> = (0..g).map(|i| r * tau.im_inv[(i, i)].sqrt()).collect();
    let mut points = Vec::new();
    let mut k = vec![0i64; g];
    fn rec(
        d: usize,
        k: &mut Vec<i64>,
        center: &DVector<f64>,
        half: &[f64],
        im: &DMatrix<f64>,
        r2: f64,
        out: &mut Vec<Vec<i64>>,
    ) {
        let g = k.len();
        if d == g {
            let diff = DVector::from_iterator(g, (0..g).map(|i| k[i] as f64 - center[i]));
            if diff.dot(&(im * &diff)) <= r2 {
                out.push(k.clone());
            }
            return;
        }
        let lo = (center[d] - half[d]).floor() as i64;
        let hi = (center[d] + half[d]).ceil() as i64;
        for v in lo..=hi {
            k[d] = v;
            rec(d + 1, k, center, half, im, r2, out);
        }
    }
    rec(0, &mut k, &center, &half, &tau.im, r2, &mut points);
    Ok(Lattice { points })
}

fn exponent(k: &[i64], w: &[C64], tau: &PeriodMatrix) -> C64 {
    let g = k.len();
    let mut quad = ZERO;
    for i in 0..g {
        for j in 0..g {
            quad += tau.tau[(i, j)] * (k[i] * k[j]) as f64;
        }
    }
    let lin: C64 = (0..g).map(|i| w[i] * k[i] as f64).sum();
    I * PI * quad + I * (2.0 * PI) * lin
}

fn sum_terms(w: &[C64], tau: &PeriodMatrix, eps: f64, cap: f64, weight: impl Fn(&[i64]) -> C64) -> Result<ScaledValue> {
    let lat = lattice(w, tau, eps, cap)?;
    let exps: Vec<C64> = lat.points.iter().map(|k| exponent(k, w, tau)).collect();
    let log_scale = exps.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let mut mantissa = ZERO;
    let mut max_term: f64 = 0.0;
    for (k, e) in lat.points.iter().zip(&exps) {
        let t = (e - log_scale).exp();
        max_term = max_term.max(t.norm());
        mantissa += weight(k) * t;
    }
    Ok(ScaledValue { mantissa, log_scale, max_term })
}

/// `θ(w|τ)` in scaled form.
pub fn theta_scaled(w: &[C64], tau: &PeriodMatrix, eps: f64) -> Result<ScaledValue> {
    sum_terms(w, tau, eps, DEFAULT_RADIUS_CAP, |_| C64::new(1.0, 0.0))
}

/// `θ(w|τ) = Σ_k exp(iπkᵀτk + 2iπwᵀk)`.
pub fn theta(w: &[C64], tau: &PeriodMatrix, eps: f64) -> Result<C64> {
    Ok(theta_scaled(w, tau, eps)?.value())
}

/// Same sum with an explicit radius cap, for callers that need to trade
/// range for speed.
pub fn theta_with_cap(w: &[C64], tau: &PeriodMatrix, eps: f64, cap: f64) -> Result<C64> {
    Ok(sum_terms(w, tau, eps, cap, |_| C64::new(1.0, 0.0))?.value())
}

/// `exp(−iπmᵀτm − 2iπwᵀm)·θ(w)`, which equals `θ(w + τm)`.
pub fn theta_shifted(w: &[C64], tau: &PeriodMatrix, m: &[i64], eps: f64) -> Result<C64> {
    let tm = tau.tau_times(m);
    let mtm: C64 = m.iter().zip(&tm).map(|(&mi, &t)| t * mi as f64).sum();
    let wm: C64 = m.iter().zip(w).map(|(&mi, &wi)| wi * mi as f64).sum();
    Ok((-I * PI * mtm - I * (2.0 * PI) * wm).exp() * theta(w, tau, eps)?)
}

/// `θ[p,q](w)`, evaluated by shifting the argument of the canonical theta.
pub fn theta_char(w: &[C64], tau: &PeriodMatrix, ch: &ThetaChar, eps: f64) -> Result<C64> {
    let a: Vec<f64> = ch.q.iter().map(|&q| 0.5 * q as f64).collect();
    let b: Vec<f64> = ch.p.iter().map(|&p| 0.5 * p as f64).collect();
    let ta = tau.tau_times(&ch.q).into_iter().map(|t| t * 0.5).collect::<Vec<_>>();
    let shifted: Vec<C64> = (0..w.len()).map(|i| w[i] + b[i] + ta[i]).collect();
    let ata: C64 = a.iter().zip(&ta).map(|(&ai, &t)| t * ai).sum();
    let awb: C64 = (0..w.len()).map(|i| (w[i] + b[i]) * a[i]).sum();
    Ok((I * PI * ata + I * (2.0 * PI) * awb).exp() * theta(&shifted, tau, eps)?)
}

/// Gradient of `θ[p,q]` at `w`.
pub fn theta_char_gradient(w: &[C64], tau: &PeriodMatrix, ch: &ThetaChar, eps: f64) -> Result<Vec<C64>> {
    let a: Vec<f64> = ch.q.iter().map(|&q| 0.5 * q as f64).collect();
    let b: Vec<f64> = ch.p.iter().map(|&p| 0.5 * p as f64).collect();
    let ta = tau.tau_times(&ch.q).into_iter().map(|t| t * 0.5).collect::<Vec<_>>();
    let shifted: Vec<C64> = (0..w.len()).map(|i| w[i] + b[i] + ta[i]).collect();
    let ata: C64 = a.iter().zip(&ta).map(|(&ai, &t)| t * ai).sum();
    let awb: C64 = (0..w.len()).map(|i| (w[i] + b[i]) * a[i]).sum();
    let factor = (I * PI * ata + I * (2.0 * PI) * awb).exp();
    let th = theta(&shifted, tau, eps)?;
    let grad = theta_gradient(&shifted, tau, eps)?;
    Ok((0..w.len()).map(|i| factor * (I * (2.0 * PI * a[i]) * th + grad[i])).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivisorTest {
    pub on_divisor: bool,
    pub residual: f64,
}

/// Whether `θ(w) ≈ 0` relative to the largest summand.
pub fn on_theta_divisor(w: &[C64], tau: &PeriodMatrix, tol: f64) -> Result<DivisorTest> {
    let s = theta_scaled(w, tau, 1e-16)?;
    let residual = s.mantissa.norm() / s.max_term.max(f64::MIN_POSITIVE);
    Ok(DivisorTest { on_divisor: residual < tol, residual })
}

/// `∂θ/∂w_j`, differentiated term by term.
pub fn theta_gradient(w: &[C64], tau: &PeriodMatrix, eps: f64) -> Result<Vec<C64>> {
    (0..tau.genus())
        .map(|j| Ok(sum_terms(w, tau, eps, DEFAULT_RADIUS_CAP, |k| I * (2.0 * PI * k[j] as f64))?.value()))
        .collect()
}

/// Random Siegel-upper-half-space period matrix: `Re τ` symmetric with
/// entries in `[−½, ½]`, `Im τ = BᵀB + ½·1`.
pub fn random_period_matrix(g: usize, rng: &mut impl Rng) -> Result<PeriodMatrix> {
    let b = DMatrix::from_fn(g, g, |_, _| rng.gen_range(-0.5..0.5));
    let im = b.transpose() * &b + DMatrix::identity(g, g) * 0.5;
    let mut re = DMatrix::from_fn(g, g, |_, _| rng.gen_range(-0.5..0.5));
    re = (&re + re.transpose()) * 0.5;
    PeriodMatrix::new(CMat::from_fn(g, g, |i, j| C64::new(re[(i, j)], im[(i, j)])))
}

/// Parity, integer periodicity, quasi-periodicity along `τ`, odd
/// characteristics, and the term-wise gradient against central differences,
/// on `samples` random `(τ, w)` in genus `g`. Residuals are relative to the
/// size of the compared values.
pub fn property_suite(g: usize, samples: usize, seed: u64, tol: f64, grad_tol: f64) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = tol * 1e-3;
    let rel = |a: C64, b: C64, scale: f64| (a - b).norm() / a.norm().max(b.norm()).max(scale);
    let (mut parity, mut period, mut quasi, mut odd, mut grad): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let tau = random_period_matrix(g, &mut rng)?;
        let w: Vec<C64> = (0..g).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.4..0.4))).collect();
        let v = theta_scaled(&w, &tau, eps)?;
        let val = v.value();
        let scale = v.max_term * v.log_scale.exp();
        let neg: Vec<C64> = w.iter().map(|x| -x).collect();
        parity = parity.max(rel(theta(&neg, &tau, eps)?, val, scale));
        let j = rng.gen_range(0..g);
        let mut shifted = w.clone();
        shifted[j] += 1.0;
        period = period.max(rel(theta(&shifted, &tau, eps)?, val, scale));
        let m: Vec<i64> = (0..g).map(|_| rng.gen_range(-1..=1)).collect();
        let tm = tau.tau_times(&m);
        let moved: Vec<C64> = w.iter().zip(&tm).map(|(a, b)| a + b).collect();
        let direct = theta_scaled(&moved, &tau, eps)?;
        let predicted = theta_shifted(&w, &tau, &m, eps)?;
        quasi = quasi.max(rel(direct.value(), predicted, direct.max_term * direct.log_scale.exp()));
        // an odd characteristic gives an odd function
        let mut ch = ThetaChar { p: vec![0; g], q: vec![0; g] };
        ch.p[j] = 1;
        ch.q[j] = 1;
        let a = theta_char(&w, &tau, &ch, eps)?;
        let b = theta_char(&neg, &tau, &ch, eps)?;
        odd = odd.max((a + b).norm() / a.norm().max(b.norm()).max(scale));
        let gr = theta_gradient(&w, &tau, eps)?;
        let h = 1e-5;
        for k in 0..g {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[k] += h;
            wm[k] -= h;
            let fd = (theta(&wp, &tau, eps)? - theta(&wm, &tau, eps)?) / (2.0 * h);
            grad = grad.max((fd - gr[k]).norm() / gr[k].norm().max(scale));
        }
    }
    let mut rep = Report::default();
    rep.push(Check::below(format!("theta_parity_g{g}"), parity, tol));
    rep.push(Check::below(format!("theta_integer_period_g{g}"), period, tol));
    rep.push(Check::below(format!("theta_quasi_period_g{g}"), quasi, tol));
    rep.push(Check::below(format!("theta_odd_characteristic_g{g}"), odd, tol));
    rep.push(Check::below(format!("theta_gradient_fd_g{g}"), grad, grad_tol));
    Ok(rep)
}
