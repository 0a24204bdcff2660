//! Spectral curves `ηⁿ + a₁(ζ)ηⁿ⁻¹ + … + aₙ(ζ) = 0`, the minitwistor
//! parameterization, the Atiyah–Ward constraint and the Lax matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MonopoleError, Result};
use crate::matrix_kit::{c, identity, re, CMat, SpatialPoint, C64, I, ONE, ZERO};
use crate::nahm_flow::NahmTriple;
use crate::poly::{roots, Poly};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    pub n: usize,
    /// `a[k-1]` holds the coefficients of `a_k(ζ)`, low → high.
    pub a: Vec<Vec<C64>>,
}

/// A ζ-coordinate on the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Zeta {
    Finite(C64),
    Infinity,
}

/// A point of the curve. At `ζ = ∞` the `eta` field carries the finite
/// limit `η/ζ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub zeta: Zeta,
    pub eta: C64,
    pub sheet: Option<usize>,
}

impl CurvePoint {
    pub fn finite(zeta: C64, eta: C64) -> Self {
        CurvePoint { zeta: Zeta::Finite(zeta), eta, sheet: None }
    }

    pub fn zeta_finite(&self) -> Option<C64> {
        match self.zeta {
            Zeta::Finite(z) => Some(z),
            Zeta::Infinity => None,
        }
    }
}

impl SpectralCurve {
    pub fn new(n: usize, a: Vec<Vec<C64>>) -> Result<Self> {
        if n == 0 {
            return Err(MonopoleError::InvalidInput("charge must be positive".into()));
        }
        if a.len() != n {
            return Err(MonopoleError::InvalidInput(format!("expected {n} coefficient polynomials, got {}", a.len())));
        }
        let mut a = a;
        for (k, ak) in a.iter_mut().enumerate() {
            while ak.len() > 2 * (k + 1) + 1 {
                if ak.last().map(|c| c.norm() == 0.0).unwrap_or(false) {
                    ak.pop();
                } else {
                    return Err(MonopoleError::InvalidInput(format!(
                        "a_{} has degree {} > {}",
                        k + 1,
                        ak.len() - 1,
                        2 * (k + 1)
                    )));
                }
            }
        }
        Ok(SpectralCurve { n, a })
    }

    pub fn genus(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    pub fn a_poly(&self, k: usize) -> Poly {
        Poly(self.a[k - 1].clone())
    }

    /// Coefficients `[1, a₁(ζ), …, aₙ(ζ)]` of the η-polynomial at fixed ζ.
    pub fn eta_coeffs(&self, zeta: C64) -> Vec<C64> {
        let mut out = vec![ONE];
        out.extend((1..=self.n).map(|k| self.a_poly(k).eval(zeta)));
        out
    }

    /// The `n` values of η over a finite ζ.
    pub fn etas_over(&self, zeta: C64) -> Vec<C64> {
        let cs = self.eta_coeffs(zeta);
        // reverse to low → high in η
        let p = Poly(cs.into_iter().rev().collect());
        roots(&p, 1e-15)
    }

    /// Scale used to judge `|P(ζ,η)|`: the largest monomial magnitude.
    pub fn term_scale(&self, zeta: C64, eta: C64) -> f64 {
        let cs = self.eta_coeffs(zeta);
        cs.iter()
            .enumerate()
            .map(|(k, &a)| (a * eta.powu((self.n - k) as u32)).norm())
            .fold(0.0, f64::max)
    }
}

/// `P(ζ,η) = ηⁿ + Σ a_k(ζ) ηⁿ⁻ᵏ` at a finite point.
pub fn eval_curve(curve: &SpectralCurve, zeta: C64, eta: C64) -> C64 {
    curve
        .eta_coeffs(zeta)
        .iter()
        .fold(ZERO, |acc, &a| acc * eta + a)
}

/// `y(ζ) = ((1+ζ²)/2i, (1−ζ²)/2, −ζ)`.
pub fn y_of_zeta(zeta: C64) -> [C64; 3] {
    let z2 = zeta * zeta;
    [(ONE + z2) / (re(2.0) * I), (ONE - z2) * 0.5, -zeta]
}

/// The real unit vector attached to a direction ζ.
pub fn u_hat(zeta: Zeta) -> [f64; 3] {
    match zeta {
        Zeta::Infinity => [0.0, 0.0, -1.0],
        Zeta::Finite(z) => {
            let a = z.norm_sqr();
            if !a.is_finite() || a > 1e300 {
                return [0.0, 0.0, -1.0];
            }
            let d = 1.0 + a;
            // i(ζ − ζ̄) = −2 Im ζ
            [-2.0 * z.im / d, 2.0 * z.re / d, (1.0 - a) / d]
        }
    }
}

/// Image of a point under `(ζ,η) ↦ (−1/ζ̄, −η̄/ζ̄²)`.
pub fn involution(zeta: C64, eta: C64) -> (C64, C64) {
    let zb = zeta.conj();
    (-ONE / zb, -eta.conj() / (zb * zb))
}

/// Largest relative curve residual at the involution images of sampled
/// on-curve points.
pub fn involution_residual(curve: &SpectralCurve, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let zeta = c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        if zeta.norm() < 1e-3 {
            continue;
        }
        for eta in curve.etas_over(zeta) {
            let (zi, ei) = involution(zeta, eta);
            let val = eval_curve(curve, zi, ei).norm();
            let scale = curve.term_scale(zi, ei).max(1.0);
            worst = worst.max(val / scale);
        }
    }
    worst
}

/// η along the Atiyah–Ward line, `η(ζ) = 2 y(ζ)·x`, as a quadratic in ζ.
pub fn aw_eta_poly(x: &SpatialPoint) -> Poly {
    Poly(vec![c(x.x2, -x.x1), re(-2.0 * x.x3), c(-x.x2, -x.x1)])
}

/// Degree-2n polynomial obtained by substituting `η = 2y·x` in the curve.
pub fn atiyah_ward_poly(curve: &SpectralCurve, x: &SpatialPoint) -> Poly {
    let eta = aw_eta_poly(x);
    let mut p = eta.pow(curve.n);
    for k in 1..=curve.n {
        p = p.add(&curve.a_poly(k).mul(&eta.pow(curve.n - k)));
    }
    p
}

#[derive(Debug, Clone)]
pub struct AwRoots {
    pub points: Vec<CurvePoint>,
    /// Two roots agree to within `√tol` (measure-zero set of x).
    pub coincident: bool,
}

/// The 2n curve points cut out by the Atiyah–Ward constraint, ∞-roots
/// included, sorted lexicographically by (Re ζ, Im ζ) with ∞ last.
pub fn atiyah_ward_roots(curve: &SpectralCurve, x: &SpatialPoint, tol: f64) -> Result<AwRoots> {
    let p = atiyah_ward_poly(curve, x);
    let scale = p.norm();
    if scale == 0.0 || p.effective_degree(1e-14).is_none() {
        return Err(MonopoleError::DegenerateConstraint);
    }
    let eta = aw_eta_poly(x);
    let mut finite = roots(&p, tol);
    finite.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut points: Vec<CurvePoint> = finite.iter().map(|&z| CurvePoint::finite(z, eta.eval(z))).collect();
    let deficiency = 2 * curve.n - finite.len();
    let lead = eta.coeff(2);
    points.extend((0..deficiency).map(|_| CurvePoint { zeta: Zeta::Infinity, eta: lead, sheet: None }));
    let cluster = tol.sqrt();
    let mut coincident = deficiency > 1;
    for i in 0..finite.len() {
        for j in i + 1..finite.len() {
            if (finite[i] - finite[j]).norm() < cluster * (1.0 + finite[i].norm()) {
                coincident = true;
            }
        }
    }
    Ok(AwRoots { points, coincident })
}

/// `L(ζ) = A₋₁ + A₀ζ + A₁ζ²` and `M(ζ) = ½A₀ + A₁ζ`.
pub fn lax_matrices(t: &NahmTriple, zeta: C64) -> (CMat, CMat) {
    let (am, a0, a1) = t.lax_coefficients();
    let l = &am + &a0 * zeta + &a1 * (zeta * zeta);
    let m = &a0 * re(0.5) + &a1 * zeta;
    (l, m)
}

/// Coefficients `c_k` of `det(η − A) = ηⁿ + c₁ηⁿ⁻¹ + … + cₙ` (Faddeev–LeVerrier).
pub fn char_poly(a: &CMat) -> Vec<C64> {
    let n = a.nrows();
    let mut coeffs = vec![ONE];
    let mut m = CMat::zeros(n, n);
    for k in 1..=n {
        m = a * &m + identity(n) * coeffs[k - 1];
        let ck = -(a * &m).trace() / k as f64;
        coeffs.push(ck);
    }
    coeffs
}

/// Reads the curve off `det(η − L(ζ))` by discrete Fourier inversion on
/// unit-circle samples.
pub fn curve_from_nahm(t: &NahmTriple) -> SpectralCurve {
    let n = t.n();
    let mut a = Vec::with_capacity(n);
    for k in 1..=n {
        let nodes = 2 * k + 1;
        let samples: Vec<(C64, C64)> = (0..nodes)
            .map(|m| {
                let zeta = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / nodes as f64);
                let (l, _) = lax_matrices(t, zeta);
                (zeta, char_poly(&l)[k])
            })
            .collect();
        let coeffs = (0..nodes)
            .map(|j| samples.iter().map(|&(z, v)| v * z.powi(-(j as i32))).sum::<C64>() / nodes as f64)
            .collect();
        a.push(coeffs);
    }
    SpectralCurve { n, a }
}

/// Residues `ρ_m = lim η/ζ²` at the points over ζ = ∞, from the top
/// coefficients of the `a_k`. The flag reports coincident values.
pub fn residues_at_infinity(curve: &SpectralCurve) -> (Vec<C64>, bool) {
    let n = curve.n;
    // ρⁿ + Σ top(a_k) ρⁿ⁻ᵏ, low → high in ρ
    let mut lowhigh = vec![ZERO; n + 1];
    lowhigh[n] = ONE;
    for k in 1..=n {
        lowhigh[n - k] = curve.a_poly(k).coeff(2 * k);
    }
    let mut rs = roots(&Poly(lowhigh), 1e-15);
    rs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let scale = rs.iter().map(|r| r.norm()).fold(1e-300, f64::max);
    let mut degenerate = false;
    for i in 0..rs.len() {
        for j in i + 1..rs.len() {
            if (rs[i] - rs[j]).norm() < 1e-8 * scale {
                degenerate = true;
            }
        }
    }
    (rs, degenerate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n1_centered() -> SpectralCurve {
        SpectralCurve::new(1, vec![vec![ZERO]]).unwrap()
    }

    fn dot(a: [C64; 3], b: [C64; 3]) -> C64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    fn cross(a: [C64; 3], b: [C64; 3]) -> [C64; 3] {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    }

    #[test]
    fn y_examples() {
        let y0 = y_of_zeta(ZERO);
        assert!((y0[0] - c(0.0, -0.5)).norm() < 1e-15 && (y0[1] - re(0.5)).norm() < 1e-15 && y0[2] == ZERO);
        assert!(dot(y0, y0).norm() < 1e-15);
        let y1 = y_of_zeta(ONE);
        assert!((y1[0] - c(0.0, -1.0)).norm() < 1e-15 && y1[1].norm() < 1e-15 && (y1[2] + ONE).norm() < 1e-15);
        let z = c(0.7, -1.3);
        let y = y_of_zeta(z);
        let ybar = [y[0].conj(), y[1].conj(), y[2].conj()];
        let want = (1.0 + z.norm_sqr()).powi(2) / 2.0;
        assert!((dot(y, ybar) - re(want)).norm() < 1e-12);
    }

    #[test]
    fn u_hat_examples() {
        assert_eq!(u_hat(Zeta::Finite(ZERO)), [0.0, 0.0, 1.0]);
        let u = u_hat(Zeta::Finite(I));
        assert!((u[0] + 1.0).abs() < 1e-15 && u[1].abs() < 1e-15 && u[2].abs() < 1e-15);
        let z = c(0.4, 0.9);
        let a = u_hat(Zeta::Finite(z));
        let b = u_hat(Zeta::Finite(-ONE / z.conj()));
        for k in 0..3 {
            assert!((a[k] + b[k]).abs() < 1e-14);
        }
        assert_eq!(u_hat(Zeta::Infinity), [0.0, 0.0, -1.0]);
    }

    #[test]
    fn cross_products_with_null_vector() {
        for z in [c(0.3, 0.2), c(-1.7, 0.4), c(2.0, -3.0)] {
            let u = u_hat(Zeta::Finite(z)).map(re);
            let y = y_of_zeta(z);
            let yb = y.map(|v| v.conj());
            let uy = cross(u, y);
            let uyb = cross(u, yb);
            for k in 0..3 {
                assert!((uy[k] + I * y[k]).norm() < 1e-12);
                assert!((uyb[k] - I * yb[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn eval_curve_examples() {
        let n1 = n1_centered();
        assert_eq!(eval_curve(&n1, c(0.3, 0.1), ZERO), ZERO);
        let a2 = vec![re(0.5), ZERO, re(1.5), ZERO, re(0.5)];
        let n2 = SpectralCurve::new(2, vec![vec![ZERO], a2.clone()]).unwrap();
        let zeta = c(0.2, 0.7);
        let q = Poly(a2).eval(zeta);
        let eta = (-q).sqrt();
        assert!(eval_curve(&n2, zeta, eta).norm() < 1e-14);
        let (zo, eo) = (c(1.1, -0.4), c(0.3, 2.0));
        let horner = eval_curve(&n2, zo, eo);
        let direct = eo * eo + Poly(n2.a[1].clone()).eval(zo);
        assert!((horner - direct).norm() < 1e-13);
    }

    #[test]
    fn degree_bound_enforced() {
        assert!(SpectralCurve::new(1, vec![vec![ZERO, ZERO, ZERO, ONE]]).is_err());
        assert!(SpectralCurve::new(1, vec![vec![ZERO, ZERO, ONE, ZERO]]).is_ok());
    }

    #[test]
    fn involution_examples() {
        assert_eq!(involution_residual(&n1_centered(), 20, 1), 0.0);
        let bad = SpectralCurve::new(2, vec![vec![ZERO, ZERO, ZERO], vec![re(1.0), ZERO, ZERO, ONE, ZERO]]).unwrap();
        assert!(involution_residual(&bad, 20, 1) > 1e-3);
        // a real-symmetric quartic satisfies the reality condition
        let good = SpectralCurve::new(2, vec![vec![ZERO], vec![re(0.3), ZERO, re(1.1), ZERO, re(0.3)]]).unwrap();
        assert!(involution_residual(&good, 50, 4) < 1e-12);
    }

    #[test]
    fn aw_axis_point_has_infinite_root() {
        let r = atiyah_ward_roots(&n1_centered(), &SpatialPoint::new(0.0, 0.0, 2.0), 1e-12).unwrap();
        assert_eq!(r.points.len(), 2);
        assert!(r.points[0].zeta_finite().unwrap().norm() < 1e-14);
        assert_eq!(r.points[1].zeta, Zeta::Infinity);
        let p = atiyah_ward_poly(&n1_centered(), &SpatialPoint::new(0.0, 0.0, 2.0));
        assert!((p.coeff(1) - re(-4.0)).norm() < 1e-15 && p.coeff(0).norm() < 1e-15 && p.coeff(2).norm() < 1e-15);
    }

    #[test]
    fn aw_x1_axis() {
        let r = atiyah_ward_roots(&n1_centered(), &SpatialPoint::new(1.0, 0.0, 0.0), 1e-12).unwrap();
        let zs: Vec<C64> = r.points.iter().map(|p| p.zeta_finite().unwrap()).collect();
        assert!((zs[0] - c(0.0, -1.0)).norm() < 1e-12 && (zs[1] - c(0.0, 1.0)).norm() < 1e-12);
        let u = u_hat(r.points[1].zeta);
        assert!((u[0] + 1.0).abs() < 1e-12);
        let u = u_hat(r.points[0].zeta);
        assert!((u[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aw_roots_closed_under_antipodal_map() {
        let curve = SpectralCurve::new(2, vec![vec![ZERO], vec![re(0.3), ZERO, re(1.1), ZERO, re(0.3)]]).unwrap();
        let x = SpatialPoint::new(0.37, -0.52, 0.81);
        let r = atiyah_ward_roots(&curve, &x, 1e-12).unwrap();
        let zs: Vec<C64> = r.points.iter().map(|p| p.zeta_finite().unwrap()).collect();
        for &z in &zs {
            let img = -ONE / z.conj();
            let best = zs.iter().map(|w| (w - img).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8 * (1.0 + img.norm()));
            let p = r.points.iter().find(|p| p.zeta_finite() == Some(z)).unwrap();
            assert!(eval_curve(&curve, z, p.eta).norm() < 1e-10 * curve.term_scale(z, p.eta).max(1.0));
        }
    }

    #[test]
    fn degenerate_constraint_detected() {
        assert!(matches!(
            atiyah_ward_roots(&n1_centered(), &SpatialPoint::new(0.0, 0.0, 0.0), 1e-12),
            Err(MonopoleError::DegenerateConstraint)
        ));
    }

    #[test]
    fn lax_examples() {
        let zero = NahmTriple::zeros(2);
        let (l, m) = lax_matrices(&zero, c(0.3, 0.1));
        assert_eq!(l, CMat::zeros(2, 2));
        assert_eq!(m, CMat::zeros(2, 2));
        let (t1, t2, t3) = (0.4, -0.3, 0.9);
        let t = NahmTriple::scalar([t1, t2, t3]);
        let zeta = c(0.7, 0.2);
        let (l, _) = lax_matrices(&t, zeta);
        let want = I * c(t1, t2) - re(2.0) * I * I * t3 * zeta + I * c(t1, -t2) * zeta * zeta;
        assert!((l[(0, 0)] - want).norm() < 1e-14);
    }

    #[test]
    fn charge1_curve_from_linear_data() {
        let cvec = [0.4, -0.3, 0.9];
        let t = NahmTriple::scalar(cvec);
        let curve = curve_from_nahm(&t);
        // det(η − L) = η − L, so a₁ = −L(ζ) = −2i y(ζ)·(i c)
        for zeta in [c(0.3, 0.0), c(-0.5, 1.2)] {
            let y = y_of_zeta(zeta);
            let ic = cvec.map(|v| I * v);
            let want = -re(2.0) * I * dot(y, ic);
            assert!((curve.a_poly(1).eval(zeta) - want).norm() < 1e-12);
        }
        let zero = curve_from_nahm(&NahmTriple::zeros(1));
        assert!(zero.a[0].iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn residues_examples() {
        let n1 = SpectralCurve::new(1, vec![vec![ZERO, ZERO, c(0.5, 0.2)]]).unwrap();
        let (r, _) = residues_at_infinity(&n1);
        assert!((r[0] + c(0.5, 0.2)).norm() < 1e-14);
        let kappa: f64 = 1.3;
        let n2 = SpectralCurve::new(2, vec![vec![ZERO], vec![ZERO, ZERO, re(0.2), ZERO, re(kappa * kappa)]]).unwrap();
        let (r, deg) = residues_at_infinity(&n2);
        assert!(!deg);
        assert!((r[0] - c(0.0, -kappa)).norm() < 1e-12 || (r[0] - c(0.0, kappa)).norm() < 1e-12);
        // numeric limit η/ζ² at large |ζ|
        let big = c(1e6, 0.0);
        for eta in n2.etas_over(big) {
            let lim = eta / (big * big);
            assert!(r.iter().any(|&rr| (rr - lim).norm() < 1e-6));
        }
    }

    #[test]
    fn char_poly_matches_eigenvalues() {
        let a = CMat::from_row_slice(3, 3, &[re(1.0), re(2.0), ZERO, ZERO, re(3.0), re(1.0), re(1.0), ZERO, re(-1.0)]);
        let cs = char_poly(&a);
        for ev in crate::matrix_kit::eigenvalues(&a) {
            let v = cs.iter().fold(ZERO, |acc, &c| acc * ev + c);
            assert!(v.norm() < 1e-10);
        }
    }
}
