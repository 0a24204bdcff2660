//! The Baker–Akhiezer vector `Φ(P, z)` and the flow matrix `Q₀(z)`.
//!
//! The printed vector carries a common factor `θ(−K̃)/θ((z+1)U−K̃)` that is
//! 0/0 at face value. Only component ratios are unambiguous, so each
//! component is evaluated as
//!
//! `Φ_j = g_j(P) θ(φ(P)−φ(∞_j)+(z+1)U−K̃) / θ((z+1)U−K̃) · exp(z(E(P)−ν_j))`
//!
//! where `g_j` absorbs the `z`-independent denominators, is normalized by
//! `g_j(∞_j) = 1`, vanishes at the other infinity and has its pole divisor
//! fixed so that the spectral problem is driven by the prime-form `Q₀`.

use std::f64::consts::PI;

use crate::abelian_data::{abel_and_second_kind, AbelEngine, AbelianBundle};
use crate::error::{MonopoleError, Result};
use crate::matrix_kit::{CMat, CVec, C64, I, ONE, ZERO};
use crate::riemann_theta::{theta, theta_gradient, theta_scaled, PeriodMatrix};
use crate::spectral_curve::CurvePoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative size of `θ((z+1)U−K̃)` below which `z` counts as a pole.
const POLE_THRESHOLD: f64 = 1e-10;

/// A curve point together with its abelian integrals on the bundle's path
/// system.
#[derive(Debug, Clone, PartialEq)]
pub struct AbelPoint {
    pub zeta: C64,
    pub eta: C64,
    pub phi: Vec<C64>,
    pub e: C64,
}

pub fn abel_point(bundle: &AbelianBundle, p: &CurvePoint) -> Result<AbelPoint> {
    let (phi, e) = abel_and_second_kind(bundle, p)?;
    Ok(AbelPoint { zeta: p.zeta_finite().expect("finite point"), eta: p.eta, phi, e })
}

/// `Φ = exp(common_exp) · vec`; the split keeps large exponents combinable
/// with other factors before exponentiation.
#[derive(Debug, Clone, PartialEq)]
pub struct BaValue {
    pub common_exp: C64,
    pub vec: CVec,
}

impl BaValue {
    pub fn value(&self) -> CVec {
        &self.vec * self.common_exp.exp()
    }
}

#[derive(Debug, Clone)]
pub struct BAEvaluation {
    pub point: AbelPoint,
    pub z: f64,
    pub components: CVec,
    pub residual: f64,
}

#[derive(Debug, Clone)]
struct Genus1Data {
    tau: PeriodMatrix,
    u: C64,
    k: C64,
    phi: [C64; 2],
    omega: [C64; 2],
    d: [C64; 2],
    c: [C64; 2],
}

#[derive(Debug, Clone)]
enum Kind {
    /// Charge one: `Φ = exp(−z(ζρ + q₀))`.
    Genus0 { q0: C64 },
    Genus1(Box<Genus1Data>),
    /// Only `Q₀` is available (no `g_j` data).
    QOnly,
}

#[derive(Debug, Clone)]
pub struct BakerAkhiezer<'a> {
    pub bundle: &'a AbelianBundle,
    eps: f64,
    kind: Kind,
}

fn th(w: C64, tau: &PeriodMatrix, eps: f64) -> Result<C64> {
    theta(&[w], tau, eps)
}

fn dth(w: C64, tau: &PeriodMatrix, eps: f64) -> Result<C64> {
    Ok(theta_gradient(&[w], tau, eps)?[0])
}

impl<'a> BakerAkhiezer<'a> {
    pub fn new(bundle: &'a AbelianBundle, eps: f64) -> Result<Self> {
        let kind = match &bundle.engine {
            AbelEngine::Genus0 => Kind::Genus0 { q0: -bundle.curve.a[0].get(1).copied().unwrap_or(ZERO) },
            AbelEngine::Genus1(e) => {
                let tau = bundle.tau()?.clone();
                let mut data = Genus1Data {
                    tau,
                    u: bundle.u[0],
                    k: bundle.k_tilde[0],
                    phi: [bundle.abel_inf[0][0], bundle.abel_inf[1][0]],
                    omega: [e.omega_at_infinity(0), e.omega_at_infinity(1)],
                    d: [ZERO; 2],
                    c: [ZERO; 2],
                };
                let target = -bundle_eps(bundle, 0, 1) * char_phase(bundle, 1, 0) / bundle.prime_inf[(0, 1)];
                solve_divisor(&mut data, target, eps)?;
                Kind::Genus1(Box::new(data))
            }
            AbelEngine::Declared => Kind::QOnly,
        };
        Ok(BakerAkhiezer { bundle, eps, kind })
    }

    pub fn n(&self) -> usize {
        self.bundle.n
    }

    pub fn rho(&self) -> CMat {
        CMat::from_diagonal(&CVec::from_vec(self.bundle.rho.clone()))
    }

    /// Pole divisor `(d₁, d₂)` of the `g_j` (genus one).
    pub fn divisor(&self) -> Option<[C64; 2]> {
        match &self.kind {
            Kind::Genus1(d) => Some(d.d),
            _ => None,
        }
    }

    fn winding_arg(&self, z: f64) -> Vec<C64> {
        (0..self.bundle.genus()).map(|i| self.bundle.u[i] * (z + 1.0) - self.bundle.k_tilde[i]).collect()
    }

    /// `Q₀(z)`: zero diagonal, off-diagonal entries
    /// `ε_jl (ρ_j−ρ_l)/𝓔_jl · e^{iπq̃·(φ_l−φ_j)} · θ(φ_l−φ_j+w)/θ(w) · e^{z(ν_l−ν_j)}`
    /// with `w = (z+1)U − K̃`.
    pub fn q0_matrix(&self, z: f64) -> Result<CMat> {
        let n = self.n();
        if let Kind::Genus0 { q0 } = self.kind {
            return Ok(CMat::from_element(1, 1, q0));
        }
        let b = self.bundle;
        let tau = b.tau()?;
        let w = self.winding_arg(z);
        let den = theta_scaled(&w, tau, self.eps)?;
        if den.mantissa.norm() < POLE_THRESHOLD * den.max_term || !(z.abs() < 1.0) {
            return Err(MonopoleError::PoleProximity { z });
        }
        let mut q = CMat::zeros(n, n);
        for j in 0..n {
            for l in 0..n {
                if j == l {
                    continue;
                }
                let arg: Vec<C64> = (0..b.genus()).map(|i| b.abel_inf[l][i] - b.abel_inf[j][i] + w[i]).collect();
                let num = theta_scaled(&arg, tau, self.eps)?;
                let ratio = num.mantissa / den.mantissa * (num.log_scale - den.log_scale).exp();
                q[(j, l)] = bundle_eps(b, j, l) * (b.rho[j] - b.rho[l]) / b.prime_inf[(j, l)]
                    * char_phase(b, l, j)
                    * ratio
                    * ((b.nu[l] - b.nu[j]) * z).exp();
            }
        }
        Ok(q)
    }

    /// `g_j(P)` from `φ(P)`; normalized to 1 at `∞_j`, zero at the other
    /// infinity.
    pub fn g_function(&self, phi: &[C64], j: usize) -> Result<C64> {
        match &self.kind {
            Kind::Genus0 { .. } => Ok(ONE),
            Kind::Genus1(d) => {
                let p = phi[0];
                let l = 1 - j;
                let den1 = th(p - d.d[0] - d.k, &d.tau, self.eps)?;
                let den2 = th(p - d.d[1] - d.k, &d.tau, self.eps)?;
                if den1.norm() < 1e-13 || den2.norm() < 1e-13 {
                    return Err(MonopoleError::DivisorCollision { component: j });
                }
                Ok(d.c[j] * th(p - d.phi[l] - d.k, &d.tau, self.eps)? / (den1 * den2))
            }
            Kind::QOnly => Err(MonopoleError::Unsupported("g_j data is not available for genus ≥ 2".into())),
        }
    }

    /// Baker–Akhiezer vector at a point with known abelian integrals.
    pub fn ba_at(&self, p: &AbelPoint, z: f64) -> Result<BaValue> {
        let n = self.n();
        match &self.kind {
            Kind::Genus0 { q0 } => Ok(BaValue { common_exp: p.e * z, vec: CVec::from_element(1, (-*q0 * z).exp()) }),
            Kind::Genus1(d) => {
                let w = d.u * (z + 1.0) - d.k;
                let den = theta_scaled(&[w], &d.tau, self.eps)?;
                if den.mantissa.norm() < POLE_THRESHOLD * den.max_term {
                    return Err(MonopoleError::PoleProximity { z });
                }
                let den = den.value();
                let mut v = CVec::zeros(n);
                for j in 0..n {
                    let g = self.g_function(&p.phi, j)?;
                    let t = th(p.phi[0] - d.phi[j] + w, &d.tau, self.eps)?;
                    v[j] = g * t / den * (-self.bundle.nu[j] * z).exp();
                }
                Ok(BaValue { common_exp: p.e * z, vec: v })
            }
            Kind::QOnly => Err(MonopoleError::Unsupported("Baker–Akhiezer vector needs g_j data for genus ≥ 2".into())),
        }
    }

    /// `Φ(P, z)` with the finite-difference spectral-problem residual
    /// `‖Φ' + Q₀Φ + ζ diag(ρ) Φ‖ / ‖Φ‖`.
    pub fn ba_components(&self, p: &CurvePoint, z: f64) -> Result<BAEvaluation> {
        let ap = abel_point(self.bundle, p)?;
        let components = self.ba_at(&ap, z)?.value();
        let residual = self.spectral_residual(&ap, z)?;
        Ok(BAEvaluation { point: ap, z, components, residual })
    }

    /// Relative residual of the spectral problem, FD step `1e−4(1−|z|)`
    /// with one Richardson level.
    pub fn spectral_residual(&self, p: &AbelPoint, z: f64) -> Result<f64> {
        let h = 1e-4 * (1.0 - z.abs());
        // strip the common exponential: Φ = e^{zE} ψ gives ψ' + Eψ + Q₀ψ + ζρψ = 0
        let psi = |t: f64| -> Result<CVec> {
            let v = self.ba_at(p, t)?;
            Ok(&v.vec * (v.common_exp - p.e * t).exp())
        };
        let d = |hh: f64| -> Result<CVec> { Ok((psi(z + hh)? - psi(z - hh)?) / C64::new(2.0 * hh, 0.0)) };
        let deriv = (d(h / 2.0)? * C64::new(4.0, 0.0) - d(h)?) / C64::new(3.0, 0.0);
        let v = psi(z)?;
        let res = deriv + &v * p.e + self.q0_matrix(z)? * &v + self.rho() * &v * p.zeta;
        Ok(res.norm() / v.norm())
    }

    /// Derivative of `g_j` in the local coordinate at `∞_l`, `l ≠ j`.
    pub fn g_prime_at_other_infinity(&self, j: usize) -> Result<C64> {
        match &self.kind {
            Kind::Genus1(d) => g_prime(d, j, self.eps),
            _ => Err(MonopoleError::Unsupported("needs genus-one data".into())),
        }
    }
}

/// Largest spectral-problem residual over `count` random curve points
/// (`|Re ζ|, |Im ζ| < 1.5`, random sheet) and `z ∈ (−0.8, 0.8)`. Points whose
/// Abel path would touch a branch point are redrawn.
pub fn spectral_residual_sample(ba: &BakerAkhiezer, count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut attempts = 0;
    while done < count {
        attempts += 1;
        if attempts > 20 * count {
            return Err(MonopoleError::InvalidInput("too few admissible sample points".into()));
        }
        let zeta = C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let etas = ba.bundle.curve.etas_over(zeta);
        let eta = etas[rng.gen_range(0..etas.len())];
        let z = rng.gen_range(-0.8..0.8);
        let p = match abel_point(ba.bundle, &CurvePoint::finite(zeta, eta)) {
            Ok(p) => p,
            Err(MonopoleError::PathCrossesBranchPoint { .. }) | Err(MonopoleError::DivisorCollision { .. }) => continue,
            Err(e) => return Err(e),
        };
        match ba.spectral_residual(&p, z) {
            Ok(r) => worst = worst.max(r),
            Err(MonopoleError::DivisorCollision { .. }) => continue,
            Err(e) => return Err(e),
        }
        done += 1;
    }
    Ok(worst)
}

/// `ε_jl`: product of the consecutive signs between `j` and `l`.
pub fn bundle_eps(b: &AbelianBundle, j: usize, l: usize) -> f64 {
    let (lo, hi) = (j.min(l), j.max(l));
    b.eps_signs[lo..hi].iter().map(|&s| s as f64).product()
}

/// `exp(iπ q̃·(φ(∞_l) − φ(∞_j)))`.
pub fn char_phase(b: &AbelianBundle, l: usize, j: usize) -> C64 {
    let s: C64 = (0..b.genus()).map(|i| (b.abel_inf[l][i] - b.abel_inf[j][i]) * b.char_pq.q[i] as f64).sum();
    (I * PI * s).exp()
}

fn normalization(d: &Genus1Data, j: usize, eps: f64) -> Result<C64> {
    let l = 1 - j;
    let num = th(d.phi[j] - d.d[0] - d.k, &d.tau, eps)? * th(d.phi[j] - d.d[1] - d.k, &d.tau, eps)?;
    let den = th(d.phi[j] - d.phi[l] - d.k, &d.tau, eps)?;
    if den.norm() < 1e-14 {
        return Err(MonopoleError::CalibrationFailure("infinities collide on the theta divisor".into()));
    }
    Ok(num / den)
}

fn g_prime(d: &Genus1Data, j: usize, eps: f64) -> Result<C64> {
    let l = 1 - j;
    let den = th(d.phi[l] - d.d[0] - d.k, &d.tau, eps)? * th(d.phi[l] - d.d[1] - d.k, &d.tau, eps)?;
    Ok(d.c[j] * dth(-d.k, &d.tau, eps)? * d.omega[l] / den)
}

fn set_divisor(d: &mut Genus1Data, d1: C64, eps: f64) -> Result<()> {
    d.d = [d1, d.phi[0] + d.phi[1] - d.u - d1];
    d.c = [normalization(d, 0, eps)?, normalization(d, 1, eps)?];
    Ok(())
}

/// Chooses `d₁` (with `d₁ + d₂ = φ(∞₁) + φ(∞₂) − U`) so that
/// `g₁'(∞₂)` equals the prime-form target.
fn solve_divisor(d: &mut Genus1Data, target: C64, eps: f64) -> Result<()> {
    let tau = d.tau.tau()[(0, 0)];
    let f = |d: &mut Genus1Data, d1: C64| -> Result<C64> {
        set_divisor(d, d1, eps)?;
        Ok(g_prime(d, 0, eps)? / target - ONE)
    };
    let mut best = (f64::INFINITY, ZERO);
    let m = 12;
    for a in 0..m {
        for b in 0..m {
            let d1 = C64::new((a as f64 + 0.37) / m as f64, 0.0) + tau * ((b as f64 + 0.41) / m as f64);
            if let Ok(v) = f(d, d1) {
                if v.norm() < best.0 {
                    best = (v.norm(), d1);
                }
            }
        }
    }
    let mut d1 = best.1;
    for _ in 0..60 {
        let v = f(d, d1)?;
        if v.norm() < 1e-13 {
            return set_divisor(d, d1, eps);
        }
        let h = 1e-7;
        let dv = (f(d, d1 + h)? - f(d, d1 - h)?) / (2.0 * h);
        let mut step = v / dv;
        if step.norm() > 0.1 {
            step *= 0.1 / step.norm();
        }
        d1 -= step;
    }
    let v = f(d, d1)?;
    if v.norm() < 1e-10 {
        return set_divisor(d, d1, eps);
    }
    Err(MonopoleError::CalibrationFailure(format!("divisor solve did not converge (residual {:.2e})", v.norm())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abelian_data::charge1_curve_for_center;
    use crate::reference_oracles::charge2_bundle;
    use crate::spectral_curve::Zeta;

    fn point(b: &AbelianBundle, zeta: C64, sheet: usize) -> CurvePoint {
        let mut etas = b.curve.etas_over(zeta);
        etas.sort_by(|a, c| a.re.total_cmp(&c.re).then(a.im.total_cmp(&c.im)));
        CurvePoint { zeta: Zeta::Finite(zeta), eta: etas[sheet], sheet: Some(sheet) }
    }

    #[test]
    fn q0_has_zero_diagonal_and_spectral_problem_holds() {
        let b = charge2_bundle().unwrap();
        let ba = BakerAkhiezer::new(&b, 1e-14).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for _ in 0..12 {
            let zeta = C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let z = rng.gen_range(-0.8..0.8);
            let p = point(&b, zeta, rng.gen_range(0..2));
            let q = ba.q0_matrix(z).unwrap();
            assert_eq!(q[(0, 0)], ZERO);
            assert_eq!(q[(1, 1)], ZERO);
            match ba.ba_components(&p, z) {
                Ok(ev) => {
                    assert!(ev.residual < 1e-6, "residual {} at ζ={zeta} z={z}", ev.residual);
                    checked += 1;
                }
                Err(MonopoleError::PathCrossesBranchPoint { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(checked >= 8);
    }

    #[test]
    fn g_functions_are_normalized_at_infinities() {
        let b = charge2_bundle().unwrap();
        let ba = BakerAkhiezer::new(&b, 1e-14).unwrap();
        for j in 0..2 {
            let own = ba.g_function(&b.abel_inf[j], j).unwrap();
            let other = ba.g_function(&b.abel_inf[1 - j], j).unwrap();
            assert!((own - ONE).norm() < 1e-12, "{own}");
            assert!(other.norm() < 1e-12, "{other}");
        }
        let [d1, d2] = ba.divisor().unwrap();
        let sum = b.abel_inf[0][0] + b.abel_inf[1][0] - b.u[0];
        assert!((d1 + d2 - sum).norm() < 1e-14);
    }

    /// Zeros minus poles inside each cell of a grid over the period
    /// parallelogram, from the winding of `f` around the cell.
    fn cell_windings(f: impl Fn(C64) -> C64, origin: C64, tau: C64, cells: usize, sub: usize) -> Vec<i64> {
        let m = cells * sub;
        let at = |i: usize, j: usize| origin + C64::new(i as f64 / m as f64, 0.0) + tau * (j as f64 / m as f64);
        let vals: Vec<Vec<C64>> = (0..=m).map(|i| (0..=m).map(|j| f(at(i, j))).collect()).collect();
        let mut out = Vec::new();
        for ci in 0..cells {
            for cj in 0..cells {
                let (i0, j0) = (ci * sub, cj * sub);
                let mut path = Vec::new();
                path.extend((0..sub).map(|k| (i0 + k, j0)));
                path.extend((0..sub).map(|k| (i0 + sub, j0 + k)));
                path.extend((0..sub).map(|k| (i0 + sub - k, j0 + sub)));
                path.extend((0..sub).map(|k| (i0, j0 + sub - k)));
                let mut turn = 0.0;
                for w in 0..path.len() {
                    let (a, b) = (path[w], path[(w + 1) % path.len()]);
                    turn += (vals[b.0][b.1] / vals[a.0][a.1]).arg();
                }
                out.push((turn / std::f64::consts::TAU).round() as i64);
            }
        }
        out
    }

    #[test]
    fn g_functions_have_two_poles_and_vanish_once() {
        // g_j is a section (quasi-periodic), so zeros and poles are counted
        // cell by cell: poles at the degree-2 divisor, a zero at the other infinity.
        let b = charge2_bundle().unwrap();
        let ba = BakerAkhiezer::new(&b, 1e-14).unwrap();
        let tau = b.tau.as_ref().unwrap().tau()[(0, 0)];
        let origin = C64::new(-0.4937, 0.0) - tau * 0.4871;
        for j in 0..2 {
            let w = cell_windings(|p| ba.g_function(&[p], j).unwrap(), origin, tau, 24, 6);
            let zeros: i64 = w.iter().filter(|&&k| k > 0).sum();
            let poles: i64 = -w.iter().filter(|&&k| k < 0).sum::<i64>();
            assert_eq!(poles, 2, "component {j}");
            assert_eq!(zeros, 1, "component {j}");
        }
    }

    #[test]
    fn divisor_matches_prime_form_normalization() {
        let b = charge2_bundle().unwrap();
        let ba = BakerAkhiezer::new(&b, 1e-14).unwrap();
        let target = -bundle_eps(&b, 0, 1) * char_phase(&b, 1, 0) / b.prime_inf[(0, 1)];
        let g = ba.g_prime_at_other_infinity(0).unwrap();
        assert!((g / target - ONE).norm() < 1e-10);
    }

    #[test]
    fn flow_matrix_blows_up_at_the_ends() {
        // Q₀ has simple poles at z = ±1, so (1∓z)|Q₀| tends to a constant.
        let b = charge2_bundle().unwrap();
        let ba = BakerAkhiezer::new(&b, 1e-14).unwrap();
        for end in [1.0, -1.0] {
            let scaled = |e: f64| {
                let q = ba.q0_matrix(end * (1.0 - e)).unwrap();
                e * q[(0, 1)].norm()
            };
            let (a, c) = (scaled(1e-3), scaled(1e-4));
            assert!((a / c - 1.0).abs() < 1e-2, "{a} vs {c}");
        }
        assert!(matches!(ba.q0_matrix(1.0), Err(MonopoleError::PoleProximity { .. })));
    }

    #[test]
    fn charge_one_vector_is_a_plane_wave() {
        let curve = charge1_curve_for_center([0.3, -0.2, 0.5]);
        let doc = crate::abelian_data::charge1_doc(curve);
        let b = crate::abelian_data::bundle_from_doc(doc).unwrap();
        let ba = BakerAkhiezer::new(&b, 1e-14).unwrap();
        let q = ba.q0_matrix(0.2).unwrap();
        assert_eq!(q.shape(), (1, 1));
        let p = point(&b, C64::new(0.4, -0.3), 0);
        let ev = ba.ba_components(&p, 0.3).unwrap();
        assert!(ev.residual < 1e-8);
    }
}
