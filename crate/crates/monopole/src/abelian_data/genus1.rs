//! Abelian integrals on centred genus-one curves `η² = s(ζ)` by
//! Gauss–Legendre quadrature along polylines, continuing `η` analytically.
//!
//! Two charts are used: `ζ` near the finite part of the curve and
//! `ξ = 1/ζ`, `η̃ = ηξ²` near the two points over infinity.

use std::f64::consts::PI;

use crate::error::{MonopoleError, Result};
use crate::matrix_kit::{C64, I, ZERO};
use crate::poly::{roots, Poly};
use crate::quadrature::gauss_legendre;

const GL_NODES: usize = 12;
/// Subdivide until a piece is shorter than this fraction of its distance
/// to the nearest branch point.
const REFINE_RATIO: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chart {
    Zeta,
    Xi,
}

/// Precomputed periods and constants of the second-kind differential
/// `γ = (p₀ + p₁ζ + p₂ζ²) dζ/η`.
#[derive(Debug, Clone)]
pub struct Genus1Engine {
    s: Poly,
    s_rev: Poly,
    branch: Vec<C64>,
    inv_branch: Vec<C64>,
    scale: f64,
    gl: (Vec<f64>, Vec<f64>),
    pub base: (C64, C64),
    pub a_cycle: Vec<C64>,
    pub b_cycle: Vec<C64>,
    /// `∮_a dζ/η`; the normalized holomorphic differential is `dζ/(Aη)`.
    pub a_period: C64,
    pub tau: C64,
    pub gamma: [C64; 3],
    /// `∮_a γ`, zero up to quadrature error.
    pub gamma_a_period: C64,
    /// `∮_b γ / 2πi`.
    pub winding: C64,
    /// `φ(P) + φ(σP)` and `E(P) + E(σP)` for the sheet swap `σ`.
    pub c_omega: C64,
    pub c_gamma: C64,
    pub rho: [C64; 2],
    pub phi_inf: [C64; 2],
    pub nu: [C64; 2],
}

/// Point and a value of `η` there, continuing from `prev`.
fn continue_sqrt(prev: C64, val: C64) -> C64 {
    let s = val.sqrt();
    if (s - prev).norm() <= (s + prev).norm() {
        s
    } else {
        -s
    }
}

fn segment_distance(a: C64, b: C64, p: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (a + d * t - p).norm()
}

/// Polygon around the segment `[p, q]` at distance `r`, starting at the
/// vertex nearest `start_near`.
pub fn stadium(p: C64, q: C64, r: f64, start_near: C64) -> Vec<C64> {
    let u = (q - p) / (q - p).norm();
    let m = 16;
    let mut pts = Vec::with_capacity(2 * m + 2);
    for k in 0..=m {
        let ang = -PI / 2.0 + PI * k as f64 / m as f64;
        pts.push(q + u * C64::from_polar(r, ang));
    }
    for k in 0..=m {
        let ang = PI / 2.0 + PI * k as f64 / m as f64;
        pts.push(p + u * C64::from_polar(r, ang));
    }
    let start = pts
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - start_near).norm().total_cmp(&(b.1 - start_near).norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    pts.rotate_left(start);
    pts
}

impl Genus1Engine {
    /// `s` is the quartic with `η² = s(ζ)`; `rho[j]` labels the point over
    /// infinity where `η/ζ² → rho[j]`.
    pub fn new(s: Poly, rho: [C64; 2], a_cycle: Vec<C64>, b_cycle: Vec<C64>, base_zeta: C64) -> Result<Self> {
        if s.effective_degree(1e-14) != Some(4) {
            return Err(MonopoleError::Unsupported("genus-one engine needs a quartic with nonzero leading term".into()));
        }
        let s4 = s.coeff(4);
        for r in rho {
            if (r * r - s4).norm() > 1e-8 * s4.norm() {
                return Err(MonopoleError::InvalidInput("residues at infinity do not match the quartic".into()));
            }
        }
        let branch = roots(&s, 1e-15);
        let inv_branch = branch.iter().filter(|b| b.norm() > 0.0).map(|b| C64::new(1.0, 0.0) / b).collect();
        let s_rev = Poly(s.0.iter().rev().copied().collect());
        let scale = 1.0 + branch.iter().map(|b| b.norm()).fold(0.0, f64::max);
        let base_eta = s.eval(base_zeta).sqrt();
        let mut eng = Genus1Engine {
            s,
            s_rev,
            branch,
            inv_branch,
            scale,
            gl: gauss_legendre(GL_NODES),
            base: (base_zeta, base_eta),
            a_cycle,
            b_cycle,
            a_period: ZERO,
            tau: ZERO,
            gamma: [ZERO; 3],
            gamma_a_period: ZERO,
            winding: ZERO,
            c_omega: ZERO,
            c_gamma: ZERO,
            rho,
            phi_inf: [ZERO; 2],
            nu: [ZERO; 2],
        };
        if eng.nearest_branch_distance(base_zeta) < 1e-6 * scale {
            return Err(MonopoleError::PathCrossesBranchPoint { distance: eng.nearest_branch_distance(base_zeta) });
        }
        eng.compute_periods()?;
        eng.compute_sheet_swap()?;
        eng.compute_infinities()?;
        Ok(eng)
    }

    pub fn branch_points(&self) -> &[C64] {
        &self.branch
    }

    fn nearest_branch_distance(&self, z: C64) -> f64 {
        self.branch.iter().map(|b| (b - z).norm()).fold(f64::INFINITY, f64::min)
    }

    fn sq(&self, chart: Chart, p: C64) -> C64 {
        match chart {
            Chart::Zeta => self.s.eval(p),
            Chart::Xi => self.s_rev.eval(p),
        }
    }

    fn singular(&self, chart: Chart) -> &[C64] {
        match chart {
            Chart::Zeta => &self.branch,
            Chart::Xi => &self.inv_branch,
        }
    }

    /// Integrates `f(point, η)` along the polyline and returns the two
    /// integrals and the continued `η` at the end.
    fn walk<F>(&self, chart: Chart, pts: &[C64], eta0: C64, f: &F) -> Result<([C64; 2], C64)>
    where
        F: Fn(C64, C64) -> [C64; 2],
    {
        let mut eta = eta0;
        let mut acc = [ZERO; 2];
        for w in pts.windows(2) {
            self.segment(chart, w[0], w[1], &mut eta, f, &mut acc, 0)?;
        }
        Ok((acc, eta))
    }

    #[allow(clippy::too_many_arguments)]
    fn segment<F>(&self, chart: Chart, a: C64, b: C64, eta: &mut C64, f: &F, acc: &mut [C64; 2], depth: usize) -> Result<()>
    where
        F: Fn(C64, C64) -> [C64; 2],
    {
        let d = self
            .singular(chart)
            .iter()
            .map(|&p| segment_distance(a, b, p))
            .fold(f64::INFINITY, f64::min);
        if d < 1e-12 * self.scale {
            return Err(MonopoleError::PathCrossesBranchPoint { distance: d });
        }
        let len = (b - a).norm();
        if len == 0.0 {
            return Ok(());
        }
        if len > REFINE_RATIO * d && depth < 80 {
            let m = (a + b) * 0.5;
            self.segment(chart, a, m, eta, f, acc, depth + 1)?;
            return self.segment(chart, m, b, eta, f, acc, depth + 1);
        }
        let half = (b - a) * 0.5;
        for (t, w) in self.gl.0.iter().zip(&self.gl.1) {
            let p = a + half * (t + 1.0);
            *eta = continue_sqrt(*eta, self.sq(chart, p));
            let v = f(p, *eta);
            acc[0] += v[0] * half * *w;
            acc[1] += v[1] * half * *w;
        }
        *eta = continue_sqrt(*eta, self.sq(chart, b));
        Ok(())
    }

    fn loop_integral<F>(&self, cycle: &[C64], f: &F) -> Result<[C64; 2]>
    where
        F: Fn(C64, C64) -> [C64; 2],
    {
        let (_, eta_start) = self.walk(Chart::Zeta, &[self.base.0, cycle[0]], self.base.1, f)?;
        let mut closed = cycle.to_vec();
        closed.push(cycle[0]);
        let (vals, eta_end) = self.walk(Chart::Zeta, &closed, eta_start, f)?;
        if (eta_end - eta_start).norm() > 1e-6 * (1.0 + eta_start.norm()) {
            return Err(MonopoleError::InvalidInput("cycle does not close on the curve (it encircles an odd number of branch points)".into()));
        }
        Ok(vals)
    }

    fn compute_periods(&mut self) -> Result<()> {
        let s3 = self.s.coeff(3);
        let p2 = -self.rho[0] * self.rho[0];
        let p1 = -s3 * 0.5;
        let f = |z: C64, e: C64| [C64::new(1.0, 0.0) / e, (p1 * z + p2 * z * z) / e];
        let [a, ga] = self.loop_integral(&self.a_cycle, &f)?;
        let [mut b, mut gb] = self.loop_integral(&self.b_cycle, &f)?;
        if (b / a).im < 0.0 {
            self.b_cycle.reverse();
            b = -b;
            gb = -gb;
        }
        let p0 = -ga / a;
        self.a_period = a;
        self.tau = b / a;
        self.gamma = [p0, p1, p2];
        let g = self.gamma;
        let fg = move |z: C64, e: C64| [ZERO, (g[0] + g[1] * z + g[2] * z * z) / e];
        self.gamma_a_period = self.loop_integral(&self.a_cycle, &fg)?[1];
        self.winding = (gb + p0 * b) / (2.0 * PI * I);
        Ok(())
    }

    fn omega_gamma(&self) -> impl Fn(C64, C64) -> [C64; 2] + '_ {
        let g = self.gamma;
        move |z: C64, e: C64| [C64::new(1.0, 0.0) / e, (g[0] + g[1] * z + g[2] * z * z) / e]
    }

    /// `∫_{P₀}^{σP₀}` along a keyhole around the branch point nearest the base.
    fn compute_sheet_swap(&mut self) -> Result<()> {
        let z0 = self.base.0;
        let b = *self
            .branch
            .iter()
            .min_by(|x, y| (*x - z0).norm().total_cmp(&(*y - z0).norm()))
            .expect("quartic has branch points");
        let others = self.branch.iter().filter(|&&o| o != b).map(|o| (o - b).norm()).fold(f64::INFINITY, f64::min);
        let r = 0.25 * others.min((b - z0).norm());
        let dir = (z0 - b) / (z0 - b).norm();
        let m = 24;
        let mut path = vec![z0];
        for k in 0..=m {
            path.push(b + dir * C64::from_polar(r, 2.0 * PI * k as f64 / m as f64));
        }
        path.push(z0);
        let (vals, eta_end) = self.walk(Chart::Zeta, &path, self.base.1, &self.omega_gamma())?;
        if (eta_end + self.base.1).norm() > 1e-6 * (1.0 + self.base.1.norm()) {
            return Err(MonopoleError::InvalidInput("keyhole path failed to change sheet".into()));
        }
        self.c_omega = vals[0] / self.a_period;
        self.c_gamma = vals[1];
        Ok(())
    }

    /// Regular part of `γ` near `∞_j` in the `ξ` chart, and `dζ/η`.
    fn xi_integrands(&self, j: usize) -> impl Fn(C64, C64) -> [C64; 2] + '_ {
        let rho = self.rho[j];
        let (s0, s1, s2, s3) = (self.s.coeff(0), self.s.coeff(1), self.s.coeff(2), self.s.coeff(3));
        let p0 = self.gamma[0];
        move |x: C64, et: C64| {
            let t = s3 + x * (s2 + x * (s1 + x * s0));
            let den = et + rho;
            let reg = (rho * 2.0 * (s2 + s1 * x + s0 * x * x) - s3 * t / den) / (den * 2.0);
            [-C64::new(1.0, 0.0) / et, -(p0 + reg) / et]
        }
    }

    fn compute_infinities(&mut self) -> Result<()> {
        let z0 = self.base.0;
        let radius = 2.0 * self.scale;
        // ray direction keeping furthest from the branch points
        let dir = (0..16)
            .map(|k| C64::from_polar(1.0, PI * k as f64 / 8.0 + 0.1))
            .max_by(|a, b| {
                let da = self.branch.iter().map(|&p| segment_distance(z0, z0 + a * radius, p)).fold(f64::INFINITY, f64::min);
                let db = self.branch.iter().map(|&p| segment_distance(z0, z0 + b * radius, p)).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db)
            })
            .unwrap();
        let zr = z0 + dir * radius;
        let (iz, eta_r) = self.walk(Chart::Zeta, &[z0, zr], self.base.1, &self.omega_gamma())?;
        let xr = C64::new(1.0, 0.0) / zr;
        let target = eta_r * xr * xr;
        for j in 0..2 {
            let (jx, et) = self.walk(Chart::Xi, &[ZERO, xr], self.rho[j], &self.xi_integrands(j))?;
            if (et - target).norm() < 1e-6 * (1.0 + target.norm()) {
                self.phi_inf[j] = (iz[0] - jx[0]) / self.a_period;
                self.nu[j] = iz[1] + self.rho[j] * zr - jx[1];
                self.phi_inf[1 - j] = self.c_omega - self.phi_inf[j];
                self.nu[1 - j] = self.c_gamma - self.nu[j];
                return Ok(());
            }
        }
        Err(MonopoleError::InvalidInput("could not match the ray to a point over infinity".into()))
    }

    /// `(φ(P), ∫_{P₀}^{P} γ)` for a finite curve point.
    pub fn abel(&self, zeta: C64, eta: C64) -> Result<(C64, C64)> {
        if zeta.norm() <= 1.0 {
            let (v, e) = self.walk(Chart::Zeta, &[self.base.0, zeta], self.base.1, &self.omega_gamma())?;
            if (e - eta).norm() <= (e + eta).norm() {
                Ok((v[0] / self.a_period, v[1]))
            } else {
                Ok((self.c_omega - v[0] / self.a_period, self.c_gamma - v[1]))
            }
        } else {
            let x = C64::new(1.0, 0.0) / zeta;
            let et = eta * x * x;
            let mut best = None;
            for j in 0..2 {
                let (v, e) = self.walk(Chart::Xi, &[ZERO, x], self.rho[j], &self.xi_integrands(j))?;
                let miss = (e - et).norm();
                let val = (self.phi_inf[j] + v[0] / self.a_period, self.nu[j] - self.rho[j] * zeta + v[1]);
                if best.map(|(m, _)| miss < m).unwrap_or(true) {
                    best = Some((miss, val));
                }
            }
            Ok(best.expect("two sheets").1)
        }
    }

    /// Sheet swap image `(ζ, −η)`.
    pub fn abel_of_swap(&self, phi: C64, e: C64) -> (C64, C64) {
        (self.c_omega - phi, self.c_gamma - e)
    }

    /// Integral of `(dζ/Aη, γ)` around a closed polyline starting from the
    /// base sheet.
    pub fn cycle_integrals(&self, cycle: &[C64]) -> Result<(C64, C64)> {
        let v = self.loop_integral(cycle, &self.omega_gamma())?;
        Ok((v[0] / self.a_period, v[1]))
    }

    /// The value `dφ/dξ` at `∞_j`, i.e. the normalized differential in the
    /// local coordinate `ξ = 1/ζ`.
    pub fn omega_at_infinity(&self, j: usize) -> C64 {
        -C64::new(1.0, 0.0) / (self.a_period * self.rho[j])
    }

    pub fn quartic(&self) -> &Poly {
        &self.s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::complete_k;
    use crate::matrix_kit::c;

    /// Euler-top quartic `s(ζ) = −(κ²/4)(k²ζ⁴ + 2(2−k²)ζ² + k²)`.
    fn euler_top(k: f64, kappa: f64) -> (Poly, [C64; 2], Vec<C64>, Vec<C64>) {
        let f = -kappa * kappa / 4.0;
        let s = Poly(vec![c(f * k * k, 0.0), ZERO, c(f * 2.0 * (2.0 - k * k), 0.0), ZERO, c(f * k * k, 0.0)]);
        let r = I * (kappa * k / 2.0);
        let al = (1.0 - (1.0 - k * k).sqrt()) / k;
        let a = stadium(I * al, I / al, 0.3 * al, ZERO);
        let b = stadium(-I * al, I * al, 0.3 * al, ZERO);
        (s, [r, -r], a, b)
    }

    #[test]
    fn euler_top_constants() {
        let k = 0.6;
        let kappa = complete_k(k);
        let (s, rho, a, b) = euler_top(k, kappa);
        let e = Genus1Engine::new(s, rho, a, b, ZERO).unwrap();
        assert!(e.tau.im > 0.0);
        assert!(e.gamma_a_period.norm() < 1e-10);
        // at κ = K(k) the winding vector is the half period ±τ/2
        let u = e.winding;
        let m = (2.0 * u.im / e.tau.im).round();
        let nn = (2.0 * (u - e.tau * m / 2.0).re).round();
        assert!((u - (C64::new(nn, 0.0) + e.tau * m) / 2.0).norm() < 1e-9, "U = {u}, tau = {}", e.tau);
        assert_eq!(m.abs(), 1.0);
    }

    #[test]
    fn cycles_are_lattice_vectors() {
        let (s, rho, a, b) = euler_top(0.6, 1.3);
        let e = Genus1Engine::new(s, rho, a.clone(), b, ZERO).unwrap();
        assert!((e.cycle_integrals(&a).unwrap().0 - 1.0).norm() < 1e-12);
        assert!((e.cycle_integrals(&e.b_cycle).unwrap().0 - e.tau).norm() < 1e-12);
    }

    #[test]
    fn base_point_and_sheet_swap() {
        let (s, rho, a, b) = euler_top(0.6, 1.3);
        let e = Genus1Engine::new(s, rho, a, b, ZERO).unwrap();
        let (p, g) = e.abel(ZERO, e.base.1).unwrap();
        assert!(p.norm() < 1e-15 && g.norm() < 1e-15);
        // φ(P) + φ(σP) is constant
        for z in [c(0.3, 0.2), c(-0.7, 0.4), c(2.5, -1.0)] {
            let eta = e.quartic().eval(z).sqrt();
            let (p1, g1) = e.abel(z, eta).unwrap();
            let (p2, g2) = e.abel(z, -eta).unwrap();
            let dp = p1 + p2 - e.c_omega;
            let dg = g1 + g2 - e.c_gamma;
            // equality holds modulo periods: b-cycles shift γ by 2πiU
            let m = (dp.im / e.tau.im).round();
            let nn = (dp - e.tau * m).re.round();
            assert!((dp - e.tau * m - nn).norm() < 1e-9, "z={z}: {dp}");
            assert!((dg - 2.0 * PI * I * e.winding * m).norm() < 1e-8, "z={z}: {dg}");
        }
    }

    #[test]
    fn second_kind_integral_local_expansion() {
        let (s, rho, a, b) = euler_top(0.6, 1.3);
        let e = Genus1Engine::new(s, rho, a, b, ZERO).unwrap();
        let on_sheet = |z: C64, j: usize| {
            let eta = e.quartic().eval(z).sqrt();
            if (eta / (z * z) - e.rho[j]).norm() < (-eta / (z * z) - e.rho[j]).norm() {
                eta
            } else {
                -eta
            }
        };
        for j in 0..2 {
            // E(P) + ρ_j ζ − ν_j = O(1/ζ) near ∞_j
            let rem = |r: f64| {
                let z = C64::from_polar(r, 0.4);
                let (p, g) = e.abel(z, on_sheet(z, j)).unwrap();
                ((g + e.rho[j] * z - e.nu[j]).norm(), (p - e.phi_inf[j]).norm())
            };
            let (g1, p1) = rem(100.0);
            let (g2, p2) = rem(1000.0);
            assert!(g1 < 1e-1 && g2 < 1e-2, "j={j}: {g1} {g2}");
            assert!((g1 / g2 - 10.0).abs() < 0.5, "j={j}: ratio {}", g1 / g2);
            assert!((p1 / p2 - 10.0).abs() < 0.5);
        }
    }

    #[test]
    fn continuity_across_charts() {
        let (s, rho, a, b) = euler_top(0.6, 1.3);
        let e = Genus1Engine::new(s, rho, a, b, ZERO).unwrap();
        // points just inside and outside the unit circle give (φ, E) that agree
        // modulo periods
        for ang in [0.3, 1.0, 2.5, 4.0] {
            let z1 = C64::from_polar(0.999_999, ang);
            let z2 = C64::from_polar(1.000_001, ang);
            let e1 = e.quartic().eval(z1).sqrt();
            let e2 = continue_sqrt(e1, e.quartic().eval(z2));
            let (p1, g1) = e.abel(z1, e1).unwrap();
            let (p2, g2) = e.abel(z2, e2).unwrap();
            let dp = p2 - p1;
            let m = (dp.im / e.tau.im).round();
            let nn = (dp - e.tau * m).re.round();
            assert!((dp - e.tau * m - nn).norm() < 1e-5, "ang={ang}: dp={dp}");
            assert!((g2 - g1 - 2.0 * PI * I * e.winding * m).norm() < 1e-4, "ang={ang}");
        }
    }

    #[test]
    fn crossing_a_branch_point_is_reported() {
        let (s, rho, a, b) = euler_top(0.6, 1.3);
        let e = Genus1Engine::new(s, rho, a, b, ZERO).unwrap();
        let bp = e.branch_points()[0];
        let err = e.walk(Chart::Zeta, &[bp - (bp * 0.5), bp + bp * 0.5], e.quartic().eval(bp * 0.5).sqrt(), &e.omega_gamma());
        assert!(matches!(err, Err(MonopoleError::PathCrossesBranchPoint { .. })));
    }
}
