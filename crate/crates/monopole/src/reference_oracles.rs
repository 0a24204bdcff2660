//! Ground-truth constructions: the charge-two Euler-top bundle with its
//! explicit elliptic Nahm data, and direct (theta-free) Weyl solvers for
//! charges one and two.

use crate::abelian_data::{
    bundle_from_doc, prime_form_infinities, stadium, AbelKind, AbelSpecDoc, AbelianBundle, BasePointDoc, BundleDoc,
    CurveDoc, Genus1Engine, PathsDoc, BUNDLE_VERSION,
};
use crate::elliptic::{complete_k, jacobi_sn_cn_dn};
use crate::error::{MonopoleError, Result};
use crate::matrix_kit::{
    commutator, hermitian_eig, identity, inv_sqrt_hpd, kron, null_space, pauli, pauli_dot_real, polar_unitary, CMat,
    SpatialPoint, C64, I, ZERO,
};
use crate::nahm_flow::NahmTriple;
use crate::ode::{integrate, OdeOptions};
use crate::poly::Poly;
use crate::quadrature::gauss_legendre;

/// Euler-top family `η² = −(κ²/4)(k²ζ⁴ + 2(2−k²)ζ² + k²)` with modulus `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Charge2Params {
    pub k: f64,
}

impl Default for Charge2Params {
    fn default() -> Self {
        Charge2Params { k: 0.6 }
    }
}

#[derive(Debug, Clone)]
pub struct Charge2Build {
    pub doc: BundleDoc,
    /// Scale fixed by the half-period calibration.
    pub kappa: f64,
    /// `K(k)` from the AGM, the value the calibration should reproduce.
    pub kappa_reference: f64,
    pub h2_residual: f64,
}

fn quartic(k: f64, kappa: f64) -> Poly {
    let f = -kappa * kappa / 4.0;
    Poly(vec![C64::new(f * k * k, 0.0), ZERO, C64::new(f * 2.0 * (2.0 - k * k), 0.0), ZERO, C64::new(f * k * k, 0.0)])
}

fn engine_for(k: f64, kappa: f64) -> Result<Genus1Engine> {
    let s = quartic(k, kappa);
    let rho = I * (kappa * k / 2.0);
    // branch points ±i·α, ±i/α on the imaginary axis
    let al = (1.0 - (1.0 - k * k).sqrt()) / k;
    let bp = [I / al, I * al, -I * al, -I / al];
    let clear = |p: C64, q: C64| 0.3 * bp.iter().filter(|&&o| o != p && o != q).map(|&o| (o - p).norm().min((o - q).norm())).fold((q - p).norm(), f64::min);
    let a = stadium(bp[0], bp[1], clear(bp[0], bp[1]), ZERO);
    let b = stadium(bp[1], bp[2], clear(bp[1], bp[2]), ZERO);
    Genus1Engine::new(s, [rho, -rho], a, b, ZERO)
}

fn round_half_period(u: C64, tau: C64) -> (i64, i64, f64) {
    let m = (2.0 * u.im / tau.im).round();
    let n = (2.0 * (u - tau * m / 2.0).re).round();
    let resid = (u - (C64::new(n, 0.0) + tau * m) / 2.0).norm();
    (n as i64, m as i64, resid)
}

/// Builds the charge-two bundle, calibrating the curve scale `κ` so that
/// the winding vector is a primitive half period.
pub fn build_charge2_bundle(params: Charge2Params) -> Result<Charge2Build> {
    let k = params.k;
    if !(k > 0.0 && k < 1.0) {
        return Err(MonopoleError::InvalidInput("modulus must lie in (0, 1)".into()));
    }
    // U is linear in κ, so one unit-scale evaluation fixes the calibration.
    let unit = engine_for(k, 1.0)?;
    let u1 = unit.winding;
    let tau = unit.tau;
    let mut kappa = f64::INFINITY;
    for n in -4i64..=4 {
        for m in -4i64..=4 {
            if (n, m) == (0, 0) || (n % 2 == 0 && m % 2 == 0) {
                continue;
            }
            let r = (C64::new(n as f64, 0.0) + tau * m as f64) / 2.0 / u1;
            if r.im.abs() < 1e-8 * r.norm() && r.re > 0.0 && r.re < kappa {
                kappa = r.re;
            }
        }
    }
    if !kappa.is_finite() {
        return Err(MonopoleError::CalibrationFailure("no scale makes the winding vector a half period".into()));
    }
    let e = engine_for(k, kappa)?;
    let (es_n, es_m, h2_residual) = round_half_period(e.winding, e.tau);
    if h2_residual > 1e-7 {
        return Err(MonopoleError::CalibrationFailure(format!("half-period residual {h2_residual:.2e}")));
    }
    let tau = e.tau;
    let k_tilde = (C64::new(1.0, 0.0) + tau) / 2.0;
    let u = (C64::new(es_n as f64, 0.0) + tau * es_m as f64) / 2.0;
    let (cp, cq, _) = round_half_period(u - k_tilde, tau);
    let prime = prime_form_infinities(&e)?;
    let s = e.quartic().clone();
    let doc = BundleDoc {
        version: BUNDLE_VERSION.into(),
        n: 2,
        curve: CurveDoc { a: vec![vec![ZERO], s.0.iter().map(|c| -c).collect()] },
        tau: vec![vec![tau]],
        es_n: vec![es_n],
        es_m: vec![es_m],
        k_tilde: vec![k_tilde],
        abel_inf: vec![vec![e.phi_inf[0]], vec![e.phi_inf[1]]],
        rho: e.rho.to_vec(),
        nu: e.nu.to_vec(),
        prime_inf: vec![vec![ZERO, prime], vec![-prime, ZERO]],
        eps_signs: vec![1],
        char_p: vec![cp],
        char_q: vec![cq],
        abel_spec: AbelSpecDoc {
            kind: AbelKind::ClosedFormG1,
            branch_points: e.branch_points().to_vec(),
            paths: PathsDoc { a_cycles: vec![e.a_cycle.clone()], b_cycles: vec![e.b_cycle.clone()] },
            base_point: Some(BasePointDoc { zeta: e.base.0, eta: e.base.1 }),
        },
    };
    Ok(Charge2Build { doc, kappa, kappa_reference: complete_k(k), h2_residual })
}

/// Convenience: the calibrated default bundle.
pub fn charge2_bundle() -> Result<AbelianBundle> {
    bundle_from_doc(build_charge2_bundle(Charge2Params::default())?.doc)
}

/// Explicit Euler-top Nahm data `T_i = −(i/2) f_i τ_i`, `τ = (σ₁, σ₃, −σ₂)`,
/// `(f₁, f₂, f₃) = −κ (1, dn, cn)/sn` at `u = κ(z+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticNahm {
    pub k: f64,
    pub kappa: f64,
}

impl EllipticNahm {
    pub fn new(k: f64) -> Self {
        EllipticNahm { k, kappa: complete_k(k) }
    }

    pub fn f(&self, z: f64) -> [f64; 3] {
        let (sn, cn, dn) = jacobi_sn_cn_dn(self.kappa * (z + 1.0), self.k);
        [-self.kappa / sn, -self.kappa * dn / sn, -self.kappa * cn / sn]
    }

    pub fn at(&self, z: f64) -> NahmTriple {
        let [s1, s2, s3] = pauli();
        let taus = [s1, s3, -s2];
        let f = self.f(z);
        NahmTriple::new(std::array::from_fn(|i| &taus[i] * (I * (-0.5 * f[i]))))
    }

    /// `dT/dz` from the Jacobi derivatives.
    pub fn derivative(&self, z: f64) -> NahmTriple {
        let kap = self.kappa;
        let (sn, cn, dn) = jacobi_sn_cn_dn(kap * (z + 1.0), self.k);
        // d/du (1/sn) = −cn dn/sn², d/du (dn/sn) = −cn/sn², d/du (cn/sn) = −dn/sn²
        let df = [kap * kap * cn * dn / (sn * sn), kap * kap * cn / (sn * sn), kap * kap * dn / (sn * sn)];
        let [s1, s2, s3] = pauli();
        let taus = [s1, s3, -s2];
        NahmTriple::new(std::array::from_fn(|i| &taus[i] * (I * (-0.5 * df[i]))))
    }
}

/// Settings of the direct Weyl solvers, which integrate `v' = (𝓗 − 𝓕)v`
/// with an adaptive Runge–Kutta scheme instead of theta functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectOptions {
    /// Gauss–Legendre nodes for the `z` integrals.
    pub nodes: usize,
    pub tol: f64,
    /// Start of the shots from the poles, `z = ±(1 − δ)`.
    pub delta: f64,
    /// Spatial finite-difference step, scaled by `max(1, r)`.
    pub fd_step: f64,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions { nodes: 96, tol: 1e-12, delta: 1e-5, fd_step: 1e-3 }
    }
}

/// Fields from a direct solver.
#[derive(Debug, Clone)]
pub struct OracleFields {
    pub x: SpatialPoint,
    pub phi: CMat,
    pub a: [CMat; 3],
    pub phi_norm: f64,
    /// Smaller of the two sign branches of `D_iΦ = ±F_jk`.
    pub bogomolny_residual: f64,
}

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Rule { nodes, weights }
    }

    fn overlap(&self, a: &[CMat], b: &[CMat]) -> CMat {
        let mut m = CMat::zeros(a[0].ncols(), b[0].ncols());
        for ((w, p), q) in self.weights.iter().zip(a).zip(b) {
            m += p.adjoint() * q * C64::new(*w, 0.0);
        }
        m
    }

    /// Orthonormalises a basis of solutions and fixes the gauge so that
    /// `∫E†v dz` is Hermitian positive, `E = 1₂ ⊗ e₁`.
    fn canonical(&self, v: Vec<CMat>) -> Result<Vec<CMat>> {
        let g = inv_sqrt_hpd(&self.overlap(&v, &v))?;
        let v: Vec<CMat> = v.iter().map(|m| m * &g).collect();
        let mut e1 = CMat::zeros(v[0].nrows() / 2, 1);
        e1[(0, 0)] = C64::new(1.0, 0.0);
        let e = vec![kron(&identity(2), &e1); v.len()];
        let u = polar_unitary(&self.overlap(&v, &e))?;
        Ok(v.iter().map(|m| m * &u).collect())
    }

    fn higgs(&self, v: &[CMat]) -> CMat {
        let mut m = CMat::zeros(2, 2);
        for ((w, z), p) in self.weights.iter().zip(&self.nodes).zip(v) {
            m += p.adjoint() * p * C64::new(w * z, 0.0);
        }
        m * I
    }
}

fn weyl_operator(x: &SpatialPoint, t: &NahmTriple) -> CMat {
    let s = pauli();
    let n = t.n();
    let xa = x.arr();
    let mut m = CMat::zeros(2 * n, 2 * n);
    for j in 0..3 {
        m += kron(&s[j], &(identity(n) * C64::new(xa[j], 0.0) - &t.t[j] * I));
    }
    m
}

/// Integrates `y' = M(z)y` from `z0` to each of `targets` (sorted in the
/// direction of travel).
fn shoot(m: &(dyn Fn(f64) -> CMat + Sync), z0: f64, y0: &CMat, targets: &[f64], tol: f64) -> Result<Vec<CMat>> {
    integrate(|z, y| Ok(m(z) * y), z0, y0, targets, &OdeOptions::with_tol(tol))
}

/// Normalised constant-`T` charge-one pair on the rule's nodes: the
/// fundamental matrix of `v' = σ·(x − c)v` from `z = 0`.
fn charge1_pair(center: [f64; 3], x: &SpatialPoint, rule: &Rule, tol: f64) -> Result<Vec<CMat>> {
    let gen = pauli_dot_real([x.x1 - center[0], x.x2 - center[1], x.x3 - center[2]]);
    let f = |_z: f64| gen.clone();
    let half = rule.nodes.len() / 2;
    let pos: Vec<f64> = rule.nodes[half..].to_vec();
    let neg: Vec<f64> = rule.nodes[..half].iter().rev().copied().collect();
    let up = shoot(&f, 0.0, &identity(2), &pos, tol)?;
    let mut v: Vec<CMat> = shoot(&f, 0.0, &identity(2), &neg, tol)?.into_iter().rev().collect();
    v.extend(up);
    rule.canonical(v)
}

/// Normalizable pair on the rule's nodes for Nahm data with spin-½ poles:
/// regular solutions shot inwards from both poles and matched at `z = 0`.
fn pole_pair(nahm: &(dyn Fn(f64) -> NahmTriple + Sync), x: &SpatialPoint, rule: &Rule, opts: &DirectOptions) -> Result<Vec<CMat>> {
    let m = |z: f64| weyl_operator(x, &nahm(z));
    let half = rule.nodes.len() / 2;
    let mut sides = Vec::new();
    for end in [1.0, -1.0] {
        let ze = end * (1.0 - opts.delta);
        // near the pole v' ≈ R/(z − end) v; regular solutions have R-eigenvalues > 0
        let (vals, vecs) = hermitian_eig(&(m(ze) * C64::new(ze - end, 0.0)));
        let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.0).collect();
        let mut y0 = CMat::zeros(vals.len(), cols.len());
        for (c, &i) in cols.iter().enumerate() {
            y0.set_column(c, &vecs.column(i));
        }
        let mut targets: Vec<f64> =
            if end > 0.0 { rule.nodes[half..].iter().rev().copied().collect() } else { rule.nodes[..half].to_vec() };
        if targets.first().is_some_and(|t| (t - end).abs() <= opts.delta) {
            return Err(MonopoleError::InvalidInput("quadrature node lies beyond the shooting start".into()));
        }
        targets.push(0.0);
        sides.push(shoot(&m, ze, &y0, &targets, opts.tol)?);
    }
    let (plus, minus) = (&sides[0], &sides[1]);
    let (sp, sm) = (plus.last().expect("match point"), minus.last().expect("match point"));
    let (kp, km) = (sp.ncols(), sm.ncols());
    let mut joint = CMat::zeros(sp.nrows(), kp + km);
    joint.view_mut((0, 0), sp.shape()).copy_from(sp);
    joint.view_mut((0, kp), sm.shape()).copy_from(&(-sm));
    let (sv, null) = null_space(&joint, 2);
    if sv.len() < 3 || !(sv[sv.len() - 3] > 1e-6 * sv[0]) {
        return Err(MonopoleError::SubspaceAmbiguous { singular_values: sv });
    }
    let cp = null.rows(0, kp).into_owned();
    let cm = null.rows(kp, km).into_owned();
    let mut v: Vec<CMat> = minus[..half].iter().map(|y| y * &cm).collect();
    v.extend(plus[..rule.nodes.len() - half].iter().rev().map(|y| y * &cp));
    rule.canonical(v)
}

/// Higgs field, gauge field and Bogomolny residual from a pair solver, with
/// central differences on axis and face-diagonal offsets at steps `h`, `2h`
/// and one Richardson level.
fn stencil_fields(pair: &(dyn Fn(&SpatialPoint) -> Result<Vec<CMat>> + Sync), x: &SpatialPoint, rule: &Rule, h: f64) -> Result<OracleFields> {
    use std::collections::HashMap;
    let mut cache: HashMap<[i32; 3], Vec<CMat>> = HashMap::new();
    let mut get = |k: [i32; 3]| -> Result<Vec<CMat>> {
        if let Some(v) = cache.get(&k) {
            return Ok(v.clone());
        }
        let v = pair(&x.offset([h * k[0] as f64, h * k[1] as f64, h * k[2] as f64]))?;
        cache.insert(k, v.clone());
        Ok(v)
    };
    let shift = |k: [i32; 3], i: usize, s: i32| {
        let mut o = k;
        o[i] += s;
        o
    };
    let mut gauge = |k: [i32; 3], i: usize, s: i32| -> Result<CMat> {
        let (p, m, c) = (get(shift(k, i, s))?, get(shift(k, i, -s))?, get(k)?);
        let d: Vec<CMat> = p.iter().zip(&m).map(|(a, b)| (a - b) / C64::new(2.0 * s as f64 * h, 0.0)).collect();
        Ok(rule.overlap(&c, &d))
    };
    let o = [0, 0, 0];
    let mut a_levels = Vec::new();
    let mut defects = Vec::new();
    let centre = pair(x)?;
    let phi = rule.higgs(&centre);
    for s in [1, 2] {
        let hs = C64::new(1.0 / (2.0 * s as f64 * h), 0.0);
        let a: Vec<CMat> = (0..3).map(|i| gauge(o, i, s)).collect::<Result<_>>()?;
        let mut d = Vec::new();
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let phi_p = rule.higgs(&pair(&x.offset(unit(i, s as f64 * h)))?);
            let phi_m = rule.higgs(&pair(&x.offset(unit(i, -s as f64 * h)))?);
            let dphi = (phi_p - phi_m) * hs + commutator(&a[i], &phi);
            let djak = (gauge(shift(o, j, s), k, s)? - gauge(shift(o, j, -s), k, s)?) * hs;
            let dkaj = (gauge(shift(o, k, s), j, s)? - gauge(shift(o, k, -s), j, s)?) * hs;
            let f = djak - dkaj + commutator(&a[j], &a[k]);
            d.push((dphi, f));
        }
        a_levels.push(a);
        defects.push(d);
    }
    let rich = |p: &CMat, q: &CMat| (p * C64::new(4.0, 0.0) - q) / C64::new(3.0, 0.0);
    let a: [CMat; 3] = std::array::from_fn(|i| rich(&a_levels[0][i], &a_levels[1][i]));
    let branch = |sign: f64| {
        (0..3)
            .map(|i| {
                let r1 = &defects[0][i].0 - &defects[0][i].1 * C64::new(sign, 0.0);
                let r2 = &defects[1][i].0 - &defects[1][i].1 * C64::new(sign, 0.0);
                rich(&r1, &r2).norm()
            })
            .fold(0.0, f64::max)
    };
    let phi_norm = (-0.5 * (&phi * &phi).trace().re).max(0.0).sqrt();
    Ok(OracleFields { x: *x, phi, a, phi_norm, bogomolny_residual: branch(1.0).min(branch(-1.0)) })
}

fn unit(i: usize, s: f64) -> [f64; 3] {
    let mut d = [0.0; 3];
    d[i] = s;
    d
}

/// Charge-one fields for `T = −ic` by direct integration of the Weyl
/// equation, in the gauge where `∫v dz` is Hermitian positive.
pub fn charge1_fields(center: [f64; 3], x: &SpatialPoint, opts: &DirectOptions) -> Result<OracleFields> {
    let rule = Rule::new(opts.nodes);
    let h = opts.fd_step * x.r().max(1.0);
    stencil_fields(&|p: &SpatialPoint| charge1_pair(center, p, &rule, opts.tol), x, &rule, h)
}

/// `|Φ|` of the charge-one monopole from the direct solver alone.
pub fn charge1_phi_norm(center: [f64; 3], x: &SpatialPoint, opts: &DirectOptions) -> Result<f64> {
    let rule = Rule::new(opts.nodes);
    let phi = rule.higgs(&charge1_pair(center, x, &rule, opts.tol)?);
    Ok((-0.5 * (&phi * &phi).trace().re).max(0.0).sqrt())
}

/// Charge-two fields from the explicit elliptic Nahm data by shooting.
pub fn charge2_fields(k: f64, x: &SpatialPoint, opts: &DirectOptions) -> Result<OracleFields> {
    let rule = Rule::new(opts.nodes);
    let t = EllipticNahm::new(k);
    let h = opts.fd_step * x.r().max(1.0);
    stencil_fields(&|p: &SpatialPoint| pole_pair(&|z| t.at(z), p, &rule, opts), x, &rule, h)
}

/// `|Φ|` of the charge-two monopole from the direct solver alone.
pub fn charge2_phi_norm(k: f64, x: &SpatialPoint, opts: &DirectOptions) -> Result<f64> {
    let rule = Rule::new(opts.nodes);
    let t = EllipticNahm::new(k);
    let phi = rule.higgs(&pole_pair(&|z| t.at(z), x, &rule, opts)?);
    Ok((-0.5 * (&phi * &phi).trace().re).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_kit::{commutator, max_abs};

    #[test]
    fn calibration_reproduces_complete_integral() {
        let b = build_charge2_bundle(Charge2Params::default()).unwrap();
        assert!((b.kappa - b.kappa_reference).abs() < 1e-8 * b.kappa_reference, "{} vs {}", b.kappa, b.kappa_reference);
        assert!(b.h2_residual < 1e-8);
        assert_eq!(b.doc.es_m[0].abs(), 1);
    }

    #[test]
    fn calibration_is_stable() {
        let a = build_charge2_bundle(Charge2Params::default()).unwrap();
        let b = build_charge2_bundle(Charge2Params::default()).unwrap();
        assert!((a.doc.tau[0][0] - b.doc.tau[0][0]).norm() < 1e-12);
        assert_eq!(a.doc, b.doc);
    }

    #[test]
    fn bundle_round_trips_and_validates() {
        let b = build_charge2_bundle(Charge2Params::default()).unwrap();
        let (bundle, rep) = crate::abelian_data::load_bundle(&b.doc.to_json()).unwrap();
        assert!(rep.all_pass(), "{:#?}", rep.failures());
        assert_eq!(bundle.n, 2);
    }

    fn closed_form_phi_norm(r: f64) -> f64 {
        1.0 / (2.0 * r).tanh() - 1.0 / (2.0 * r)
    }

    #[test]
    fn charge1_matches_closed_form() {
        let opts = DirectOptions::default();
        let c = [0.2, -0.1, 0.3];
        for (x, r) in [([0.0, 0.0, 1.0], 1.0), ([0.5, 0.5, -0.5], 0.75f64.sqrt()), ([3.0, 0.0, 4.0], 5.0)] {
            let p = SpatialPoint::new(x[0] + c[0], x[1] + c[1], x[2] + c[2]);
            let got = charge1_phi_norm(c, &p, &opts).unwrap();
            assert!((got - closed_form_phi_norm(r)).abs() < 1e-10, "r={r}: {got}");
        }
    }

    #[test]
    fn charge1_fields_are_a_hedgehog_solving_bogomolny() {
        let x = SpatialPoint::new(0.3, -0.4, 0.5);
        let f = charge1_fields([0.0; 3], &x, &DirectOptions::default()).unwrap();
        let r = x.r();
        assert!((f.phi_norm - closed_form_phi_norm(r)).abs() < 1e-10);
        assert!(f.bogomolny_residual < 1e-6, "{}", f.bogomolny_residual);
        // Φ ∝ x·σ up to the gauge frame: its eigenvalues are ±i|Φ|
        assert!((f.phi.trace()).norm() < 1e-12);
        for a in &f.a {
            assert!((a + a.adjoint()).norm() < 1e-9);
        }
    }

    #[test]
    fn charge2_direct_solver_is_consistent() {
        let opts = DirectOptions::default();
        let x = SpatialPoint::new(0.4, 0.3, 1.1);
        let a = charge2_phi_norm(0.6, &x, &opts).unwrap();
        let b = charge2_phi_norm(0.6, &x, &DirectOptions { nodes: 128, delta: 3e-6, ..opts }).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn elliptic_nahm_solves_nahm_equation() {
        let t = EllipticNahm::new(0.6);
        for z in [-0.7, 0.0, 0.4, 0.9] {
            let tz = t.at(z);
            let dt = t.derivative(z);
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                let rhs = commutator(&tz.t[j], &tz.t[k]);
                assert!(max_abs(&(&dt.t[i] - rhs)) < 1e-10 * (1.0 + max_abs(&dt.t[i])));
            }
            assert!(tz.max_anti_hermitian_defect() < 1e-14);
        }
    }
}
