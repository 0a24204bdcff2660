//! The curve-derived constants consumed by the Baker–Akhiezer formulas,
//! their JSON form, and numerical checks of the constraints they obey.

pub mod genus1;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{MonopoleError, Result};
use crate::matrix_kit::{CMat, C64, I, ZERO};
use crate::poly::Poly;
use crate::report::{Check, Report};
use crate::riemann_theta::{on_theta_divisor, theta_gradient, theta_scaled, PeriodMatrix, ThetaChar};
use crate::spectral_curve::{involution_residual, residues_at_infinity, CurvePoint, SpectralCurve, Zeta};

pub use genus1::{stadium, Genus1Engine};

pub const BUNDLE_VERSION: &str = "monopole-bundle/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveDoc {
    pub a: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbelKind {
    ClosedFormG0,
    ClosedFormG1,
    Quadrature,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsDoc {
    #[serde(default)]
    pub a_cycles: Vec<Vec<C64>>,
    #[serde(default)]
    pub b_cycles: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasePointDoc {
    pub zeta: C64,
    pub eta: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbelSpecDoc {
    pub kind: AbelKind,
    #[serde(default)]
    pub branch_points: Vec<C64>,
    #[serde(default)]
    pub paths: PathsDoc,
    #[serde(default)]
    pub base_point: Option<BasePointDoc>,
}

/// On-disk bundle. Complex numbers are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleDoc {
    pub version: String,
    pub n: usize,
    pub curve: CurveDoc,
    pub tau: Vec<Vec<C64>>,
    pub es_n: Vec<i64>,
    pub es_m: Vec<i64>,
    #[serde(rename = "K_tilde")]
    pub k_tilde: Vec<C64>,
    pub abel_inf: Vec<Vec<C64>>,
    pub rho: Vec<C64>,
    pub nu: Vec<C64>,
    pub prime_inf: Vec<Vec<C64>>,
    pub eps_signs: Vec<i64>,
    pub char_p: Vec<i64>,
    pub char_q: Vec<i64>,
    pub abel_spec: AbelSpecDoc,
}

impl BundleDoc {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }
}

/// How φ(P) and ∫γ_∞ are evaluated for this bundle.
#[derive(Debug, Clone)]
pub enum AbelEngine {
    Genus0,
    Genus1(Box<Genus1Engine>),
    /// Abelian data is ingested as declared; point evaluation unsupported.
    Declared,
}

#[derive(Debug, Clone)]
pub struct AbelianBundle {
    pub doc: BundleDoc,
    pub n: usize,
    pub curve: SpectralCurve,
    pub tau: Option<PeriodMatrix>,
    pub es_n: Vec<i64>,
    pub es_m: Vec<i64>,
    /// Winding vector `U = ½es_n + ½τ·es_m`.
    pub u: Vec<C64>,
    pub k_tilde: Vec<C64>,
    pub abel_inf: Vec<Vec<C64>>,
    pub rho: Vec<C64>,
    pub nu: Vec<C64>,
    pub prime_inf: CMat,
    pub eps_signs: Vec<i64>,
    pub char_pq: ThetaChar,
    pub engine: AbelEngine,
}

fn schema(msg: impl Into<String>) -> MonopoleError {
    MonopoleError::Schema(msg.into())
}

fn check_len<T>(name: &str, v: &[T], want: usize) -> Result<()> {
    if v.len() != want {
        return Err(schema(format!("{name} has length {}, expected {want}", v.len())));
    }
    Ok(())
}

/// Real coordinates `(a, b)` with `v = a + τb`.
pub fn lattice_coords(v: &[C64], tau: &PeriodMatrix) -> (Vec<f64>, Vec<f64>) {
    let g = tau.genus();
    let t = tau.tau();
    let im = nalgebra::DMatrix::from_fn(g, g, |i, j| t[(i, j)].im);
    let rhs = nalgebra::DVector::from_iterator(g, v.iter().map(|x| x.im));
    let b = im.lu().solve(&rhs).unwrap_or_else(|| nalgebra::DVector::zeros(g));
    let a = (0..g).map(|i| v[i].re - (0..g).map(|j| t[(i, j)].re * b[j]).sum::<f64>()).collect();
    (a, b.iter().copied().collect())
}

/// Distance of `v` from the lattice `ℤᵍ + τℤᵍ`, in lattice coordinates.
pub fn lattice_distance(v: &[C64], tau: &PeriodMatrix) -> f64 {
    let (a, b) = lattice_coords(v, tau);
    a.iter().chain(&b).map(|x| (x - x.round()).abs()).fold(0.0, f64::max)
}

/// `½n + ½τm`.
pub fn half_period(n: &[i64], m: &[i64], tau: &PeriodMatrix) -> Vec<C64> {
    let tm = tau.tau_times(m);
    n.iter().zip(tm).map(|(&ni, t)| C64::new(0.5 * ni as f64, 0.0) + t * 0.5).collect()
}

/// Parses and checks a bundle. Structural problems are errors; numerical
/// invariants are collected in the returned report.
pub fn load_bundle(text: &str) -> Result<(AbelianBundle, Report)> {
    let doc: BundleDoc = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
    let bundle = bundle_from_doc(doc)?;
    let report = validate(&bundle);
    Ok((bundle, report))
}

pub fn bundle_from_doc(doc: BundleDoc) -> Result<AbelianBundle> {
    if doc.version != BUNDLE_VERSION {
        return Err(schema(format!("unsupported version {:?}", doc.version)));
    }
    let n = doc.n;
    if n == 0 {
        return Err(schema("n must be positive"));
    }
    let g = (n - 1) * (n - 1);
    check_len("curve.a", &doc.curve.a, n)?;
    let curve = SpectralCurve::new(n, doc.curve.a.clone()).map_err(|e| schema(e.to_string()))?;
    check_len("tau", &doc.tau, g)?;
    for row in &doc.tau {
        check_len("tau row", row, g)?;
    }
    check_len("es_n", &doc.es_n, g)?;
    check_len("es_m", &doc.es_m, g)?;
    check_len("K_tilde", &doc.k_tilde, g)?;
    check_len("abel_inf", &doc.abel_inf, n)?;
    for v in &doc.abel_inf {
        check_len("abel_inf entry", v, g)?;
    }
    check_len("rho", &doc.rho, n)?;
    check_len("nu", &doc.nu, n)?;
    check_len("prime_inf", &doc.prime_inf, n)?;
    for row in &doc.prime_inf {
        check_len("prime_inf row", row, n)?;
    }
    check_len("eps_signs", &doc.eps_signs, n - 1)?;
    if doc.eps_signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(schema("eps_signs entries must be ±1"));
    }
    check_len("char_p", &doc.char_p, g)?;
    check_len("char_q", &doc.char_q, g)?;
    let expected_kind = match g {
        0 => AbelKind::ClosedFormG0,
        1 => AbelKind::ClosedFormG1,
        _ => AbelKind::Quadrature,
    };
    if doc.abel_spec.kind != expected_kind && !(g == 1 && doc.abel_spec.kind == AbelKind::Quadrature) {
        return Err(schema(format!("abel_spec kind {:?} does not fit genus {g}", doc.abel_spec.kind)));
    }

    let tau = if g == 0 {
        None
    } else {
        let t = CMat::from_fn(g, g, |i, j| doc.tau[i][j]);
        Some(PeriodMatrix::new(t).map_err(|e| schema(e.to_string()))?)
    };
    let u = match &tau {
        Some(t) => half_period(&doc.es_n, &doc.es_m, t),
        None => vec![],
    };
    let prime_inf = CMat::from_fn(n, n, |i, j| doc.prime_inf[i][j]);
    let engine = if g == 0 {
        AbelEngine::Genus0
    } else if g == 1 {
        AbelEngine::Genus1(Box::new(genus1_engine(&doc, &curve)?))
    } else {
        AbelEngine::Declared
    };
    Ok(AbelianBundle {
        n,
        curve,
        tau,
        es_n: doc.es_n.clone(),
        es_m: doc.es_m.clone(),
        u,
        k_tilde: doc.k_tilde.clone(),
        abel_inf: doc.abel_inf.clone(),
        rho: doc.rho.clone(),
        nu: doc.nu.clone(),
        prime_inf,
        eps_signs: doc.eps_signs.clone(),
        char_pq: ThetaChar { p: doc.char_p.clone(), q: doc.char_q.clone() },
        engine,
        doc,
    })
}

/// `η² = s(ζ)` for a centred charge-2 curve `η² + a₂(ζ) = 0`.
pub fn centred_quartic(curve: &SpectralCurve) -> Result<Poly> {
    if curve.n != 2 || curve.a[0].iter().any(|c| c.norm() > 1e-14) {
        return Err(MonopoleError::Unsupported("genus-one engine handles centred charge-2 curves (a₁ = 0)".into()));
    }
    Ok(curve.a_poly(2).scale(C64::new(-1.0, 0.0)))
}

fn genus1_engine(doc: &BundleDoc, curve: &SpectralCurve) -> Result<Genus1Engine> {
    let s = centred_quartic(curve)?;
    let spec = &doc.abel_spec;
    let base = spec.base_point.map(|b| b.zeta).unwrap_or(ZERO);
    let (a, b) = if !spec.paths.a_cycles.is_empty() && !spec.paths.b_cycles.is_empty() {
        (spec.paths.a_cycles[0].clone(), spec.paths.b_cycles[0].clone())
    } else {
        default_cycles(&spec.branch_points, base)?
    };
    let engine = Genus1Engine::new(s, [doc.rho[0], doc.rho[1]], a, b, base)
        .map_err(|e| MonopoleError::Validation(format!("abelian engine: {e}")))?;
    if let Some(bp) = spec.base_point {
        if (engine.base.1 - bp.eta).norm() > 1e-8 * (1.0 + bp.eta.norm()) {
            return Err(MonopoleError::Validation("base point η is not the principal root used by the engine".into()));
        }
    }
    Ok(engine)
}

/// a-cycle around `[b₀, b₁]`, b-cycle around `[b₁, b₂]`.
pub fn default_cycles(branch: &[C64], base: C64) -> Result<(Vec<C64>, Vec<C64>)> {
    if branch.len() != 4 {
        return Err(schema("genus-one abel_spec needs four branch points or explicit cycles"));
    }
    let loop_around = |p: C64, q: C64| {
        let clearance = branch
            .iter()
            .filter(|&&o| o != p && o != q)
            .map(|&o| (o - p).norm().min((o - q).norm()))
            .fold((q - p).norm(), f64::min);
        stadium(p, q, 0.3 * clearance, base)
    };
    Ok((loop_around(branch[0], branch[1]), loop_around(branch[1], branch[2])))
}

impl AbelianBundle {
    pub fn genus(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    pub fn tau(&self) -> Result<&PeriodMatrix> {
        self.tau.as_ref().ok_or_else(|| MonopoleError::Unsupported("genus-zero bundle has no period matrix".into()))
    }

    pub fn genus1(&self) -> Result<&Genus1Engine> {
        match &self.engine {
            AbelEngine::Genus1(e) => Ok(e),
            _ => Err(MonopoleError::Unsupported("bundle has no genus-one engine".into())),
        }
    }
}

/// `φ(P)` along the bundle's fixed path system.
pub fn abel_map(bundle: &AbelianBundle, p: &CurvePoint) -> Result<Vec<C64>> {
    Ok(abel_and_second_kind(bundle, p)?.0)
}

/// `∫_{P₀}^{P} γ_∞` on the same path as [`abel_map`].
pub fn second_kind_integral(bundle: &AbelianBundle, p: &CurvePoint) -> Result<C64> {
    Ok(abel_and_second_kind(bundle, p)?.1)
}

/// Both integrals at once, sharing the path.
pub fn abel_and_second_kind(bundle: &AbelianBundle, p: &CurvePoint) -> Result<(Vec<C64>, C64)> {
    let zeta = match p.zeta {
        Zeta::Finite(z) => z,
        Zeta::Infinity => {
            return Err(MonopoleError::Unsupported("abelian integrals at the points over infinity diverge".into()))
        }
    };
    match &bundle.engine {
        // γ_∞ = −ρ₁ dζ, base point ζ = 0
        AbelEngine::Genus0 => Ok((vec![], -bundle.rho[0] * zeta)),
        AbelEngine::Genus1(e) => {
            let (phi, g) = e.abel(zeta, p.eta)?;
            Ok((vec![phi], g))
        }
        AbelEngine::Declared => Err(MonopoleError::Unsupported("abel map for genus ≥ 2 needs tabulated paths".into())),
    }
}

/// Numerical invariants of a loaded bundle.
pub fn validate(bundle: &AbelianBundle) -> Report {
    let mut r = Report::default();
    r.push(Check::below("H1_involution", involution_residual(&bundle.curve, 64, 7), 1e-10));
    let (res, _) = residues_at_infinity(&bundle.curve);
    r.push(Check::below("rho_residues", multiset_distance(&bundle.rho, &res), 1e-8));
    if let Some(tau) = &bundle.tau {
        r.extend(lattice_checks(bundle, tau));
    }
    if let AbelEngine::Genus1(e) = &bundle.engine {
        r.extend(engine_checks(bundle, e));
    }
    r
}

fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

/// Smallest lattice distance of `sU` over odd `s` with `|s| ≤ 16`. The
/// winding vector is a primitive half period when this is bounded away
/// from zero (even multiples are lattice vectors by construction).
pub fn primitivity_margin(u: &[C64], tau: &PeriodMatrix) -> f64 {
    (1..=16)
        .step_by(2)
        .map(|s| lattice_distance(&u.iter().map(|x| x * s as f64).collect::<Vec<_>>(), tau))
        .fold(f64::INFINITY, f64::min)
}

fn lattice_checks(bundle: &AbelianBundle, tau: &PeriodMatrix) -> Report {
    let mut r = Report::default();
    r.push(Check::below("U_half_period", lattice_distance(&bundle.u.iter().map(|x| x * 2.0).collect::<Vec<_>>(), tau), 1e-10));
    r.push(Check::above("U_primitive", primitivity_margin(&bundle.u, tau), 1e-6));
    match on_theta_divisor(&bundle.k_tilde, tau, 1e-9) {
        Ok(d) => r.push(Check::below("theta_K_tilde", d.residual, 1e-9)),
        Err(_) => r.push(Check::below("theta_K_tilde", f64::INFINITY, 1e-9)),
    }
    let two_k: Vec<C64> = bundle.k_tilde.iter().map(|x| x * 2.0).collect();
    r.push(Check::below("two_K_tilde_lattice", lattice_distance(&two_k, tau), 1e-9));
    if bundle.n >= 3 {
        let grad = theta_gradient(&bundle.k_tilde, tau, 1e-14)
            .map(|g| g.iter().map(|x| x.norm()).fold(0.0, f64::max))
            .unwrap_or(f64::INFINITY);
        r.push(Check::below("theta_K_tilde_gradient", grad, 1e-8));
        r.push(Check::below("H2_winding(declared)", 0.0, 1e-7));
    }
    let hp = half_period(&bundle.char_pq.p, &bundle.char_pq.q, tau);
    let diff: Vec<C64> = (0..bundle.genus()).map(|i| bundle.u[i] - bundle.k_tilde[i] - hp[i]).collect();
    r.push(Check::below("characteristic", lattice_distance(&diff, tau), 1e-9));
    r.push(Check::above("H3_theta_nonvanishing", h3_theta_margin(bundle, tau, 1e-2), 1e-6));
    r
}

/// `min |θ((z+1)U − K̃)| / max term` on a grid of `(−1+δ, 1−δ)`.
pub fn h3_theta_margin(bundle: &AbelianBundle, tau: &PeriodMatrix, delta: f64) -> f64 {
    let m = 200;
    (0..=m)
        .map(|k| {
            let z = -1.0 + delta + (2.0 - 2.0 * delta) * k as f64 / m as f64;
            let w: Vec<C64> = (0..bundle.genus()).map(|i| bundle.u[i] * (z + 1.0) - bundle.k_tilde[i]).collect();
            theta_scaled(&w, tau, 1e-15).map(|s| s.mantissa.norm() / s.max_term).unwrap_or(0.0)
        })
        .fold(f64::INFINITY, f64::min)
}

fn engine_checks(bundle: &AbelianBundle, e: &Genus1Engine) -> Report {
    let mut r = Report::default();
    let tau = bundle.tau.as_ref().expect("genus one");
    r.push(Check::below("tau_engine", (e.tau - tau.tau()[(0, 0)]).norm(), 1e-8));
    r.push(Check::below("gamma_a_period", e.gamma_a_period.norm(), 1e-8));
    r.push(Check::below("H2_winding", (e.winding - bundle.u[0]).norm(), 1e-7));
    let phi_err = (0..2).map(|j| (e.phi_inf[j] - bundle.abel_inf[j][0]).norm()).fold(0.0, f64::max);
    r.push(Check::below("abel_inf_engine", phi_err, 1e-8));
    let nu_err = (0..2).map(|j| (e.nu[j] - bundle.nu[j]).norm()).fold(0.0, f64::max);
    r.push(Check::below("nu_engine", nu_err, 1e-8));
    let prime = prime_form_infinities(e).map(|p| (p - bundle.prime_inf[(0, 1)]).norm()).unwrap_or(f64::INFINITY);
    r.push(Check::below("prime_inf_engine", prime, 1e-8));
    r
}

/// `𝓔(∞₁,∞₂) = θ₁₁(φ₂−φ₁) / (θ₁₁'(0)·√(ω₁ω₂))` with `ω_j = dφ/dξ` at `∞_j`.
pub fn prime_form_infinities(e: &Genus1Engine) -> Result<C64> {
    use crate::riemann_theta::{theta_char, theta_char_gradient};
    let tau = PeriodMatrix::scalar(e.tau)?;
    let odd = ThetaChar { p: vec![1], q: vec![1] };
    let num = theta_char(&[e.phi_inf[1] - e.phi_inf[0]], &tau, &odd, 1e-15)?;
    let d0 = theta_char_gradient(&[ZERO], &tau, &odd, 1e-15)?[0];
    Ok(num / (d0 * (e.omega_at_infinity(0) * e.omega_at_infinity(1)).sqrt()))
}

/// Hitchin-constraint report: reality (H1), half-period winding (H2) and
/// the regularity proxy (H3).
pub fn verify_hitchin(bundle: &AbelianBundle) -> Report {
    let mut r = Report::default();
    r.push(Check::below("H1_involution", involution_residual(&bundle.curve, 64, 11), 1e-10));
    match (&bundle.engine, &bundle.tau) {
        (AbelEngine::Genus1(e), Some(_)) => r.push(Check::below("H2_winding", (e.winding - bundle.u[0]).norm(), 1e-7)),
        (AbelEngine::Declared, Some(_)) => r.push(Check::below("H2_winding(declared)", 0.0, 1e-7)),
        _ => {}
    }
    if let Some(tau) = &bundle.tau {
        r.push(Check::above("H2_primitive", primitivity_margin(&bundle.u, tau), 1e-6));
        r.push(Check::above("H3_theta_nonvanishing", h3_theta_margin(bundle, tau, 1e-2), 1e-6));
    }
    r
}

/// Builtin centred charge-1 bundle: `a₁ = 0`.
pub fn charge1_doc(a1: [C64; 3]) -> BundleDoc {
    BundleDoc {
        version: BUNDLE_VERSION.into(),
        n: 1,
        curve: CurveDoc { a: vec![a1.to_vec()] },
        tau: vec![],
        es_n: vec![],
        es_m: vec![],
        k_tilde: vec![],
        abel_inf: vec![vec![]],
        rho: vec![-a1[2]],
        nu: vec![ZERO],
        prime_inf: vec![vec![ZERO]],
        eps_signs: vec![],
        char_p: vec![],
        char_q: vec![],
        abel_spec: AbelSpecDoc { kind: AbelKind::ClosedFormG0, branch_points: vec![], paths: PathsDoc::default(), base_point: None },
    }
}

/// `a₁(ζ) = −2y(ζ)·c` for a charge-1 monopole centred at `c`.
pub fn charge1_curve_for_center(c: [f64; 3]) -> [C64; 3] {
    // 2y·c = −i(1+ζ²)c₁ + (1−ζ²)c₂ − 2ζc₃
    [C64::new(-c[1], c[0]), C64::new(2.0 * c[2], 0.0), C64::new(c[1], c[0])]
}

#[allow(dead_code)]
fn two_pi_i() -> C64 {
    I * (2.0 * PI)
}
