//! Nahm data, the linear flow on the Jacobian and reconstruction of the
//! Nahm matrices from Baker–Akhiezer data.
//!
//! In the spectral gauge the Lax matrix is `L̃ = Ã₋₁ + Q₀ζ + diag(ρ)ζ²`.
//! The gauge matrix `D` solves `D' = −½Q₀D`, `D(0) = 1`, and with `C = D⁻¹`
//! the Nahm gauge coefficients are `A₁ = C ρ D`, `A₀ = C Q₀ D`,
//! `A₋₁ = C Ã₋₁ D`. A constant Hermitian `H` (with `G = √H`) then moves
//! everything into the gauge where the `T_i` are anti-Hermitian.

use crate::baker_akhiezer::{abel_point, AbelPoint, BakerAkhiezer};
use crate::error::{MonopoleError, Result};
use crate::matrix_kit::{
    adjugate, commutator, hermitian_eig, hermitian_fn, identity, invert, max_abs, null_space, CMat, CVec, C64, I,
    ONE, ZERO,
};
use crate::ode::{integrate, OdeOptions};
use crate::report::{Check, Report};
use crate::spectral_curve::{curve_from_nahm, lax_matrices, CurvePoint, Zeta};

/// Largest tolerated condition number of `D(z)`.
pub const COND_CAP: f64 = 1e12;

/// Three `n×n` matrices `T₁, T₂, T₃` at a single value of `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct NahmTriple {
    pub t: [CMat; 3],
}

impl NahmTriple {
    pub fn new(t: [CMat; 3]) -> Self {
        NahmTriple { t }
    }

    pub fn zeros(n: usize) -> Self {
        NahmTriple { t: std::array::from_fn(|_| CMat::zeros(n, n)) }
    }

    /// Charge one data `T_j = i c_j`.
    pub fn scalar(cvec: [f64; 3]) -> Self {
        NahmTriple { t: cvec.map(|v| CMat::from_element(1, 1, I * v)) }
    }

    pub fn n(&self) -> usize {
        self.t[0].nrows()
    }

    /// `(A₋₁, A₀, A₁) = (T₁ + iT₂, −2iT₃, T₁ − iT₂)`.
    pub fn lax_coefficients(&self) -> (CMat, CMat, CMat) {
        let [t1, t2, t3] = &self.t;
        (t1 + t2 * I, t3 * (I * -2.0), t1 - t2 * I)
    }

    /// Inverse of [`lax_coefficients`](Self::lax_coefficients).
    pub fn from_lax(am: &CMat, a0: &CMat, a1: &CMat) -> Self {
        let half = C64::new(0.5, 0.0);
        NahmTriple {
            t: [(am + a1) * half, (am - a1) * (half / I), a0 * (I * 0.5)],
        }
    }

    pub fn max_anti_hermitian_defect(&self) -> f64 {
        self.t.iter().map(|m| max_abs(&(m + m.adjoint()))).fold(0.0, f64::max)
    }

    pub fn conjugated(&self, g: &CMat, ginv: &CMat) -> Self {
        NahmTriple { t: std::array::from_fn(|k| g * &self.t[k] * ginv) }
    }

    pub fn is_zero(&self) -> bool {
        self.t.iter().all(|m| m.iter().all(|&v| v == ZERO))
    }

    pub fn scaled(&self, s: f64) -> Self {
        NahmTriple { t: std::array::from_fn(|k| &self.t[k] * C64::new(s, 0.0)) }
    }

    fn combine(&self, other: &NahmTriple, a: f64, b: f64) -> Self {
        NahmTriple { t: std::array::from_fn(|k| &self.t[k] * C64::new(a, 0.0) + &other.t[k] * C64::new(b, 0.0)) }
    }

    /// `max_i ‖T_i − [T_j, T_k]‖_F` over cyclic `(i, j, k)`.
    pub fn closure_defect(&self, side: f64) -> f64 {
        (0..3)
            .map(|i| (&self.t[i] - commutator(&self.t[(i + 1) % 3], &self.t[(i + 2) % 3]) * C64::new(side, 0.0)).norm())
            .fold(0.0, f64::max)
    }
}

/// Max Frobenius residual of `dT_i/dz − [T_j, T_k]` given a derivative.
pub fn nahm_defect(t: &NahmTriple, dt: &NahmTriple) -> f64 {
    (0..3)
        .map(|i| (&dt.t[i] - commutator(&t.t[(i + 1) % 3], &t.t[(i + 2) % 3])).norm())
        .fold(0.0, f64::max)
}

/// Sheet points above one `ζ` with their abelian integrals, used to rebuild
/// the constant-in-`ζ` Lax coefficient.
#[derive(Debug, Clone)]
struct LaxAnchor {
    zeta: C64,
    points: Vec<AbelPoint>,
    etas: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    /// Ascending, contains 0.
    pub nodes: Vec<f64>,
    pub d: Vec<CMat>,
    pub c: Vec<CMat>,
    /// `G = √H` and its inverse.
    pub gauge: CMat,
    pub gauge_inv: CMat,
    pub opts: OdeOptions,
    anchor: LaxAnchor,
}

fn lax_anchor(ba: &BakerAkhiezer) -> Result<LaxAnchor> {
    let curve = &ba.bundle.curve;
    let mut last = MonopoleError::GaugeUndetermined("no usable anchor for the Lax coefficient".into());
    for zeta in [ZERO, C64::new(0.0, 0.31), C64::new(0.29, 0.0), C64::new(-0.23, -0.17)] {
        let etas = curve.etas_over(zeta);
        if etas.len() != ba.n() {
            continue;
        }
        let sep = etas
            .iter()
            .enumerate()
            .flat_map(|(i, a)| etas[i + 1..].iter().map(move |b| (a - b).norm()))
            .fold(f64::INFINITY, f64::min);
        let scale = etas.iter().map(|e| e.norm()).fold(1.0, f64::max);
        if sep < 1e-6 * scale {
            continue;
        }
        let pts: Result<Vec<AbelPoint>> = etas
            .iter()
            .map(|&eta| abel_point(ba.bundle, &CurvePoint { zeta: Zeta::Finite(zeta), eta, sheet: None }))
            .collect();
        match pts {
            Ok(points) => {
                let a = LaxAnchor { zeta, points, etas };
                match spectral_lax_constant(ba, &a, 0.0) {
                    Ok(_) => return Ok(a),
                    Err(e) => last = e,
                }
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// `Ã₋₁(z)`: `L̃(ζ₀) = P diag(η) P⁻¹` from the Baker–Akhiezer columns, minus
/// the known `ζ`-dependent part.
fn spectral_lax_constant(ba: &BakerAkhiezer, a: &LaxAnchor, z: f64) -> Result<CMat> {
    let n = ba.n();
    let mut p = CMat::zeros(n, n);
    for (k, pt) in a.points.iter().enumerate() {
        // the common exponential only rescales columns, which cancels
        let v = ba.ba_at(pt, z)?.vec;
        let nv = v.norm();
        p.set_column(k, &(v / C64::new(nv, 0.0)));
    }
    let inv = invert(&p)?;
    if inv.cond > COND_CAP {
        return Err(MonopoleError::ConditionBlowup { cond: inv.cond });
    }
    let lam = CMat::from_diagonal(&CVec::from_vec(a.etas.clone()));
    let lt = &p * lam * &inv.inv;
    Ok(lt - ba.q0_matrix(z)? * a.zeta - ba.rho() * (a.zeta * a.zeta))
}

fn flow_rhs<'b>(ba: &'b BakerAkhiezer) -> impl Fn(f64, &CMat) -> Result<CMat> + 'b {
    move |z, d| Ok(ba.q0_matrix(z)? * d * C64::new(-0.5, 0.0))
}

/// Integrates `D' = −½Q₀D` outward from `D(0) = 1` to every node and fits
/// the unitary gauge.
pub fn integrate_flow(ba: &BakerAkhiezer, z_nodes: &[f64], tol_ode: f64) -> Result<FlowState> {
    let mut nodes: Vec<f64> = z_nodes.iter().copied().filter(|z| *z != 0.0).collect();
    if nodes.iter().any(|z| !(z.abs() < 1.0)) {
        return Err(MonopoleError::InvalidInput("flow nodes must lie in (−1, 1)".into()));
    }
    nodes.push(0.0);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let n = ba.n();
    let opts = OdeOptions::with_tol(tol_ode);
    let origin = nodes.iter().position(|&z| z == 0.0).expect("origin inserted");
    let pos: Vec<f64> = nodes[origin + 1..].to_vec();
    let neg: Vec<f64> = nodes[..origin].iter().rev().copied().collect();
    let id = identity(n);
    let dpos = integrate(flow_rhs(ba), 0.0, &id, &pos, &opts)?;
    let dneg = integrate(flow_rhs(ba), 0.0, &id, &neg, &opts)?;
    let mut d: Vec<CMat> = dneg.into_iter().rev().collect();
    d.push(id);
    d.extend(dpos);
    let mut c = Vec::with_capacity(d.len());
    for (m, &z) in d.iter().zip(&nodes) {
        let inv = invert(m)?;
        if inv.cond > COND_CAP {
            return Err(MonopoleError::ConditionBlowup { cond: inv.cond });
        }
        let _ = z;
        c.push(inv.inv);
    }
    let anchor = lax_anchor(ba)?;
    let mut state = FlowState { nodes, d, c, gauge: identity(n), gauge_inv: identity(n), opts, anchor };
    let (g, ginv) = fit_unitary_gauge(ba, &state)?;
    state.gauge = g;
    state.gauge_inv = ginv;
    Ok(state)
}

/// Linear map `X ↦ X·A − B·X` on row-major `vec(X)`.
fn sylvester_rows(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows();
    let mut m = CMat::zeros(n * n, n * n);
    for col in 0..n * n {
        let mut e = CMat::zeros(n, n);
        e[(col / n, col % n)] = ONE;
        let img = &e * a - b * &e;
        for r in 0..n * n {
            m[(r, col)] = img[(r / n, r % n)];
        }
    }
    m
}

/// Constant Hermitian `H` with `H A₀ = A₀† H` and `H A₋₁ = −A₁† H`, so that
/// `G = √H` makes `A₀` Hermitian and `A₋₁ = −A₁†`.
fn fit_unitary_gauge(ba: &BakerAkhiezer, state: &FlowState) -> Result<(CMat, CMat)> {
    let n = ba.n();
    if n == 1 {
        return Ok((identity(1), identity(1)));
    }
    let mut blocks = Vec::new();
    for z in [0.0, -0.45, 0.3, 0.6] {
        let (am, a0, a1) = state.lax_coefficients_raw(ba, z)?;
        blocks.push(sylvester_rows(&a0, &a0.adjoint()));
        blocks.push(sylvester_rows(&am, &(-a1.adjoint())));
    }
    let rows = blocks.len() * n * n;
    let mut sys = CMat::zeros(rows, n * n);
    // equilibrate, but never amplify a block that vanishes (e.g. A₀ at a symmetric point)
    let top = blocks.iter().map(|b| b.norm()).fold(f64::MIN_POSITIVE, f64::max);
    for (k, b) in blocks.iter().enumerate() {
        let s = b.norm().max(1e-3 * top);
        sys.view_mut((k * n * n, 0), (n * n, n * n)).copy_from(&(b * C64::new(1.0 / s, 0.0)));
    }
    let (sv, basis) = null_space(&sys, 1);
    let last = sv[sv.len() - 1];
    let next = sv[sv.len() - 2];
    if last > 1e-6 * sv[0] || next < 1e-4 * sv[0] {
        return Err(MonopoleError::GaugeUndetermined(format!(
            "unitary gauge is not uniquely determined (singular values {last:.2e}, {next:.2e})"
        )));
    }
    let mut h = CMat::zeros(n, n);
    for r in 0..n * n {
        h[(r / n, r % n)] = basis[(r, 0)];
    }
    let tr = h.trace();
    h /= tr;
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let (vals, _) = hermitian_eig(&h);
    if vals[0] <= 0.0 {
        return Err(MonopoleError::GaugeUndetermined("gauge metric is not positive definite".into()));
    }
    Ok((hermitian_fn(&h, f64::sqrt), hermitian_fn(&h, |v| 1.0 / v.sqrt())))
}

impl FlowState {
    pub fn n(&self) -> usize {
        self.gauge.nrows()
    }

    fn nearest(&self, z: f64) -> usize {
        let mut best = 0;
        for (i, &x) in self.nodes.iter().enumerate() {
            if (x - z).abs() < (self.nodes[best] - z).abs() {
                best = i;
            }
        }
        best
    }

    /// `D(z)`, from the stored node or by integrating from the nearest one.
    pub fn d_at(&self, ba: &BakerAkhiezer, z: f64) -> Result<CMat> {
        let i = self.nearest(z);
        if self.nodes[i] == z {
            return Ok(self.d[i].clone());
        }
        Ok(integrate(flow_rhs(ba), self.nodes[i], &self.d[i], &[z], &self.opts)?.remove(0))
    }

    /// `(D, C)` at `z`, checking the conditioning.
    pub fn dc_at(&self, ba: &BakerAkhiezer, z: f64) -> Result<(CMat, CMat)> {
        let d = self.d_at(ba, z)?;
        let inv = invert(&d)?;
        if inv.cond > COND_CAP {
            return Err(MonopoleError::ConditionBlowup { cond: inv.cond });
        }
        Ok((d, inv.inv))
    }

    fn lax_coefficients_raw(&self, ba: &BakerAkhiezer, z: f64) -> Result<(CMat, CMat, CMat)> {
        let (d, c) = self.dc_at(ba, z)?;
        let am = spectral_lax_constant(ba, &self.anchor, z)?;
        Ok((&c * am * &d, &c * ba.q0_matrix(z)? * &d, &c * ba.rho() * &d))
    }

    /// Maps a spectral-gauge vector (e.g. a Baker–Akhiezer vector) into the
    /// gauge of the reconstructed `T_i`: `v ↦ G C v`.
    pub fn to_nahm_gauge(&self, ba: &BakerAkhiezer, z: f64, v: &CVec) -> Result<CVec> {
        let (_, c) = self.dc_at(ba, z)?;
        Ok(&self.gauge * c * v)
    }
}

/// Nahm matrices at `z` in the anti-Hermitian gauge.
pub fn reconstruct_nahm(ba: &BakerAkhiezer, flow: &FlowState, z: f64) -> Result<NahmTriple> {
    let (am, a0, a1) = flow.lax_coefficients_raw(ba, z)?;
    let g = &flow.gauge;
    let gi = &flow.gauge_inv;
    Ok(NahmTriple::from_lax(&(g * am * gi), &(g * a0 * gi), &(g * a1 * gi)))
}

/// Max Frobenius residual of `dT_i/dz = [T_j, T_k]` with a central
/// difference of step `h` and one Richardson level.
pub fn nahm_residual(flow: &FlowState, ba: &BakerAkhiezer, z: f64, h: f64) -> Result<f64> {
    let t = |s: f64| reconstruct_nahm(ba, flow, z + s);
    let d1 = t(h)?.combine(&t(-h)?, 0.5 / h, -0.5 / h);
    let d2 = t(h / 2.0)?.combine(&t(-h / 2.0)?, 1.0 / h, -1.0 / h);
    let deriv = d2.combine(&d1, 4.0 / 3.0, -1.0 / 3.0);
    Ok(nahm_defect(&t(0.0)?, &deriv))
}

#[derive(Debug, Clone)]
pub struct ResidueReport {
    pub side: f64,
    /// Extrapolated `lim (1∓z) T_i`.
    pub residues: NahmTriple,
    /// `max |ΣR_i² + ((n²−1)/4)·1|`.
    pub casimir_residual: f64,
    /// `max ‖R_i ∓ [R_j, R_k]‖` with the sign fixed by the side.
    pub closure_residual: f64,
}

impl ResidueReport {
    pub fn checks(&self, tol: f64) -> Vec<Check> {
        let tag = if self.side > 0.0 { "plus" } else { "minus" };
        vec![
            Check::below(format!("residue_casimir_{tag}"), self.casimir_residual, tol),
            Check::below(format!("residue_closure_{tag}"), self.closure_residual, tol),
        ]
    }
}

/// Casimir and closure residuals of residue data `R_i`.
pub fn residue_invariants(r: &NahmTriple, side: f64) -> (f64, f64) {
    let n = r.n();
    let cas = r.t.iter().fold(CMat::zeros(n, n), |acc, m| acc + m * m);
    let target = identity(n) * C64::new(-((n * n) as f64 - 1.0) / 4.0, 0.0);
    (max_abs(&(cas - target)), r.closure_defect(side))
}

/// Extrapolates `(1∓z)T_i(z)` to the pole at `z = side` from
/// `δ, 2δ, 4δ` with two Richardson levels.
pub fn residue_check(flow: &FlowState, ba: &BakerAkhiezer, side: f64, delta: f64) -> Result<ResidueReport> {
    let sample = |d: f64| -> Result<NahmTriple> { Ok(reconstruct_nahm(ba, flow, side * (1.0 - d))?.scaled(d)) };
    let (r1, r2, r4) = (sample(delta)?, sample(2.0 * delta)?, sample(4.0 * delta)?);
    let diff = |a: &NahmTriple, b: &NahmTriple| (0..3).map(|i| (&a.t[i] - &b.t[i]).norm()).fold(0.0, f64::max);
    let (e1, e2) = (diff(&r1, &r2), diff(&r2, &r4));
    let scale = r1.t.iter().map(|m| m.norm()).fold(0.0, f64::max);
    if e1 > 0.8 * e2 && e1 > 1e-8 * scale {
        return Err(MonopoleError::ExtrapolationUnstable(format!("successive differences {e2:.2e} → {e1:.2e}")));
    }
    // R(δ) = R + aδ + bδ² + …
    let lim = NahmTriple {
        t: std::array::from_fn(|i| (&r1.t[i] * C64::new(8.0, 0.0) - &r2.t[i] * C64::new(6.0, 0.0) + &r4.t[i]) / C64::new(3.0, 0.0)),
    };
    let (cas, clo) = residue_invariants(&lim, side);
    Ok(ResidueReport { side, residues: lim, casimir_residual: cas, closure_residual: clo })
}

/// Residual of `T_i(z) = W T_iᵀ(−z) W⁻¹` for a constant `W` fitted on
/// `fit_z` and tested on `test_z`. The literal statement holds only in a
/// preferred gauge; the conjugation absorbs the remaining constant gauge.
pub fn transpose_symmetry_residual(ba: &BakerAkhiezer, flow: &FlowState, fit_z: &[f64], test_z: &[f64]) -> Result<f64> {
    let n = flow.n();
    let mut blocks = Vec::new();
    for &z in fit_z {
        let (tp, tm) = (reconstruct_nahm(ba, flow, z)?, reconstruct_nahm(ba, flow, -z)?);
        for i in 0..3 {
            // W·T(−z)ᵀ − T(z)·W = 0
            blocks.push(sylvester_rows(&tm.t[i].transpose(), &tp.t[i]));
        }
    }
    let mut sys = CMat::zeros(blocks.len() * n * n, n * n);
    for (k, b) in blocks.iter().enumerate() {
        sys.view_mut((k * n * n, 0), (n * n, n * n)).copy_from(b);
    }
    let (_, basis) = null_space(&sys, 1);
    let mut w = CMat::zeros(n, n);
    for r in 0..n * n {
        w[(r / n, r % n)] = basis[(r, 0)];
    }
    let winv = invert(&w)?.inv;
    let mut worst: f64 = 0.0;
    for &z in test_z {
        let (tp, tm) = (reconstruct_nahm(ba, flow, z)?, reconstruct_nahm(ba, flow, -z)?);
        for i in 0..3 {
            worst = worst.max(max_abs(&(&w * tm.t[i].transpose() * &winv - &tp.t[i])));
        }
    }
    Ok(worst)
}

/// Largest change of the spectrum of `L(ζ, z)` relative to `z = 0` over the
/// sampled `ζ` and `z`.
pub fn isospectral_drift(ba: &BakerAkhiezer, flow: &FlowState, zetas: &[C64], zs: &[f64]) -> Result<f64> {
    let t0 = reconstruct_nahm(ba, flow, 0.0)?;
    let mut worst: f64 = 0.0;
    for &zeta in zetas {
        let mut base = crate::matrix_kit::eigenvalues(&lax_matrices(&t0, zeta).0);
        for &z in zs {
            let t = reconstruct_nahm(ba, flow, z)?;
            let mut ev = crate::matrix_kit::eigenvalues(&lax_matrices(&t, zeta).0);
            worst = worst.max(matched_distance(&mut base, &mut ev));
        }
    }
    Ok(worst)
}

fn matched_distance(a: &mut [C64], b: &mut [C64]) -> f64 {
    let key = |x: &C64, y: &C64| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
    a.sort_by(key);
    // greedy nearest matching is exact for well-separated spectra
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a.iter() {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal sizes");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Max coefficient difference between `curve_from_nahm(T(z))` and the
/// bundle curve.
pub fn curve_round_trip(ba: &BakerAkhiezer, flow: &FlowState, zs: &[f64]) -> Result<f64> {
    let want = &ba.bundle.curve;
    let mut worst: f64 = 0.0;
    for &z in zs {
        let got = curve_from_nahm(&reconstruct_nahm(ba, flow, z)?);
        for (ga, wa) in got.a.iter().zip(&want.a) {
            for k in 0..ga.len().max(wa.len()) {
                let g = ga.get(k).copied().unwrap_or(ZERO);
                let w = wa.get(k).copied().unwrap_or(ZERO);
                worst = worst.max((g - w).norm());
            }
        }
    }
    Ok(worst)
}

/// Eigenvector field `ŵ(z) = Adj(L(z)−λ)ν · h(z)` of the Lax matrix along
/// `z_nodes` (monotone, starting at the reference point), with
/// `h = e^{−θ}/√(μᵀAdj(L−λ)ν)` and
/// `θ' = ½ μᵀ{M, Adj(L−λ)}ν / μᵀAdj(L−λ)ν`, `θ(z_nodes[0]) = 0`.
pub fn adjoint_eigenvector_flow<F>(
    t: F,
    zeta: C64,
    lambda: C64,
    mu: &CVec,
    nu: &CVec,
    z_nodes: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<CVec>>
where
    F: Fn(f64) -> Result<NahmTriple>,
{
    let pieces = |z: f64| -> Result<(CMat, C64, CMat)> {
        let (l, m) = lax_matrices(&t(z)?, zeta);
        let n = l.nrows();
        let adj = adjugate(&(l - identity(n) * lambda));
        let pivot = (mu.transpose() * &adj * nu)[(0, 0)];
        if pivot.norm() <= 1e-10 * max_abs(&adj).max(f64::MIN_POSITIVE) * mu.norm() * nu.norm() {
            return Err(MonopoleError::PivotVanishes { z });
        }
        Ok((adj, pivot, m))
    };
    let rhs = |z: f64, _: &CMat| -> Result<CMat> {
        let (adj, pivot, m) = pieces(z)?;
        let anti = &m * &adj + &adj * &m;
        let num = (mu.transpose() * anti * nu)[(0, 0)];
        Ok(CMat::from_element(1, 1, num / pivot * 0.5))
    };
    let Some((&z0, rest)) = z_nodes.split_first() else {
        return Ok(vec![]);
    };
    let mut thetas = vec![CMat::zeros(1, 1)];
    thetas.extend(integrate(rhs, z0, &CMat::zeros(1, 1), rest, opts)?);
    let mut out = Vec::with_capacity(z_nodes.len());
    let mut prev_root: Option<C64> = None;
    for (&z, th) in z_nodes.iter().zip(thetas) {
        let (adj, pivot, _) = pieces(z)?;
        let mut root = pivot.sqrt();
        // continue the square root along the path
        if let Some(p) = prev_root {
            if (root - p).norm() > (root + p).norm() {
                root = -root;
            }
        }
        prev_root = Some(root);
        let h = (-th[(0, 0)]).exp() / root;
        out.push(adj * nu * h);
    }
    Ok(out)
}

/// Compares the adjugate eigenvector field `ŵ` of the Lax matrix with the
/// Nahm-gauge Baker–Akhiezer column at `P`. Both solve the same linear
/// problem, so they must be proportional with a ratio `r(z)e^{−zE}` that is
/// constant in `z`. Returns the worst componentwise disagreement and the
/// worst relative variation of the ratio over `zs`.
pub fn eigenvector_cross_check(ba: &BakerAkhiezer, flow: &FlowState, p: &AbelPoint, zs: &[f64], tol_ode: f64) -> Result<(f64, f64)> {
    let n = flow.n();
    let mu = CVec::from_fn(n, |i, _| C64::new(1.0 - 0.3 * i as f64, 0.2 + 0.5 * i as f64));
    let nu = CVec::from_fn(n, |i, _| C64::new(0.3 + 0.6 * i as f64, -0.5 + 0.6 * i as f64));
    let w = adjoint_eigenvector_flow(|z| reconstruct_nahm(ba, flow, z), p.zeta, p.eta, &mu, &nu, zs, &OdeOptions::with_tol(tol_ode))?;
    let (mut comp, mut var): (f64, f64) = (0.0, 0.0);
    let mut first: Option<C64> = None;
    for (&z, wz) in zs.iter().zip(&w) {
        let phi = ba.ba_at(p, z)?;
        let v = flow.to_nahm_gauge(ba, z, &(phi.vec * (phi.common_exp - p.e * z).exp()))?;
        let r = wz[0] / v[0];
        for k in 1..n {
            comp = comp.max((wz[k] / v[k] - r).norm() / r.norm());
        }
        let r = r * (-p.e * z).exp();
        match first {
            Some(r0) => var = var.max((r - r0).norm() / r0.norm()),
            None => first = Some(r),
        }
    }
    Ok((comp, var))
}

/// `max_i ‖T_i + T_i†‖` over the grid.
pub fn anti_hermitian_residual(ba: &BakerAkhiezer, flow: &FlowState, zs: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &z in zs {
        worst = worst.max(reconstruct_nahm(ba, flow, z)?.max_anti_hermitian_defect());
    }
    Ok(worst)
}

/// The Nahm-level checks on `|z| ≤ z_max`.
pub fn nahm_report(ba: &BakerAkhiezer, flow: &FlowState, z_max: f64) -> Result<Report> {
    let zs: Vec<f64> = (-6..=6).map(|k| z_max * k as f64 / 6.0).collect();
    let mut rep = Report::default();
    let mut nahm: f64 = 0.0;
    for &z in &zs {
        let h = 1e-3 * (1.0 - z.abs()).min(1.0);
        nahm = nahm.max(nahm_residual(flow, ba, z, h)?);
    }
    rep.push(Check::below("nahm_equation", nahm, 1e-6));
    rep.push(Check::below("anti_hermitian", anti_hermitian_residual(ba, flow, &zs)?, 1e-6));
    if flow.n() > 1 {
        let sym = transpose_symmetry_residual(ba, flow, &[0.2, 0.55, 0.8], &[0.1, 0.45, z_max])?;
        rep.push(Check::below("transpose_symmetry", sym, 1e-6));
    }
    let zetas = [C64::new(0.3, 0.2), C64::new(-0.7, 0.5), C64::new(1.3, -0.4)];
    rep.push(Check::below("isospectral_drift", isospectral_drift(ba, flow, &zetas, &zs)?, 1e-8));
    rep.push(Check::below("curve_round_trip", curve_round_trip(ba, flow, &zs)?, 1e-7));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_kit::pauli;
    use crate::reference_oracles::{charge2_bundle, EllipticNahm};
    use std::sync::OnceLock;

    fn nodes() -> Vec<f64> {
        (-19..=19).map(|k| k as f64 * 0.05).collect()
    }

    fn bundle() -> &'static crate::abelian_data::AbelianBundle {
        static B: OnceLock<crate::abelian_data::AbelianBundle> = OnceLock::new();
        B.get_or_init(|| charge2_bundle().unwrap())
    }

    #[test]
    fn lax_round_trip() {
        let t = EllipticNahm::new(0.6).at(0.3);
        let (am, a0, a1) = t.lax_coefficients();
        let back = NahmTriple::from_lax(&am, &a0, &a1);
        for i in 0..3 {
            assert!(max_abs(&(&back.t[i] - &t.t[i])) < 1e-14);
        }
    }

    #[test]
    fn spin_half_pole_model_solves_nahm() {
        // T_i = R_i/(z−1) with R_i = (i/2)σ_i, so that [R_j, R_k] = −R_i balances dT/dz = −R/(z−1)²
        let r = NahmTriple::new(pauli().map(|s| s * (I * 0.5)));
        let z: f64 = 0.3;
        let t = r.scaled(1.0 / (z - 1.0));
        let dt = r.scaled(-1.0 / ((z - 1.0) * (z - 1.0)));
        assert!(nahm_defect(&t, &dt) < 1e-14);
        assert_eq!(nahm_defect(&NahmTriple::zeros(2), &NahmTriple::zeros(2)), 0.0);
        // the limit of (1−z)T is −R
        let (cas, clo) = residue_invariants(&r.scaled(-1.0), 1.0);
        assert!(cas < 1e-15 && clo < 1e-15);
    }

    #[test]
    fn reducible_residues_fail_closure() {
        // diag(σ-block, 0) in a 3×3 is reducible: Casimir is not −2·1
        let mut t: [CMat; 3] = std::array::from_fn(|_| CMat::zeros(3, 3));
        for (k, s) in pauli().iter().enumerate() {
            t[k].view_mut((0, 0), (2, 2)).copy_from(&(s * (I * -0.5)));
        }
        let (cas, clo) = residue_invariants(&NahmTriple::new(t), 1.0);
        assert!(clo < 1e-15);
        assert!(cas > 0.5);
    }

    #[test]
    fn charge_one_flow_is_trivial() {
        let a = crate::abelian_data::charge1_curve_for_center([0.2, -0.1, 0.4]);
        let b = crate::abelian_data::bundle_from_doc(crate::abelian_data::charge1_doc(a)).unwrap();
        let ba = BakerAkhiezer::new(&b, 1e-14).unwrap();
        let flow = integrate_flow(&ba, &nodes(), 1e-10).unwrap();
        // Q₀ is the scalar −2c₃, so D is a pure exponential and drops out of T
        for (d, &z) in flow.d.iter().zip(&flow.nodes) {
            assert!((d[(0, 0)] - C64::new(0.4 * z, 0.0).exp()).norm() < 1e-9);
        }
        let t = reconstruct_nahm(&ba, &flow, 0.4).unwrap();
        // a curve centred at c comes from T = −i c
        for (k, want) in [0.2, -0.1, 0.4].iter().enumerate() {
            assert!((t.t[k][(0, 0)] + I * *want).norm() < 1e-12, "{k}: {}", t.t[k][(0, 0)]);
        }
    }

    #[test]
    fn charge_two_flow_is_consistent() {
        let b = bundle();
        let ba = BakerAkhiezer::new(b, 1e-14).unwrap();
        let flow = integrate_flow(&ba, &nodes(), 1e-10).unwrap();
        for (d, c) in flow.d.iter().zip(&flow.c) {
            assert!(max_abs(&(d * c - identity(2))) < 1e-9);
        }
        let rep = nahm_report(&ba, &flow, 0.9).unwrap();
        assert!(rep.all_pass(), "{:#?}", rep.checks);
    }

    #[test]
    fn reconstruction_matches_elliptic_invariants() {
        let b = bundle();
        let ba = BakerAkhiezer::new(b, 1e-14).unwrap();
        let flow = integrate_flow(&ba, &nodes(), 1e-10).unwrap();
        let ex = EllipticNahm::new(0.6);
        for z in [-0.6, 0.1, 0.5] {
            let t = reconstruct_nahm(&ba, &flow, z).unwrap();
            let f = ex.f(z);
            for i in 0..3 {
                let tr = (&t.t[i] * &t.t[i]).trace();
                assert!((tr - C64::new(-f[i] * f[i] / 2.0, 0.0)).norm() < 1e-7, "{z} {i}: {tr}");
            }
        }
    }

    #[test]
    fn halving_tolerance_moves_flow_little() {
        let b = bundle();
        let ba = BakerAkhiezer::new(b, 1e-14).unwrap();
        let tol = 1e-9;
        let a = integrate_flow(&ba, &[0.9], tol).unwrap();
        let c = integrate_flow(&ba, &[0.9], tol / 2.0).unwrap();
        let i = a.nodes.iter().position(|&z| z == 0.9).unwrap();
        assert!(max_abs(&(&a.d[i] - &c.d[i])) < 10.0 * tol);
    }

    #[test]
    fn residues_form_spin_half() {
        let b = bundle();
        let ba = BakerAkhiezer::new(b, 1e-14).unwrap();
        let flow = integrate_flow(&ba, &nodes(), 1e-10).unwrap();
        for side in [1.0, -1.0] {
            let r = residue_check(&flow, &ba, side, 1e-3).unwrap();
            assert!(r.casimir_residual < 1e-3, "{side}: {}", r.casimir_residual);
            assert!(r.closure_residual < 1e-3, "{side}: {}", r.closure_residual);
        }
    }

    #[test]
    fn adjugate_eigenvectors_match_baker_akhiezer_columns() {
        let b = bundle();
        let ba = BakerAkhiezer::new(b, 1e-14).unwrap();
        let flow = integrate_flow(&ba, &nodes(), 1e-10).unwrap();
        let zeta = C64::new(0.35, 0.25);
        let eta = b.curve.etas_over(zeta)[0];
        let p = abel_point(b, &CurvePoint { zeta: Zeta::Finite(zeta), eta, sheet: None }).unwrap();
        let mu = CVec::from_vec(vec![C64::new(1.0, 0.2), C64::new(-0.4, 0.7)]);
        let nu = CVec::from_vec(vec![C64::new(0.3, -0.5), C64::new(0.9, 0.1)]);
        let zs: Vec<f64> = (0..=6).map(|k| -0.3 + 0.1 * k as f64).collect();
        let w = adjoint_eigenvector_flow(|z| reconstruct_nahm(&ba, &flow, z), zeta, eta, &mu, &nu, &zs, &OdeOptions::with_tol(1e-10))
            .unwrap();
        // (d/dz + M) ŵ = 0, checked by central differences around the middle node
        let h = 1e-4;
        let sub = [0.0 - h, 0.0, 0.0 + h];
        let ws = adjoint_eigenvector_flow(|z| reconstruct_nahm(&ba, &flow, z), zeta, eta, &mu, &nu, &sub, &OdeOptions::with_tol(1e-11))
            .unwrap();
        let (_, m) = lax_matrices(&reconstruct_nahm(&ba, &flow, 0.0).unwrap(), zeta);
        let res = (&ws[2] - &ws[0]) / C64::new(2.0 * h, 0.0) + &m * &ws[1];
        assert!(res.norm() < 1e-6 * ws[1].norm(), "{}", res.norm());
        let mut ratio0: Option<C64> = None;
        for (&z, wz) in zs.iter().zip(&w) {
            let phi = ba.ba_at(&p, z).unwrap();
            let v = flow.to_nahm_gauge(&ba, z, &(phi.vec * (phi.common_exp - p.e * z).exp())).unwrap();
            let r = wz[0] / v[0];
            assert!((wz[1] / v[1] - r).norm() < 1e-6 * r.norm());
            let r = r * (-p.e * z).exp();
            if let Some(r0) = ratio0 {
                assert!((r - r0).norm() < 1e-5 * r0.norm(), "{z}: {r} vs {r0}");
            } else {
                ratio0 = Some(r);
            }
        }
    }
}
