//! Higgs and gauge fields from the normalizable Weyl spinors, the boundary
//! antiderivatives that replace the z-integrals, and the Bogomolny check.

use std::collections::HashMap;

use serde::Serialize;
use nalgebra::DMatrix;

use crate::error::{MonopoleError, Result};
use crate::matrix_kit::{commutator, identity, invert, kron, max_abs, polar_unitary, CMat, SpatialPoint, C64, I};
use crate::nahm_flow::NahmTriple;
use crate::par;
use crate::weyl_solver::{assemble_frame, assemble_frame_or_jitter, extract_normalizable, f_matrix, h_matrix, SpectralContext,
    ANTIDERIVATIVE_STANDOFFS,
};

/// `𝒬` is inverted only below this condition number.
pub const Q_COND_CAP: f64 = 1e10;

/// `𝓗`, `𝓕` and `𝒬 = 𝓗𝓕𝓗/r² − 𝓕 = 𝓗[𝓕, 𝓗]/r²` at one `(x, z)`.
#[derive(Debug, Clone)]
pub struct PanagopoulosKernel {
    pub h: CMat,
    pub f: CMat,
    pub q: CMat,
    pub q_inv: CMat,
    pub cond: f64,
}

pub fn q_kernel(x: &SpatialPoint, t: &NahmTriple, z: f64) -> Result<PanagopoulosKernel> {
    let r2 = x.r() * x.r();
    if !(r2 > 0.0) {
        return Err(MonopoleError::QSingular { z });
    }
    let h = h_matrix(x, t.n());
    let f = f_matrix(t);
    let q = &h * &f * &h / C64::new(r2, 0.0) - &f;
    // 𝒬 can cancel to rounding noise, which LU alone would happily invert
    if max_abs(&q) <= 1e-12 * max_abs(&f) {
        return Err(MonopoleError::QSingular { z });
    }
    let inv = invert(&q).map_err(|_| MonopoleError::QSingular { z })?;
    if inv.cond > Q_COND_CAP {
        return Err(MonopoleError::QSingular { z });
    }
    Ok(PanagopoulosKernel { h, f, q, q_inv: inv.inv, cond: inv.cond })
}

/// Residual of `d𝒬⁻¹/dz − (𝓗+𝓕)𝒬⁻¹ − 𝒬⁻¹(𝓗+𝓕) − 1`, with `d𝒬⁻¹/dz`
/// obtained from the supplied `dT/dz`. The identity holds for every `x`
/// exactly when `T` solves Nahm's equation.
pub fn panrel_residual(x: &SpatialPoint, t: &NahmTriple, dt: &NahmTriple) -> Result<f64> {
    let k = q_kernel(x, t, f64::NAN)?;
    let r2 = x.r() * x.r();
    let df = f_matrix(dt);
    let dq = &k.h * &df * &k.h / C64::new(r2, 0.0) - &df;
    let dqinv = -(&k.q_inv * dq * &k.q_inv);
    let hf = &k.h + &k.f;
    let lhs = dqinv - &hf * &k.q_inv - &k.q_inv * &hf;
    Ok(max_abs(&(lhs - identity(2 * t.n()))))
}

/// Orthonormal regular pair at a point, on every grid sample.
#[derive(Debug, Clone)]
pub struct Pair {
    pub x: SpatialPoint,
    pub jittered: bool,
    pub spinors: Vec<CMat>,
}

pub fn normalizable_pair(ctx: &SpectralContext, x: &SpatialPoint) -> Result<Pair> {
    let frame = assemble_frame_or_jitter(ctx, x)?;
    let nz = extract_normalizable(ctx, &frame)?;
    Ok(Pair { x: frame.x(), jittered: frame.jittered, spinors: nz.spinors })
}

/// `∫ a† b dz` by Gauss–Legendre.
pub fn overlap(ctx: &SpectralContext, a: &[CMat], b: &[CMat]) -> CMat {
    let mut m = CMat::zeros(a[0].ncols(), b[0].ncols());
    for (k, &w) in ctx.grid.weights.iter().enumerate() {
        let i = ctx.grid.node(k);
        m += a[i].adjoint() * &b[i] * C64::new(w, 0.0);
    }
    m
}

/// Re-expresses `pair` in the orthonormal basis closest to `reference`.
pub fn align(ctx: &SpectralContext, pair: &[CMat], reference: &[CMat]) -> Result<Vec<CMat>> {
    let u = polar_unitary(&overlap(ctx, pair, reference))?;
    Ok(pair.iter().map(|v| v * &u).collect())
}

/// Smallest-to-largest singular value ratio of `∫v†E dz` below which the
/// canonical gauge is considered undefined.
const CANONICAL_GAUGE_FLOOR: f64 = 1e-6;

/// Re-expresses `pair` in the orthonormal basis closest to the constant
/// reference `E = 1₂ ⊗ e₁`, which makes `∫E†v dz` Hermitian positive. `None`
/// where that overlap is nearly singular and the gauge is not determined.
pub fn canonical_gauge(ctx: &SpectralContext, pair: &[CMat]) -> Option<Vec<CMat>> {
    let n = pair[0].nrows() / 2;
    let mut e1 = CMat::zeros(n, 1);
    e1[(0, 0)] = C64::new(1.0, 0.0);
    let reference = vec![kron(&identity(2), &e1); pair.len()];
    let m = overlap(ctx, pair, &reference);
    let sv = m.singular_values();
    if !(sv.min() > CANONICAL_GAUGE_FLOOR * sv.max()) {
        return None;
    }
    align(ctx, pair, &reference).ok()
}

/// `Φ = i∫ z v†v dz`.
pub fn higgs_quadrature(ctx: &SpectralContext, v: &[CMat]) -> CMat {
    let mut m = CMat::zeros(2, 2);
    for (k, &w) in ctx.grid.weights.iter().enumerate() {
        let i = ctx.grid.node(k);
        m += v[i].adjoint() * &v[i] * C64::new(w * ctx.grid.nodes[k], 0.0);
    }
    m * I
}

/// `|Φ| = √(−½ tr Φ²)`.
pub fn phi_norm(phi: &CMat) -> f64 {
    (-0.5 * (phi * phi).trace().re).max(0.0).sqrt()
}

/// Least-squares fit of `c₀ + c₂ε² + … + c₅ε⁵` to boundary samples; returns
/// the weights giving `c₀`. There is no linear term: the antiderivatives have
/// integrands vanishing at `z = ±1`.
fn extrapolation_weights() -> [f64; ANTIDERIVATIVE_STANDOFFS.len()] {
    const POWERS: [i32; 5] = [0, 2, 3, 4, 5];
    let m = ANTIDERIVATIVE_STANDOFFS.len();
    let a = DMatrix::from_fn(m, POWERS.len(), |i, j| ANTIDERIVATIVE_STANDOFFS[i].powi(POWERS[j]));
    let pinv = (a.transpose() * &a).try_inverse().expect("standoffs are distinct") * a.transpose();
    std::array::from_fn(|i| pinv[(0, i)])
}

/// `[·]_{−1}^{1}` extrapolated from the samples at `±(1 − ε)`.
fn boundary_difference(ctx: &SpectralContext, term: impl Fn(usize) -> Result<CMat>) -> Result<CMat> {
    let w = extrapolation_weights();
    let mut acc: Option<CMat> = None;
    for (eps, wi) in ANTIDERIVATIVE_STANDOFFS.iter().zip(w) {
        let r = (term(ctx.grid.standoff(1.0, *eps))? - term(ctx.grid.standoff(-1.0, *eps))?) * C64::new(wi, 0.0);
        acc = Some(match acc {
            Some(a) => a + r,
            None => r,
        });
    }
    Ok(acc.expect("standoffs are nonempty"))
}

/// Spinors and their Cartesian gradient, all in one smooth gauge.
pub struct SpinorJet<'s> {
    pub x: SpatialPoint,
    pub v: &'s [CMat],
    pub grad: &'s [Vec<CMat>; 3],
}

/// Boundary-antiderivative values of the normalisation, Higgs and gauge
/// integrals.
#[derive(Debug, Clone)]
pub struct BoundaryIntegrals {
    pub norm: CMat,
    pub higgs: CMat,
    pub gauge: [CMat; 3],
    pub max_q_cond: f64,
}

pub fn boundary_integrals(ctx: &SpectralContext, jet: &SpinorJet) -> Result<BoundaryIntegrals> {
    let x = jet.x;
    let r2 = x.r() * x.r();
    let xa = x.arr();
    let mut max_q_cond: f64 = 0.0;
    let mut kernels: HashMap<usize, PanagopoulosKernel> = HashMap::new();
    for side in [-1.0, 1.0] {
        for eps in ANTIDERIVATIVE_STANDOFFS {
            let i = ctx.grid.standoff(side, eps);
            let kern = q_kernel(&x, &ctx.nahm[i], ctx.grid.all[i])?;
            max_q_cond = max_q_cond.max(kern.cond);
            kernels.insert(i, kern);
        }
    }
    let kern = |i: usize| &kernels[&i];
    let norm = boundary_difference(ctx, |i| Ok(jet.v[i].adjoint() * &kern(i).q_inv * &jet.v[i]))?;
    let higgs = boundary_difference(ctx, |i| {
        let z = ctx.grid.all[i];
        let k = kern(i);
        // d/dr² = (x·∇)/(2r²)
        let mut dr2 = CMat::zeros(jet.v[i].nrows(), 2);
        for a in 0..3 {
            dr2 += &jet.grad[a][i] * C64::new(xa[a] / (2.0 * r2), 0.0);
        }
        let inner = &jet.v[i] * C64::new(z, 0.0) - &k.h * dr2 * C64::new(2.0, 0.0);
        Ok(jet.v[i].adjoint() * &k.q_inv * inner * I)
    })?;
    let mut gauge: [CMat; 3] = std::array::from_fn(|_| CMat::zeros(2, 2));
    for (a, g) in gauge.iter_mut().enumerate() {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        *g = boundary_difference(ctx, |i| {
            let z = ctx.grid.all[i];
            let k = kern(i);
            // (x × ∇)_a v
            let rot = &jet.grad[c][i] * C64::new(xa[b], 0.0) - &jet.grad[b][i] * C64::new(xa[c], 0.0);
            let tail = (&jet.v[i] * C64::new(z * xa[a], 0.0) - rot * I) / C64::new(r2, 0.0);
            let inner = &jet.grad[a][i] - &k.h * tail;
            Ok(jet.v[i].adjoint() * &k.q_inv * inner)
        })?;
    }
    Ok(BoundaryIntegrals { norm, higgs, gauge, max_q_cond })
}

impl BoundaryIntegrals {
    /// Max entry deviation from the quadrature values for an orthonormal
    /// pair (whose Gram matrix is the identity).
    pub fn deviation(&self, higgs: &CMat, gauge: &[CMat; 3]) -> f64 {
        let mut dev = max_abs(&(&self.norm - identity(2))).max(max_abs(&(&self.higgs - higgs)));
        for i in 0..3 {
            dev = dev.max(max_abs(&(&self.gauge[i] - &gauge[i])));
        }
        dev
    }
}

/// Offsets of stencil points in units of the FD step.
type Key = [i32; 3];

fn e(i: usize, s: i32) -> Key {
    let mut k = [0; 3];
    k[i] = s;
    k
}

fn add(a: Key, b: Key) -> Key {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn stencil_keys() -> Vec<Key> {
    let mut keys = vec![[0, 0, 0]];
    for s in [1, 2] {
        for i in 0..3 {
            keys.push(e(i, s));
            keys.push(e(i, -s));
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            for sj in [s, -s] {
                for sk in [s, -s] {
                    keys.push(add(e(j, sj), e(k, sk)));
                }
            }
        }
    }
    keys.sort();
    keys.dedup();
    keys
}

/// Sign relating `D_iΦ` to `F_jk` (cyclic `ijk`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BogomolnyBranch {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldDiagnostics {
    /// The stencil was shifted off a degenerate root configuration.
    pub jittered: bool,
    pub branch: BogomolnyBranch,
    pub gauge: GaugeChoice,
    /// Residual of the opposite branch.
    pub other_branch_residual: f64,
    /// Residual of `D_iΦ = ±Σ_jk ε_ijk F_jk` taken without the ½.
    pub unhalved_residual: f64,
    /// Max deviation of the boundary antiderivatives from quadrature; `None`
    /// when `𝒬` is too ill-conditioned at the boundary samples.
    pub boundary_vs_quadrature: Option<f64>,
    pub max_q_cond: Option<f64>,
    pub fd_step: f64,
}

#[derive(Debug, Clone)]
pub struct FieldSample {
    pub x: SpatialPoint,
    pub phi: CMat,
    pub a: [CMat; 3],
    pub phi_norm: f64,
    pub bogomolny_residual: f64,
    pub diagnostics: FieldDiagnostics,
}

/// How the `U(2)` freedom of the pairs on a stencil was fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeChoice {
    /// Every pair in the canonical gauge: `A_i` is a smooth field.
    Canonical,
    /// Every pair aligned to the centre pair: `A_i` vanishes at the centre
    /// to `O(h²)`; covariant quantities are unaffected.
    CentreAligned,
}

/// Orthonormal pairs on the finite-difference stencil `x + h·k`, with `k`
/// running over axis and face-diagonal offsets at steps `h` and `2h`.
pub struct Stencil<'c, 'a> {
    ctx: &'c SpectralContext<'a>,
    pub center: SpatialPoint,
    pub h: f64,
    pub jittered: bool,
    pub gauge: GaugeChoice,
    basis: HashMap<Key, Vec<CMat>>,
}

impl<'c, 'a> Stencil<'c, 'a> {
    pub fn new(ctx: &'c SpectralContext<'a>, x: &SpatialPoint) -> Result<Self> {
        let h = ctx.config.fd_step * x.r().max(1.0);
        let keys = stencil_keys();
        let build = |shift: [f64; 3]| -> Result<HashMap<Key, Vec<CMat>>> {
            let pts: Vec<(Key, SpatialPoint)> = keys
                .iter()
                .map(|k| {
                    let d = [shift[0] + h * k[0] as f64, shift[1] + h * k[1] as f64, shift[2] + h * k[2] as f64];
                    (*k, x.offset(d))
                })
                .collect();
            let pairs = par::map(&pts, |(_, p)| -> Result<Vec<CMat>> {
                let frame = assemble_frame(ctx, p)?;
                Ok(extract_normalizable(ctx, &frame)?.spinors)
            });
            let mut out = HashMap::new();
            for ((k, _), p) in pts.iter().zip(pairs) {
                out.insert(*k, p?);
            }
            Ok(out)
        };
        // a degenerate root configuration anywhere on the stencil shifts the whole stencil
        let j = 1e-6 * x.r().max(1.0) / 3f64.sqrt();
        let (raw, shift, jittered) = match build([0.0; 3]) {
            Ok(m) => (m, [0.0; 3], false),
            Err(MonopoleError::RankDeficientW { .. })
        | Err(MonopoleError::DegenerateConstraint)
        | Err(MonopoleError::PathCrossesBranchPoint { .. }) => {
                (build([j, -j, j])?, [j, -j, j], true)
            }
            Err(err) => return Err(err),
        };
        let canonical: Option<HashMap<Key, Vec<CMat>>> =
            raw.iter().map(|(k, p)| canonical_gauge(ctx, p).map(|b| (*k, b))).collect();
        let (basis, gauge) = match canonical {
            Some(b) => (b, GaugeChoice::Canonical),
            None => {
                // fall back to the basis closest to the centre pair at every point
                let reference = raw[&[0, 0, 0]].clone();
                let mut basis = HashMap::new();
                for (k, p) in raw {
                    let b = if k == [0, 0, 0] { p } else { align(ctx, &p, &reference)? };
                    basis.insert(k, b);
                }
                (basis, GaugeChoice::CentreAligned)
            }
        };
        Ok(Stencil { ctx, center: x.offset(shift), h, jittered, gauge, basis })
    }

    pub fn spinors(&self) -> &[CMat] {
        &self.basis[&[0, 0, 0]]
    }

    /// Central difference along `x_i` at stencil point `k`, step `s·h`.
    fn diff(&self, k: Key, i: usize, s: i32) -> Vec<CMat> {
        let p = &self.basis[&add(k, e(i, s))];
        let m = &self.basis[&add(k, e(i, -s))];
        let inv = C64::new(1.0 / (2.0 * s as f64 * self.h), 0.0);
        p.iter().zip(m).map(|(a, b)| (a - b) * inv).collect()
    }

    /// `A_i = ∫ v†∂_i v dz` at stencil point `k`, step `s·h`.
    fn gauge(&self, k: Key, i: usize, s: i32) -> CMat {
        overlap(self.ctx, &self.basis[&k], &self.diff(k, i, s))
    }

    fn phi(&self, k: Key) -> CMat {
        higgs_quadrature(self.ctx, &self.basis[&k])
    }

    pub fn higgs(&self) -> CMat {
        self.phi([0, 0, 0])
    }

    /// `A_i` at the centre, one Richardson level.
    pub fn gauge_field(&self) -> [CMat; 3] {
        std::array::from_fn(|i| {
            (self.gauge([0, 0, 0], i, 1) * C64::new(4.0, 0.0) - self.gauge([0, 0, 0], i, 2)) / C64::new(3.0, 0.0)
        })
    }

    /// `∂_i v` at the centre on every grid sample, one Richardson level.
    pub fn gradient(&self) -> [Vec<CMat>; 3] {
        std::array::from_fn(|i| {
            let d1 = self.diff([0, 0, 0], i, 1);
            let d2 = self.diff([0, 0, 0], i, 2);
            d1.iter().zip(&d2).map(|(p, q)| (p * C64::new(4.0, 0.0) - q) / C64::new(3.0, 0.0)).collect()
        })
    }

    /// `D_iΦ − sign·factor·F_jk` (cyclic `ijk`) at step `s·h`.
    fn bogomolny_defect(&self, s: i32, sign: f64, factor: f64) -> [CMat; 3] {
        let o = [0, 0, 0];
        let phi0 = self.phi(o);
        let hs = C64::new(1.0 / (2.0 * s as f64 * self.h), 0.0);
        std::array::from_fn(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let dphi = (self.phi(e(i, s)) - self.phi(e(i, -s))) * hs + commutator(&self.gauge(o, i, s), &phi0);
            let djak = (self.gauge(e(j, s), k, s) - self.gauge(e(j, -s), k, s)) * hs;
            let dkaj = (self.gauge(e(k, s), j, s) - self.gauge(e(k, -s), j, s)) * hs;
            let fjk = djak - dkaj + commutator(&self.gauge(o, j, s), &self.gauge(o, k, s));
            dphi - fjk * C64::new(sign * factor, 0.0)
        })
    }

    /// Max over `i` of the Frobenius norm of the Richardson-extrapolated
    /// defect of `D_iΦ = sign·factor·F_jk`.
    pub fn bogomolny_residual(&self, sign: f64, factor: f64) -> f64 {
        let x1 = self.bogomolny_defect(1, sign, factor);
        let x2 = self.bogomolny_defect(2, sign, factor);
        (0..3).map(|i| ((&x1[i] * C64::new(4.0, 0.0) - &x2[i]) / C64::new(3.0, 0.0)).norm()).fold(0.0, f64::max)
    }

    pub fn boundary_integrals(&self) -> Result<BoundaryIntegrals> {
        let grad = self.gradient();
        boundary_integrals(self.ctx, &SpinorJet { x: self.center, v: self.spinors(), grad: &grad })
    }
}

/// All fields at `x` with the Bogomolny residual and diagnostics.
pub fn field_sample(ctx: &SpectralContext, x: &SpatialPoint) -> Result<FieldSample> {
    let st = Stencil::new(ctx, x)?;
    let plus = st.bogomolny_residual(1.0, 1.0);
    let minus = st.bogomolny_residual(-1.0, 1.0);
    let (branch, bog, other) =
        if plus <= minus { (BogomolnyBranch::Plus, plus, minus) } else { (BogomolnyBranch::Minus, minus, plus) };
    let sign = if branch == BogomolnyBranch::Plus { 1.0 } else { -1.0 };
    let unhalved = st.bogomolny_residual(sign, 2.0);
    let phi = st.higgs();
    let a = st.gauge_field();
    let (bvq, qcond) = match st.boundary_integrals() {
        Ok(b) => (Some(b.deviation(&phi, &a)), Some(b.max_q_cond)),
        Err(MonopoleError::QSingular { .. }) => (None, None),
        Err(err) => return Err(err),
    };
    let pn = phi_norm(&phi);
    Ok(FieldSample {
        x: *x,
        phi,
        a,
        phi_norm: pn,
        bogomolny_residual: bog,
        diagnostics: FieldDiagnostics {
            jittered: st.jittered,
            branch,
            gauge: st.gauge,
            other_branch_residual: other,
            unhalved_residual: unhalved,
            boundary_vs_quadrature: bvq,
            max_q_cond: qcond,
            fd_step: st.h,
        },
    })
}

/// `|Φ|` alone: one pair, no stencil.
pub fn phi_norm_at(ctx: &SpectralContext, x: &SpatialPoint) -> Result<f64> {
    let p = normalizable_pair(ctx, x)?;
    Ok(phi_norm(&higgs_quadrature(ctx, &p.spinors)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abelian_data::{bundle_from_doc, charge1_curve_for_center, charge1_doc};
    use crate::config::RunConfig;
    use crate::reference_oracles::{charge1_fields, charge2_bundle, charge2_phi_norm, DirectOptions, EllipticNahm};

    fn cfg() -> RunConfig {
        RunConfig { z_nodes: 96, ..RunConfig::default() }
    }

    #[test]
    fn kernel_degenerate_cases_are_reported() {
        let t = NahmTriple::scalar([0.0, 0.0, 0.7]);
        assert!(matches!(q_kernel(&SpatialPoint::new(0.0, 0.0, 1.3), &t, 0.0), Err(MonopoleError::QSingular { .. })));
        assert!(matches!(q_kernel(&SpatialPoint::new(0.2, 0.0, 1.0), &NahmTriple::zeros(2), 0.0), Err(MonopoleError::QSingular { .. })));
        assert!(matches!(q_kernel(&SpatialPoint::new(0.0, 0.0, 0.0), &t, 0.0), Err(MonopoleError::QSingular { .. })));
    }

    #[test]
    fn kernel_is_hermitian_and_h_squares_to_r2() {
        let t = EllipticNahm::new(0.6).at(0.3);
        let x = SpatialPoint::new(0.4, -1.2, 0.7);
        let k = q_kernel(&x, &t, 0.3).unwrap();
        assert!(max_abs(&(&k.q - k.q.adjoint())) < 1e-12 * max_abs(&k.q));
        assert!(max_abs(&(&k.h * &k.h - identity(4) * C64::new(x.r() * x.r(), 0.0))) < 1e-13);
    }

    #[test]
    fn kernel_identity_holds_exactly_for_nahm_data() {
        let t = EllipticNahm::new(0.6);
        for (z, x) in [(0.0, [0.4, 0.3, 1.1]), (0.35, [-2.0, 0.5, 0.1]), (-0.6, [0.3, 0.3, -0.3])] {
            let res = panrel_residual(&SpatialPoint::from_array(x), &t.at(z), &t.derivative(z)).unwrap();
            assert!(res < 1e-9, "z={z}: {res}");
        }
        // constant charge-one data solve Nahm's equation trivially
        let c = NahmTriple::scalar([0.1, -0.2, 0.3]);
        assert!(panrel_residual(&SpatialPoint::new(0.5, 0.2, -0.4), &c, &NahmTriple::zeros(1)).unwrap() < 1e-12);
    }

    #[test]
    fn kernel_identity_on_reconstructed_data_and_negative_control() {
        let b = charge2_bundle().unwrap();
        let ctx = SpectralContext::new(&b, &cfg()).unwrap();
        let h = 1e-4;
        let (tp, tm, t0) = (ctx.nahm_at(h).unwrap(), ctx.nahm_at(-h).unwrap(), ctx.nahm_at(0.0).unwrap());
        let dt = NahmTriple::new(std::array::from_fn(|i| (&tp.t[i] - &tm.t[i]) / C64::new(2.0 * h, 0.0)));
        let x = SpatialPoint::new(0.4, 0.3, 1.1);
        let clean = panrel_residual(&x, &t0, &dt).unwrap();
        assert!(clean < 1e-7, "{clean}");
        // violating Nahm's equation degrades the identity in proportion
        let kick = |eps: f64| {
            let mut bad = dt.clone();
            bad.t[0] += &t0.t[1] * C64::new(eps, 0.0);
            panrel_residual(&x, &t0, &bad).unwrap()
        };
        let (r1, r2) = (kick(1e-3), kick(2e-3));
        assert!(r1 > 1e3 * clean);
        assert!((r2 / r1 - 2.0).abs() < 0.05, "{r1} {r2}");
    }

    #[test]
    fn boundary_antiderivatives_equal_quadrature() {
        let b = charge2_bundle().unwrap();
        let ctx = SpectralContext::new(&b, &RunConfig { tol_theta: 1e-14, tol_ode: 1e-12, ..cfg() }).unwrap();
        for x in [SpatialPoint::new(0.4, 0.3, 1.1), SpatialPoint::new(0.0, 0.0, 1.5)] {
            let st = Stencil::new(&ctx, &x).unwrap();
            let bi = st.boundary_integrals().unwrap();
            let dev = bi.deviation(&st.higgs(), &st.gauge_field());
            assert!(dev < 1e-5, "{x:?}: {dev}");
        }
    }

    #[test]
    fn charge_one_fields_match_direct_solver() {
        let c = [0.1, -0.2, 0.15];
        let b = bundle_from_doc(charge1_doc(charge1_curve_for_center(c))).unwrap();
        let ctx = SpectralContext::new(&b, &cfg()).unwrap();
        for x in [SpatialPoint::new(0.4, 0.7, -0.3), SpatialPoint::new(1.5, -2.0, 1.0)] {
            let got = field_sample(&ctx, &x).unwrap();
            let want = charge1_fields(c, &x, &DirectOptions::default()).unwrap();
            assert_eq!(got.diagnostics.gauge, GaugeChoice::Canonical);
            assert!((got.phi_norm - want.phi_norm).abs() < 1e-8);
            assert!(max_abs(&(&got.phi - &want.phi)) < 1e-6);
            for i in 0..3 {
                assert!(max_abs(&(&got.a[i] - &want.a[i])) < 1e-5, "A_{i}");
            }
            assert!(got.bogomolny_residual < 1e-5, "{}", got.bogomolny_residual);
        }
    }

    #[test]
    fn charge_two_higgs_matches_direct_solver() {
        let b = charge2_bundle().unwrap();
        let ctx = SpectralContext::new(&b, &cfg()).unwrap();
        let opts = DirectOptions::default();
        for x in [SpatialPoint::new(-1.3, 0.8, 0.2), SpatialPoint::new(0.0, 0.0, 2.0), SpatialPoint::new(2.0, 0.0, 0.0)] {
            let a = phi_norm_at(&ctx, &x).unwrap();
            let o = charge2_phi_norm(0.6, &x, &opts).unwrap();
            assert!((a - o).abs() < 1e-8, "{x:?}: {a} vs {o}");
        }
    }

    #[test]
    fn charge_two_sample_solves_bogomolny() {
        let b = charge2_bundle().unwrap();
        let ctx = SpectralContext::new(&b, &cfg()).unwrap();
        let s = field_sample(&ctx, &SpatialPoint::new(0.4, 0.3, 1.1)).unwrap();
        assert!(s.bogomolny_residual < 1e-5, "{}", s.bogomolny_residual);
        assert!(s.diagnostics.other_branch_residual > 1e3 * s.bogomolny_residual);
        assert!(max_abs(&(&s.phi + s.phi.adjoint())) < 1e-10);
        assert!(s.diagnostics.boundary_vs_quadrature.is_some());
    }

    #[test]
    fn constant_rotation_conjugates_the_fields() {
        let b = charge2_bundle().unwrap();
        let ctx = SpectralContext::new(&b, &cfg()).unwrap();
        let p = normalizable_pair(&ctx, &SpatialPoint::new(0.4, 0.3, 1.1)).unwrap();
        let u = polar_unitary(&CMat::from_row_slice(2, 2, &[C64::new(0.3, 0.4), C64::new(1.0, -0.2), C64::new(-0.5, 0.1), C64::new(0.2, 0.9)])).unwrap();
        let rotated: Vec<CMat> = p.spinors.iter().map(|v| v * &u).collect();
        let (phi, phi_r) = (higgs_quadrature(&ctx, &p.spinors), higgs_quadrature(&ctx, &rotated));
        assert!(max_abs(&(u.adjoint() * &phi * &u - &phi_r)) < 1e-12);
        assert!((phi_norm(&phi) - phi_norm(&phi_r)).abs() < 1e-12);
    }
}
