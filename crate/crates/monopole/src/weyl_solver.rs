//! Fundamental solutions of the Weyl equations at a spatial point.
//!
//! Columns of `W` solve `w' = (−𝓗 + 𝓕)w` with `𝓗 = x·σ⊗1ₙ`, `𝓕 = iσ⊗T`;
//! columns of `V = (W†)⁻¹` then solve `v' = (𝓗 − 𝓕)v`. Two combinations of
//! the `V` columns are regular at both ends of the interval.

use crate::abelian_data::AbelianBundle;
use crate::baker_akhiezer::{abel_point, AbelPoint, BakerAkhiezer};
use crate::config::RunConfig;
use crate::error::{MonopoleError, Result};
use crate::matrix_kit::{
    identity, inv_sqrt_hpd, invert, kron, max_abs, null_space, pauli, pauli_dot_real, hermitian_eig, CMat, CVec,
    SpatialPoint, C64, I,
};
use crate::nahm_flow::{integrate_flow, reconstruct_nahm, FlowState, NahmTriple};
use crate::quadrature::gauss_legendre;
use crate::spectral_curve::{atiyah_ward_roots, u_hat, CurvePoint, Zeta};

/// Beyond this condition number `W` is treated as rank deficient.
const W_COND_CAP: f64 = 1e13;
/// Endpoint exponents below this are singular (regular ones are ≥ 0).
const SINGULAR_EXPONENT: f64 = -0.25;

/// Offsets `k` of the samples `±(1 − kδ)` used for extraction.
const BOUNDARY_STEPS: [f64; 3] = [1.0, 2.0, 4.0];

/// Fixed standoffs `ε` of the samples `±(1 − ε)` at which the boundary
/// antiderivatives are evaluated. Closer to the poles the nearly singular `𝒬`
/// amplifies the error of the reconstructed Nahm data.
pub const ANTIDERIVATIVE_STANDOFFS: [f64; 6] = [0.008, 0.01, 0.012, 0.016, 0.02, 0.03];

/// Gauss–Legendre nodes plus the samples `±(1 − kδ)` and `±(1 − ε)`.
#[derive(Debug, Clone)]
pub struct ZGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub delta: f64,
    /// Every sample, ascending.
    pub all: Vec<f64>,
    node_index: Vec<usize>,
}

impl ZGrid {
    pub fn new(n: usize, delta: f64) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        let mut all = nodes.clone();
        for side in [-1.0, 1.0] {
            for k in BOUNDARY_STEPS {
                all.push(side * (1.0 - k * delta));
            }
            for eps in ANTIDERIVATIVE_STANDOFFS {
                all.push(side * (1.0 - eps));
            }
        }
        all.sort_by(f64::total_cmp);
        all.dedup();
        let node_index = nodes.iter().map(|z| all.iter().position(|a| a == z).expect("node present")).collect();
        ZGrid { nodes, weights, delta, all, node_index }
    }

    /// Index into `all` of the `i`-th quadrature node.
    pub fn node(&self, i: usize) -> usize {
        self.node_index[i]
    }

    /// Index into `all` of `side·(1 − kδ)`.
    pub fn boundary(&self, side: f64, k: f64) -> usize {
        self.standoff(side, k * self.delta)
    }

    /// Index into `all` of `side·(1 − ε)`.
    pub fn standoff(&self, side: f64, eps: f64) -> usize {
        let z = side * (1.0 - eps);
        self.all.iter().position(|&a| a == z).expect("boundary sample present")
    }
}

/// `𝓗 = x·σ ⊗ 1ₙ`.
pub fn h_matrix(x: &SpatialPoint, n: usize) -> CMat {
    kron(&pauli_dot_real(x.arr()), &identity(n))
}

/// `𝓕 = Σ iσ_j ⊗ T_j`, Hermitian for anti-Hermitian `T`.
pub fn f_matrix(t: &NahmTriple) -> CMat {
    let s = pauli();
    let n = t.n();
    let mut f = CMat::zeros(2 * n, 2 * n);
    for j in 0..3 {
        f += kron(&(&s[j] * I), &t.t[j]);
    }
    f
}

/// Generator of `v' = (𝓗 − 𝓕)v`, the equation `Δ†v = 0`.
pub fn weyl_generator(x: &SpatialPoint, t: &NahmTriple) -> CMat {
    h_matrix(x, t.n()) - f_matrix(t)
}

/// Everything z-dependent that does not depend on `x`, tabulated once per
/// bundle on the grid: `G·C(z)` and the Nahm matrices.
pub struct SpectralContext<'a> {
    pub ba: BakerAkhiezer<'a>,
    pub flow: FlowState,
    pub grid: ZGrid,
    pub gc: Vec<CMat>,
    pub nahm: Vec<NahmTriple>,
    pub config: RunConfig,
}

impl<'a> SpectralContext<'a> {
    pub fn new(bundle: &'a AbelianBundle, config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let ba = BakerAkhiezer::new(bundle, config.tol_theta)?;
        let grid = ZGrid::new(config.z_nodes, config.delta);
        let flow = integrate_flow(&ba, &grid.all, config.tol_ode)?;
        let mut gc = Vec::with_capacity(grid.all.len());
        let mut nahm = Vec::with_capacity(grid.all.len());
        for &z in &grid.all {
            let (_, c) = flow.dc_at(&ba, z)?;
            gc.push(&flow.gauge * c);
            nahm.push(reconstruct_nahm(&ba, &flow, z)?);
        }
        Ok(SpectralContext { ba, flow, grid, gc, nahm, config: *config })
    }

    pub fn n(&self) -> usize {
        self.ba.n()
    }

    /// `G·C(z)` at an arbitrary `z`, tabulated value when `z` is a sample.
    pub fn gc_at(&self, z: f64) -> Result<CMat> {
        if let Ok(i) = self.grid.all.binary_search_by(|a| a.total_cmp(&z)) {
            return Ok(self.gc[i].clone());
        }
        let (_, c) = self.flow.dc_at(&self.ba, z)?;
        Ok(&self.flow.gauge * c)
    }

    pub fn nahm_at(&self, z: f64) -> Result<NahmTriple> {
        if let Ok(i) = self.grid.all.binary_search_by(|a| a.total_cmp(&z)) {
            return Ok(self.nahm[i].clone());
        }
        reconstruct_nahm(&self.ba, &self.flow, z)
    }
}

/// `+1` eigenvector of `û·σ`, built from whichever form is better conditioned.
pub fn spinor(u: [f64; 3]) -> CVec {
    let s = if u[2] >= 0.0 {
        CVec::from_vec(vec![C64::new(1.0 + u[2], 0.0), C64::new(u[0], u[1])])
    } else {
        CVec::from_vec(vec![C64::new(u[0], -u[1]), C64::new(1.0 - u[2], 0.0)])
    };
    let nrm = s.norm();
    s / C64::new(nrm, 0.0)
}

/// Column data that do not depend on `z`: the Atiyah–Ward points, their
/// abelian integrals, spinors and a fixed scale for each column.
#[derive(Debug, Clone)]
pub struct FrameColumns {
    pub x: SpatialPoint,
    pub points: Vec<CurvePoint>,
    abel: Vec<AbelPoint>,
    spinors: Vec<CVec>,
    scale: Vec<f64>,
}

impl FrameColumns {
    pub fn new(ctx: &SpectralContext, x: &SpatialPoint) -> Result<Self> {
        let n = ctx.n();
        let roots = atiyah_ward_roots(&ctx.ba.bundle.curve, x, 1e-12)?;
        if roots.coincident {
            return Err(MonopoleError::RankDeficientW { cond: f64::INFINITY });
        }
        let mut abel = Vec::with_capacity(2 * n);
        let mut spinors = Vec::with_capacity(2 * n);
        for p in &roots.points {
            if matches!(p.zeta, Zeta::Infinity) {
                return Err(MonopoleError::RankDeficientW { cond: f64::INFINITY });
            }
            abel.push(abel_point(ctx.ba.bundle, p)?);
            spinors.push(spinor(u_hat(p.zeta)));
        }
        let mut cols = FrameColumns { x: *x, points: roots.points, abel, spinors, scale: vec![1.0; 2 * n] };
        let g0 = ctx.gc_at(0.0)?;
        for k in 0..2 * n {
            let w = cols.column(ctx, k, 0.0, &g0)?;
            cols.scale[k] = 1.0 / w.norm();
        }
        Ok(cols)
    }

    /// `w_k(z) = 2s_k ⊗ G C(z) Φ(P_k, z) · e^{−z(i(x₁−ix₂)ζ_k + x₃)}`, with a
    /// z-independent normalisation.
    fn column(&self, ctx: &SpectralContext, k: usize, z: f64, gc: &CMat) -> Result<CVec> {
        let p = &self.abel[k];
        let b = ctx.ba.ba_at(p, z)?;
        let f = gc * &b.vec;
        let x = &self.x;
        let expo = b.common_exp - C64::new(z, 0.0) * (I * C64::new(x.x1, -x.x2) * p.zeta + x.x3);
        let s2 = &self.spinors[k] * C64::new(2.0, 0.0);
        let col = kron(&CMat::from_column_slice(2, 1, s2.as_slice()), &CMat::from_column_slice(f.len(), 1, f.as_slice()));
        Ok(CVec::from_column_slice(col.as_slice()) * (expo.exp() * self.scale[k]))
    }

    pub fn w_at(&self, ctx: &SpectralContext, z: f64) -> Result<CMat> {
        let gc = ctx.gc_at(z)?;
        self.w_with(ctx, z, &gc)
    }

    fn w_with(&self, ctx: &SpectralContext, z: f64, gc: &CMat) -> Result<CMat> {
        let m = self.abel.len();
        let mut w = CMat::zeros(m, m);
        for k in 0..m {
            w.set_column(k, &self.column(ctx, k, z, gc)?);
        }
        Ok(w)
    }

    /// Rescales column `k`; the extracted subspace must not notice.
    pub fn rescale(&mut self, k: usize, s: f64) {
        self.scale[k] *= s;
    }
}

/// `V = (W†)⁻¹` with the condition number of the column-equilibrated `W`.
/// The columns grow at different exponential rates in `r`, so the raw
/// condition number mostly measures their scale disparity.
pub fn dual_frame(w: &CMat) -> Result<(CMat, f64)> {
    let s: Vec<f64> = (0..w.ncols()).map(|k| 1.0 / w.column(k).norm().max(f64::MIN_POSITIVE)).collect();
    let mut scaled = w.adjoint();
    for (k, &sk) in s.iter().enumerate() {
        scaled.row_mut(k).scale_mut(sk);
    }
    let inv = invert(&scaled).map_err(|e| match e {
        MonopoleError::SingularMatrix { cond } => MonopoleError::RankDeficientW { cond },
        other => other,
    })?;
    if inv.cond > W_COND_CAP {
        return Err(MonopoleError::RankDeficientW { cond: inv.cond });
    }
    let mut v = inv.inv;
    for (k, &sk) in s.iter().enumerate() {
        v.column_mut(k).scale_mut(sk);
    }
    Ok((v, inv.cond))
}

/// `W` and `V` on every grid sample.
#[derive(Debug, Clone)]
pub struct WeylFrame {
    pub columns: FrameColumns,
    /// Point originally requested; differs from `columns.x` after a jitter.
    pub requested: SpatialPoint,
    pub jittered: bool,
    pub w: Vec<CMat>,
    pub v: Vec<CMat>,
    pub max_cond: f64,
}

impl WeylFrame {
    pub fn x(&self) -> SpatialPoint {
        self.columns.x
    }
}

/// Frame at exactly `x`; surfaces degenerate root configurations.
pub fn assemble_frame(ctx: &SpectralContext, x: &SpatialPoint) -> Result<WeylFrame> {
    let columns = FrameColumns::new(ctx, x)?;
    frame_from_columns(ctx, columns, *x, false)
}

pub fn frame_from_columns(ctx: &SpectralContext, columns: FrameColumns, requested: SpatialPoint, jittered: bool) -> Result<WeylFrame> {
    let m = ctx.grid.all.len();
    let mut w = Vec::with_capacity(m);
    let mut v = Vec::with_capacity(m);
    let mut max_cond: f64 = 0.0;
    for (i, &z) in ctx.grid.all.iter().enumerate() {
        let wz = columns.w_with(ctx, z, &ctx.gc[i])?;
        let (vz, cond) = dual_frame(&wz)?;
        max_cond = max_cond.max(cond);
        w.push(wz);
        v.push(vz);
    }
    Ok(WeylFrame { columns, requested, jittered, w, v, max_cond })
}

/// Fixed jitter direction, so repeated runs perturb identically.
const JITTER_DIR: [f64; 3] = [0.5773502691896258, -0.5773502691896258, 0.5773502691896258];

/// Frame at `x`, or at `x + 10⁻⁶·max(1, r)·ê` when the Atiyah–Ward roots
/// are degenerate at `x` itself.
pub fn assemble_frame_or_jitter(ctx: &SpectralContext, x: &SpatialPoint) -> Result<WeylFrame> {
    match assemble_frame(ctx, x) {
        Err(MonopoleError::RankDeficientW { .. })
        | Err(MonopoleError::DegenerateConstraint)
        | Err(MonopoleError::PathCrossesBranchPoint { .. }) => {
            let h = 1e-6 * x.r().max(1.0);
            let y = x.offset([h * JITTER_DIR[0], h * JITTER_DIR[1], h * JITTER_DIR[2]]);
            let columns = FrameColumns::new(ctx, &y)?;
            frame_from_columns(ctx, columns, *x, true)
        }
        other => other,
    }
}

/// The two solutions of `Δ†v = 0` regular at both ends, orthonormalised.
#[derive(Debug, Clone)]
pub struct Normalizable {
    /// `2n × 2` coefficients of the raw regular pair in the `V` columns.
    pub coeffs: CMat,
    /// Gram matrix `∫v_a†v_b dz` of the raw pair, by quadrature.
    pub gram: CMat,
    /// Singular values of the stacked endpoint constraints, descending.
    pub singular_values: Vec<f64>,
    /// Orthonormal pair `v·gram^{−1/2}` on every grid sample (`2n × 2` each).
    pub spinors: Vec<CMat>,
}

/// Directions along which solutions blow up at `z → end`: eigenvectors of
/// the Hermitian part of `(z_e − end)(𝓗 − 𝓕(z_e))` with negative exponents.
pub fn singular_directions(x: &SpatialPoint, t: &NahmTriple, z_e: f64, end: f64) -> (Vec<f64>, CMat) {
    let o = weyl_generator(x, t) * C64::new(z_e - end, 0.0);
    let (vals, vecs) = hermitian_eig(&o);
    let idx: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] < SINGULAR_EXPONENT).collect();
    let mut out = CMat::zeros(vals.len(), idx.len());
    for (c, &i) in idx.iter().enumerate() {
        out.set_column(c, &vecs.column(i));
    }
    (vals, out)
}

/// The pairing `w†v` of a solution of the `W` equation with one of the `V`
/// equation is constant in `z`. A `V` solution is therefore regular at an
/// end iff it pairs to zero with every `W` solution that decays there, and
/// those are the smallest right singular vectors of `W(±(1−δ))`. Working
/// from `W` avoids the inverse, which loses the small regular components of
/// `V` near the poles to rounding.
pub fn extract_normalizable(ctx: &SpectralContext, frame: &WeylFrame) -> Result<Normalizable> {
    let n = ctx.n();
    let m = 2 * n;
    let x = frame.x();
    if n == 1 {
        return finish(ctx, frame, identity(2), Vec::new());
    }
    let mut rows: Vec<CMat> = Vec::new();
    for side in [-1.0, 1.0] {
        let i = ctx.grid.boundary(side, 1.0);
        let (_, sing) = singular_directions(&x, &ctx.nahm[i], ctx.grid.all[i], side);
        let k = sing.ncols();
        let svd = frame.w[i].clone().svd(false, true);
        let vt = svd.v_t.expect("requested right singular vectors");
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let sv: Vec<f64> = order.iter().map(|&j| svd.singular_values[j]).collect();
        // the decaying solutions must be well separated from the rest
        if k == 0 || k >= m || sv[k - 1] > 1e-2 * sv[k] {
            return Err(MonopoleError::SubspaceAmbiguous { singular_values: sv });
        }
        for &j in order.iter().take(k) {
            rows.push(vt.rows(j, 1).into_owned());
        }
    }
    let mut stacked = CMat::zeros(rows.len(), m);
    for (r, row) in rows.iter().enumerate() {
        stacked.row_mut(r).copy_from(&row.row(0));
    }
    let (sv, basis) = null_space(&stacked, 2);
    // exactly 2n − 2 independent constraints leave a two-dimensional space
    if rows.len() != m - 2 || sv[m - 3] < 1e-6 * sv[0].max(f64::MIN_POSITIVE) {
        return Err(MonopoleError::SubspaceAmbiguous { singular_values: sv });
    }
    finish(ctx, frame, basis, sv)
}

fn finish(ctx: &SpectralContext, frame: &WeylFrame, coeffs: CMat, sv: Vec<f64>) -> Result<Normalizable> {
    let raw: Vec<CMat> = frame.v.iter().map(|v| v * &coeffs).collect();
    let mut gram = CMat::zeros(2, 2);
    for (k, &wt) in ctx.grid.weights.iter().enumerate() {
        let v = &raw[ctx.grid.node(k)];
        gram += v.adjoint() * v * C64::new(wt, 0.0);
    }
    let gram = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
    let g = inv_sqrt_hpd(&gram)?;
    let spinors = raw.iter().map(|v| v * &g).collect();
    Ok(Normalizable { coeffs, gram, singular_values: sv, spinors })
}

/// Distance between the spans of two orthonormal pairs: deviation of the
/// overlap matrix from unitarity.
pub fn subspace_distance(ctx: &SpectralContext, a: &Normalizable, b: &Normalizable) -> f64 {
    // both pairs are orthonormal; the overlap is unitary iff the spans agree
    let mut m = CMat::zeros(2, 2);
    for (k, &wt) in ctx.grid.weights.iter().enumerate() {
        let i = ctx.grid.node(k);
        m += a.spinors[i].adjoint() * &b.spinors[i] * C64::new(wt, 0.0);
    }
    let (vals, _) = hermitian_eig(&(m.adjoint() * &m));
    vals.iter().map(|v| (1.0 - v).abs()).fold(0.0, f64::max)
}

/// Relative residual of `W' = (−𝓗 + 𝓕)W` at `z`, central differences with
/// one Richardson level.
pub fn w_equation_residual(ctx: &SpectralContext, cols: &FrameColumns, z: f64, h: f64) -> Result<f64> {
    let w = |s: f64| cols.w_at(ctx, z + s);
    let d1 = (w(h)? - w(-h)?) / C64::new(2.0 * h, 0.0);
    let d2 = (w(h / 2.0)? - w(-h / 2.0)?) / C64::new(h, 0.0);
    let deriv = (d2 * C64::new(4.0, 0.0) - d1) / C64::new(3.0, 0.0);
    let w0 = w(0.0)?;
    let t = ctx.nahm_at(z)?;
    let res = deriv + weyl_generator(&cols.x, &t) * &w0;
    Ok(max_abs(&res) / max_abs(&w0))
}

/// Relative residual of `V' = (𝓗 − 𝓕)V` at `z`.
pub fn v_equation_residual(ctx: &SpectralContext, cols: &FrameColumns, z: f64, h: f64) -> Result<f64> {
    let v = |s: f64| -> Result<CMat> { Ok(dual_frame(&cols.w_at(ctx, z + s)?)?.0) };
    let d1 = (v(h)? - v(-h)?) / C64::new(2.0 * h, 0.0);
    let d2 = (v(h / 2.0)? - v(-h / 2.0)?) / C64::new(h, 0.0);
    let deriv = (d2 * C64::new(4.0, 0.0) - d1) / C64::new(3.0, 0.0);
    let v0 = v(0.0)?;
    let t = ctx.nahm_at(z)?;
    let res = deriv - weyl_generator(&cols.x, &t) * &v0;
    Ok(max_abs(&res) / max_abs(&v0))
}

/// `max_z ‖V†W − 1‖ / (‖V‖‖W‖)` over the grid. Near the poles `W` mixes
/// solutions growing like `(1−z)^{−3/2}` with ones vanishing like
/// `(1−z)^{1/2}`, so only the normalised defect is a precision statement.
pub fn duality_defect(frame: &WeylFrame) -> f64 {
    let m = frame.w.first().map(|w| w.nrows()).unwrap_or(0);
    let id = identity(m);
    frame
        .v
        .iter()
        .zip(&frame.w)
        .map(|(v, w)| max_abs(&(v.adjoint() * w - &id)) / (max_abs(v) * max_abs(w)).max(1.0))
        .fold(0.0, f64::max)
}

/// Unnormalised `max ‖V†W − 1‖` over samples with `|z| ≤ z_max`.
pub fn interior_duality_defect(ctx: &SpectralContext, frame: &WeylFrame, z_max: f64) -> f64 {
    let m = frame.w.first().map(|w| w.nrows()).unwrap_or(0);
    let id = identity(m);
    ctx.grid
        .all
        .iter()
        .zip(frame.v.iter().zip(&frame.w))
        .filter(|(z, _)| z.abs() <= z_max)
        .map(|(_, (v, w))| max_abs(&(v.adjoint() * w - &id)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abelian_data::{bundle_from_doc, charge1_curve_for_center, charge1_doc};
    use crate::reference_oracles::charge2_bundle;

    fn quick() -> RunConfig {
        RunConfig { z_nodes: 64, ..RunConfig::default() }
    }

    fn charge1(center: [f64; 3]) -> AbelianBundle {
        bundle_from_doc(charge1_doc(charge1_curve_for_center(center))).unwrap()
    }

    #[test]
    fn spinor_is_plus_one_eigenvector() {
        for u in [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [0.6, 0.0, 0.8], [0.36, -0.48, -0.8]] {
            let s = spinor(u);
            let r = pauli_dot_real(u) * &s - &s;
            assert!(r.norm() < 1e-14, "{u:?}");
        }
    }

    #[test]
    fn grid_has_boundary_samples() {
        let g = ZGrid::new(32, 1e-3);
        assert_eq!(g.all.len(), 32 + 18);
        assert!((g.all[g.boundary(1.0, 1.0)] - 0.999).abs() < 1e-15);
        assert!((g.all[g.boundary(-1.0, 4.0)] + 0.996).abs() < 1e-15);
        assert!(g.all.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn charge_one_frame_solves_both_equations() {
        let b = charge1([0.1, -0.2, 0.15]);
        let ctx = SpectralContext::new(&b, &quick()).unwrap();
        let f = assemble_frame(&ctx, &SpatialPoint::new(0.4, 0.7, -0.3)).unwrap();
        assert!(duality_defect(&f) < 1e-9);
        for z in [-0.6, 0.1, 0.8] {
            assert!(w_equation_residual(&ctx, &f.columns, z, 1e-3).unwrap() < 1e-7);
            assert!(v_equation_residual(&ctx, &f.columns, z, 1e-3).unwrap() < 1e-7);
        }
    }

    #[test]
    fn charge_one_pair_is_the_exponential_pair() {
        // For constant scalar T = −ic, v' = σ·(x − c)v: V spans e^{±z|y|} times
        // the eigenvectors of σ·y, y = x − c.
        let c = [0.1, -0.2, 0.15];
        let b = charge1(c);
        let ctx = SpectralContext::new(&b, &quick()).unwrap();
        let x = SpatialPoint::new(0.4, 0.7, -0.3);
        let f = assemble_frame(&ctx, &x).unwrap();
        let nz = extract_normalizable(&ctx, &f).unwrap();
        let y = [x.x1 - c[0], x.x2 - c[1], x.x3 - c[2]];
        let (vals, vecs) = hermitian_eig(&pauli_dot_real(y));
        let mut exact = Vec::new();
        for &z in &ctx.grid.all {
            let mut m = CMat::zeros(2, 2);
            for a in 0..2 {
                m.set_column(a, &(vecs.column(a) * C64::new((vals[a] * z).exp(), 0.0)));
            }
            exact.push(m);
        }
        let exact_pair = finish(&ctx, &WeylFrame { v: exact, ..f.clone() }, identity(2), Vec::new()).unwrap();
        assert!(subspace_distance(&ctx, &nz, &exact_pair) < 1e-8);
        // pointwise: V itself is a fundamental matrix of the exact system
        let i = ctx.grid.node(10);
        let z = ctx.grid.all[i];
        let m = vecs.adjoint() * &f.v[i];
        let m0 = vecs.adjoint() * &f.v[ctx.grid.node(40)];
        let z0 = ctx.grid.all[ctx.grid.node(40)];
        for a in 0..2 {
            let ratio = m.row(a).norm() / m0.row(a).norm();
            assert!((ratio - (vals[a] * (z - z0)).exp()).abs() < 1e-8 * ratio);
        }
    }

    #[test]
    fn charge_two_frame_and_extraction() {
        let b = charge2_bundle().unwrap();
        let ctx = SpectralContext::new(&b, &quick()).unwrap();
        let x = SpatialPoint::new(0.4, 0.3, 1.1);
        let f = assemble_frame(&ctx, &x).unwrap();
        assert!(duality_defect(&f) < 1e-13, "{}", duality_defect(&f));
        assert!(interior_duality_defect(&ctx, &f, 0.9) < 1e-9, "{}", interior_duality_defect(&ctx, &f, 0.9));
        for z in [-0.7, 0.0, 0.45] {
            let r = w_equation_residual(&ctx, &f.columns, z, 1e-3).unwrap();
            assert!(r < 1e-6, "w residual {r} at {z}");
        }
        let nz = extract_normalizable(&ctx, &f).unwrap();
        assert_eq!(nz.singular_values.len(), 4);
        assert!(nz.singular_values[1] > 1e-3 * nz.singular_values[0]);
        // the extracted pair is regular: it vanishes like (1 − |z|)^{1/2}
        let a = ctx.grid.boundary(1.0, 1.0);
        let bb = ctx.grid.boundary(1.0, 4.0);
        let ratio = nz.spinors[a].norm() / nz.spinors[bb].norm();
        assert!((ratio - 0.5).abs() < 0.05, "endpoint decay ratio {ratio}");
        // column rescaling does not move the subspace
        let mut cols = f.columns.clone();
        cols.rescale(0, 7.0);
        cols.rescale(3, 0.2);
        let f2 = frame_from_columns(&ctx, cols, x, false).unwrap();
        let nz2 = extract_normalizable(&ctx, &f2).unwrap();
        assert!(subspace_distance(&ctx, &nz, &nz2) < 1e-8);
    }

    #[test]
    fn degenerate_roots_are_jittered() {
        // n = 1: on the vertical line through the centre one root sits at ∞
        let b = charge1([0.0, 0.0, 0.0]);
        let ctx = SpectralContext::new(&b, &quick()).unwrap();
        let x = SpatialPoint::new(0.0, 0.0, 0.8);
        assert!(matches!(assemble_frame(&ctx, &x), Err(MonopoleError::RankDeficientW { .. })));
        let f = assemble_frame_or_jitter(&ctx, &x).unwrap();
        assert!(f.jittered);
        assert!(duality_defect(&f) < 1e-9);
    }
}
