//! Small dense complex linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{MonopoleError, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// A point of R³ (plus the Euclidean time `x4`, which the static problem keeps at 0).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpatialPoint {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    #[serde(default)]
    pub x4: f64,
}

impl SpatialPoint {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        SpatialPoint { x1, x2, x3, x4: 0.0 }
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self::new(x[0], x[1], x[2])
    }

    pub fn arr(&self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn r(&self) -> f64 {
        (self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.arr().iter().all(|v| v.is_finite()) && self.x4.is_finite()
    }

    pub fn offset(&self, d: [f64; 3]) -> Self {
        Self::new(self.x1 + d[0], self.x2 + d[1], self.x3 + d[2])
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.x1 * s, self.x2 * s, self.x3 * s)
    }
}

/// The three Pauli matrices.
pub fn pauli() -> [CMat; 3] {
    [
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

/// `v1 σ1 + v2 σ2 + v3 σ3`.
pub fn pauli_dot(v: [C64; 3]) -> CMat {
    CMat::from_row_slice(
        2,
        2,
        &[v[2], v[0] - I * v[1], v[0] + I * v[1], -v[2]],
    )
}

pub fn pauli_dot_real(v: [f64; 3]) -> CMat {
    pauli_dot([re(v[0]), re(v[1]), re(v[2])])
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Determinant by partial-pivot LU; zero for exactly singular input.
pub fn det(a: &CMat) -> C64 {
    assert!(a.is_square(), "det of non-square matrix");
    if a.nrows() == 0 {
        return ONE;
    }
    a.clone().lu().determinant()
}

/// Classical adjoint, computed from cofactors so that singular input is fine.
pub fn adjugate(a: &CMat) -> CMat {
    assert!(a.is_square(), "adjugate of non-square matrix");
    let n = a.nrows();
    if n == 1 {
        return CMat::from_element(1, 1, ONE);
    }
    let mut adj = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let minor = a.clone().remove_row(i).remove_column(j);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            // adj = transpose of the cofactor matrix
            adj[(j, i)] = det(&minor) * sign;
        }
    }
    adj
}

fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse together with its 1-norm condition number.
#[derive(Debug, Clone)]
pub struct Inverse {
    pub inv: CMat,
    pub cond: f64,
}

/// Partial-pivot LU inverse. Fails when the smallest pivot is negligible
/// relative to the largest entry, so callers can branch on degenerate input.
pub fn invert(a: &CMat) -> Result<Inverse> {
    assert!(a.is_square(), "invert of non-square matrix");
    let n = a.nrows();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if n == 0 {
        return Ok(Inverse { inv: CMat::zeros(0, 0), cond: 1.0 });
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(MonopoleError::SingularMatrix { cond: f64::INFINITY });
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-14 * scale {
        return Err(MonopoleError::SingularMatrix { cond: scale / min_pivot.max(f64::MIN_POSITIVE) });
    }
    let inv = lu
        .try_inverse()
        .ok_or(MonopoleError::SingularMatrix { cond: f64::INFINITY })?;
    let cond = norm1(a) * norm1(&inv);
    Ok(Inverse { inv, cond })
}

pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    let inv = invert(a)?;
    Ok(&inv.inv * b)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eig(a: &CMat) -> (Vec<f64>, CMat) {
    let h = (a + a.adjoint()) * re(0.5);
    let eig = h.symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eig(a);
    let d = CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&v| re(f(v)))));
    &vecs * d * vecs.adjoint()
}

/// `G^{-1/2}` for Hermitian positive definite `G`.
pub fn inv_sqrt_hpd(g: &CMat) -> Result<CMat> {
    let (vals, _) = hermitian_eig(g);
    let lo = vals.first().copied().unwrap_or(1.0);
    let hi = vals.last().copied().unwrap_or(1.0);
    if lo <= 1e-14 * hi.abs() || !lo.is_finite() {
        return Err(MonopoleError::SingularMatrix { cond: hi / lo.abs().max(f64::MIN_POSITIVE) });
    }
    Ok(hermitian_fn(g, |v| 1.0 / v.sqrt()))
}

/// Unitary factor `M (M†M)^{-1/2}` of the polar decomposition.
pub fn polar_unitary(m: &CMat) -> Result<CMat> {
    Ok(m * inv_sqrt_hpd(&(m.adjoint() * m))?)
}

/// Singular values (descending) and a basis of the `k` least significant
/// right singular directions of `a`.
pub fn null_space(a: &CMat, k: usize) -> (Vec<f64>, CMat) {
    let (m, n) = a.shape();
    // pad with zero rows so the SVD returns a full right basis
    let padded = if m < n {
        let mut p = CMat::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut basis = CMat::zeros(n, k);
    for (col, &i) in order.iter().rev().take(k).enumerate() {
        basis.set_column(col, &vt.row(i).adjoint());
    }
    (sv, basis)
}

/// Eigenvalues of a general square matrix via the complex Schur form.
pub fn eigenvalues(a: &CMat) -> Vec<C64> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    // The unshifted-iteration Schur solver can stall on highly structured
    // input (companion matrices with symmetric roots); a fixed unitary
    // similarity breaks the structure without changing the spectrum.
    let mut m = a.clone();
    for attempt in 0..4 {
        if let Some(schur) = m.clone().try_schur(f64::EPSILON, 10_000) {
            let (_, t) = schur.unpack();
            return (0..n).map(|i| t[(i, i)]).collect();
        }
        let u = householder(n, attempt);
        m = &u * &m * &u;
    }
    panic!("Schur iteration failed to converge after unitary restarts");
}

/// Reflection `1 − 2vv†/v†v` for a fixed, attempt-dependent `v`.
fn householder(n: usize, attempt: usize) -> CMat {
    let v = CMat::from_fn(n, 1, |i, _| C64::new(1.0 + (i + attempt) as f64 * 0.37, 0.21 * (i as f64 - attempt as f64)));
    identity(n) - &v * v.adjoint() * C64::new(2.0 / v.norm_squared(), 0.0)
}

/// Max entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn pauli_algebra() {
        let s = pauli();
        let eps = |i: usize, j: usize, k: usize| -> f64 {
            match (i, j, k) {
                (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
                _ => 0.0,
            }
        };
        for i in 0..3 {
            for j in 0..3 {
                let mut rhs = if i == j { identity(2) } else { CMat::zeros(2, 2) };
                for k in 0..3 {
                    rhs += &s[k] * (I * eps(i, j, k));
                }
                assert!(max_abs(&(&s[i] * &s[j] - rhs)) == 0.0);
            }
        }
    }

    #[test]
    fn pauli_dot_examples() {
        assert_eq!(pauli_dot_real([0.0, 0.0, 1.0]), pauli()[2]);
        assert_eq!(pauli_dot_real([1.0, 0.0, 0.0]), pauli()[0]);
        let m = pauli_dot_real([0.3, -1.2, 0.7]);
        assert!(max_abs(&(&m - m.adjoint())) < 1e-15);
        let expected = -(0.09 + 1.44 + 0.49);
        assert!((det(&m) - re(expected)).norm() < 1e-14);
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&identity(2), &identity(3)), identity(6));
        let t = CMat::from_diagonal(&CVec::from_vec(vec![re(1.5), re(-2.0)]));
        let k = kron(&pauli()[2], &t);
        let expect = CMat::from_diagonal(&CVec::from_vec(vec![re(1.5), re(-2.0), re(-1.5), re(2.0)]));
        assert_eq!(k, expect);
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b, cc, d) = (random(2, &mut rng), random(2, &mut rng), random(2, &mut rng), random(2, &mut rng));
        let lhs = kron(&a, &b) * kron(&cc, &d);
        // entrywise oracle for (AC) ⊗ (BD)
        let ac = &a * &cc;
        let bd = &b * &d;
        for i in 0..4 {
            for j in 0..4 {
                let v = ac[(i / 2, j / 2)] * bd[(i % 2, j % 2)];
                assert!((lhs[(i, j)] - v).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn adjugate_examples() {
        assert_eq!(adjugate(&identity(3)), identity(3));
        let m = CMat::from_row_slice(2, 2, &[re(1.0), re(2.0), re(3.0), re(4.0)]);
        let adj = adjugate(&m);
        assert_eq!(adj, CMat::from_row_slice(2, 2, &[re(4.0), re(-2.0), re(-3.0), re(1.0)]));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(3, &mut rng);
        let r = &a * adjugate(&a) - identity(3) * det(&a);
        assert!(max_abs(&r) < 1e-12);
    }

    #[test]
    fn adjugate_singular() {
        let a = CMat::from_row_slice(2, 2, &[re(1.0), re(2.0), re(2.0), re(4.0)]);
        let adj = adjugate(&a);
        assert!(max_abs(&(&a * &adj)) < 1e-14);
        assert!(max_abs(&adj) > 1.0);
    }

    #[test]
    fn invert_examples() {
        assert_eq!(invert(&identity(4)).unwrap().inv, identity(4));
        let d = CMat::from_diagonal(&CVec::from_vec(vec![re(2.0), re(4.0)]));
        let inv = invert(&d).unwrap();
        assert!(max_abs(&(inv.inv - CMat::from_diagonal(&CVec::from_vec(vec![re(0.5), re(0.25)])))) < 1e-16);
        assert!((inv.cond - 2.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(6, &mut rng) + identity(6) * re(3.0);
        let inv = invert(&a).unwrap();
        assert!(max_abs(&(&a * &inv.inv - identity(6))) < 1e-10);
        assert!(invert(&CMat::zeros(2, 2)).is_err());
        let sing = CMat::from_row_slice(2, 2, &[re(1.0), re(2.0), re(2.0), re(4.0)]);
        assert!(matches!(invert(&sing), Err(MonopoleError::SingularMatrix { .. })));
    }

    #[test]
    fn hermitian_helpers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(4, &mut rng);
        let g = a.adjoint() * &a + identity(4);
        let s = inv_sqrt_hpd(&g).unwrap();
        assert!(max_abs(&(&s * &g * &s - identity(4))) < 1e-12);
        let u = polar_unitary(&a).unwrap();
        assert!(max_abs(&(u.adjoint() * &u - identity(4))) < 1e-12);
        let (vals, vecs) = hermitian_eig(&g);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMat::from_diagonal(&CVec::from_iterator(4, vals.iter().map(|&v| re(v))));
        assert!(max_abs(&(&vecs * d * vecs.adjoint() - &g)) < 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = CMat::from_fn(2, 4, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let (sv, ns) = null_space(&a, 2);
        assert_eq!(sv.len(), 4);
        assert!(max_abs(&(&a * &ns)) < 1e-13);
        assert!(max_abs(&(ns.adjoint() * &ns - identity(2))) < 1e-13);
    }

    #[test]
    fn schur_eigenvalues() {
        let m = CMat::from_row_slice(2, 2, &[ZERO, re(-1.0), re(1.0), ZERO]);
        let mut ev = eigenvalues(&m);
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - c(0.0, -1.0)).norm() < 1e-14 && (ev[1] - c(0.0, 1.0)).norm() < 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn adjugate_identity_holds(seed in 0u64..10_000, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(n, &mut rng);
            let d = det(&a);
            let adj = adjugate(&a);
            let scale = 1.0 + max_abs(&adj) * max_abs(&a);
            proptest::prop_assert!(max_abs(&(&adj * &a - identity(n) * d)) < 1e-12 * scale);
        }

        #[test]
        fn double_inverse_round_trips(seed in 0u64..10_000, n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(n, &mut rng) + identity(n) * re(2.5);
            let back = invert(&invert(&a).unwrap().inv).unwrap().inv;
            proptest::prop_assert!(max_abs(&(back - &a)) < 1e-10);
        }
    }
}
