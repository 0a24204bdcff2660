//! Complete elliptic integral and Jacobi elliptic functions for real
//! arguments and modulus `0 ≤ k < 1`.

use std::f64::consts::PI;

/// Arithmetic–geometric mean.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a.abs() {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    a
}

/// `K(k) = π / (2·agm(1, √(1−k²)))`.
pub fn complete_k(k: f64) -> f64 {
    PI / (2.0 * agm(1.0, (1.0 - k * k).sqrt()))
}

/// `(sn, cn, dn)(u | k)` by the descending AGM scheme.
pub fn jacobi_sn_cn_dn(u: f64, k: f64) -> (f64, f64, f64) {
    if k == 0.0 {
        return (u.sin(), u.cos(), 1.0);
    }
    let mut a = vec![1.0];
    let mut c = vec![k];
    let mut b = (1.0 - k * k).sqrt();
    while c.last().unwrap().abs() > 1e-16 && a.len() < 64 {
        let an = a.last().unwrap();
        let cn = 0.5 * (an - b);
        let anew = 0.5 * (an + b);
        b = (an * b).sqrt();
        a.push(anew);
        c.push(cn);
    }
    let n = a.len() - 1;
    let mut phi = 2f64.powi(n as i32) * a[n] * u;
    for m in (1..=n).rev() {
        phi = 0.5 * (phi + (c[m] / a[m] * phi.sin()).asin());
    }
    let (s, co) = phi.sin_cos();
    // dn > 0 for real arguments; the quotient form loses accuracy near u = K
    (s, co, (1.0 - k * k * s * s).sqrt())
}
