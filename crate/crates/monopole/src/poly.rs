//! Dense complex polynomials stored low → high.

use crate::matrix_kit::{eigenvalues, CMat, C64, ONE, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<C64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(vec![])
    }

    pub fn constant(c: C64) -> Self {
        Poly(vec![c])
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.0.get(k).copied().unwrap_or(ZERO)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.0.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![ZERO; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn pow(&self, k: usize) -> Poly {
        (0..k).fold(Poly::constant(ONE), |acc, _| acc.mul(self))
    }

    pub fn scale(&self, s: C64) -> Poly {
        Poly(self.0.iter().map(|&c| c * s).collect())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Degree after discarding leading coefficients below `tol·‖p‖`.
    pub fn effective_degree(&self, tol: f64) -> Option<usize> {
        let cut = tol * self.norm();
        self.0.iter().rposition(|c| c.norm() > cut)
    }
}

/// Finite roots of `p` (leading coefficients below `tol·‖p‖` are treated as
/// zero), from companion-matrix eigenvalues polished by Newton steps.
pub fn roots(p: &Poly, tol: f64) -> Vec<C64> {
    let Some(deg) = p.effective_degree(tol) else {
        return vec![];
    };
    if deg == 0 {
        return vec![];
    }
    let lead = p.0[deg];
    let mut comp = CMat::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = ONE;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -p.0[i] / lead;
    }
    let trimmed = Poly(p.0[..=deg].to_vec());
    let dp = trimmed.derivative();
    eigenvalues(&comp)
        .into_iter()
        .map(|mut z| {
            for _ in 0..3 {
                let d = dp.eval(z);
                if d.norm() == 0.0 {
                    break;
                }
                let step = trimmed.eval(z) / d;
                if !step.re.is_finite() || !step.im.is_finite() || step.norm() > 1e-3 * (1.0 + z.norm()) {
                    break;
                }
                z -= step;
            }
            z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_kit::{c, re};

    #[test]
    fn biquadratic_with_imaginary_roots() {
        // structured companion matrices used to stall the Schur iteration
        let p = Poly(vec![re(1.0), ZERO, re(67.1), ZERO, re(1.0)]);
        let r = roots(&p, 1e-12);
        assert_eq!(r.len(), 4);
        for z in r {
            assert!(p.eval(z).norm() < 1e-9 * (1.0 + z.norm().powi(4)));
        }
    }

    #[test]
    fn horner_matches_power_sum() {
        let p = Poly(vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0), re(2.0)]);
        let z = c(0.3, -0.7);
        let direct: C64 = p.0.iter().enumerate().map(|(k, &a)| a * z.powu(k as u32)).sum();
        assert!((p.eval(z) - direct).norm() < 1e-14);
    }

    #[test]
    fn roots_of_product() {
        let want = [c(1.0, 1.0), c(-2.0, 0.5), c(0.0, -3.0)];
        let p = want.iter().fold(Poly::constant(ONE), |acc, &r| acc.mul(&Poly(vec![-r, ONE])));
        let mut got = roots(&p, 1e-14);
        assert_eq!(got.len(), 3);
        for w in want {
            let (i, best) = got
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (g - w).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(best < 1e-12);
            got.remove(i);
        }
    }

    #[test]
    fn leading_deficiency_drops_degree() {
        let p = Poly(vec![re(0.0), re(-2.0), re(1e-18)]);
        assert_eq!(p.effective_degree(1e-12), Some(1));
        let r = roots(&p, 1e-12);
        assert_eq!(r.len(), 1);
        assert!(r[0].norm() < 1e-15);
    }
}
