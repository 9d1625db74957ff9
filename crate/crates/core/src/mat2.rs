//! Fixed-size 2×2 real and complex matrices.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Row-major real 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn scale(self, s: f64) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2([[s * a, s * b], [s * c, s * d]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// ad - bc with Kahan's fused correction; accurate to a few ulps of the
    /// result even under cancellation of the stored entries.
    pub fn det_accurate(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        let w = b * c;
        let e = (-b).mul_add(c, w);
        let f = a.mul_add(d, -w);
        f + e
    }

    /// (|ad| + |bc|) / |det|: relative rounding amplification when det is
    /// formed from the entries.
    pub fn det_condition(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        ((a * d).abs() + (b * c).abs()) / self.det().abs()
    }

    pub fn col(&self, j: usize) -> [f64; 2] {
        [self.0[0][j], self.0[1][j]]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// Largest singular value, closed form.
    pub fn spectral_norm(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        0.5 * ((a + d).hypot(b - c) + (a - d).hypot(b + c))
    }

    /// Smallest singular value.
    pub fn min_singular_value(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        0.5 * ((a + d).hypot(b - c) - (a - d).hypot(b + c)).abs()
    }

    /// Matrix exponential.
    ///
    /// With λ± the eigenvalues, the real-eigenvalue branch uses the
    /// Sylvester form; λ₊ is recovered from det/λ₋ when the trace is negative
    /// so the slow eigenvalue of a stiff damped block keeps full precision.
    pub fn exp(&self) -> Mat2 {
        let half_tr = 0.5 * self.trace();
        let det = self.det();
        let [[p, q], [r, s]] = self.0;
        // δ² = (tr/2)² - det, written without cancellation
        let delta2 = 0.25 * (p - s) * (p - s) + q * r;
        let n = Mat2([[p - half_tr, q], [r, s - half_tr]]);
        if delta2.abs() <= 1e-4 {
            // series in δ² for cosh δ and sinh δ / δ; truncation below 1e-21
            let d2 = delta2;
            let ch = 1.0 + d2 / 2.0 + d2 * d2 / 24.0 + d2 * d2 * d2 / 720.0;
            let sh = 1.0 + d2 / 6.0 + d2 * d2 / 120.0 + d2 * d2 * d2 / 5040.0;
            let e = half_tr.exp();
            return Mat2::IDENTITY.scale(e * ch) + n.scale(e * sh);
        }
        if delta2 < 0.0 {
            let w = (-delta2).sqrt();
            let e = half_tr.exp();
            return Mat2::IDENTITY.scale(e * w.cos()) + n.scale(e * w.sin() / w);
        }
        let delta = delta2.sqrt();
        let (lp, lm) = if half_tr <= 0.0 {
            let lm = half_tr - delta;
            (det / lm, lm)
        } else {
            let lp = half_tr + delta;
            (lp, det / lp)
        };
        let ep = lp.exp();
        let em = lm.exp();
        let denom = 2.0 * delta;
        // (e^{λ+}(M - λ- I) - e^{λ-}(M - λ+ I)) / (λ+ - λ-)
        let a = (*self - Mat2::IDENTITY.scale(lm)).scale(ep / denom);
        let b = (*self - Mat2::IDENTITY.scale(lp)).scale(em / denom);
        a - b
    }

    pub fn to_complex(&self) -> CMat2 {
        let [[a, b], [c, d]] = self.0;
        CMat2([[a.into(), b.into()], [c.into(), d.into()]])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (x, y) = (self.0, o.0);
        Mat2([[x[0][0] + y[0][0], x[0][1] + y[0][1]], [x[1][0] + y[1][0], x[1][1] + y[1][1]]])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (x, y) = (self.0, o.0);
        Mat2([
            [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
            [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
        ])
    }
}

/// Row-major complex 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CMat2(pub [[Complex64; 2]; 2]);

impl CMat2 {
    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        CMat2([[o, z], [z, o]])
    }

    pub fn diag(a: Complex64, d: Complex64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        CMat2([[a, z], [z, d]])
    }

    pub fn adjoint(&self) -> Self {
        let m = self.0;
        CMat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn scale(&self, s: f64) -> Self {
        let m = self.0;
        CMat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn sub(&self, o: &CMat2) -> CMat2 {
        let (x, y) = (self.0, o.0);
        CMat2([[x[0][0] - y[0][0], x[0][1] - y[0][1]], [x[1][0] - y[1][0], x[1][1] - y[1][1]]])
    }

    pub fn mul(&self, o: &CMat2) -> CMat2 {
        let (x, y) = (self.0, o.0);
        CMat2([
            [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
            [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
        ])
    }

    /// Largest singular value via the eigenvalues of the Hermitian A*A.
    pub fn spectral_norm(&self) -> f64 {
        let g = self.adjoint().mul(self);
        let a = g.0[0][0].re;
        let d = g.0[1][1].re;
        let b = g.0[0][1].norm();
        let top = 0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt();
        top.max(0.0).sqrt()
    }

    /// Max-modulus entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.norm()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn taylor_exp(m: Mat2) -> Mat2 {
        // scaling and squaring with a long Taylor series; test oracle only
        let k = 20;
        let small = m.scale(1.0 / (1u64 << k) as f64);
        let mut term = Mat2::IDENTITY;
        let mut sum = Mat2::IDENTITY;
        for i in 1..30 {
            term = (term * small).scale(1.0 / i as f64);
            sum = sum + term;
        }
        (0..k).fold(sum, |acc, _| acc * acc)
    }

    #[test]
    fn exp_matches_series_on_all_branches() {
        let cases = [
            Mat2::new(0.0, 1.0, -4.0, -0.3),  // oscillatory
            Mat2::new(0.0, 0.5, -0.01, -2.0), // real distinct
            Mat2::new(0.0, 1.0, -0.25, -1.0), // double root
            Mat2::new(0.0, 0.0, 0.0, 0.0),
            Mat2::new(1.0, 2.0, 3.0, 4.0),
        ];
        for m in cases {
            let a = m.exp();
            let b = taylor_exp(m);
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(a.0[i][j], b.0[i][j], epsilon = 1e-10, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn exp_determinant_is_exp_trace() {
        let m = Mat2::new(0.0, 3.0, -12.0, -40.0);
        assert_relative_eq!(m.exp().det(), (-40.0f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn stiff_exp_keeps_slow_mode() {
        // eigenvalues ≈ -1e8 and -ξ²/b·h with ξ = 1, b = 1e8, h = 10
        let h = 10.0;
        let m = Mat2::new(0.0, h, -h, -h * 1e8);
        let e = m.exp();
        let slow = -h / 1e8;
        assert_relative_eq!(e.0[0][0], slow.exp(), max_relative = 1e-12);
        assert!(e.is_finite());
    }

    #[test]
    fn zero_frequency_column_is_exact() {
        let m = Mat2::new(0.0, 0.7, 0.0, -3.1);
        let e = m.exp();
        assert_eq!(e.col(0), [1.0, 0.0]);
    }

    #[test]
    fn spectral_norms_agree() {
        let m = Mat2::new(0.3, -1.2, 2.5, 0.7);
        let c = m.to_complex();
        assert_relative_eq!(m.spectral_norm(), c.spectral_norm(), max_relative = 1e-14);
        assert_relative_eq!(
            m.spectral_norm() * m.min_singular_value(),
            m.det().abs(),
            max_relative = 1e-14
        );
    }
}
