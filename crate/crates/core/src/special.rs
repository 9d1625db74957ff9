//! Bessel functions J_ν, Y_ν of real order ν ≥ 0 with first derivatives.
//!
//! Steed's method: the continued fraction for J'_ν/J_ν fixes the ratio at the
//! target order, downward recurrence brings it to an order |μ| ≤ 1/2, and the
//! pair J_μ, Y_μ is normalised either by Temme's series (x < 2) or by the
//! complex continued fraction for (J'_μ + iY'_μ)/(J_μ + iY_μ). Upward
//! recurrence on Y then returns to the target order.

use std::f64::consts::PI;

use crate::error::{LabError, Result};

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAXIT: usize = 1_000_000;
const XMIN: f64 = 2.0;

/// Taylor coefficients of 1/Γ(1+z) about z = 0.
const RGAMMA_SERIES: [f64; 29] = [
    1.0,
    0.577_215_664_901_532_860_61,
    -0.655_878_071_520_253_881_08,
    -0.042_002_635_034_095_235_529,
    0.166_538_611_382_291_489_5,
    -0.042_197_734_555_544_336_748,
    -0.009_621_971_527_876_973_562_1,
    0.007_218_943_246_663_099_542_4,
    -0.001_165_167_591_859_065_112_1,
    -0.000_215_241_674_114_950_972_82,
    0.000_128_050_282_388_116_186_15,
    -0.000_020_134_854_780_788_238_656,
    -1.250_493_482_142_670_657_3e-6,
    1.133_027_231_981_695_882_4e-6,
    -2.056_338_416_977_607_103_5e-7,
    6.116_095_104_481_415_817_9e-9,
    5.002_007_644_469_222_930_1e-9,
    -1.181_274_570_487_020_144_6e-9,
    1.043_426_711_691_100_510_5e-10,
    7.782_263_439_905_071_254e-12,
    -3.696_805_618_642_205_708_2e-12,
    5.100_370_287_454_475_979e-13,
    -2.058_326_053_566_506_783_2e-14,
    -5.348_122_539_423_017_982_4e-15,
    1.226_778_628_238_260_790_2e-15,
    -1.181_259_301_697_458_769_5e-16,
    1.186_692_254_751_600_332_6e-18,
    1.412_380_655_318_031_781_6e-18,
    -2.298_745_684_435_370_206_6e-19,
];

/// 1/Γ(1+z) for |z| ≤ 1/2 by the Taylor series.
pub fn rgamma1p(z: f64) -> f64 {
    RGAMMA_SERIES.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

/// Temme's auxiliary quantities (γ₁, γ₂, 1/Γ(1+μ), 1/Γ(1−μ)) for |μ| ≤ 1/2.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mut odd = 0.0; // Σ c_k μ^{k-1}, k odd
    let mut even = 0.0; // Σ c_k μ^k, k even
    for (k, c) in RGAMMA_SERIES.iter().enumerate().rev() {
        if k % 2 == 1 {
            odd = odd * mu * mu + c;
        } else {
            even = even * mu * mu + c;
        }
    }
    let gampl = even + mu * odd;
    let gammi = even - mu * odd;
    (-odd, even, gampl, gammi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselJY {
    pub j: f64,
    pub y: f64,
    pub jp: f64,
    pub yp: f64,
}

/// Hankel's asymptotic expansion; (J_ν, Y_ν). Used for x ≥ 25 + ν², where
/// the smallest term lies far below machine precision.
fn hankel_jy(nu: f64, x: f64) -> (f64, f64) {
    let mu4 = 4.0 * nu * nu;
    let (mut p, mut q) = (1.0, 0.0);
    let mut term: f64 = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu4 - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    // χ = x - (ν/2 + 1/4)π, expanded so that x itself is reduced exactly
    let (sx, cx) = x.sin_cos();
    let (sp, cp) = ((0.5 * nu + 0.25) * PI).sin_cos();
    let (sin_chi, cos_chi) = (sx * cp - cx * sp, cx * cp + sx * sp);
    let amp = (2.0 / (PI * x)).sqrt();
    (amp * (p * cos_chi - q * sin_chi), amp * (p * sin_chi + q * cos_chi))
}

/// J_ν(x), Y_ν(x), J'_ν(x), Y'_ν(x) for x > 0, ν ≥ 0.
pub fn bessel_jy(nu: f64, x: f64) -> Result<BesselJY> {
    if !(x > 0.0) || !(nu >= 0.0) || !x.is_finite() || !nu.is_finite() {
        return Err(LabError::domain(format!("bessel_jy needs x > 0, nu >= 0 (got nu={nu}, x={x})")));
    }
    if x >= 25.0 + nu * nu {
        let (j, y) = hankel_jy(nu, x);
        let (j1, y1) = hankel_jy(nu + 1.0, x);
        return Ok(BesselJY {
            j,
            y,
            jp: nu / x * j - j1,
            yp: nu / x * y - y1,
        });
    }
    let nl = if x < XMIN {
        (nu + 0.5) as usize
    } else {
        (nu - x + 1.5).max(0.0) as usize
    };
    let xmu = nu - nl as f64;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let w = xi2 / PI;

    // CF1 for f = J'_ν / J_ν (modified Lentz)
    let mut isign = 1.0;
    let mut h = (nu * xi).max(FPMIN);
    let mut b = xi2 * nu;
    let mut d = 0.0;
    let mut c = h;
    let mut converged = false;
    for _ in 0..MAXIT {
        b += xi2;
        d = b - d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b - 1.0 / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = c * d;
        h *= del;
        if d < 0.0 {
            isign = -isign;
        }
        if (del - 1.0).abs() < EPS {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LabError::domain(format!("bessel CF1 did not converge at x = {x}")));
    }

    // downward recurrence from ν to μ = ν - nl, unnormalised
    let mut rjl = isign * 1e-30;
    let mut rjpl = h * rjl;
    let rjl1 = rjl;
    let rjp1 = rjpl;
    let mut fact = nu * xi;
    for _ in 0..nl {
        let rjtemp = fact * rjl + rjpl;
        fact -= xi;
        rjpl = fact * rjtemp - rjl;
        rjl = rjtemp;
    }
    if rjl == 0.0 {
        rjl = EPS;
    }
    let f = rjpl / rjl;

    let (rjmu, mut rymu, mut ry1);
    if x < XMIN {
        let x2 = 0.5 * x;
        let pimu = PI * xmu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = xmu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
        let mut ff = 2.0 / PI * fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let e = e.exp();
        let mut p = e / (gampl * PI);
        let mut q = 1.0 / (e * PI * gammi);
        let pimu2 = 0.5 * pimu;
        let fact3 = if pimu2.abs() < EPS { 1.0 } else { pimu2.sin() / pimu2 };
        let r = PI * pimu2 * fact3 * fact3;
        let mut c = 1.0;
        let d = -x2 * x2;
        let mut sum = ff + r * q;
        let mut sum1 = p;
        let mut ok = false;
        for i in 1..MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - xmu2);
            c *= d / fi;
            p /= fi - xmu;
            q /= fi + xmu;
            let del = c * (ff + r * q);
            sum += del;
            let del1 = c * p - fi * del;
            sum1 += del1;
            if del.abs() < (1.0 + sum.abs()) * EPS {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(LabError::domain("bessel Temme series did not converge"));
        }
        rymu = -sum;
        ry1 = -sum1 * xi2;
        let rymup = xmu * xi * rymu - ry1;
        rjmu = w / (rymup - f * rymu);
    } else {
        // CF2: p + iq = (J'_μ + iY'_μ)/(J_μ + iY_μ)
        let mut a = 0.25 - xmu2;
        let mut p = -0.5 * xi;
        let mut q = 1.0;
        let br = 2.0 * x;
        let mut bi = 2.0;
        let mut fact = a * xi / (p * p + q * q);
        let mut cr = br + q * fact;
        let mut ci = bi + p * fact;
        let mut den = br * br + bi * bi;
        let mut dr = br / den;
        let mut di = -bi / den;
        let mut dlr = cr * dr - ci * di;
        let mut dli = cr * di + ci * dr;
        let mut temp = p * dlr - q * dli;
        q = p * dli + q * dlr;
        p = temp;
        let mut ok = false;
        for i in 2..MAXIT {
            a += 2.0 * (i as f64 - 1.0);
            bi += 2.0;
            dr = a * dr + br;
            di = a * di + bi;
            if dr.abs() + di.abs() < FPMIN {
                dr = FPMIN;
            }
            fact = a / (cr * cr + ci * ci);
            cr = br + cr * fact;
            ci = bi - ci * fact;
            if cr.abs() + ci.abs() < FPMIN {
                cr = FPMIN;
            }
            den = dr * dr + di * di;
            dr /= den;
            di /= -den;
            dlr = cr * dr - ci * di;
            dli = cr * di + ci * dr;
            temp = p * dlr - q * dli;
            q = p * dli + q * dlr;
            p = temp;
            if (dlr - 1.0).abs() + dli.abs() < EPS {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(LabError::domain(format!("bessel CF2 did not converge at x = {x}")));
        }
        let gam = (p - f) / q;
        let mag = (w / ((p - f) * gam + q)).sqrt();
        rjmu = if rjl < 0.0 { -mag } else { mag };
        rymu = rjmu * gam;
        let rymup = rymu * (p + q / gam);
        ry1 = xmu * xi * rymu - rymup;
    }

    let scale = rjmu / rjl;
    let j = rjl1 * scale;
    let jp = rjp1 * scale;
    for i in 1..=nl {
        let rytemp = (xmu + i as f64) * xi2 * ry1 - rymu;
        rymu = ry1;
        ry1 = rytemp;
    }
    Ok(BesselJY {
        j,
        y: rymu,
        jp,
        yp: nu * xi * rymu - ry1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reciprocal_gamma_series() {
        // Γ(1/2) = √π, Γ(3/2) = √π/2
        assert_relative_eq!(rgamma1p(-0.5), 1.0 / PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(rgamma1p(0.5), 2.0 / PI.sqrt(), max_relative = 1e-15);
        let (g1, g2, gp, gm) = temme_gammas(0.0);
        assert_relative_eq!(g1, -0.577_215_664_901_532_9, max_relative = 1e-15);
        assert_eq!((g2, gp, gm), (1.0, 1.0, 1.0));
    }

    #[test]
    fn half_integer_orders_match_elementary_forms() {
        for &x in &[0.1, 0.7, 1.9, 2.5, 10.0, 137.0, 1000.0] {
            let s = (2.0 / (PI * x)).sqrt();
            let r = bessel_jy(0.5, x).unwrap();
            assert_relative_eq!(r.j, s * x.sin(), epsilon = 1e-14 * s, max_relative = 1e-11);
            assert_relative_eq!(r.y, -s * x.cos(), epsilon = 1e-14 * s, max_relative = 1e-11);
            let r = bessel_jy(1.5, x).unwrap();
            let j15 = s * (x.sin() / x - x.cos());
            let y15 = -s * (x.cos() / x + x.sin());
            assert_relative_eq!(r.j, j15, epsilon = 1e-13 * s, max_relative = 1e-11);
            assert_relative_eq!(r.y, y15, epsilon = 1e-13 * s, max_relative = 1e-11);
        }
    }

    #[test]
    fn wronskian_identity() {
        for &nu in &[0.0, 0.25, 0.75, 1.0, 2.3, 7.5] {
            for &x in &[0.05, 0.9, 2.0, 5.5, 40.0, 800.0] {
                let r = bessel_jy(nu, x).unwrap();
                let w = r.j * r.yp - r.y * r.jp;
                assert_relative_eq!(w, 2.0 / (PI * x), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn reference_values() {
        // frozen from an independent arbitrary-precision evaluation
        let cases = [
            (0.25, 0.1, 0.520_657_875_630_456_76, -1.911_768_321_207_175_2),
            (0.25, 3.0, -0.100_637_064_336_731_27, 0.447_380_101_274_892_42),
            (0.25, 1010.0, -0.023_401_947_279_604_381, -0.009_092_052_128_062_941_3),
            (0.0, 1.0, 0.765_197_686_557_966_55, 0.088_256_964_215_676_958),
            (1.0, 2.5, 0.497_094_102_464_274_04, 0.145_918_137_966_785_8),
        ];
        for (nu, x, j, y) in cases {
            let r = bessel_jy(nu, x).unwrap();
            assert_relative_eq!(r.j, j, max_relative = 1e-11);
            assert_relative_eq!(r.y, y, max_relative = 1e-11);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(bessel_jy(0.5, 0.0).is_err());
        assert!(bessel_jy(-0.5, 1.0).is_err());
    }
}
