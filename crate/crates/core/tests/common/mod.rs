//! Coefficient corpus and closed-form oracles shared by the integration
//! tests. Oracles are written out here rather than taken from the library.

#![allow(dead_code)]

use std::f64::consts::PI;

use mckean::{CoefficientPair, TrigSeries, C64};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

pub fn omega() -> C64 {
    C64::new(-0.5, 0.5 * SQRT3)
}

pub fn cos_p() -> CoefficientPair {
    CoefficientPair::new(TrigSeries::cos_mode(1, 0.05), TrigSeries::zero())
}

pub fn sin_q() -> CoefficientPair {
    CoefficientPair::new(TrigSeries::zero(), TrigSeries::sin_mode(1, 0.05))
}

pub fn mixed() -> CoefficientPair {
    CoefficientPair::new(
        TrigSeries::real(0.0, &[0.05], &[0.0, 0.01]),
        TrigSeries::sin_mode(1, 0.03),
    )
}

pub fn constant_p(p0: f64) -> CoefficientPair {
    CoefficientPair::new(TrigSeries::constant(p0), TrigSeries::zero())
}

/// The two coefficient pairs of the correspondence checks.
pub fn corpus() -> Vec<(&'static str, CoefficientPair)> {
    vec![("p=0.05cos", cos_p()), ("q=0.05sin", sin_q())]
}

/// `prod_j sin(sqrt3 omega^j z / 2)`.
pub fn sine_product(z: C64) -> C64 {
    let w = omega();
    [C64::new(1.0, 0.0), w, w * w]
        .iter()
        .map(|wj| (0.5 * SQRT3 * wj * z).sin())
        .product()
}

/// Free discriminant `-64 prod sin^2`.
pub fn free_rho(z: C64) -> C64 {
    let s = sine_product(z);
    -64.0 * s * s
}

/// Free three-point determinant `+8/(3 sqrt3 lambda) prod sin`.
pub fn free_bdet(z: C64) -> C64 {
    8.0 / (3.0 * SQRT3 * z * z * z) * sine_product(z)
}

/// `(2 pi n / sqrt3)^3`.
pub fn free_double(n: i64) -> f64 {
    (2.0 * PI * n as f64 / SQRT3).powi(3)
}

/// Roots of `k^3 + 2 p0 k - lambda` by Durand-Kerner.
pub fn constant_exponents(p0: f64, lambda: C64) -> [C64; 3] {
    let f = |k: C64| k * k * k + 2.0 * p0 * k - lambda;
    let seed = C64::new(0.4, 0.9);
    let mut r = [C64::new(1.0, 0.0), seed, seed * seed];
    let scale = 1.0 + lambda.norm().cbrt();
    for x in r.iter_mut() {
        *x *= scale;
    }
    for _ in 0..500 {
        let prev = r;
        for i in 0..3 {
            let mut den = C64::new(1.0, 0.0);
            for j in 0..3 {
                if j != i {
                    den *= r[i] - r[j];
                }
            }
            r[i] -= f(r[i]) / den;
        }
        if r.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15 * scale) {
            break;
        }
    }
    r
}

/// Largest distance from a member of `want` to the nearest member of
/// `got`, relative to `max(1, |want|)`.
pub fn set_distance(got: &[C64], want: &[C64]) -> f64 {
    want.iter()
        .map(|w| {
            got.iter().map(|g| (g - w).norm()).fold(f64::INFINITY, f64::min) / w.norm().max(1.0)
        })
        .fold(0.0, f64::max)
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

/// `(3/4) r^{2/3}`.
pub fn energy_of(r: C64) -> C64 {
    0.75 * r.powf(2.0 / 3.0)
}

/// Distance of `x` outside the real interval spanned by `a`, `b`.
pub fn outside(x: C64, a: C64, b: C64) -> f64 {
    let (lo, hi) = (a.re.min(b.re), a.re.max(b.re));
    (lo - x.re).max(x.re - hi).max(0.0).hypot(x.im)
}

/// Deterministic spectral parameters: `count` points with `|z| <= z_max`,
/// alternating between real `lambda` (both signs) and complex `lambda`.
pub fn lambda_corpus(count: usize, z_max: f64) -> Vec<C64> {
    (0..count)
        .map(|k| {
            let r = 0.5 + (z_max - 0.5) * ((k * 37) % count) as f64 / (count - 1) as f64;
            let theta = match k % 4 {
                0 => 0.0,
                1 => PI / 3.0,
                2 => 0.2 + 0.6 * ((k * 13) % 17) as f64 / 16.0,
                _ => -0.2 - 0.6 * ((k * 7) % 11) as f64 / 10.0,
            };
            C64::from_polar(r, theta).powi(3)
        })
        .collect()
}
