//! Argument-principle machinery on closed contours.
//!
//! Zeros are counted by unwrapping `arg f` along the contour, bisecting any
//! sample interval whose phase step exceeds `pi/2`. Their power sums come
//! from the same samples: with `L(theta)` the unwrapped `log f` and `N`
//! the winding, `L - i N theta` is periodic, so
//!
//! `sum_j w_j^k = (1/2 pi i) [ -k oint w^{k-1} (L - i N theta) dw + i N oint w^k dtheta ]`
//!
//! and the trapezoid rule converges geometrically.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectralError};
use crate::ode::{C64, SQRT3};

/// Hard cap on contour evaluations per count.
pub const MAX_CONTOUR_POINTS: usize = 1 << 14;

/// Relative `|f|` dip that signals a zero on the contour.
pub const DIP_TOL: f64 = 1e-8;

/// A closed curve parameterized over `theta in [0, 2 pi)`.
pub trait Contour: Sync {
    /// Point and tangent `d lambda / d theta`.
    fn at(&self, theta: f64) -> (C64, C64);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: C64,
    pub radius: f64,
}

impl Contour for Circle {
    fn at(&self, theta: f64) -> (C64, C64) {
        let e = C64::from_polar(1.0, theta);
        (self.center + e * self.radius, C64::new(0.0, self.radius) * e)
    }
}

/// The localization domain with index `n`: `|z - 2 pi n / sqrt3| < 1` for
/// `n > 0`, its mirror image `-D_{|n|}` for `n < 0`, and `|lambda| < 1`
/// for `n = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiskSpec {
    pub n: i64,
}

impl DiskSpec {
    pub fn new(n: i64) -> Self {
        Self { n }
    }

    /// Centre of the `z`-chart disk, `2 pi |n| / sqrt3`.
    pub fn z_center(&self) -> f64 {
        2.0 * PI * self.n.unsigned_abs() as f64 / SQRT3
    }

    pub fn center_lambda(&self) -> C64 {
        C64::new(self.n.signum() as f64 * self.z_center().powi(3), 0.0)
    }

    pub fn contains(&self, lambda: C64) -> bool {
        if self.n == 0 {
            return lambda.norm() < 1.0;
        }
        let l = if self.n > 0 { lambda } else { -lambda };
        // Principal cube root; the disk lies well inside the sector.
        let z = C64::from_polar(l.norm().cbrt(), l.arg() / 3.0);
        (z - self.z_center()).norm() < 1.0
    }

    /// Typical `|lambda|` in the disk, for tolerances scaled by `1 + |lambda|`.
    pub fn scale(&self) -> f64 {
        1.0 + self.center_lambda().norm()
    }
}

impl Contour for DiskSpec {
    fn at(&self, theta: f64) -> (C64, C64) {
        if self.n == 0 {
            let e = C64::from_polar(1.0, theta);
            return (e, C64::new(0.0, 1.0) * e);
        }
        let e = C64::from_polar(1.0, theta);
        let z = C64::new(self.z_center(), 0.0) + e;
        let dz = C64::new(0.0, 1.0) * e;
        let s = self.n.signum() as f64;
        (z * z * z * s, z * z * dz * (3.0 * s))
    }
}

/// Uniform samples of `f` on a contour with the unwrapped logarithm.
#[derive(Debug, Clone)]
pub struct ContourSamples {
    pub lambda: Vec<C64>,
    pub dlambda: Vec<C64>,
    /// Continuous branch of `log f` at the uniform nodes.
    pub log: Vec<C64>,
    pub winding: i64,
    /// Total evaluations, refinement included.
    pub evaluations: usize,
    pub max_abs: f64,
}

/// Phase increment `arg(b / a)` in `(-pi, pi]`.
fn phase_step(a: C64, b: C64) -> f64 {
    (b / a).arg()
}

struct Refiner<'a, F> {
    f: &'a F,
    contour: &'a dyn Contour,
    evaluations: usize,
    budget: usize,
    dip: f64,
}

impl<F> Refiner<'_, F>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    /// Phase change from `theta_a` to `theta_b`, bisecting until every step
    /// is below `pi/2`.
    fn phase(&mut self, ta: f64, fa: C64, tb: f64, fb: C64, depth: u32) -> Result<f64> {
        let step = phase_step(fa, fb);
        if step.abs() <= PI / 2.0 {
            return Ok(step);
        }
        if depth > 40 || self.evaluations >= self.budget {
            return Err(SpectralError::NonConvergent {
                what: "contour phase unwrapping",
                detail: format!("more than {} evaluations", self.budget),
            });
        }
        let tm = 0.5 * (ta + tb);
        let (lm, _) = self.contour.at(tm);
        let fm = (self.f)(lm)?;
        self.evaluations += 1;
        if !(fm.norm() >= self.dip) {
            return Err(SpectralError::ZeroOnContour { at: lm });
        }
        Ok(self.phase(ta, fa, tm, fm, depth + 1)? + self.phase(tm, fm, tb, fb, depth + 1)?)
    }
}

/// Samples `f` at `samples` uniform nodes and unwraps its logarithm.
pub fn sample_contour<F>(f: &F, contour: &dyn Contour, samples: usize) -> Result<ContourSamples>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    sample_with_budget(f, contour, samples, MAX_CONTOUR_POINTS)
}

fn sample_with_budget<F>(f: &F, contour: &dyn Contour, samples: usize, budget: usize) -> Result<ContourSamples>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    if samples < 8 {
        return Err(SpectralError::InvalidInput("at least 8 contour samples".into()));
    }
    let h = 2.0 * PI / samples as f64;
    let nodes: Vec<(C64, C64)> = (0..samples).map(|k| contour.at(k as f64 * h)).collect();
    let values: Vec<C64> = nodes
        .par_iter()
        .map(|&(l, _)| f(l))
        .collect::<Result<Vec<_>>>()?;
    if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(SpectralError::NonFinite {
            z_abs: nodes.iter().map(|n| n.0.norm().cbrt()).fold(0.0, f64::max),
            steps: 0,
        });
    }
    let max_abs = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let dip = DIP_TOL * max_abs;
    if let Some(k) = values.iter().position(|v| !(v.norm() >= dip) || v.norm() == 0.0) {
        return Err(SpectralError::ZeroOnContour { at: nodes[k].0 });
    }
    let mut refiner = Refiner {
        f,
        contour,
        evaluations: samples,
        budget,
        dip,
    };
    let mut log = Vec::with_capacity(samples);
    let mut phase = values[0].arg();
    log.push(C64::new(values[0].norm().ln(), phase));
    for k in 0..samples {
        let next = (k + 1) % samples;
        phase += refiner.phase(k as f64 * h, values[k], (k + 1) as f64 * h, values[next], 0)?;
        if next != 0 {
            log.push(C64::new(values[next].norm().ln(), phase));
        }
    }
    let total = phase - values[0].arg();
    let winding = (total / (2.0 * PI)).round();
    if (total - 2.0 * PI * winding).abs() > 1e-6 {
        return Err(SpectralError::NonConvergent {
            what: "contour phase unwrapping",
            detail: format!("total phase {total} is not a multiple of 2 pi"),
        });
    }
    Ok(ContourSamples {
        lambda: nodes.iter().map(|n| n.0).collect(),
        dlambda: nodes.iter().map(|n| n.1).collect(),
        log,
        winding: winding as i64,
        evaluations: refiner.evaluations,
        max_abs,
    })
}

/// Winding number of `f` along `contour`.
pub fn winding_number<F>(f: &F, contour: &dyn Contour, samples: usize) -> Result<i64>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    Ok(sample_contour(f, contour, samples)?.winding)
}

pub fn count_zeros_in_disk<F>(f: &F, disk: &DiskSpec, samples: usize) -> Result<i64>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    winding_number(f, disk, samples)
}

/// Power sums `sum_j (w_j - shift)^k`, `k = 1..=kmax`, over the enclosed zeros.
pub fn power_sums(s: &ContourSamples, shift: C64, kmax: usize) -> Vec<C64> {
    let m = s.lambda.len();
    let h = 2.0 * PI / m as f64;
    let n = s.winding as f64;
    let two_pi_i = C64::new(0.0, 2.0 * PI);
    (1..=kmax)
        .map(|k| {
            let mut a = C64::new(0.0, 0.0);
            let mut b = C64::new(0.0, 0.0);
            for j in 0..m {
                let theta = j as f64 * h;
                let w = s.lambda[j] - shift;
                let periodic = s.log[j] - C64::new(0.0, n * theta);
                a += w.powu(k as u32 - 1) * periodic * s.dlambda[j];
                b += w.powu(k as u32);
            }
            (-(k as f64) * a * h + C64::new(0.0, n) * b * h) / two_pi_i
        })
        .collect()
}

/// The two zeros enclosed by a contour, from their first two power sums.
pub fn zero_pair(s: &ContourSamples, shift: C64) -> [C64; 2] {
    let p = power_sums(s, shift, 2);
    let sum = p[0];
    let prod = 0.5 * (sum * sum - p[1]);
    let d = (sum * sum - 4.0 * prod).sqrt();
    [shift + 0.5 * (sum - d), shift + 0.5 * (sum + d)]
}

/// The single enclosed zero.
pub fn single_zero(s: &ContourSamples, shift: C64) -> C64 {
    shift + power_sums(s, shift, 1)[0]
}
