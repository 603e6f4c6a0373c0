//! Spectral parameters and fixed-step propagators.
//!
//! All systems are integrated with classical RK4 on a uniform grid. The
//! coefficients are sampled once per call at half-step nodes, which is what
//! RK4 needs and keeps the trig evaluation out of the inner loop.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, SMatrix, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientPair;
use crate::error::{Result, SpectralError};

pub type C64 = Complex64;

/// Primitive cube root of unity `e^{2 pi i / 3}`.
pub const OMEGA: C64 = C64::new(-0.5, 0.866_025_403_784_438_6);

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

const I: C64 = C64::new(0.0, 1.0);

/// A spectral parameter with its cube root and Schrödinger energy:
/// `lambda = z^3`, `E = 3 z^2 / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lambda: C64,
    pub z: C64,
    pub energy: C64,
}

impl SpectralPoint {
    /// Principal cube root, `arg z` in `(-pi/3, pi/3]`.
    pub fn from_lambda(lambda: C64) -> Self {
        let z = if lambda.norm() == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            C64::from_polar(lambda.norm().cbrt(), lambda.arg() / 3.0)
        };
        Self {
            lambda,
            z,
            energy: 0.75 * z * z,
        }
    }

    pub fn from_z(z: C64) -> Result<Self> {
        if z.norm() > 0.0 {
            let a = z.arg();
            if !(a > -PI / 3.0 - 1e-12 && a <= PI / 3.0 + 1e-12) {
                return Err(SpectralError::InvalidInput(format!(
                    "arg z = {a:.6} outside (-pi/3, pi/3]"
                )));
            }
        }
        Ok(Self::from_root(z))
    }

    /// Point with a prescribed root `z`, no sector check. Used on contours
    /// where `z` is continued across the principal sector.
    pub fn from_root(z: C64) -> Self {
        Self {
            lambda: z * z * z,
            z,
            energy: 0.75 * z * z,
        }
    }

    /// `lambda = ((4/3) E)^{3/2}` with the principal square root.
    pub fn from_energy(energy: C64) -> Self {
        let z = (energy * (4.0 / 3.0)).sqrt();
        Self {
            lambda: z * z * z,
            z,
            energy,
        }
    }
}

/// Grid resolution rules shared by the pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Floor on the number of RK4 steps per unit length.
    pub min_steps: usize,
    /// Extra steps per unit of `|z|`.
    pub steps_per_z: usize,
    /// Size of the shared periodic grid for the potential routes.
    pub potential_grid: usize,
    /// Initial contour samples for argument-principle counts.
    pub contour_samples: usize,
    /// Spectral finders refuse `psi` with `norm_h1` at or above this.
    pub smallness: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            min_steps: 1024,
            steps_per_z: 64,
            potential_grid: 2048,
            contour_samples: 256,
            smallness: crate::ramifications::SMALLNESS_THRESHOLD,
        }
    }
}

impl Numerics {
    pub fn check_regime(&self, psi: &CoefficientPair) -> Result<()> {
        let norm = psi.norm_h1();
        if norm < self.smallness {
            Ok(())
        } else {
            Err(SpectralError::OutsideRegime {
                norm,
                threshold: self.smallness,
            })
        }
    }

    /// `max(min_steps, steps_per_z * ceil|z|)` per unit length, rounded up
    /// to an even count.
    pub fn steps_for(&self, z_abs: f64) -> usize {
        let n = self.min_steps.max(self.steps_per_z * z_abs.ceil() as usize);
        n + n % 2
    }

    pub fn steps_for_point(&self, pt: &SpectralPoint) -> usize {
        self.steps_for(pt.z.norm())
    }

    /// Grid for the potential routes: the smallest multiple of
    /// `potential_grid` meeting the step rule.
    pub fn potential_steps(&self, z_abs: f64) -> usize {
        let need = self.steps_for(z_abs);
        need.div_ceil(self.potential_grid) * self.potential_grid
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_steps < 16 || self.potential_grid < 64 || self.contour_samples < 16 {
            return Err(SpectralError::InvalidInput("numerics grid too coarse".into()));
        }
        if !self.potential_grid.is_multiple_of(4) {
            return Err(SpectralError::InvalidInput(
                "potential_grid must be a multiple of 4".into(),
            ));
        }
        Ok(())
    }
}

/// Which first-order form of the third-order problem to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    /// `(y'' + p y)' + p y' + q y = lambda y`.
    Direct,
    /// The same operator with `q -> -q`, `lambda -> -lambda`.
    Transpose,
    /// `c' = -A^T c`, propagating cross products of direct solutions.
    Adjoint,
    /// `c' = -A~^T c` for the transpose system.
    TransposeAdjoint,
}

/// Fundamental matrix of a 3x3 system on a uniform grid. Column `j` of
/// `phi[k]` is `(phi_j, phi_j', phi_j^[2])` at `x[k]`.
#[derive(Debug, Clone)]
pub struct Trajectory3 {
    pub x: Vec<f64>,
    pub phi: Vec<Matrix3<C64>>,
}

impl Trajectory3 {
    pub fn last(&self) -> &Matrix3<C64> {
        self.phi.last().expect("trajectory is never empty")
    }

    pub fn step(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// State at the grid node closest to `x`; `x` must be a node.
    pub fn at(&self, x: f64) -> Result<&Matrix3<C64>> {
        let k = grid_index(&self.x, x)?;
        Ok(&self.phi[k])
    }
}

/// Fundamental matrix of `f'' = (V - E) f`; columns `(theta, theta')` and
/// `(phi, phi')`.
#[derive(Debug, Clone)]
pub struct Trajectory2 {
    pub x: Vec<f64>,
    pub psi: Vec<Matrix2<C64>>,
}

impl Trajectory2 {
    pub fn last(&self) -> &Matrix2<C64> {
        self.psi.last().expect("trajectory is never empty")
    }
}

fn grid_index(xs: &[f64], x: f64) -> Result<usize> {
    let h = xs[1] - xs[0];
    let k = (x / h).round();
    if k < 0.0 || k as usize >= xs.len() || (k * h - x).abs() > 1e-9 * h.max(1.0) {
        return Err(SpectralError::InvalidInput(format!("x = {x} is not a grid node")));
    }
    Ok(k as usize)
}

/// `p`, `q` at the nodes `k h / 2`, `k = 0..=2 steps`.
fn half_step_samples(psi: &CoefficientPair, x_end: f64, steps: usize) -> (Vec<C64>, Vec<C64>) {
    let hh = 0.5 * x_end / steps as f64;
    // Periodic coefficients: sample one period and reuse when the grid
    // divides it evenly.
    let per_unit = (2.0 * steps as f64 / x_end).round() as usize;
    let divides = ((per_unit as f64) * hh - 1.0).abs() < 1e-12 && per_unit > 0;
    if divides && x_end > 1.0 {
        let pp = psi.p.sample(hh, per_unit);
        let qq = psi.q.sample(hh, per_unit);
        let p = (0..=2 * steps).map(|k| pp[k % per_unit]).collect();
        let q = (0..=2 * steps).map(|k| qq[k % per_unit]).collect();
        (p, q)
    } else {
        (psi.p.sample(hh, 2 * steps), psi.q.sample(hh, 2 * steps))
    }
}

fn coefficient_matrix(system: System, p: C64, q: C64, lambda: C64) -> Matrix3<C64> {
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    match system {
        System::Direct => Matrix3::new(zero, one, zero, -p, zero, one, lambda - q, -p, zero),
        System::Transpose => Matrix3::new(zero, one, zero, -p, zero, one, q - lambda, -p, zero),
        // -A^T
        System::Adjoint => Matrix3::new(zero, p, q - lambda, -one, zero, p, zero, -one, zero),
        System::TransposeAdjoint => {
            Matrix3::new(zero, p, lambda - q, -one, zero, p, zero, -one, zero)
        }
    }
}

/// RK4 for `Y' = A(x) Y`; `a(k)` gives `A` at half-step node `k`.
fn rk4<const N: usize, const M: usize>(
    a: impl Fn(usize) -> SMatrix<C64, N, N>,
    y0: SMatrix<C64, N, M>,
    h: f64,
    steps: usize,
    mut visit: impl FnMut(usize, &SMatrix<C64, N, M>),
) -> SMatrix<C64, N, M> {
    let mut y = y0;
    // Kahan compensation for the running sum of increments.
    let mut comp = SMatrix::<C64, N, M>::zeros();
    visit(0, &y);
    let half = C64::new(0.5 * h, 0.0);
    let full = C64::new(h, 0.0);
    let sixth = C64::new(h / 6.0, 0.0);
    for k in 0..steps {
        let a0 = a(2 * k);
        let am = a(2 * k + 1);
        let a1 = a(2 * k + 2);
        let k1 = a0 * y;
        let k2 = am * (y + k1 * half);
        let k3 = am * (y + k2 * half);
        let k4 = a1 * (y + k3 * full);
        let inc = (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * sixth - comp;
        let next = y + inc;
        comp = (next - y) - inc;
        y = next;
        visit(k + 1, &y);
    }
    y
}

fn check_finite<const N: usize, const M: usize>(y: &SMatrix<C64, N, M>, z_abs: f64, steps: usize) -> Result<()> {
    if y.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(SpectralError::NonFinite { z_abs, steps })
    }
}

fn check_args(x_end: f64, steps: usize) -> Result<()> {
    if !(x_end > 0.0 && x_end.is_finite()) || steps == 0 {
        return Err(SpectralError::InvalidInput(format!(
            "bad propagation range x_end = {x_end}, steps = {steps}"
        )));
    }
    Ok(())
}

/// Propagator of `system` from 0 to `x_end`, endpoint only.
pub fn propagate_terminal(
    psi: &CoefficientPair,
    pt: &SpectralPoint,
    system: System,
    x_end: f64,
    steps: usize,
) -> Result<Matrix3<C64>> {
    check_args(x_end, steps)?;
    let (p, q) = half_step_samples(psi, x_end, steps);
    let y = rk4(
        |k| coefficient_matrix(system, p[k], q[k], pt.lambda),
        Matrix3::identity(),
        x_end / steps as f64,
        steps,
        |_, _| {},
    );
    check_finite(&y, pt.z.norm(), steps)?;
    Ok(y)
}

/// Endpoint propagator together with its inverse and determinant, all for
/// the same discrete scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretePropagator {
    pub forward: Matrix3<C64>,
    /// Product of inverted RK4 step matrices; each step matrix is close to
    /// the identity, so no conditioning is lost however large `forward` is.
    pub inverse: Matrix3<C64>,
    /// Product of step-matrix determinants.
    pub det: C64,
}

/// Propagates `system` by explicit RK4 step matrices `S_k`, accumulating
/// `prod S_k`, `prod S_k^{-1}` and `prod det S_k`.
pub fn propagate_with_inverse(
    psi: &CoefficientPair,
    pt: &SpectralPoint,
    system: System,
    x_end: f64,
    steps: usize,
) -> Result<DiscretePropagator> {
    check_args(x_end, steps)?;
    let (p, q) = half_step_samples(psi, x_end, steps);
    let h = x_end / steps as f64;
    let id = Matrix3::<C64>::identity();
    let half = C64::new(0.5 * h, 0.0);
    let full = C64::new(h, 0.0);
    let sixth = C64::new(h / 6.0, 0.0);
    let mut forward = id;
    let mut inverse = id;
    let mut det = C64::new(1.0, 0.0);
    for k in 0..steps {
        let a0 = coefficient_matrix(system, p[2 * k], q[2 * k], pt.lambda);
        let am = coefficient_matrix(system, p[2 * k + 1], q[2 * k + 1], pt.lambda);
        let a1 = coefficient_matrix(system, p[2 * k + 2], q[2 * k + 2], pt.lambda);
        let k1 = a0;
        let k2 = am * (id + k1 * half);
        let k3 = am * (id + k2 * half);
        let k4 = a1 * (id + k3 * full);
        let step = id + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * sixth;
        let step_inv = step.try_inverse().ok_or(SpectralError::NonFinite {
            z_abs: pt.z.norm(),
            steps,
        })?;
        forward = step * forward;
        inverse *= step_inv;
        det *= step.determinant();
    }
    check_finite(&forward, pt.z.norm(), steps)?;
    check_finite(&inverse, pt.z.norm(), steps)?;
    Ok(DiscretePropagator { forward, inverse, det })
}

/// Full trajectory of `system` on `steps + 1` nodes of `[0, x_end]`.
pub fn propagate(
    psi: &CoefficientPair,
    pt: &SpectralPoint,
    system: System,
    x_end: f64,
    steps: usize,
) -> Result<Trajectory3> {
    check_args(x_end, steps)?;
    let (p, q) = half_step_samples(psi, x_end, steps);
    let h = x_end / steps as f64;
    let mut phi = Vec::with_capacity(steps + 1);
    let y = rk4(
        |k| coefficient_matrix(system, p[k], q[k], pt.lambda),
        Matrix3::identity(),
        h,
        steps,
        |_, y| phi.push(*y),
    );
    check_finite(&y, pt.z.norm(), steps)?;
    let x = (0..=steps).map(|k| k as f64 * h).collect();
    Ok(Trajectory3 { x, phi })
}

/// Integrates a single state of `system` backward from `x_end`, where it
/// equals `y_end`, to 0. Entry `k` of the result is the state at `k h`.
///
/// Solutions built from the subdominant multipliers are stable in this
/// direction only.
pub fn propagate_state_backward(
    psi: &CoefficientPair,
    pt: &SpectralPoint,
    system: System,
    x_end: f64,
    steps: usize,
    y_end: Vector3<C64>,
) -> Result<Vec<Vector3<C64>>> {
    check_args(x_end, steps)?;
    let (p, q) = half_step_samples(psi, x_end, steps);
    let last = 2 * steps;
    let mut states = Vec::with_capacity(steps + 1);
    let y = rk4(
        |k| -coefficient_matrix(system, p[last - k], q[last - k], pt.lambda),
        y_end,
        x_end / steps as f64,
        steps,
        |_, y| states.push(*y),
    );
    check_finite(&y, pt.z.norm(), steps)?;
    states.reverse();
    Ok(states)
}

/// Integrates a single state of `system` forward from `y0` at 0. Entry `k`
/// of the result is the state at `k h`.
pub fn propagate_state_forward(
    psi: &CoefficientPair,
    pt: &SpectralPoint,
    system: System,
    x_end: f64,
    steps: usize,
    y0: Vector3<C64>,
) -> Result<Vec<Vector3<C64>>> {
    check_args(x_end, steps)?;
    let (p, q) = half_step_samples(psi, x_end, steps);
    let mut states = Vec::with_capacity(steps + 1);
    let y = rk4(
        |k| coefficient_matrix(system, p[k], q[k], pt.lambda),
        y0,
        x_end / steps as f64,
        steps,
        |_, y| states.push(*y),
    );
    check_finite(&y, pt.z.norm(), steps)?;
    Ok(states)
}

pub fn propagate_third_order(
    psi: &CoefficientPair,
    pt: &SpectralPoint,
    x_end: f64,
    steps: usize,
) -> Result<Trajectory3> {
    propagate(psi, pt, System::Direct, x_end, steps)
}

pub fn propagate_transpose(
    psi: &CoefficientPair,
    pt: &SpectralPoint,
    x_end: f64,
    steps: usize,
) -> Result<Trajectory3> {
    propagate(psi, pt, System::Transpose, x_end, steps)
}

/// A potential that can be evaluated at arbitrary points of a period.
pub trait Potential: Sync {
    fn value(&self, x: f64) -> C64;
}

impl<F: Fn(f64) -> C64 + Sync> Potential for F {
    fn value(&self, x: f64) -> C64 {
        self(x)
    }
}

/// One-periodic potential sampled on `x_k = k / N`, `k = 0..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPotential {
    pub values: Vec<C64>,
}

impl SampledPotential {
    pub fn new(values: Vec<C64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Potential for SampledPotential {
    /// Exact at grid nodes, 4-point periodic Lagrange interpolation between.
    fn value(&self, x: f64) -> C64 {
        let n = self.values.len();
        let s = x.rem_euclid(1.0) * n as f64;
        let k = s.round();
        if (s - k).abs() < 1e-9 {
            return self.values[(k as usize) % n];
        }
        let k0 = s.floor() as isize;
        let t = s - k0 as f64;
        let at = |j: isize| self.values[(k0 + j).rem_euclid(n as isize) as usize];
        let (f0, f1, f2, f3) = (at(-1), at(0), at(1), at(2));
        let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        f0 * w0 + f1 * w1 + f2 * w2 + f3 * w3
    }
}

/// Fundamental matrix of `f'' = (V - E) f` with identity initial data.
pub fn propagate_schrodinger(
    v: &dyn Potential,
    energy: C64,
    x_end: f64,
    steps: usize,
) -> Result<Trajectory2> {
    check_args(x_end, steps)?;
    let h = x_end / steps as f64;
    let vh: Vec<C64> = (0..=2 * steps).map(|k| v.value(0.5 * h * k as f64)).collect();
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let mut psi = Vec::with_capacity(steps + 1);
    let y = rk4(
        |k| Matrix2::new(zero, one, vh[k] - energy, zero),
        Matrix2::identity(),
        h,
        steps,
        |_, y| psi.push(*y),
    );
    check_finite(&y, energy.norm().sqrt(), steps)?;
    let x = (0..=steps).map(|k| k as f64 * h).collect();
    Ok(Trajectory2 { x, psi })
}

/// Unperturbed multiplier exponents `k_j = omega^j z`.
pub fn free_exponents(z: C64) -> [C64; 3] {
    [OMEGA * z, OMEGA * OMEGA * z, z]
}

/// `i sqrt(3) z`, the spacing of the free exponents.
pub fn free_gap(z: C64) -> C64 {
    I * SQRT3 * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::TrigSeries;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Roots of `k^3 + 2 p0 k - lambda` by companion-free Newton from the
    /// free exponents; adequate for small `p0`.
    fn constant_exponents(p0: f64, lambda: C64) -> [C64; 3] {
        let z = SpectralPoint::from_lambda(lambda).z;
        free_exponents(z).map(|mut k| {
            for _ in 0..60 {
                let f = k * k * k + 2.0 * p0 * k - lambda;
                let df = 3.0 * k * k + 2.0 * p0;
                k -= f / df;
            }
            k
        })
    }

    #[test]
    fn backward_state_retraces_forward() {
        let psi = CoefficientPair::new(TrigSeries::cos_mode(1, 0.05), TrigSeries::sin_mode(1, 0.03));
        let pt = SpectralPoint::from_lambda(C64::new(30.0, 2.0));
        let fwd = propagate(&psi, &pt, System::Direct, 2.0, 4096).unwrap();
        let y0 = Vector3::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(-0.5, 0.2));
        let back = propagate_state_backward(&psi, &pt, System::Direct, 2.0, 4096, fwd.last() * y0).unwrap();
        assert_eq!(back.len(), fwd.phi.len());
        for (b, m) in back.iter().zip(&fwd.phi).step_by(97) {
            let f = m * y0;
            assert!((b - f).norm() < 1e-9 * f.norm().max(1.0), "{b} vs {f}");
        }
    }

    #[test]
    fn point_conversions() {
        let pt = SpectralPoint::from_lambda(C64::new(8.0, 0.0));
        assert_abs_diff_eq!(pt.z.re, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pt.energy.re, 3.0, epsilon = 1e-14);

        let neg = SpectralPoint::from_lambda(C64::new(-8.0, 0.0));
        assert_abs_diff_eq!(neg.z.arg(), PI / 3.0, epsilon = 1e-14);

        let e = SpectralPoint::from_energy(C64::new(3.0, 0.0));
        assert_abs_diff_eq!(e.lambda.re, 8.0, epsilon = 1e-12);
        assert!(SpectralPoint::from_z(C64::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn free_direct_system_matches_exponentials() {
        // psi = 0: solutions e^{k x}, k^3 = lambda.
        let psi = CoefficientPair::zero();
        for &lam in &[C64::new(1.0, 0.0), C64::new(20.0, 5.0), C64::new(-3.0, 1.0)] {
            let pt = SpectralPoint::from_lambda(lam);
            let p = propagate_terminal(&psi, &pt, System::Direct, 1.0, 2048).unwrap();
            let trace: C64 = free_exponents(pt.z).iter().map(|k| k.exp()).sum();
            assert!((p.trace() - trace).norm() < 1e-10 * trace.norm().max(1.0));
        }
    }

    #[test]
    fn constant_p_trace_matches_exponent_oracle() {
        let p0 = -0.1;
        let psi = CoefficientPair::new(TrigSeries::constant(p0), TrigSeries::zero());
        let lam = C64::new(30.0, 2.0);
        let pt = SpectralPoint::from_lambda(lam);
        let m = propagate_terminal(&psi, &pt, System::Direct, 1.0, 2048).unwrap();
        let oracle: C64 = constant_exponents(p0, lam).iter().map(|k| k.exp()).sum();
        assert!((m.trace() - oracle).norm() < 1e-10 * oracle.norm());
    }

    #[test]
    fn adjoint_is_inverse_transpose() {
        let psi = CoefficientPair::new(
            TrigSeries::real(0.02, &[0.05], &[0.01]),
            TrigSeries::real(0.0, &[0.0, 0.03], &[0.02]),
        );
        let pt = SpectralPoint::from_lambda(C64::new(5.0, 1.0));
        let p = propagate_terminal(&psi, &pt, System::Direct, 1.0, 1024).unwrap();
        let q = propagate_terminal(&psi, &pt, System::Adjoint, 1.0, 1024).unwrap();
        let prod = q.transpose() * p;
        assert!((prod - Matrix3::identity()).norm() < 1e-10);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let psi = CoefficientPair::new(TrigSeries::cos_mode(1, 0.3), TrigSeries::sin_mode(2, 0.2));
        let pt = SpectralPoint::from_lambda(C64::new(40.0, 0.0));
        let fine = propagate_terminal(&psi, &pt, System::Direct, 1.0, 4096).unwrap();
        let e1 = (propagate_terminal(&psi, &pt, System::Direct, 1.0, 64).unwrap() - fine).norm();
        let e2 = (propagate_terminal(&psi, &pt, System::Direct, 1.0, 128).unwrap() - fine).norm();
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn schrodinger_free_solutions() {
        let e = C64::new(2.5, 0.0);
        let k = e.sqrt();
        let zero = |_: f64| C64::new(0.0, 0.0);
        let tr = propagate_schrodinger(&zero, e, 1.0, 512).unwrap();
        let m = tr.last();
        assert!((m[(0, 0)] - k.cos()).norm() < 1e-11);
        assert!((m[(0, 1)] - k.sin() / k).norm() < 1e-11);
    }

    #[test]
    fn sampled_potential_interpolates() {
        let n = 256;
        let values = (0..n)
            .map(|k| C64::new((2.0 * PI * k as f64 / n as f64).cos(), 0.0))
            .collect();
        let v = SampledPotential::new(values);
        assert_eq!(v.value(0.25), v.values[64]);
        let x = 0.1234;
        assert!((v.value(x).re - (2.0 * PI * x).cos()).abs() < 1e-7);
    }

    #[test]
    fn step_rule() {
        let nm = Numerics::default();
        assert_eq!(nm.steps_for(3.0), 1024);
        assert_eq!(nm.steps_for(30.5), 64 * 31);
        assert_eq!(nm.potential_steps(5.0), 2048);
        assert_eq!(nm.potential_steps(40.0), 4096);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// det Phi(1) = 1 (trace-free system) in the well-conditioned range.
        #[test]
        fn wronskian_is_one(
            a in -0.3..0.3f64, b in -0.3..0.3f64, c in -0.3..0.3f64,
            re in -60.0..60.0f64, im in -60.0..60.0f64,
        ) {
            let psi = CoefficientPair::new(
                TrigSeries::real(0.0, &[a], &[b]),
                TrigSeries::real(c, &[0.0, b], &[]),
            );
            let pt = SpectralPoint::from_lambda(C64::new(re, im));
            let nm = Numerics::default();
            let p = propagate_terminal(&psi, &pt, System::Direct, 1.0, nm.steps_for_point(&pt)).unwrap();
            prop_assert!((p.determinant() - 1.0).norm() < 1e-8);
        }
    }
}
