//! Three-point Dirichlet problems `y(0) = y(1) = y(2) = 0` for the direct
//! and transpose operators: determinants, eigenvalues, eigenfunctions and
//! norming constants.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientPair;
use crate::contour::{sample_contour, single_zero, DiskSpec};
use crate::error::{Result, SpectralError};
use crate::monodromy::{monodromy_matrix, select_tau3};
use crate::ode::{
    propagate, propagate_state_backward, propagate_state_forward, propagate_with_inverse, Numerics, SpectralPoint, System, C64, OMEGA, SQRT3,
};

/// Smallest admissible `|y'(0)|` of the unit eigenvector before normalization.
pub const MIN_SLOPE: f64 = 1e-8;

/// Tolerance on `|arg tau_3|` for the positive square root in `h_sn`.
pub const BRANCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Direct,
    Transpose,
}

impl Which {
    pub fn system(self) -> System {
        match self {
            Which::Direct => System::Direct,
            Which::Transpose => System::Transpose,
        }
    }
}

/// Samples of an eigenfunction and its quasi-derivatives on `[0, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenfunction {
    pub x: Vec<f64>,
    pub y: Vec<C64>,
    pub y1: Vec<C64>,
    pub y2: Vec<C64>,
}

impl Eigenfunction {
    fn node(&self, x: f64) -> usize {
        let h = self.x[1] - self.x[0];
        (x / h).round() as usize
    }

    /// `max |y(x_k)|` over `x_k` in `{0, 1, 2}`, relative to `max |y|`.
    pub fn boundary_residual(&self) -> f64 {
        let scale = self.y.iter().map(|c| c.norm()).fold(0.0, f64::max);
        [0.0, 1.0, 2.0]
            .iter()
            .map(|&x| self.y[self.node(x)].norm())
            .fold(0.0, f64::max)
            / scale
    }

    /// `max |y(x + 1) - A y(x)| / max |y|` over the first period.
    pub fn floquet_residual(&self, a: C64) -> f64 {
        let scale = self.y.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let shift = self.node(1.0);
        (0..=shift)
            .map(|k| (self.y[k + shift] - a * self.y[k]).norm())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn slope_at(&self, x: f64) -> C64 {
        self.y1[self.node(x)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreePointEig {
    pub n: i64,
    pub mu: C64,
    pub which: Which,
    pub eigenfunction: Eigenfunction,
    /// Multiplier `A` with `y(x + 1) = A y(x)`.
    pub floquet_a: C64,
    /// `|B(mu)|` relative to `max |B|` on the disk boundary.
    pub residual: f64,
}

/// `B(lambda) = phi_2(1) phi_3(2) - phi_3(1) phi_2(2)`.
///
/// With `P = Phi(1)` and `Phi(2) = P^2` this equals
/// `det P (P_12 (P^{-1})_13 - P_13 (P^{-1})_12)`, which avoids the
/// `e^{3z}`-sized terms of the direct expansion.
pub fn three_point_determinant(psi: &CoefficientPair, pt: &SpectralPoint, which: Which, steps: usize) -> Result<C64> {
    let prop = propagate_with_inverse(psi, pt, which.system(), 1.0, steps)?;
    let (p, inv) = (prop.forward, prop.inverse);
    Ok(prop.det * (p[(0, 1)] * inv[(0, 2)] - p[(0, 2)] * inv[(0, 1)]))
}

/// `B(lambda)` read off a single propagation to `x = 2`.
pub fn three_point_determinant_naive(
    psi: &CoefficientPair,
    pt: &SpectralPoint,
    which: Which,
    steps: usize,
) -> Result<C64> {
    let traj = propagate(psi, pt, which.system(), 2.0, 2 * steps)?;
    let one = traj.at(1.0)?;
    let two = traj.last();
    Ok(one[(0, 1)] * two[(0, 2)] - one[(0, 2)] * two[(0, 1)])
}

/// `8 / (3 sqrt3 lambda) sin(sqrt3 z/2) sin(sqrt3 omega z/2) sin(sqrt3 omega^2 z/2)`,
/// which tends to 1 as `lambda -> 0`.
pub fn unperturbed_determinant(z: C64) -> C64 {
    let lambda = z * z * z;
    let s = |w: C64| (0.5 * SQRT3 * w * z).sin();
    8.0 / (3.0 * SQRT3 * lambda) * s(C64::new(1.0, 0.0)) * s(OMEGA) * s(OMEGA * OMEGA)
}

/// `(2 pi n / sqrt3)^3`, signed with `n`.
pub fn unperturbed_eigenvalue(n: i64) -> f64 {
    (2.0 * PI * n as f64 / SQRT3).powi(3)
}

fn determinant_function<'a>(
    psi: &'a CoefficientPair,
    which: Which,
    nm: &Numerics,
) -> impl Fn(C64) -> Result<C64> + Sync + 'a {
    let nm = *nm;
    move |lambda| {
        let pt = SpectralPoint::from_lambda(lambda);
        three_point_determinant(psi, &pt, which, nm.steps_for_point(&pt))
    }
}

fn newton<F>(f: &F, mut r: C64, step: f64, radius: f64) -> Result<C64>
where
    F: Fn(C64) -> Result<C64>,
{
    let start = r;
    let mut fr = f(r)?;
    for _ in 0..20 {
        let d = (f(r + step)? - f(r - step)?) / (2.0 * step);
        if d.norm() == 0.0 {
            break;
        }
        let cand = r - fr / d;
        if (cand - start).norm() > radius {
            return Err(SpectralError::NonConvergent {
                what: "three-point Newton",
                detail: format!("left the trust radius {radius:e} around {start}"),
            });
        }
        let fc = f(cand)?;
        if !(fc.norm() < fr.norm()) {
            break;
        }
        let moved = (cand - r).norm();
        r = cand;
        fr = fc;
        if moved < 1e-15 * (1.0 + r.norm()) {
            break;
        }
    }
    Ok(r)
}

/// Initial vector `v = (0, 1, b)` of the eigenfunction and its multiplier
/// `A = <v, Phi(1) v> / <v, v>`.
pub fn eigen_vector(psi: &CoefficientPair, mu: C64, which: Which, steps: usize) -> Result<(Vector3<C64>, C64)> {
    let pt = SpectralPoint::from_lambda(mu);
    let p = propagate_with_inverse(psi, &pt, which.system(), 1.0, steps)?.forward;
    let u = Vector3::new(C64::new(0.0, 0.0), p[(0, 2)], -p[(0, 1)]);
    let norm = u.norm();
    if !(norm > 0.0) || u[1].norm() < MIN_SLOPE * norm {
        return Err(SpectralError::SmallDenominator {
            value: if norm > 0.0 { u[1].norm() / norm } else { 0.0 },
            threshold: MIN_SLOPE,
        });
    }
    let v = u / u[1];
    let pv = p * v;
    Ok((v, v.dotc(&pv) / v.dotc(&v)))
}

/// Newton refinement of the eigenvalue in disk `n` from a nearby guess.
pub fn refine_eigenvalue(psi: &CoefficientPair, n: i64, which: Which, guess: C64, nm: &Numerics) -> Result<C64> {
    let disk = DiskSpec::new(n);
    let f = determinant_function(psi, which, nm);
    let scale = disk.scale();
    let mu = newton(&f, guess, 1e-5 * scale, 0.1 * scale)?;
    if !disk.contains(mu) {
        return Err(SpectralError::NonConvergent {
            what: "three-point Newton",
            detail: format!("left disk {n} at {mu}"),
        });
    }
    Ok(mu)
}

/// Eigenfunction at an eigenvalue `mu`, normalized to `y'(0) = 1`.
///
/// The initial vector `(0, 1, b)` is chosen so that `y(1) = 0`; it is an
/// eigenvector of `Phi(1)` because `B(mu) = 0`. When `|A| < 1` the solution
/// is subdominant and is integrated backward from `x = 2`, where it equals
/// `A^2 v`; otherwise forward from `v`.
pub fn eigenfunction(
    psi: &CoefficientPair,
    mu: C64,
    which: Which,
    steps: usize,
) -> Result<(Eigenfunction, C64)> {
    let pt = SpectralPoint::from_lambda(mu);
    let (v, a) = eigen_vector(psi, mu, which, steps)?;
    let states = if a.norm() < 1.0 {
        propagate_state_backward(psi, &pt, which.system(), 2.0, 2 * steps, v * (a * a))?
    } else {
        propagate_state_forward(psi, &pt, which.system(), 2.0, 2 * steps, v)?
    };
    let x = (0..=2 * steps).map(|k| k as f64 / steps as f64).collect();
    let mut f = Eigenfunction {
        x,
        y: Vec::with_capacity(states.len()),
        y1: Vec::with_capacity(states.len()),
        y2: Vec::with_capacity(states.len()),
    };
    // Re-normalize with the integrated slope so that y'(0) = 1 on the grid.
    let s0 = states[0][1];
    for s in &states {
        let s = s / s0;
        f.y.push(s[0]);
        f.y1.push(s[1]);
        f.y2.push(s[2]);
    }
    Ok((f, a))
}

/// The eigenvalue in the disk with index `n != 0`.
pub fn three_point_eig(psi: &CoefficientPair, n: i64, which: Which, nm: &Numerics) -> Result<ThreePointEig> {
    if n == 0 {
        return Err(SpectralError::InvalidInput("three-point eigenvalues are indexed by n != 0".into()));
    }
    nm.check_regime(psi)?;
    let disk = DiskSpec::new(n);
    let f = determinant_function(psi, which, nm);
    let s = sample_contour(&f, &disk, nm.contour_samples)?;
    if s.winding != 1 {
        return Err(SpectralError::WrongCount {
            what: "three-point eigenvalues",
            n,
            expected: 1,
            found: s.winding,
        });
    }
    let scale = disk.scale();
    let guess = single_zero(&s, disk.center_lambda());
    let mu = newton(&f, guess, 1e-5 * scale, 0.1 * scale)?;
    let residual = f(mu)?.norm() / s.max_abs;
    let pt = SpectralPoint::from_lambda(mu);
    let (eigenfunction, floquet_a) = eigenfunction(psi, mu, which, nm.steps_for_point(&pt))?;
    Ok(ThreePointEig {
        n,
        mu,
        which,
        eigenfunction,
        floquet_a,
        residual,
    })
}

/// Eigenvalues for `1 <= |n| <= n_max`, ordered by `n`.
pub fn find_three_point_eigs(
    psi: &CoefficientPair,
    n_max: i64,
    which: Which,
    nm: &Numerics,
) -> Result<Vec<ThreePointEig>> {
    let ns: Vec<i64> = (-n_max..=n_max).filter(|&n| n != 0).collect();
    ns.par_iter().map(|&n| three_point_eig(psi, n, which, nm)).collect()
}

/// Positive square root of `tau_3(lambda)` of the direct problem.
pub fn positive_sqrt_tau3(psi: &CoefficientPair, lambda: C64, nm: &Numerics) -> Result<f64> {
    let pt = SpectralPoint::from_lambda(lambda);
    let data = monodromy_matrix(psi, &pt, nm)?;
    let tau = select_tau3(&data)?.value;
    if tau.re <= 0.0 || tau.arg().abs() > BRANCH_TOL {
        return Err(SpectralError::BranchError {
            detail: format!("tau_3({lambda}) = {tau} is off the positive real axis"),
        });
    }
    Ok(tau.norm().sqrt())
}

/// `h_sn = 8 (pi n)^2 log |y~_n'(1) tau_3^{-1/2}(mu~_n)|` from a transpose
/// eigenpair with `y~'(0) = 1`.
pub fn norming_constant_from(psi: &CoefficientPair, eig: &ThreePointEig, nm: &Numerics) -> Result<f64> {
    if eig.which != Which::Transpose || eig.n < 1 {
        return Err(SpectralError::InvalidInput(
            "norming constants need a transpose eigenpair with n >= 1".into(),
        ));
    }
    let root = positive_sqrt_tau3(psi, eig.mu, nm)?;
    let slope = eig.eigenfunction.slope_at(1.0);
    let n = eig.n as f64;
    Ok(8.0 * (PI * n).powi(2) * (slope.norm() / root).ln())
}

pub fn norming_constants_h(psi: &CoefficientPair, n: i64, nm: &Numerics) -> Result<f64> {
    let eig = three_point_eig(psi, n, Which::Transpose, nm)?;
    norming_constant_from(psi, &eig, nm)
}

/// `|(Phi(1) - A) v| / (|Phi(1)| |v|)` for the eigenvector `v = (0, 1, b)`
/// behind the eigenfunction: zero when the monodromy has an eigenvector
/// with vanishing first component.
pub fn eigenvector_residual(psi: &CoefficientPair, eig: &ThreePointEig, nm: &Numerics) -> Result<f64> {
    let pt = SpectralPoint::from_lambda(eig.mu);
    let p = propagate_with_inverse(psi, &pt, eig.which.system(), 1.0, nm.steps_for_point(&pt))?.forward;
    let f = &eig.eigenfunction;
    let v = Vector3::new(C64::new(0.0, 0.0), f.y1[0], f.y2[0]);
    let shifted: Matrix3<C64> = p - Matrix3::identity() * eig.floquet_a;
    Ok((shifted * v).norm() / (p.norm() * v.norm()))
}
