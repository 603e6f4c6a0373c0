//! Energy-dependent potential `V(x, E)` of the Hill operator attached to
//! the third-order problem, by two independent routes.

use rustfft::num_complex::Complex64 as FftC;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientPair;
use crate::error::{Result, SpectralError};
use crate::monodromy::{floquet_tau3, FloquetData};
use crate::ode::{Numerics, SampledPotential, SpectralPoint, C64, OMEGA, SQRT3};

/// Threshold on `|4 sin(sqrt3 omega z/2) sin(sqrt3 omega^2 z/2)|`.
pub const SMALL_DENOMINATOR: f64 = 0.1;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 50;

/// `xi = eta'/eta - z` and `xi' + p` on `steps + 1` nodes of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiData {
    pub x: Vec<f64>,
    pub xi: Vec<C64>,
    pub xi1: Vec<C64>,
    pub point: SpectralPoint,
}

impl XiData {
    pub fn periodicity_gap(&self) -> f64 {
        let n = self.xi.len() - 1;
        (self.xi[n] - self.xi[0]).norm().max((self.xi1[n] - self.xi1[0]).norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Direct,
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyPotential {
    pub energy: C64,
    pub point: SpectralPoint,
    /// Nodes `k / N`, `k = 0..=N`.
    pub x: Vec<f64>,
    pub v: Vec<C64>,
    pub route: Route,
    /// Fixed-point iterations; 0 for the direct route.
    pub iterations: usize,
    /// Direct route: largest gap between the `eta` and `xi` forms of `V`.
    /// Fixed point: last sup-norm update.
    pub gap: f64,
    pub xi: XiData,
}

impl EnergyPotential {
    /// Periodic samples without the duplicated endpoint.
    pub fn sampled(&self) -> SampledPotential {
        SampledPotential::new(self.v[..self.v.len() - 1].to_vec())
    }

    pub fn sup_distance(&self, other: &EnergyPotential) -> f64 {
        self.v.iter().zip(&other.v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.v.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }
}

pub fn xi_from_floquet(fd: &FloquetData) -> Result<XiData> {
    if fd.min_abs_eta <= 1e-6 {
        return Err(SpectralError::VanishingEta { min_abs: fd.min_abs_eta });
    }
    let z = fd.point.z;
    let mut xi = Vec::with_capacity(fd.eta.len());
    let mut xi1 = Vec::with_capacity(fd.eta.len());
    for k in 0..fd.eta.len() {
        let r1 = fd.eta1[k] / fd.eta[k];
        let r2 = fd.eta2[k] / fd.eta[k];
        xi.push(r1 - z);
        xi1.push(r2 - r1 * r1);
    }
    Ok(XiData {
        x: fd.x.clone(),
        xi,
        xi1,
        point: fd.point,
    })
}

/// Periodic derivative of `N` equispaced samples on `[0, 1)`.
pub fn spectral_derivative(values: &[C64]) -> Vec<C64> {
    let n = values.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<FftC> = values.to_vec();
    fwd.process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let m = signed_mode(k, n);
        if 2 * k == n {
            *c = FftC::new(0.0, 0.0);
        } else {
            *c *= FftC::new(0.0, 2.0 * std::f64::consts::PI * m as f64);
        }
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c / n as f64).collect()
}

fn signed_mode(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Sup-norm of the left side of the `xi`-equation
/// `(xi'+p)' + 3z(xi'+p) + 3z^2 xi + 3 xi (xi'+p) + 3z xi^2 + xi^3 - p xi - z p + q`.
pub fn xi_residual(psi: &CoefficientPair, xd: &XiData) -> f64 {
    let n = xd.xi.len() - 1;
    let z = xd.point.z;
    let d = spectral_derivative(&xd.xi1[..n]);
    let h = 1.0 / n as f64;
    let p = psi.p.sample(h, n);
    let q = psi.q.sample(h, n);
    (0..n)
        .map(|k| {
            let (x, y) = (xd.xi[k], xd.xi1[k]);
            (d[k] + 3.0 * z * y + 3.0 * z * z * x + 3.0 * x * y + 3.0 * z * x * x + x * x * x - p[k] * x - z * p[k]
                + q[k])
                .norm()
        })
        .fold(0.0, f64::max)
}

/// `V = E - p/2 - (3/2) eta^[2]/eta + (3/4)(eta'/eta)^2` from the Floquet
/// solution with multiplier `tau_3`, cross-checked against
/// `V = E - 2p - (3/2) xi' - (3/4)(xi + z)^2`.
pub fn potential_direct(psi: &CoefficientPair, energy: C64, nm: &Numerics) -> Result<EnergyPotential> {
    let pt = SpectralPoint::from_energy(energy);
    let steps = nm.potential_steps(pt.z.norm());
    let fd = floquet_tau3(psi, &pt, steps)?;
    let xd = xi_from_floquet(&fd)?;
    let p = psi.p.sample(1.0 / steps as f64, steps + 1);
    let z = pt.z;
    let mut v = Vec::with_capacity(steps + 1);
    let mut gap: f64 = 0.0;
    for k in 0..=steps {
        let r1 = fd.eta1[k] / fd.eta[k];
        let r2 = fd.eta2[k] / fd.eta[k];
        let a = energy - 0.5 * p[k] - 1.5 * r2 + 0.75 * r1 * r1;
        let xi_prime = xd.xi1[k] - p[k];
        let b = energy - 2.0 * p[k] - 1.5 * xi_prime - 0.75 * (xd.xi[k] + z) * (xd.xi[k] + z);
        gap = gap.max((a - b).norm());
        v.push(a);
    }
    Ok(EnergyPotential {
        energy,
        point: pt,
        x: fd.x.clone(),
        v,
        route: Route::Direct,
        iterations: 0,
        gap,
        xi: xd,
    })
}

/// `4 sin(sqrt3 omega z/2) sin(sqrt3 omega^2 z/2)`.
pub fn small_denominator(z: C64) -> C64 {
    4.0 * (0.5 * SQRT3 * OMEGA * z).sin() * (0.5 * SQRT3 * OMEGA * OMEGA * z).sin()
}

/// Periodic solver for `X' = i sqrt3 z Omega X + f`, `Omega = diag(omega, -omega^2)`,
/// on an `n`-point grid, diagonal in Fourier space.
struct Resolvent {
    n: usize,
    mult: [Vec<C64>; 2],
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Resolvent {
    fn new(z: C64, n: usize) -> Self {
        let i = C64::new(0.0, 1.0);
        let a = [i * SQRT3 * z * OMEGA, -i * SQRT3 * z * OMEGA * OMEGA];
        let mult = a.map(|aj| {
            (0..n)
                .map(|k| {
                    let m = signed_mode(k, n) as f64;
                    1.0 / (C64::new(0.0, 2.0 * std::f64::consts::PI * m) - aj) / n as f64
                })
                .collect()
        });
        let mut planner = FftPlanner::<f64>::new();
        Self {
            n,
            mult,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn solve(&self, f: &[Vec<C64>; 2]) -> [Vec<C64>; 2] {
        let mut out: [Vec<C64>; 2] = [Vec::new(), Vec::new()];
        for j in 0..2 {
            let mut buf = f[j].clone();
            self.fwd.process(&mut buf);
            for (c, m) in buf.iter_mut().zip(&self.mult[j]) {
                *c *= m;
            }
            self.inv.process(&mut buf);
            out[j] = buf;
        }
        debug_assert_eq!(out[0].len(), self.n);
        out
    }
}

/// `(xi, xi' + p) = U X` with `U = [[1, 1], [i sqrt3 omega z, -i sqrt3 omega^2 z]]`.
fn to_xi(z: C64, x1: C64, x2: C64) -> (C64, C64) {
    let i = C64::new(0.0, 1.0);
    (x1 + x2, i * SQRT3 * z * (OMEGA * x1 - OMEGA * OMEGA * x2))
}

/// `X = U^{-1} (a, b)`.
fn from_xi(z: C64, a: C64, b: C64) -> (C64, C64) {
    let i = C64::new(0.0, 1.0);
    let c = i / (SQRT3 * z);
    (-OMEGA * OMEGA * a + c * b, -OMEGA * a - c * b)
}

/// `V` from the periodic solution of `X = X^0 + F[X]`, iterated from `X^0`.
///
/// The first-order form of the `xi`-equation is `U X' = A_0 U X + B + A_1[U X]`
/// with `B = (-p, z p - q)` and `A_1 = (0, p xi - 3 xi (xi'+p) - 3 z xi^2 - xi^3)`.
pub fn potential_fixed_point(
    psi: &CoefficientPair,
    energy: C64,
    max_iter: usize,
    tol: f64,
    nm: &Numerics,
) -> Result<EnergyPotential> {
    let pt = SpectralPoint::from_energy(energy);
    let z = pt.z;
    let d = small_denominator(z);
    if d.norm() < SMALL_DENOMINATOR {
        return Err(SpectralError::SmallDenominator {
            value: d.norm(),
            threshold: SMALL_DENOMINATOR,
        });
    }
    let n = nm.potential_steps(z.norm());
    let h = 1.0 / n as f64;
    let p = psi.p.sample(h, n);
    let q = psi.q.sample(h, n);
    let res = Resolvent::new(z, n);

    let split = |a: &dyn Fn(usize) -> (C64, C64)| -> [Vec<C64>; 2] {
        let (mut u, mut w) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for k in 0..n {
            let (s, t) = a(k);
            let (x1, x2) = from_xi(z, s, t);
            u.push(x1);
            w.push(x2);
        }
        [u, w]
    };
    let forcing = split(&|k| (-p[k], z * p[k] - q[k]));
    let x0 = res.solve(&forcing);
    let mut x = x0.clone();
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let nonlinear = split(&|k| {
            let (xi, xi1) = to_xi(z, x[0][k], x[1][k]);
            let a1 = p[k] * xi - 3.0 * xi * xi1 - 3.0 * z * xi * xi - xi * xi * xi;
            (C64::new(0.0, 0.0), a1)
        });
        let f = res.solve(&nonlinear);
        let next = [
            (0..n).map(|k| x0[0][k] + f[0][k]).collect::<Vec<_>>(),
            (0..n).map(|k| x0[1][k] + f[1][k]).collect::<Vec<_>>(),
        ];
        change = (0..n)
            .map(|k| (next[0][k] - x[0][k]).norm().max((next[1][k] - x[1][k]).norm()))
            .fold(0.0, f64::max);
        x = next;
        if !change.is_finite() {
            break;
        }
        if change <= tol {
            break;
        }
    }
    if !(change <= tol) {
        return Err(SpectralError::NonConvergent {
            what: "McKean fixed point",
            detail: format!("sup-norm update {change:e} after {iterations} iterations"),
        });
    }

    let mut xi = Vec::with_capacity(n + 1);
    let mut xi1 = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let m = k % n;
        let (s, t) = to_xi(z, x[0][m], x[1][m]);
        xi.push(s);
        xi1.push(t);
        v.push(-0.5 * p[m] - 1.5 * t - 1.5 * z * s - 0.75 * s * s);
    }
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    Ok(EnergyPotential {
        energy,
        point: pt,
        x: grid.clone(),
        v,
        route: Route::FixedPoint,
        iterations,
        gap: change,
        xi: XiData {
            x: grid,
            xi,
            xi1,
            point: pt,
        },
    })
}

pub fn potential_fixed_point_default(psi: &CoefficientPair, energy: C64, nm: &Numerics) -> Result<EnergyPotential> {
    potential_fixed_point(psi, energy, DEFAULT_MAX_ITER, DEFAULT_TOL, nm)
}
