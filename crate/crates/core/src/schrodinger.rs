//! Hill operator `-f'' + V(x, E) f = E f` with the McKean potential:
//! Lyapunov function, 2-periodic and Dirichlet eigenvalues, norming
//! constants.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientPair;
use crate::contour::{sample_contour, single_zero, zero_pair, Contour};
use crate::error::{Result, SpectralError};
use crate::mckean::{potential_direct, EnergyPotential};
use crate::ode::{propagate_schrodinger, Numerics, Potential, C64, SQRT3};
use crate::ramifications::{Multiplicity, DOUBLE_TOL};

/// Real grid used to bracket zeros inside one `S_n` interval.
pub const SCAN_POINTS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillPointData {
    pub energy: C64,
    pub theta1: C64,
    pub theta1p: C64,
    pub phi1: C64,
    pub phi1p: C64,
    pub delta: C64,
}

impl HillPointData {
    pub fn wronskian(&self) -> C64 {
        self.theta1 * self.phi1p - self.theta1p * self.phi1
    }

    /// `Delta^2 - ((theta(1) - phi'(1))/2)^2 - theta'(1) phi(1) - 1`.
    pub fn d2_identity(&self) -> C64 {
        let half = 0.5 * (self.theta1 - self.phi1p);
        self.delta * self.delta - half * half - self.theta1p * self.phi1 - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandEdges {
    pub minus: C64,
    pub plus: C64,
    pub multiplicity: Multiplicity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HillSpectrum {
    pub periodic_eigs: BTreeMap<i64, BandEdges>,
    pub dirichlet_eigs: BTreeMap<i64, C64>,
    pub norming: BTreeMap<i64, f64>,
}

/// `theta`, `phi` at `x = 1` for a fixed potential and energy.
pub fn hill_point_with(v: &dyn Potential, energy: C64, steps: usize) -> Result<HillPointData> {
    let traj = propagate_schrodinger(v, energy, 1.0, steps)?;
    let m = traj.last();
    let (theta1, theta1p, phi1, phi1p) = (m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)]);
    Ok(HillPointData {
        energy,
        theta1,
        theta1p,
        phi1,
        phi1p,
        delta: 0.5 * (theta1 + phi1p),
    })
}

/// RK4 steps with half-steps on the nodes of the sampled potential.
fn hill_steps(v: &EnergyPotential) -> usize {
    (v.v.len() - 1) / 2
}

/// Builds `V(., E)` and propagates at the same `E`.
pub fn hill_point(psi: &CoefficientPair, energy: C64, nm: &Numerics) -> Result<HillPointData> {
    let v = potential_direct(psi, energy, nm)?;
    hill_point_with(&v.sampled(), energy, hill_steps(&v))
}

/// `((pi n - sqrt3/2)^2, (pi n + sqrt3/2)^2)`, the real trace of `S_n`.
pub fn band_interval(n: i64) -> (f64, f64) {
    let c = PI * n as f64;
    ((c - 0.5 * SQRT3).powi(2), (c + 0.5 * SQRT3).powi(2))
}

/// Boundary of `S_n = {E : |sqrt E - pi n| < sqrt3/2}`.
#[derive(Debug, Clone, Copy)]
pub struct EnergyDomain {
    pub n: i64,
}

impl Contour for EnergyDomain {
    fn at(&self, theta: f64) -> (C64, C64) {
        let e = C64::from_polar(1.0, theta);
        let w = C64::new(PI * self.n as f64, 0.0) + 0.5 * SQRT3 * e;
        (w * w, 2.0 * w * C64::new(0.0, 0.5 * SQRT3) * e)
    }
}

fn merge_tol(e: f64) -> f64 {
    DOUBLE_TOL * (1.0 + e.abs())
}

/// Zero of a continuous `f` in `[a, b]` with `f(a) f(b) < 0`, by
/// bisection to a short bracket and then Illinois-modified secant steps.
pub(crate) fn refine_bracket(f: &(dyn Fn(f64) -> Result<f64> + Sync), mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> Result<f64> {
    for _ in 0..8 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    let mut side = 0;
    for _ in 0..100 {
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Least-squares quartic `g(center + t delta)` on 9 points, expanded about
/// its vertex `v` as `g(v) + g''(v) s^2 / 2`; returns the roots in `t`
/// (possibly complex) of that expansion and the vertex.
fn quadratic_model(g: &(dyn Fn(f64) -> Result<f64> + Sync), center: f64, delta: f64) -> Result<([C64; 2], f64)> {
    let ts: Vec<f64> = (-4..=4).map(|k| k as f64 / 4.0).collect();
    let vals = ts.par_iter().map(|&t| g(center + t * delta)).collect::<Result<Vec<_>>>()?;
    let a = DMatrix::from_fn(ts.len(), 5, |i, j| ts[i].powi(j as i32));
    let y = DVector::from_column_slice(&vals);
    let c = (a.transpose() * &a)
        .lu()
        .solve(&(a.transpose() * y))
        .ok_or(SpectralError::NonConvergent {
            what: "band edge model",
            detail: "singular normal equations".into(),
        })?;
    let d1 = |t: f64| c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * 4.0 * c[4]));
    let d2 = |t: f64| 2.0 * c[2] + t * (6.0 * c[3] + t * 12.0 * c[4]);
    let mut v = -c[1] / (2.0 * c[2]);
    for _ in 0..8 {
        v -= d1(v) / d2(v);
    }
    let pv = c[0] + v * (c[1] + v * (c[2] + v * (c[3] + v * c[4])));
    let s = C64::new(-2.0 * pv / d2(v), 0.0).sqrt();
    Ok(([v + s, v - s], v))
}

fn scan(g: &(dyn Fn(f64) -> Result<f64> + Sync), n: i64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = band_interval(n);
    // Stay strictly inside S_n.
    let (lo, hi) = (lo + 1e-9 * hi, hi * (1.0 - 1e-9));
    let xs: Vec<f64> = (0..=SCAN_POINTS).map(|k| lo + (hi - lo) * k as f64 / SCAN_POINTS as f64).collect();
    let vals = xs.par_iter().map(|&x| g(x)).collect::<Result<Vec<_>>>()?;
    Ok((xs, vals))
}

fn sign_changes(vals: &[f64]) -> Vec<usize> {
    (0..vals.len() - 1).filter(|&k| (vals[k] > 0.0) != (vals[k + 1] > 0.0)).collect()
}

/// Maximum of a unimodal `g` on `[a, b]` by golden-section search.
pub(crate) fn golden_max(g: &(dyn Fn(f64) -> Result<f64> + Sync), mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    while (b - a) > 1e-11 * (1.0 + a.abs()) {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d)?;
        }
    }
    Ok(if gc > gd { (c, gc) } else { (d, gd) })
}

/// Edges of the `n`-th band gap for real coefficients: zeros of
/// `g = (-1)^n Delta - 1`, which is negative on the bands and positive in
/// the gap. The gap can be far narrower than the scan grid, so the
/// maximum of `g` is located first and the edges are bracketed on either
/// side of it. Pairs closer than the double tolerance are merged.
fn periodic_pair_real(psi: &CoefficientPair, n: i64, nm: &Numerics) -> Result<BandEdges> {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let g = move |e: f64| -> Result<f64> { Ok(sign * hill_point(psi, C64::new(e, 0.0), nm)?.delta.re - 1.0) };
    let (xs, vals) = scan(&g, n)?;
    let changes = sign_changes(&vals);
    let mut peak = None;
    let pair = match changes.len() {
        2 => {
            let r: Vec<f64> = changes
                .iter()
                .map(|&k| refine_bracket(&g, xs[k], xs[k + 1], vals[k], vals[k + 1]))
                .collect::<Result<_>>()?;
            Some((r[0], r[1]))
        }
        0 => {
            let k = (0..vals.len()).max_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
            if k == 0 || k == vals.len() - 1 {
                return Err(SpectralError::WrongCount {
                    what: "periodic eigenvalues",
                    n,
                    expected: 2,
                    found: 0,
                });
            }
            let (m, gm) = golden_max(&g, xs[k - 1], xs[k + 1])?;
            peak = Some(m);
            if gm <= 0.0 {
                // A closed band edge whose peak sits below zero only by the
                // discretization error of Delta, estimated on a doubled grid.
                let fine = Numerics {
                    potential_grid: 2 * nm.potential_grid,
                    ..*nm
                };
                let g_fine = sign * hill_point(psi, C64::new(m, 0.0), &fine)?.delta.re - 1.0;
                if gm.abs() <= 4.0 * (g_fine - gm).abs() {
                    let delta = 1e-3 * (1.0 + m);
                    let (_, vertex) = quadratic_model(&g, m, delta)?;
                    let e = C64::new(m + vertex * delta, 0.0);
                    return Ok(BandEdges {
                        minus: e,
                        plus: e,
                        multiplicity: Multiplicity::Double,
                    });
                }
            }
            if gm > 0.0 {
                let lo = refine_bracket(&g, xs[k - 1], m, vals[k - 1], gm)?;
                let hi = refine_bracket(&g, m, xs[k + 1], gm, vals[k + 1])?;
                Some((lo, hi))
            } else {
                None
            }
        }
        found => {
            return Err(SpectralError::WrongCount {
                what: "periodic eigenvalues",
                n,
                expected: 2,
                found: found as i64,
            })
        }
    };
    let center = match (pair, peak) {
        (Some((a, b)), _) => 0.5 * (a + b),
        (None, Some(m)) => m,
        (None, None) => unreachable!("no pair without a located peak"),
    };
    let merge = merge_tol(center);
    let near_double = pair.is_none_or(|(a, b)| (b - a) < 1e-3 * (1.0 + center));
    if near_double {
        let delta = pair.map_or(1e-3 * (1.0 + center), |(a, b)| (4.0 * (b - a)).max(1e-3 * (1.0 + center)));
        let (roots, vertex) = quadratic_model(&g, center, delta)?;
        let split = (roots[0] - roots[1]).norm() * delta;
        if split < merge {
            let e = C64::new(center + vertex * delta, 0.0);
            return Ok(BandEdges {
                minus: e,
                plus: e,
                multiplicity: Multiplicity::Double,
            });
        }
        if pair.is_none() {
            return Err(SpectralError::WrongCount {
                what: "periodic eigenvalues",
                n,
                expected: 2,
                found: 0,
            });
        }
    }
    let (a, b) = pair.expect("pair present");
    Ok(BandEdges {
        minus: C64::new(a, 0.0),
        plus: C64::new(b, 0.0),
        multiplicity: Multiplicity::SimplePair,
    })
}

fn newton_complex(f: &(dyn Fn(C64) -> Result<C64> + Sync), mut r: C64, step: f64) -> Result<C64> {
    let mut fr = f(r)?;
    for _ in 0..20 {
        let d = (f(r + step)? - f(r - step)?) / (2.0 * step);
        if d.norm() == 0.0 {
            break;
        }
        let cand = r - fr / d;
        let fc = f(cand)?;
        if !(fc.norm() < fr.norm()) {
            break;
        }
        r = cand;
        fr = fc;
    }
    Ok(r)
}

fn periodic_pair_complex(psi: &CoefficientPair, n: i64, nm: &Numerics) -> Result<BandEdges> {
    let f = |e: C64| -> Result<C64> {
        let d = hill_point(psi, e, nm)?.delta;
        Ok(d * d - 1.0)
    };
    let s = sample_contour(&f, &EnergyDomain { n }, nm.contour_samples)?;
    if s.winding != 2 {
        return Err(SpectralError::WrongCount {
            what: "periodic eigenvalues",
            n,
            expected: 2,
            found: s.winding,
        });
    }
    let center = C64::new((PI * n as f64).powi(2), 0.0);
    let [a, b] = zero_pair(&s, center);
    let scale = 1.0 + center.re;
    let (a, b) = if (a - b).norm() > 1e-3 * scale {
        (newton_complex(&f, a, 1e-6 * scale)?, newton_complex(&f, b, 1e-6 * scale)?)
    } else {
        (a, b)
    };
    if (a - b).norm() < merge_tol(scale) {
        let m = 0.5 * (a + b);
        return Ok(BandEdges {
            minus: m,
            plus: m,
            multiplicity: Multiplicity::Double,
        });
    }
    let (minus, plus) = crate::ramifications::ordered(a, b);
    Ok(BandEdges {
        minus,
        plus,
        multiplicity: Multiplicity::SimplePair,
    })
}

pub fn periodic_pair(psi: &CoefficientPair, n: i64, nm: &Numerics) -> Result<BandEdges> {
    if n < 1 {
        return Err(SpectralError::InvalidInput("band index must be >= 1".into()));
    }
    nm.check_regime(psi)?;
    if psi.is_real() {
        periodic_pair_real(psi, n, nm)
    } else {
        periodic_pair_complex(psi, n, nm)
    }
}

/// Edges `(E_n^-, E_n^+)` of a real band gap, resolved below the merge
/// tolerance. A pair reported double is re-examined on a doubled potential
/// grid; the gap is accepted when `+-Delta - 1` peaks above zero there and
/// a quadrupled grid agrees. Otherwise `DegenerateGap`.
pub fn real_band_gap(psi: &CoefficientPair, n: i64, nm: &Numerics) -> Result<(f64, f64)> {
    if !psi.is_real() {
        return Err(SpectralError::InvalidInput("real band gaps need real coefficients".into()));
    }
    let edges = periodic_pair(psi, n, nm)?;
    if edges.multiplicity == Multiplicity::SimplePair {
        return Ok((edges.minus.re, edges.plus.re));
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let refined = |k: usize| Numerics {
        potential_grid: k * nm.potential_grid,
        ..*nm
    };
    let (fine, finer) = (refined(2), refined(4));
    let g = |e: f64| -> Result<f64> { Ok(sign * hill_point(psi, C64::new(e, 0.0), &fine)?.delta.re - 1.0) };
    let center = edges.minus.re;
    let delta = 1e-3 * (1.0 + center);
    let (a, b) = (center - delta, center + delta);
    let (m, gm) = golden_max(&g, a, b)?;
    let (ga, gb) = (g(a)?, g(b)?);
    let g_finer = sign * hill_point(psi, C64::new(m, 0.0), &finer)?.delta.re - 1.0;
    if gm <= 0.0 || g_finer <= 0.0 || (g_finer - gm).abs() > 0.25 * gm || ga >= 0.0 || gb >= 0.0 {
        return Err(SpectralError::DegenerateGap { n, width: 0.0 });
    }
    Ok((refine_bracket(&g, a, m, ga, gm)?, refine_bracket(&g, m, b, gm, gb)?))
}

pub fn find_periodic_eigs(psi: &CoefficientPair, n_max: i64, nm: &Numerics) -> Result<BTreeMap<i64, BandEdges>> {
    let ns: Vec<i64> = (1..=n_max).collect();
    let v = ns
        .par_iter()
        .map(|&n| periodic_pair(psi, n, nm).map(|p| (n, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(v.into_iter().collect())
}

/// The zero of `E -> phi(1, E)` in `S_n`.
pub fn dirichlet_eig(psi: &CoefficientPair, n: i64, nm: &Numerics) -> Result<C64> {
    if n < 1 {
        return Err(SpectralError::InvalidInput("band index must be >= 1".into()));
    }
    nm.check_regime(psi)?;
    if psi.is_real() {
        let g = |e: f64| -> Result<f64> { Ok(hill_point(psi, C64::new(e, 0.0), nm)?.phi1.re) };
        let (xs, vals) = scan(&g, n)?;
        let changes = sign_changes(&vals);
        if changes.len() != 1 {
            return Err(SpectralError::WrongCount {
                what: "Dirichlet eigenvalues",
                n,
                expected: 1,
                found: changes.len() as i64,
            });
        }
        let k = changes[0];
        return Ok(C64::new(refine_bracket(&g, xs[k], xs[k + 1], vals[k], vals[k + 1])?, 0.0));
    }
    let f = |e: C64| -> Result<C64> { Ok(hill_point(psi, e, nm)?.phi1) };
    let s = sample_contour(&f, &EnergyDomain { n }, nm.contour_samples)?;
    if s.winding != 1 {
        return Err(SpectralError::WrongCount {
            what: "Dirichlet eigenvalues",
            n,
            expected: 1,
            found: s.winding,
        });
    }
    let center = C64::new((PI * n as f64).powi(2), 0.0);
    let guess = single_zero(&s, center);
    newton_complex(&f, guess, 1e-6 * (1.0 + center.re))
}

pub fn find_dirichlet_eigs(psi: &CoefficientPair, n_max: i64, nm: &Numerics) -> Result<BTreeMap<i64, C64>> {
    let ns: Vec<i64> = (1..=n_max).collect();
    let v = ns
        .par_iter()
        .map(|&n| dirichlet_eig(psi, n, nm).map(|g| (n, g)))
        .collect::<Result<Vec<_>>>()?;
    Ok(v.into_iter().collect())
}

/// `2 pi n log |phi'(1, gamma_n)|`.
pub fn norming_constant_at(psi: &CoefficientPair, n: i64, gamma: C64, nm: &Numerics) -> Result<f64> {
    let h = hill_point(psi, gamma, nm)?;
    Ok(2.0 * PI * n as f64 * h.phi1p.norm().ln())
}

pub fn norming_constants_g(psi: &CoefficientPair, n: i64, nm: &Numerics) -> Result<f64> {
    let gamma = dirichlet_eig(psi, n, nm)?;
    norming_constant_at(psi, n, gamma, nm)
}

pub fn hill_spectrum(psi: &CoefficientPair, n_max: i64, nm: &Numerics) -> Result<HillSpectrum> {
    let periodic_eigs = find_periodic_eigs(psi, n_max, nm)?;
    let dirichlet_eigs = find_dirichlet_eigs(psi, n_max, nm)?;
    let norming = dirichlet_eigs
        .par_iter()
        .map(|(&n, &g)| norming_constant_at(psi, n, g, nm).map(|v| (n, v)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    Ok(HillSpectrum {
        periodic_eigs,
        dirichlet_eigs,
        norming,
    })
}

/// `Delta(E)` on a grid of real energies.
pub fn lyapunov_trace(psi: &CoefficientPair, energies: &[f64], nm: &Numerics) -> Result<Vec<C64>> {
    energies
        .par_iter()
        .map(|&e| hill_point(psi, C64::new(e, 0.0), nm).map(|h| h.delta))
        .collect()
}
