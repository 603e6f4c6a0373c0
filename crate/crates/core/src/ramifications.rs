//! Zeros of the multiplier discriminant (ramifications) in the
//! localization disks.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientPair;
use crate::schrodinger::{golden_max, refine_bracket};
use crate::contour::{sample_contour, zero_pair, Circle, ContourSamples, DiskSpec};
use crate::error::{Result, SpectralError};
use crate::monodromy::{monodromy_matrix, monodromy_with_steps};
use crate::ode::{Numerics, SpectralPoint, C64};

/// Relative merge tolerance for double zeros, scaled by `1 + |lambda|`.
pub const DOUBLE_TOL: f64 = 1e-6;

/// Default smallness threshold on `norm_h1` for the perturbative regime.
pub const SMALLNESS_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplicity {
    SimplePair,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamificationPair {
    pub minus: C64,
    pub plus: C64,
    pub multiplicity: Multiplicity,
    /// `max |rho(r)| / max |rho on the disk boundary|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RamificationSet {
    pub entries: BTreeMap<i64, RamificationPair>,
}

impl RamificationSet {
    pub fn get(&self, n: i64) -> Option<&RamificationPair> {
        self.entries.get(&n)
    }
}

/// `rho` as a function of `lambda` for the given coefficients.
pub fn rho_function<'a>(psi: &'a CoefficientPair, nm: &Numerics) -> impl Fn(C64) -> Result<C64> + Sync + 'a {
    let nm = *nm;
    move |lambda| Ok(monodromy_matrix(psi, &SpectralPoint::from_lambda(lambda), &nm)?.rho)
}

/// Orders by real part, then imaginary part.
pub(crate) fn ordered(a: C64, b: C64) -> (C64, C64) {
    if (a.re, a.im) <= (b.re, b.im) {
        (a, b)
    } else {
        (b, a)
    }
}

fn newton_polish<F>(f: &F, mut r: C64, step: f64, radius: f64) -> Result<C64>
where
    F: Fn(C64) -> Result<C64>,
{
    let start = r;
    let mut fr = f(r)?;
    for _ in 0..12 {
        let d = (f(r + step)? - f(r - step)?) / (2.0 * step);
        if d.norm() == 0.0 {
            break;
        }
        let cand = r - fr / d;
        if (cand - start).norm() > radius {
            break;
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

/// Two zeros inside the contour, re-estimated on shrinking circles around
/// the pair until the circle is comparable to their separation.
fn zoom_pair<F>(f: &F, first: &ContourSamples, center: C64, scale: f64, samples: usize) -> Result<[C64; 2]>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    let mut pair = zero_pair(first, center);
    let floor = 1e-5 * scale;
    let mut radius = f64::INFINITY;
    for _ in 0..6 {
        let sep = (pair[0] - pair[1]).norm();
        let target = (4.0 * sep).max(floor);
        let next = if radius.is_finite() { target.max(radius / 16.0) } else { target.max(0.05 * scale) };
        if radius.is_finite() && next >= 0.5 * radius {
            break;
        }
        let circle = Circle {
            center: 0.5 * (pair[0] + pair[1]),
            radius: next,
        };
        let s = match sample_contour(f, &circle, samples) {
            Ok(s) if s.winding == 2 => s,
            _ => break,
        };
        pair = zero_pair(&s, circle.center);
        radius = next;
    }
    Ok(pair)
}

/// Zeros of `f` near `center` from its Taylor polynomial, whose
/// coefficients are averaged over a circle of the given radius. This
/// resolves near-double pairs below the pointwise noise floor of `f`.
fn local_model_pair<F>(f: &F, center: C64, radius: f64, samples: usize) -> Result<[C64; 2]>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    const DEGREE: usize = 5;
    let units: Vec<C64> = (0..samples)
        .map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / samples as f64))
        .collect();
    let values = units
        .par_iter()
        .map(|&e| f(center + e * radius))
        .collect::<Result<Vec<_>>>()?;
    let mut coef = [C64::new(0.0, 0.0); DEGREE + 1];
    for (e, v) in units.iter().zip(&values) {
        let mut w = C64::new(1.0, 0.0);
        for c in coef.iter_mut() {
            *c += v * w.conj();
            w *= e;
        }
    }
    // Coefficients of the polynomial in the scaled variable u = w / radius.
    for c in coef.iter_mut() {
        *c /= samples as f64;
    }
    if coef[2].norm() == 0.0 {
        return Err(SpectralError::NonConvergent {
            what: "local model",
            detail: "vanishing second Taylor coefficient".into(),
        });
    }
    let d = (coef[1] * coef[1] - 4.0 * coef[0] * coef[2]).sqrt();
    let poly = |u: C64| coef.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * u + c);
    let dpoly = |u: C64| {
        coef.iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, (k, c)| acc * u + c * k as f64)
    };
    let mut roots = [(-coef[1] + d) / (2.0 * coef[2]), (-coef[1] - d) / (2.0 * coef[2])];
    for u in roots.iter_mut() {
        for _ in 0..20 {
            let du = dpoly(*u);
            if du.norm() == 0.0 {
                break;
            }
            let step = poly(*u) / du;
            *u -= step;
            if step.norm() < 1e-15 {
                break;
            }
        }
    }
    Ok(roots.map(|u| center + u * radius))
}

/// Ramifications in the disk with index `n`.
pub fn ramification_pair(psi: &CoefficientPair, n: i64, nm: &Numerics) -> Result<RamificationPair> {
    nm.check_regime(psi)?;
    let disk = DiskSpec::new(n);
    let f = rho_function(psi, nm);
    let s = sample_contour(&f, &disk, nm.contour_samples)?;
    if s.winding != 2 {
        return Err(SpectralError::WrongCount {
            what: "ramifications",
            n,
            expected: 2,
            found: s.winding,
        });
    }
    let scale = disk.scale();
    let [a, b] = zoom_pair(&f, &s, disk.center_lambda(), scale, nm.contour_samples)?;

    let merge = DOUBLE_TOL * scale;
    let step = 1e-5 * scale;
    let (a, b) = if (a - b).norm() > 10.0 * step {
        let radius = 0.25 * (a - b).norm();
        (newton_polish(&f, a, step, radius)?, newton_polish(&f, b, step, radius)?)
    } else {
        let radius = (1e-3 * scale).max(4.0 * (a - b).norm());
        let [a, b] = local_model_pair(&f, 0.5 * (a + b), radius, 4 * nm.contour_samples)?;
        (a, b)
    };
    let (minus, plus, multiplicity) = if (a - b).norm() < merge {
        let m = 0.5 * (a + b);
        (m, m, Multiplicity::Double)
    } else {
        let (lo, hi) = ordered(a, b);
        (lo, hi, Multiplicity::SimplePair)
    };
    let residual = f(minus)?.norm().max(f(plus)?.norm()) / s.max_abs;
    Ok(RamificationPair {
        minus,
        plus,
        multiplicity,
        residual,
    })
}

/// Edges of the real gap with index `n`, resolved past the double merge:
/// a merged pair is split again if the discriminant of the two small
/// multipliers, maximized along the real axis near it, is positive there.
/// Real coefficients only.
pub fn real_gap_edges(psi: &CoefficientPair, n: i64, nm: &Numerics) -> Result<(f64, f64)> {
    if !psi.is_real() {
        return Err(SpectralError::InvalidInput("real gap edges need real coefficients".into()));
    }
    let pair = ramification_pair(psi, n, nm)?;
    if pair.multiplicity == Multiplicity::SimplePair {
        return Ok((pair.minus.re, pair.plus.re));
    }
    let g = |l: f64| -> Result<f64> {
        let pt = SpectralPoint::from_lambda(C64::new(l, 0.0));
        Ok(monodromy_matrix(psi, &pt, nm)?.subdominant_discriminant().re)
    };
    let center = pair.minus.re;
    let delta = 1e-3 * (1.0 + center.abs());
    let (a, b) = (center - delta, center + delta);
    let (m, gm) = golden_max(&g, a, b)?;
    let (ga, gb) = (g(a)?, g(b)?);
    // Rounding in the propagator splits a closed pair by a small random
    // amount; the peak must clear the spread over nearby step counts.
    let pt = SpectralPoint::from_lambda(C64::new(m, 0.0));
    let base = nm.steps_for_point(&pt);
    let peaks = (1..=3)
        .map(|k| Ok(monodromy_with_steps(psi, &pt, base + 2 * k)?.subdominant_discriminant().re))
        .collect::<Result<Vec<f64>>>()?;
    let lo = peaks.iter().copied().fold(gm, f64::min);
    let hi = peaks.iter().copied().fold(gm, f64::max);
    let mean = (gm + peaks.iter().sum::<f64>()) / 4.0;
    if lo <= 0.0 || mean <= 2.0 * (hi - lo) || ga >= 0.0 || gb >= 0.0 {
        return Err(SpectralError::DegenerateGap { n, width: 0.0 });
    }
    Ok((refine_bracket(&g, a, m, ga, gm)?, refine_bracket(&g, m, b, gm, gb)?))
}

/// Ramifications for every disk `|n| <= n_max`, the `n = 0` disk included.
pub fn find_ramifications(psi: &CoefficientPair, n_max: i64, nm: &Numerics) -> Result<RamificationSet> {
    let ns: Vec<i64> = (-n_max..=n_max).collect();
    let pairs = ns
        .par_iter()
        .map(|&n| ramification_pair(psi, n, nm).map(|p| (n, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RamificationSet {
        entries: pairs.into_iter().collect(),
    })
}

/// Residuals of `r_n^+-(psi) = -r_{-n}^-+(psi_*) = -r_{-n}^-+(psi_*^-) = r_n^+-(psi^-)`,
/// each the max over `n` of `|difference| / (1 + |r_n|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryResiduals {
    pub star: f64,
    pub star_reflect: f64,
    pub reflect: f64,
}

impl SymmetryResiduals {
    pub fn max(&self) -> f64 {
        self.star.max(self.star_reflect).max(self.reflect)
    }
}

fn mirrored_residual(set: &RamificationSet, other: &RamificationSet) -> f64 {
    set.entries
        .iter()
        .filter_map(|(&n, p)| {
            other.get(-n).map(|q| {
                let d1 = (p.minus + q.plus).norm();
                let d2 = (p.plus + q.minus).norm();
                d1.max(d2) / (1.0 + p.plus.norm())
            })
        })
        .fold(0.0, f64::max)
}

fn direct_residual(set: &RamificationSet, other: &RamificationSet) -> f64 {
    set.entries
        .iter()
        .filter_map(|(&n, p)| {
            other.get(n).map(|q| {
                let d = (p.minus - q.minus).norm().max((p.plus - q.plus).norm());
                d / (1.0 + p.plus.norm())
            })
        })
        .fold(0.0, f64::max)
}

/// Recomputes the ramifications of the three transformed pairs and
/// compares them with `set`.
pub fn check_ramification_symmetries(
    psi: &CoefficientPair,
    set: &RamificationSet,
    nm: &Numerics,
) -> Result<SymmetryResiduals> {
    let n_max = set.entries.keys().map(|n| n.abs()).max().unwrap_or(0);
    let variants = [psi.star(), psi.star_reflect(), psi.reflect()];
    let sets = variants
        .par_iter()
        .map(|v| find_ramifications(v, n_max, nm))
        .collect::<Result<Vec<_>>>()?;
    Ok(SymmetryResiduals {
        star: mirrored_residual(set, &sets[0]),
        star_reflect: mirrored_residual(set, &sets[1]),
        reflect: direct_residual(set, &sets[2]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::TrigSeries;
    use crate::monodromy::unperturbed_ramification;

    fn nm() -> Numerics {
        Numerics::default()
    }

    #[test]
    fn free_double_zeros() {
        let psi = CoefficientPair::zero();
        for n in [1, -1, 2] {
            let r = ramification_pair(&psi, n, &nm()).unwrap();
            let want = unperturbed_ramification(n);
            assert_eq!(r.multiplicity, Multiplicity::Double, "n={n}: {r:?}");
            assert!((r.minus - want).norm() < 1e-6 * want.abs(), "n={n}: {r:?}");
        }
        let r0 = ramification_pair(&psi, 0, &nm()).unwrap();
        assert!(r0.minus.norm() < 1e-6 && r0.plus.norm() < 1e-6, "{r0:?}");
    }

    #[test]
    fn constant_p_double_zero() {
        let p0: f64 = -0.1;
        let psi = CoefficientPair::new(TrigSeries::constant(p0), TrigSeries::zero());
        let pi2 = std::f64::consts::PI.powi(2);
        let want = 4.0 / (3.0 * 3f64.sqrt()) * (2.0 * pi2 - p0) * (pi2 - 2.0 * p0).sqrt();
        // Factoring k^3 + 2 p0 k - lambda with roots a +- i pi, -2a.
        let a = ((pi2 - 2.0 * p0) / 3.0).sqrt();
        assert!((want - 2.0 * a * (a * a + pi2)).abs() < 1e-12);
        assert!((want - 48.462_817_807_977_85).abs() < 1e-11);
        let r = ramification_pair(&psi, 1, &nm()).unwrap();
        assert_eq!(r.multiplicity, Multiplicity::Double);
        assert!((r.minus - want).norm() < 1e-6 * want, "{r:?} vs {want}");

        let r0 = ramification_pair(&psi, 0, &nm()).unwrap();
        let want0 = 4.0 / 3.0 * (2.0f64 / 3.0).sqrt() * (-p0).powf(1.5);
        assert!((r0.plus - want0).norm() < 1e-6, "{r0:?}");
        assert!((r0.minus + want0).norm() < 1e-6, "{r0:?}");
    }

    /// Sign changes of the real-valued `rho` on a real segment, bisected.
    fn real_zero_scan(psi: &CoefficientPair, lo: f64, hi: f64, points: usize) -> Vec<f64> {
        let f = |x: f64| rho_function(psi, &nm())(C64::new(x, 0.0)).unwrap().re;
        let xs: Vec<f64> = (0..=points).map(|k| lo + (hi - lo) * k as f64 / points as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let mut roots = Vec::new();
        for k in 0..points {
            if vals[k].signum() != vals[k + 1].signum() {
                let (mut a, mut b, mut fa) = (xs[k], xs[k + 1], vals[k]);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    let fm = f(m);
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        roots
    }

    #[test]
    fn split_pair_matches_real_scan() {
        let psi = CoefficientPair::new(TrigSeries::cos_mode(1, 0.05), TrigSeries::zero());
        let r = ramification_pair(&psi, 1, &nm()).unwrap();
        assert_eq!(r.multiplicity, Multiplicity::SimplePair);
        let c = unperturbed_ramification(1);
        let scan = real_zero_scan(&psi, c - 8.0, c + 8.0, 400);
        assert_eq!(scan.len(), 2, "{scan:?}");
        assert!(r.minus.re < c && c < r.plus.re);
        assert!((r.minus - scan[0]).norm() < 1e-7 * c, "{r:?} {scan:?}");
        assert!((r.plus - scan[1]).norm() < 1e-7 * c, "{r:?} {scan:?}");
        assert!(r.residual < 1e-8);
    }

    #[test]
    fn symmetries_of_zero_and_even_pairs() {
        let psi = CoefficientPair::zero();
        let set = find_ramifications(&psi, 1, &nm()).unwrap();
        let res = check_ramification_symmetries(&psi, &set, &nm()).unwrap();
        assert!(res.max() < 1e-9, "{res:?}");

        let even = CoefficientPair::new(TrigSeries::cos_mode(1, 0.05), TrigSeries::zero());
        assert_eq!(even.reflect(), even);
    }

    #[test]
    fn symmetries_for_mixed_pair() {
        let psi = CoefficientPair::new(TrigSeries::real(0.0, &[0.05], &[0.0, 0.01]), TrigSeries::zero());
        let set = find_ramifications(&psi, 1, &nm()).unwrap();
        let res = check_ramification_symmetries(&psi, &set, &nm()).unwrap();
        assert!(res.max() < 1e-6, "{res:?}");
    }

    #[test]
    fn large_coefficients_break_the_count() {
        // Constant q translates lambda, leaving no zero in the n = 1 disk.
        let psi = CoefficientPair::new(TrigSeries::zero(), TrigSeries::constant(150.0));
        let loose = Numerics {
            smallness: f64::INFINITY,
            ..nm()
        };
        match ramification_pair(&psi, 1, &loose) {
            Err(SpectralError::WrongCount { found, .. }) => assert_eq!(found, 0),
            other => panic!("expected WrongCount, got {other:?}"),
        }
    }

    #[test]
    fn large_coefficients_refused() {
        let psi = CoefficientPair::new(TrigSeries::cos_mode(1, 5.0), TrigSeries::zero());
        let e = ramification_pair(&psi, 1, &nm()).unwrap_err();
        assert!(matches!(e, SpectralError::OutsideRegime { .. }) && e.is_regime_error());
        let loose = Numerics { smallness: 100.0, ..nm() };
        assert!(ramification_pair(&psi, 1, &loose).is_ok());
    }

    #[test]
    fn free_gaps_stay_closed() {
        let nm = Numerics::default();
        for n in 1..=2 {
            match real_gap_edges(&CoefficientPair::zero(), n, &nm) {
                Err(SpectralError::DegenerateGap { .. }) => {}
                other => panic!("n = {n}: {other:?}"),
            }
        }
    }

    #[test]
    fn narrow_second_gap_resolved() {
        let psi = CoefficientPair::new(TrigSeries::cos_mode(1, 0.05), TrigSeries::zero());
        let nm = Numerics::default();
        assert_eq!(ramification_pair(&psi, 2, &nm).unwrap().multiplicity, Multiplicity::Double);
        let (a, b) = real_gap_edges(&psi, 2, &nm).unwrap();
        let f = rho_function(&psi, &nm);
        assert!(b - a > 1e-4, "{a} {b}");
        let mid = f(C64::new(0.5 * (a + b), 0.0)).unwrap().re;
        assert!(mid > 0.0);
        for r in [a, b] {
            assert!(f(C64::new(r, 0.0)).unwrap().norm() < 1e-8 * f(C64::new(r - 0.1, 0.0)).unwrap().norm());
        }
    }
}
