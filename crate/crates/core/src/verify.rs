//! Full pipelines: spectral tables for a coefficient pair and its symmetry
//! images, identity residuals, and eigenvalue winding under translation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientPair, Symmetry};
use crate::error::{Result, SpectralError, WithStage};
use crate::monodromy::{monodromy_matrix, select_tau3};
use crate::ode::{Numerics, SpectralPoint, C64};
use crate::ramifications::{
    check_ramification_symmetries, find_ramifications, ramification_pair, real_gap_edges, RamificationSet,
};
use crate::schrodinger::{hill_spectrum, HillSpectrum};
use crate::three_point::{eigen_vector, find_three_point_eigs, norming_constant_from, refine_eigenvalue, three_point_eig, Which};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

/// Identity names in the report, in a fixed order.
pub const IDENTITIES: [&str; 12] = [
    "periodic_vs_ramifications",
    "periodic_reflect",
    "periodic_star",
    "periodic_star_reflect",
    "dirichlet_reflect_vs_mu",
    "dirichlet_vs_mu_tilde",
    "dirichlet_vs_mu_star",
    "mu_tilde_vs_mu_reflect",
    "norming_constants",
    "mu_in_ramification_gap",
    "gamma_in_band_gap",
    "ramification_symmetries",
];

/// Per-identity tolerances; identities without an entry use `default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_tolerance")]
    pub default: f64,
    #[serde(default)]
    pub per_identity: BTreeMap<String, f64>,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            default: DEFAULT_TOLERANCE,
            per_identity: BTreeMap::new(),
        }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            default: tol,
            per_identity: BTreeMap::new(),
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        self.per_identity.get(name).copied().unwrap_or(self.default)
    }
}

/// Spectral data of one coefficient pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    /// `n -> [r_n^-, r_n^+]`.
    pub ramifications: BTreeMap<i64, [C64; 2]>,
    pub mu: BTreeMap<i64, C64>,
    pub mu_tilde: BTreeMap<i64, C64>,
    pub h: BTreeMap<i64, f64>,
    /// `n -> [E_n^-, E_n^+]`.
    pub periodic: BTreeMap<i64, [C64; 2]>,
    pub gamma: BTreeMap<i64, C64>,
    pub g: BTreeMap<i64, f64>,
}

/// Data of the symmetry images that the identities refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTables {
    /// `E_n^+-` of `psi^-`, `psi_*`, `psi_*^-`.
    pub periodic_reflect: BTreeMap<i64, [C64; 2]>,
    pub periodic_star: BTreeMap<i64, [C64; 2]>,
    pub periodic_star_reflect: BTreeMap<i64, [C64; 2]>,
    /// `gamma_n(psi^-)`.
    pub gamma_reflect: BTreeMap<i64, C64>,
    /// `mu_n(psi^-)` and `mu_n(psi_*)`.
    pub mu_reflect: BTreeMap<i64, C64>,
    pub mu_star: BTreeMap<i64, C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub schema: u32,
    pub psi: String,
    pub coefficients: CoefficientPair,
    pub n_max: i64,
    pub numerics: Numerics,
    pub tables: Tables,
    pub images: ImageTables,
    pub residuals: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub pass: BTreeMap<String, bool>,
    pub all_pass: bool,
}

impl SpectralReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `(3/4) r^{2/3}` with the principal power.
pub fn energy_of(r: C64) -> C64 {
    0.75 * r.powf(2.0 / 3.0)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Relative distance of `x` from the real segment `[lo, hi]`.
fn outside(x: C64, lo: C64, hi: C64) -> f64 {
    let (lo, hi) = (lo.re.min(hi.re), lo.re.max(hi.re));
    let d = (lo - x.re).max(x.re - hi).max(0.0);
    d.hypot(x.im) / x.norm().max(1.0)
}

fn max_over<I: Iterator<Item = f64>>(it: I) -> f64 {
    it.fold(0.0, f64::max)
}

fn spectrum_table(s: &HillSpectrum) -> BTreeMap<i64, [C64; 2]> {
    s.periodic_eigs.iter().map(|(&n, b)| (n, [b.minus, b.plus])).collect()
}

fn ramification_table(set: &RamificationSet) -> BTreeMap<i64, [C64; 2]> {
    set.entries.iter().map(|(&n, r)| (n, [r.minus, r.plus])).collect()
}

fn mu_table(psi: &CoefficientPair, n_max: i64, which: Which, nm: &Numerics) -> Result<BTreeMap<i64, C64>> {
    Ok(find_three_point_eigs(psi, n_max, which, nm)?
        .into_iter()
        .map(|e| (e.n, e.mu))
        .collect())
}

/// Tables for `psi`, the images needed by the identities, and the residual
/// of each identity as a maximum over `n` of a relative deviation.
pub fn verify_all(psi: &CoefficientPair, n_max: i64, tolerances: &Tolerances, nm: &Numerics) -> Result<SpectralReport> {
    if n_max < 1 {
        return Err(SpectralError::InvalidInput("n_max must be >= 1".into()));
    }
    psi.validate(crate::coefficients::DEFAULT_MAX_MODES)?;
    nm.check_regime(psi)?;
    nm.validate()?;
    let reflect = psi.transform(Symmetry::Reflect);
    let star = psi.transform(Symmetry::Star);
    let star_reflect = psi.transform(Symmetry::StarReflect);

    let (ram_sym, (spectra, (eigs, images))) = rayon::join(
        || -> Result<_> {
            let ram = find_ramifications(psi, n_max, nm).stage("ramifications")?;
            let sym = check_ramification_symmetries(psi, &ram, nm).stage("ramification symmetries")?;
            Ok((ram, sym))
        },
        || {
            rayon::join(
                || -> Result<_> {
                    let variants = [psi, &reflect, &star, &star_reflect];
                    let out = variants
                        .par_iter()
                        .map(|v| hill_spectrum(v, n_max, nm))
                        .collect::<Result<Vec<_>>>()
                        .stage("schrodinger")?;
                    Ok(out)
                },
                || {
                    rayon::join(
                        || -> Result<_> {
                            let direct = find_three_point_eigs(psi, n_max, Which::Direct, nm).stage("three-point direct")?;
                            let transpose =
                                find_three_point_eigs(psi, n_max, Which::Transpose, nm).stage("three-point transpose")?;
                            let h = transpose
                                .par_iter()
                                .filter(|e| e.n >= 1)
                                .map(|e| norming_constant_from(psi, e, nm).map(|v| (e.n, v)))
                                .collect::<Result<Vec<_>>>()
                                .stage("norming constants h")?;
                            Ok((direct, transpose, h))
                        },
                        || -> Result<_> {
                            let mu_reflect = mu_table(&reflect, n_max, Which::Direct, nm).stage("three-point reflect")?;
                            let mu_star = mu_table(&star, n_max, Which::Direct, nm).stage("three-point star")?;
                            Ok((mu_reflect, mu_star))
                        },
                    )
                },
            )
        },
    );
    let (ram, sym) = ram_sym?;
    let spectra = spectra?;
    let (direct, transpose, h) = eigs?;
    let (mu_reflect, mu_star) = images?;

    let tables = Tables {
        ramifications: ramification_table(&ram),
        mu: direct.iter().map(|e| (e.n, e.mu)).collect(),
        mu_tilde: transpose.iter().map(|e| (e.n, e.mu)).collect(),
        h: h.into_iter().collect(),
        periodic: spectrum_table(&spectra[0]),
        gamma: spectra[0].dirichlet_eigs.clone(),
        g: spectra[0].norming.clone(),
    };
    let images = ImageTables {
        periodic_reflect: spectrum_table(&spectra[1]),
        periodic_star: spectrum_table(&spectra[2]),
        periodic_star_reflect: spectrum_table(&spectra[3]),
        gamma_reflect: spectra[1].dirichlet_eigs.clone(),
        mu_reflect,
        mu_star,
    };
    let residuals = identity_residuals(&tables, &images, sym.max(), n_max);
    let tolerance_map: BTreeMap<String, f64> = IDENTITIES.iter().map(|&k| (k.to_string(), tolerances.get(k))).collect();
    let pass: BTreeMap<String, bool> = residuals
        .iter()
        .map(|(k, &v)| (k.clone(), v <= tolerance_map[k]))
        .collect();
    let all_pass = pass.values().all(|&b| b);
    Ok(SpectralReport {
        schema: SCHEMA_VERSION,
        psi: psi.describe(),
        coefficients: psi.clone(),
        n_max,
        numerics: *nm,
        tables,
        images,
        residuals,
        tolerances: tolerance_map,
        pass,
        all_pass,
    })
}

/// Residuals recomputed from the tables alone.
pub fn identity_residuals(t: &Tables, im: &ImageTables, ramification_symmetry: f64, n_max: i64) -> BTreeMap<String, f64> {
    let ns = || 1..=n_max;
    let mut out = BTreeMap::new();
    let pair_rel = |a: &[C64; 2], b: [C64; 2]| rel(a[0], b[0]).max(rel(a[1], b[1]));
    out.insert(
        "periodic_vs_ramifications".to_string(),
        max_over(ns().map(|n| {
            let r = t.ramifications[&n];
            pair_rel(&t.periodic[&n], [energy_of(r[0]), energy_of(r[1])])
        })),
    );
    out.insert(
        "periodic_reflect".to_string(),
        max_over(ns().map(|n| pair_rel(&im.periodic_reflect[&n], t.periodic[&n]))),
    );
    out.insert(
        "periodic_star".to_string(),
        max_over(ns().map(|n| {
            let r = t.ramifications[&-n];
            pair_rel(&im.periodic_star[&n], [energy_of(-r[1]), energy_of(-r[0])])
        })),
    );
    out.insert(
        "periodic_star_reflect".to_string(),
        max_over(ns().map(|n| pair_rel(&im.periodic_star_reflect[&n], im.periodic_star[&n]))),
    );
    out.insert(
        "dirichlet_reflect_vs_mu".to_string(),
        max_over(ns().map(|n| rel(im.gamma_reflect[&n], energy_of(t.mu[&n])))),
    );
    out.insert(
        "dirichlet_vs_mu_tilde".to_string(),
        max_over(ns().map(|n| rel(t.gamma[&n], energy_of(t.mu_tilde[&n])))),
    );
    out.insert(
        "dirichlet_vs_mu_star".to_string(),
        max_over(ns().map(|n| rel(t.gamma[&n], energy_of(-im.mu_star[&-n])))),
    );
    out.insert(
        "mu_tilde_vs_mu_reflect".to_string(),
        max_over(
            t.mu_tilde
                .iter()
                .map(|(n, &m)| rel(m, im.mu_reflect[n])),
        ),
    );
    out.insert(
        "norming_constants".to_string(),
        max_over(ns().map(|n| {
            let g = t.g[&n];
            (g - t.h[&n] / (4.0 * PI * n as f64)).abs() / (1.0 + g.abs())
        })),
    );
    out.insert(
        "mu_in_ramification_gap".to_string(),
        max_over(t.mu.iter().map(|(n, &m)| {
            let r = t.ramifications[n];
            outside(m, r[0], r[1])
        })),
    );
    out.insert(
        "gamma_in_band_gap".to_string(),
        max_over(ns().map(|n| {
            let e = t.periodic[&n];
            outside(t.gamma[&n], e[0], e[1])
        })),
    );
    out.insert("ramification_symmetries".to_string(), ramification_symmetry);
    out
}

/// One sample of the translation loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingSample {
    pub t: f64,
    pub mu: C64,
    /// Angle on the double cover of the gap, in `[0, 2 pi)`.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    pub n: i64,
    pub gap: [C64; 2],
    /// Signed number of rounds.
    pub winding: i64,
    pub samples: Vec<WindingSample>,
}

/// Sheet of `mu` over the gap: `+1` if the eigenfunction multiplier is the
/// larger of the two subdominant multipliers, `-1` otherwise.
fn sheet(psi: &CoefficientPair, n: i64, mu: C64, nm: &Numerics) -> Result<f64> {
    let pt = SpectralPoint::from_lambda(mu);
    let steps = nm.steps_for_point(&pt);
    let (_, a) = eigen_vector(psi, mu, Which::Direct, steps)?;
    let data = monodromy_matrix(psi, &pt, nm)?;
    let tau3 = select_tau3(&data)?.value;
    let product = data.scheme_det / tau3;
    let s = a.norm_sqr() - product.norm();
    if !s.is_finite() {
        return Err(SpectralError::NonConvergent {
            what: "winding sheet",
            detail: format!("n = {n}, mu = {mu}"),
        });
    }
    Ok(if s >= 0.0 { 1.0 } else { -1.0 })
}

/// Rounds of `mu_n(psi(. + t))` about `[r_n^-, r_n^+]` as `t` runs over
/// `[0, 1]`.
///
/// The gap is lifted to a circle: `mu = m - w cos(angle)` with `angle` in
/// `[pi, 2 pi]` on the sheet `+1` and in `[0, pi]` on the sheet `-1`,
/// where `m`, `w` are the midpoint and half-width of the gap. With this
/// orientation increasing `t` counts positive.
pub fn track_winding(psi: &CoefficientPair, n: i64, steps: usize, nm: &Numerics) -> Result<WindingResult> {
    if n == 0 || steps < 64 * n.unsigned_abs() as usize {
        return Err(SpectralError::InvalidInput(format!(
            "winding needs n != 0 and steps >= 64 |n| (n = {n}, steps = {steps})"
        )));
    }
    nm.check_regime(psi)?;
    let (minus, plus) = if psi.is_real() {
        let (a, b) = real_gap_edges(psi, n, nm)?;
        (C64::new(a, 0.0), C64::new(b, 0.0))
    } else {
        let r = ramification_pair(psi, n, nm).stage("ramifications")?;
        (r.minus, r.plus)
    };
    let width = (plus - minus).norm();
    if width == 0.0 {
        return Err(SpectralError::DegenerateGap { n, width });
    }
    let mid = 0.5 * (minus + plus);
    let half = 0.5 * (plus - minus);

    let mut samples = Vec::with_capacity(steps + 1);
    let mut mu = three_point_eig(psi, n, Which::Direct, nm).stage("three-point")?.mu;
    let mut total = 0.0;
    for j in 0..=steps {
        let t = j as f64 / steps as f64;
        let shifted = psi.transform(Symmetry::Translate(t));
        let next = refine_eigenvalue(&shifted, n, Which::Direct, mu, nm).stage(format!("three-point at t = {t}"))?;
        let jump = (next - mu).norm();
        if j > 0 && jump > half.norm() {
            return Err(SpectralError::LostTracking { step: j, jump });
        }
        mu = next;
        let c = ((mid - mu) / half).re.clamp(-1.0, 1.0);
        let base = c.acos();
        let angle = if sheet(&shifted, n, mu, nm)? > 0.0 { 2.0 * PI - base } else { base };
        if let Some(prev) = samples.last() {
            let prev: &WindingSample = prev;
            let mut d = angle - prev.angle;
            d -= 2.0 * PI * (d / (2.0 * PI)).round();
            total += d;
        }
        samples.push(WindingSample { t, mu, angle });
    }
    Ok(WindingResult {
        n,
        gap: [minus, plus],
        winding: (total / (2.0 * PI)).round() as i64,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::TrigSeries;

    fn nm() -> Numerics {
        Numerics::default()
    }

    #[test]
    fn energy_map() {
        let r = C64::new(crate::monodromy::unperturbed_ramification(1), 0.0);
        assert!((energy_of(r) - PI * PI).norm() < 1e-12);
    }

    #[test]
    fn outside_distance() {
        let lo = C64::new(1.0, 0.0);
        let hi = C64::new(2.0, 0.0);
        assert_eq!(outside(C64::new(1.5, 0.0), lo, hi), 0.0);
        assert!((outside(C64::new(2.5, 0.0), lo, hi) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn degenerate_gap_rejected() {
        match track_winding(&CoefficientPair::zero(), 1, 64, &nm()) {
            Err(SpectralError::DegenerateGap { n: 1, .. }) => {}
            other => panic!("expected DegenerateGap, got {other:?}"),
        }
        assert!(matches!(
            track_winding(&CoefficientPair::zero(), 1, 10, &nm()),
            Err(SpectralError::InvalidInput(_))
        ));
    }

    #[test]
    fn free_report_is_clean() {
        let rep = verify_all(&CoefficientPair::zero(), 1, &Tolerances::uniform(1e-8), &nm()).unwrap();
        for (k, v) in &rep.residuals {
            assert!(*v < 1e-8, "{k}: {v:e}");
        }
        assert!(rep.all_pass);
        let again = identity_residuals(&rep.tables, &rep.images, rep.residuals["ramification_symmetries"], 1);
        assert_eq!(again, rep.residuals);
    }

    #[test]
    fn first_gap_winds_once() {
        let psi = CoefficientPair::new(TrigSeries::cos_mode(1, 0.05), TrigSeries::zero());
        let w = track_winding(&psi, 1, 64, &nm()).unwrap();
        assert_eq!(w.winding, 1);
        let (first, last) = (w.samples[0].mu, w.samples[64].mu);
        assert!((first - last).norm() < 1e-8 * first.norm());
    }

    #[test]
    fn even_translation_returns() {
        let psi = CoefficientPair::new(TrigSeries::cos_mode(1, 0.05), TrigSeries::zero());
        let a = three_point_eig(&psi, 1, Which::Direct, &nm()).unwrap().mu;
        let b = three_point_eig(&psi.transform(Symmetry::Translate(1.0)), 1, Which::Direct, &nm()).unwrap().mu;
        assert!((a - b).norm() < 1e-8 * a.norm());
    }
}
