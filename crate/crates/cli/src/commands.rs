use std::collections::BTreeMap;

use anyhow::Result;
use mckean::monodromy::{monodromy_matrix, select_tau3};
use mckean::ramifications::{check_ramification_symmetries, find_ramifications, rho_function, RamificationPair};
use mckean::schrodinger::{hill_spectrum, lyapunov_trace, HillSpectrum};
use mckean::three_point::{find_three_point_eigs, norming_constant_from, three_point_determinant, Which};
use mckean::verify::{track_winding, verify_all, SpectralReport, WindingResult};
use mckean::{mckean::potential_direct, SpectralPoint, C64};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, TraceKind};
use crate::output::csv;

/// Points `from + k (to - from) / (points - 1)`.
fn segment(from: C64, to: C64, points: usize) -> Vec<C64> {
    (0..points)
        .map(|k| from + (to - from) * (k as f64 / (points - 1) as f64))
        .collect()
}

pub fn trace(cfg: &RunConfig) -> Result<String> {
    let psi = &cfg.coefficients;
    let nm = &cfg.numerics;
    let t = &cfg.trace;
    let grid = segment(t.from.value(), t.to.value(), t.points);
    let pairs = |f: &(dyn Fn(C64) -> mckean::Result<C64> + Sync)| -> Result<Vec<Vec<f64>>> {
        let vals = grid.par_iter().map(|&l| f(l)).collect::<mckean::Result<Vec<_>>>()?;
        Ok(grid
            .iter()
            .zip(vals)
            .map(|(l, v)| vec![l.re, l.im, v.re, v.im])
            .collect())
    };
    Ok(match t.what {
        TraceKind::Rho => csv(&["lambda_re", "lambda_im", "f_re", "f_im"], pairs(&rho_function(psi, nm))?),
        TraceKind::Bdet => {
            let f = |l: C64| {
                let pt = SpectralPoint::from_lambda(l);
                three_point_determinant(psi, &pt, Which::Direct, nm.steps_for_point(&pt))
            };
            csv(&["lambda_re", "lambda_im", "f_re", "f_im"], pairs(&f)?)
        }
        TraceKind::Lyapunov => {
            let energies: Vec<f64> = grid.iter().map(|e| e.re).collect();
            anyhow::ensure!(grid.iter().all(|e| e.im == 0.0), "lyapunov traces need a real energy segment");
            let delta = lyapunov_trace(psi, &energies, nm)?;
            csv(
                &["energy_re", "energy_im", "f_re", "f_im"],
                energies.iter().zip(delta).map(|(&e, d)| vec![e, 0.0, d.re, d.im]),
            )
        }
        TraceKind::Potential => {
            let pot = potential_direct(psi, t.energy.value(), nm)?;
            csv(
                &["x", "v_re", "v_im"],
                pot.x.iter().zip(&pot.v).map(|(&x, v)| vec![x, v.re, v.im]),
            )
        }
    })
}

#[derive(Serialize)]
pub struct MonodromySummary {
    pub lambda: C64,
    pub z: C64,
    pub steps: usize,
    /// Row-major, `matrix[j][k] = phi_j^{[k]}(1)`.
    pub matrix: [[C64; 3]; 3],
    pub trace: C64,
    pub c2: C64,
    pub det: C64,
    pub multipliers: [C64; 3],
    pub tau3: Option<C64>,
    pub rho: C64,
}

pub fn monodromy(cfg: &RunConfig, lambda: C64) -> Result<MonodromySummary> {
    let pt = SpectralPoint::from_lambda(lambda);
    let d = monodromy_matrix(&cfg.coefficients, &pt, &cfg.numerics)?;
    let m = d.matrix;
    Ok(MonodromySummary {
        lambda,
        z: pt.z,
        steps: d.steps,
        matrix: [0, 1, 2].map(|j| [m[(j, 0)], m[(j, 1)], m[(j, 2)]]),
        trace: d.trace(),
        c2: d.c2,
        det: d.scheme_det,
        multipliers: d.multipliers,
        tau3: select_tau3(&d).ok().map(|t| t.value),
        rho: d.rho,
    })
}

#[derive(Serialize)]
pub struct RamificationReport {
    pub psi: String,
    pub entries: BTreeMap<i64, RamificationPair>,
    pub symmetry_residuals: BTreeMap<&'static str, f64>,
}

pub fn ramifications(cfg: &RunConfig) -> Result<RamificationReport> {
    let psi = &cfg.coefficients;
    let set = find_ramifications(psi, cfg.n_max, &cfg.numerics)?;
    let sym = check_ramification_symmetries(psi, &set, &cfg.numerics)?;
    Ok(RamificationReport {
        psi: psi.describe(),
        entries: set.entries,
        symmetry_residuals: BTreeMap::from([
            ("star", sym.star),
            ("star_reflect", sym.star_reflect),
            ("reflect", sym.reflect),
        ]),
    })
}

#[derive(Serialize)]
pub struct ThreePointEntry {
    pub mu: C64,
    pub floquet_a: C64,
    pub residual: f64,
}

#[derive(Serialize)]
pub struct ThreePointReport {
    pub psi: String,
    pub direct: BTreeMap<i64, ThreePointEntry>,
    pub transpose: BTreeMap<i64, ThreePointEntry>,
    pub h: BTreeMap<i64, f64>,
}

pub fn three_point(cfg: &RunConfig) -> Result<ThreePointReport> {
    let psi = &cfg.coefficients;
    let nm = &cfg.numerics;
    let table = |which| -> Result<_> {
        Ok(find_three_point_eigs(psi, cfg.n_max, which, nm)?
            .into_iter()
            .map(|e| {
                let entry = ThreePointEntry {
                    mu: e.mu,
                    floquet_a: e.floquet_a,
                    residual: e.residual,
                };
                (e.n, (entry, e))
            })
            .collect::<BTreeMap<_, _>>())
    };
    let direct = table(Which::Direct)?;
    let transpose = table(Which::Transpose)?;
    let h = transpose
        .par_iter()
        .filter(|(&n, _)| n >= 1)
        .map(|(&n, (_, e))| Ok((n, norming_constant_from(psi, e, nm)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(ThreePointReport {
        psi: psi.describe(),
        direct: direct.into_iter().map(|(n, (s, _))| (n, s)).collect(),
        transpose: transpose.into_iter().map(|(n, (s, _))| (n, s)).collect(),
        h,
    })
}

#[derive(Serialize)]
pub struct SchrodingerReport {
    pub psi: String,
    #[serde(flatten)]
    pub spectrum: HillSpectrum,
}

pub fn schrodinger(cfg: &RunConfig) -> Result<SchrodingerReport> {
    Ok(SchrodingerReport {
        psi: cfg.coefficients.describe(),
        spectrum: hill_spectrum(&cfg.coefficients, cfg.n_max, &cfg.numerics)?,
    })
}

pub fn verify(cfg: &RunConfig) -> Result<SpectralReport> {
    Ok(verify_all(&cfg.coefficients, cfg.n_max, &cfg.tolerances, &cfg.numerics)?)
}

pub fn winding(cfg: &RunConfig) -> Result<WindingResult> {
    Ok(track_winding(
        &cfg.coefficients,
        cfg.winding.n,
        cfg.winding.translations,
        &cfg.numerics,
    )?)
}
