//! Monodromy matrix, multipliers, discriminant and Floquet solutions.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientPair;
use crate::cubic::{characteristic_cubic, cubic_discriminant};
use crate::error::{Result, SpectralError};
use crate::ode::{
    propagate, propagate_terminal, propagate_with_inverse, Numerics, SpectralPoint, System, C64, OMEGA, SQRT3,
};

/// Tie tolerance for the `tau_3` branch choice.
pub const BRANCH_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyData {
    pub point: SpectralPoint,
    pub steps: usize,
    /// `M[(j, k)] = phi_j^{[k]}(1)`.
    pub matrix: Matrix3<C64>,
    /// Sum of principal 2x2 minors of `M`, as `det M tr(M^{-1})`.
    pub c2: C64,
    /// `det M` of the discrete scheme, as the product of step determinants.
    pub scheme_det: C64,
    /// `[tau_1, tau_2, tau_3]`, the last of largest modulus.
    pub multipliers: [C64; 3],
    pub rho: C64,
}

impl MonodromyData {
    /// State propagator `Phi(1) = M^T`.
    pub fn propagator(&self) -> Matrix3<C64> {
        self.matrix.transpose()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Determinant evaluated from the entries of `M`.
    pub fn det(&self) -> C64 {
        self.matrix.determinant()
    }

    /// Magnitude of the largest term in the discriminant polynomial; the
    /// natural scale for deciding that `rho` vanishes.
    pub fn rho_scale(&self) -> f64 {
        let t = self.trace().norm();
        let c = self.c2.norm();
        let d = self.scheme_det.norm();
        (t * t * c * c).max(4.0 * c * c * c).max(4.0 * t * t * t * d).max(27.0 * d * d)
    }

    /// `(tau_1 - tau_2)^2` from the quadratic factor left after dividing out
    /// the largest multiplier. It has the sign of `rho` on the real axis
    /// when the coefficients are real, and resolves a closing pair of small
    /// multipliers far better than `rho`, whose terms carry `tau_3^4`.
    pub fn subdominant_discriminant(&self) -> C64 {
        let tau = self.multipliers[2];
        let d = self.scheme_det;
        let sum = (self.c2 - d / tau) / tau;
        sum * sum - 4.0 * d / tau
    }

    /// Relative residual of `tau` in the characteristic cubic.
    pub fn cubic_residual(&self, tau: C64) -> f64 {
        let t = self.trace();
        let f = ((tau - t) * tau + self.c2) * tau - self.scheme_det;
        let scale = tau.norm().powi(3) + t.norm() * tau.norm_sqr() + self.c2.norm() * tau.norm() + self.scheme_det.norm();
        f.norm() / scale
    }
}

pub fn monodromy_matrix(psi: &CoefficientPair, pt: &SpectralPoint, nm: &Numerics) -> Result<MonodromyData> {
    monodromy_with_steps(psi, pt, nm.steps_for_point(pt))
}

pub fn monodromy_with_steps(psi: &CoefficientPair, pt: &SpectralPoint, steps: usize) -> Result<MonodromyData> {
    // The invariants must belong to one matrix: mixing a separately
    // integrated adjoint lifts double zeros of rho by the O(h^4) mismatch.
    let prop = propagate_with_inverse(psi, pt, System::Direct, 1.0, steps)?;
    let trace = prop.forward.trace();
    let c2 = prop.det * prop.inverse.trace();
    let roots = characteristic_cubic(trace, c2, prop.det);
    Ok(MonodromyData {
        point: *pt,
        steps,
        matrix: prop.forward.transpose(),
        c2,
        scheme_det: prop.det,
        multipliers: roots.roots,
        rho: cubic_discriminant(trace, c2, prop.det),
    })
}

/// `M~` of the transpose equation, arranged like `M`.
pub fn transpose_monodromy(psi: &CoefficientPair, pt: &SpectralPoint, steps: usize) -> Result<Matrix3<C64>> {
    Ok(propagate_terminal(psi, pt, System::Transpose, 1.0, steps)?.transpose())
}

/// Antidiagonal form with `J A~ J = -A^T`.
pub fn symmetry_j() -> Matrix3<C64> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    Matrix3::new(o, o, l, o, -l, o, l, o, o)
}

pub fn discriminant_rho(psi: &CoefficientPair, pt: &SpectralPoint, nm: &Numerics) -> Result<C64> {
    Ok(monodromy_matrix(psi, pt, nm)?.rho)
}

/// Discriminant for `psi = 0`: `-64 sin^2(sqrt3 z/2) sin^2(sqrt3 w z/2) sin^2(sqrt3 w^2 z/2)`.
///
/// The sign follows from `(tau_1 - tau_2)^2 < 0` for the conjugate pair of
/// free multipliers at real `z`.
pub fn unperturbed_rho(z: C64) -> C64 {
    let mut r = C64::new(-64.0, 0.0);
    let mut w = C64::new(1.0, 0.0);
    for _ in 0..3 {
        let s = (0.5 * SQRT3 * w * z).sin();
        r *= s * s;
        w *= OMEGA;
    }
    r
}

/// Unperturbed double zeros `(2 pi n / sqrt3)^3`.
pub fn unperturbed_ramification(n: i64) -> f64 {
    (2.0 * PI * n as f64 / SQRT3).powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tau3 {
    pub value: C64,
    pub index: usize,
}

/// Distance between `Log tau` and `z` modulo `2 pi i`.
fn log_distance(tau: C64, z: C64) -> f64 {
    let re = tau.norm().ln() - z.re;
    let im = (tau.arg() - z.im).rem_euclid(2.0 * PI);
    let im = if im > PI { im - 2.0 * PI } else { im };
    re.hypot(im)
}

/// Picks the multiplier asymptotic to `e^z`.
pub fn select_tau3(data: &MonodromyData) -> Result<Tau3> {
    let z = data.point.z;
    let mut d: Vec<(f64, usize)> = data
        .multipliers
        .iter()
        .enumerate()
        .map(|(k, &t)| (log_distance(t, z), k))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    let gap = d[1].0 - d[0].0;
    if gap < BRANCH_TIE_TOL {
        return Err(SpectralError::AmbiguousBranch { gap });
    }
    Ok(Tau3 {
        value: data.multipliers[d[0].1],
        index: d[0].1,
    })
}

/// Floquet solution `eta` with `eta(0) = 1` on the integration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetData {
    pub point: SpectralPoint,
    pub tau: C64,
    pub x: Vec<f64>,
    pub eta: Vec<C64>,
    pub eta1: Vec<C64>,
    pub eta2: Vec<C64>,
    pub min_abs_eta: f64,
}

impl FloquetData {
    pub fn initial(&self) -> Vector3<C64> {
        Vector3::new(self.eta[0], self.eta1[0], self.eta2[0])
    }

    pub fn terminal(&self) -> Vector3<C64> {
        let n = self.eta.len() - 1;
        Vector3::new(self.eta[n], self.eta1[n], self.eta2[n])
    }

    /// `|state(1) - tau state(0)| / |tau state(0)|`.
    pub fn periodicity_residual(&self) -> f64 {
        let want = self.initial() * self.tau;
        (self.terminal() - want).norm() / want.norm()
    }
}

/// Bilinear cross product (no conjugation).
pub(crate) fn cross(a: &Vector3<C64>, b: &Vector3<C64>) -> Vector3<C64> {
    Vector3::new(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )
}

/// Null vector of a rank-2 matrix from the best-conditioned pair of rows.
pub(crate) fn null_vector(b: &Matrix3<C64>) -> Vector3<C64> {
    let rows: Vec<Vector3<C64>> = (0..3).map(|i| b.row(i).transpose()).collect();
    [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| {
            let v = cross(&rows[i], &rows[j]);
            let scale = rows[i].norm() * rows[j].norm();
            let quality = if scale > 0.0 { v.norm() / scale } else { 0.0 };
            (quality, v)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, v)| v)
        .expect("three row pairs")
}

pub fn floquet_solution(
    psi: &CoefficientPair,
    data: &MonodromyData,
    tau: C64,
    steps: usize,
) -> Result<FloquetData> {
    let residual = data.cubic_residual(tau);
    let separation = data
        .multipliers
        .iter()
        .map(|&t| (t - tau).norm())
        .filter(|&d| d > 1e-14 * tau.norm())
        .fold(f64::INFINITY, f64::min);
    if residual > 1e-9 || separation <= 1e-6 * tau.norm().max(1.0) {
        return Err(SpectralError::NotSimple { residual, separation });
    }

    let p = data.propagator();
    let v = null_vector(&(p - Matrix3::identity() * tau));
    if v[0].norm() <= 1e-12 * v.norm() {
        return Err(SpectralError::VanishingEta { min_abs: 0.0 });
    }
    let v = v / v[0];

    let traj = propagate(psi, &data.point, System::Direct, 1.0, steps)?;
    let n = traj.phi.len();
    let (mut eta, mut eta1, mut eta2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for m in &traj.phi {
        let s = m * v;
        eta.push(s[0]);
        eta1.push(s[1]);
        eta2.push(s[2]);
    }
    let min_abs_eta = eta.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min);
    if min_abs_eta < 1e-6 {
        return Err(SpectralError::VanishingEta { min_abs: min_abs_eta });
    }
    Ok(FloquetData {
        point: data.point,
        tau,
        x: traj.x,
        eta,
        eta1,
        eta2,
        min_abs_eta,
    })
}

/// Floquet solution of the `tau_3` branch.
pub fn floquet_tau3(psi: &CoefficientPair, pt: &SpectralPoint, steps: usize) -> Result<FloquetData> {
    let data = monodromy_with_steps(psi, pt, steps)?;
    let tau = select_tau3(&data)?;
    floquet_solution(psi, &data, tau.value, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::TrigSeries;
    use approx::assert_abs_diff_eq;

    fn nm() -> Numerics {
        Numerics::default()
    }

    /// Roots of `k^3 + 2 p0 k - lambda` from the free exponents by Newton.
    fn constant_exponents(p0: f64, lambda: C64) -> [C64; 3] {
        let z = SpectralPoint::from_lambda(lambda).z;
        crate::ode::free_exponents(z).map(|mut k| {
            for _ in 0..60 {
                k -= (k * k * k + 2.0 * p0 * k - lambda) / (3.0 * k * k + 2.0 * p0);
            }
            k
        })
    }

    fn as_set_close(got: [C64; 3], want: [C64; 3], tol: f64) -> bool {
        want.iter().all(|w| got.iter().any(|g| (g - w).norm() < tol * w.norm().max(1.0)))
    }

    #[test]
    fn free_multipliers_and_trace() {
        let psi = CoefficientPair::zero();
        let pt = SpectralPoint::from_lambda(C64::new(1.0, 0.0));
        let m = monodromy_matrix(&psi, &pt, &nm()).unwrap();
        // e + 2 e^{-1/2} cos(sqrt3/2)
        let closed = 1f64.exp() + 2.0 * (-0.5f64).exp() * (0.5 * SQRT3).cos();
        assert_abs_diff_eq!(m.trace().re, closed, epsilon = 1e-12);
        // trace of expm([[0,1,0],[0,0,1],[1,0,0]])
        assert_abs_diff_eq!(closed, 3.504_174_940_127_756, epsilon = 1e-14);

        for &lam in &[C64::new(1.0, 0.0), C64::new(30.0, 10.0), C64::new(-20.0, 3.0)] {
            let pt = SpectralPoint::from_lambda(lam);
            let m = monodromy_matrix(&psi, &pt, &nm()).unwrap();
            let want = crate::ode::free_exponents(pt.z).map(|k| k.exp());
            assert!(as_set_close(m.multipliers, want, 1e-8), "{lam}");
        }
    }

    #[test]
    fn unperturbed_discriminant() {
        let psi = CoefficientPair::zero();
        let pt = SpectralPoint::from_lambda(C64::new(1.0, 0.0));
        let m = monodromy_matrix(&psi, &pt, &nm()).unwrap();
        let closed = unperturbed_rho(C64::new(1.0, 0.0));
        assert!((m.rho - closed).norm() < 1e-8 * closed.norm());
        // Independent value of the closed form at z = 1.
        let s = |w: C64| (0.5 * SQRT3 * w).sin().powi(2);
        let direct = -64.0 * s(C64::new(1.0, 0.0)) * s(OMEGA) * s(OMEGA * OMEGA);
        assert!((closed - direct).norm() < 1e-14 * direct.norm());

        for n in [1, -1] {
            let pt = SpectralPoint::from_lambda(C64::new(unperturbed_ramification(n), 0.0));
            let m = monodromy_matrix(&psi, &pt, &nm()).unwrap();
            assert!(m.rho.norm() < 1e-6 * m.rho_scale(), "n={n}: {}", m.rho);
        }
        assert_abs_diff_eq!(unperturbed_ramification(1), 47.7373, epsilon = 1e-4);
    }

    #[test]
    fn constant_p_oracle() {
        let p0 = -0.1;
        let psi = CoefficientPair::new(TrigSeries::constant(p0), TrigSeries::zero());
        let lam = C64::new(5.0, 0.0);
        let m = monodromy_matrix(&psi, &SpectralPoint::from_lambda(lam), &nm()).unwrap();
        let ks = constant_exponents(p0, lam);
        assert!(as_set_close(m.multipliers, ks.map(|k| k.exp()), 1e-8));
        let t3 = select_tau3(&m).unwrap();
        let k3 = ks.iter().find(|k| k.im.abs() < 1e-12).unwrap();
        assert!((t3.value - k3.exp()).norm() < 1e-9 * k3.exp().norm());

        // rho vanishes at r_0^+ = (4/3) sqrt(2/3) (0.1)^{3/2}.
        let r0 = 4.0 / 3.0 * (2.0f64 / 3.0).sqrt() * 0.1f64.powf(1.5);
        assert_abs_diff_eq!(r0, 0.0344266, epsilon = 1e-7);
        let at = monodromy_matrix(&psi, &SpectralPoint::from_lambda(C64::new(r0, 0.0)), &nm()).unwrap();
        let off = monodromy_matrix(&psi, &SpectralPoint::from_lambda(C64::new(0.3, 0.0)), &nm()).unwrap();
        assert!(at.rho.norm() < 1e-6 * off.rho.norm());
    }

    #[test]
    fn real_data_gives_real_monodromy() {
        let psi = CoefficientPair::new(TrigSeries::cos_mode(1, 0.05), TrigSeries::sin_mode(1, 0.03));
        let m = monodromy_matrix(&psi, &SpectralPoint::from_lambda(C64::new(12.0, 0.0)), &nm()).unwrap();
        assert!(m.matrix.iter().all(|c| c.im.abs() < 1e-10 * c.norm().max(1.0)));
        assert!(m.rho.im.abs() < 1e-10 * m.rho.norm());
    }

    #[test]
    fn tau3_selection() {
        let psi = CoefficientPair::zero();
        let m = monodromy_matrix(&psi, &SpectralPoint::from_z(C64::new(2.0, 0.0)).unwrap(), &nm()).unwrap();
        let t = select_tau3(&m).unwrap();
        assert_abs_diff_eq!(t.value.re, 7.389056, epsilon = 1e-6);

        // Continuity along |z - 2 pi / sqrt3| = 1.
        let c = 2.0 * PI / SQRT3;
        let mut prev: Option<C64> = None;
        for k in 0..256 {
            let th = 2.0 * PI * k as f64 / 256.0;
            let pt = SpectralPoint::from_root(C64::new(c, 0.0) + C64::from_polar(1.0, th));
            let m = monodromy_matrix(&psi, &pt, &nm()).unwrap();
            let t = select_tau3(&m).unwrap().value;
            assert!((t - pt.z.exp()).norm() < 1e-8 * t.norm());
            if let Some(p) = prev {
                assert!((t.ln() - p.ln()).norm() < 0.2);
            }
            prev = Some(t);
        }
    }

    #[test]
    fn floquet_free_and_constant() {
        let psi = CoefficientPair::zero();
        let pt = SpectralPoint::from_z(C64::new(1.0, 0.0)).unwrap();
        let f = floquet_tau3(&psi, &pt, 1024).unwrap();
        assert!((f.tau - 1f64.exp()).norm() < 1e-12);
        for (k, &x) in f.x.iter().enumerate() {
            assert!((f.eta[k] - x.exp()).norm() < 1e-11);
            assert!((f.eta2[k] / f.eta[k] - 1.0).norm() < 1e-11);
        }
        assert_abs_diff_eq!(f.min_abs_eta, 1.0, epsilon = 1e-14);

        let p0 = -0.1;
        let psi = CoefficientPair::new(TrigSeries::constant(p0), TrigSeries::zero());
        let lam = C64::new(7.0, 0.0);
        let f = floquet_tau3(&psi, &SpectralPoint::from_lambda(lam), 1024).unwrap();
        let k3 = constant_exponents(p0, lam)[2];
        for (k, &x) in f.x.iter().enumerate().step_by(64) {
            assert!((f.eta[k] - (k3 * x).exp()).norm() < 1e-10 * f.eta[k].norm());
        }
        assert!(f.periodicity_residual() < 1e-7);
    }

    #[test]
    fn floquet_rejects_non_multipliers() {
        let psi = CoefficientPair::zero();
        let m = monodromy_matrix(&psi, &SpectralPoint::from_lambda(C64::new(3.0, 0.0)), &nm()).unwrap();
        let err = floquet_solution(&psi, &m, C64::new(2.0, 0.0), 1024).unwrap_err();
        assert!(matches!(err, SpectralError::NotSimple { .. }));
    }

    #[test]
    fn transpose_multipliers_are_inverses() {
        let psi = CoefficientPair::new(TrigSeries::cos_mode(1, 0.05), TrigSeries::sin_mode(1, 0.03));
        let pt = SpectralPoint::from_lambda(C64::new(20.0, 4.0));
        let m = monodromy_matrix(&psi, &pt, &nm()).unwrap();
        let mt = transpose_monodromy(&psi, &pt, m.steps).unwrap();
        let j = symmetry_j();
        assert!((mt.transpose() * j * m.matrix - j).norm() < 1e-8);
        let t = mt.trace();
        let inv = m.multipliers.map(|t| 1.0 / t);
        let tr_inv: C64 = inv.iter().sum();
        assert!((t - tr_inv).norm() < 1e-7 * tr_inv.norm());
    }
}
