//! One-periodic coefficient pairs `psi = (p, q)` as finite trigonometric
//! series.
//!
//! Every series is `c + sum_n (a_n cos 2 pi n x + b_n sin 2 pi n x)`, so the
//! derivative `p'` needed by the H^1 norm is exact and the reflection and
//! translation symmetries act on coefficients without resampling.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectralError};

/// Default cap on the number of Fourier modes per series.
pub const DEFAULT_MAX_MODES: usize = 32;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "SeriesRepr", into = "SeriesRepr")]
pub struct TrigSeries {
    pub constant: Complex64,
    /// `cos[k]` multiplies `cos 2 pi (k+1) x`.
    pub cos: Vec<Complex64>,
    /// `sin[k]` multiplies `sin 2 pi (k+1) x`.
    pub sin: Vec<Complex64>,
}

impl TrigSeries {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            constant: Complex64::new(c, 0.0),
            ..Self::default()
        }
    }

    /// Real series from plain coefficient slices.
    pub fn real(constant: f64, cos: &[f64], sin: &[f64]) -> Self {
        let lift = |v: &[f64]| v.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        Self {
            constant: Complex64::new(constant, 0.0),
            cos: lift(cos),
            sin: lift(sin),
        }
        .trimmed()
    }

    /// `amplitude * cos 2 pi n x`.
    pub fn cos_mode(n: usize, amplitude: f64) -> Self {
        let mut cos = vec![0.0; n];
        cos[n - 1] = amplitude;
        Self::real(0.0, &cos, &[])
    }

    /// `amplitude * sin 2 pi n x`.
    pub fn sin_mode(n: usize, amplitude: f64) -> Self {
        let mut sin = vec![0.0; n];
        sin[n - 1] = amplitude;
        Self::real(0.0, &[], &sin)
    }

    /// Highest mode index carrying a coefficient slot.
    pub fn modes(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    pub fn check_modes(&self, max_modes: usize) -> Result<()> {
        if self.modes() > max_modes {
            return Err(SpectralError::InvalidInput(format!(
                "series has {} modes, cap is {}",
                self.modes(),
                max_modes
            )));
        }
        if !self.all_coefficients().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(SpectralError::InvalidInput("non-finite coefficient".into()));
        }
        Ok(())
    }

    pub fn is_real(&self) -> bool {
        self.all_coefficients().all(|c| c.im == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.all_coefficients().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    fn all_coefficients(&self) -> impl Iterator<Item = &Complex64> {
        std::iter::once(&self.constant)
            .chain(self.cos.iter())
            .chain(self.sin.iter())
    }

    fn cos_at(&self, k: usize) -> Complex64 {
        self.cos.get(k).copied().unwrap_or(ZERO)
    }

    fn sin_at(&self, k: usize) -> Complex64 {
        self.sin.get(k).copied().unwrap_or(ZERO)
    }

    fn trimmed(mut self) -> Self {
        while self.cos.last() == Some(&ZERO) {
            self.cos.pop();
        }
        while self.sin.last() == Some(&ZERO) {
            self.sin.pop();
        }
        self
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let modes = self.modes();
        let mut acc = self.constant;
        if modes == 0 {
            return acc;
        }
        // cos/sin of 2 pi n x by the angle-addition recurrence, restarted from
        // exact values every 16 modes to keep the phase error negligible.
        let theta = 2.0 * PI * x;
        let (s1, c1) = theta.sin_cos();
        let (mut s, mut c) = (0.0_f64, 1.0_f64);
        for k in 0..modes {
            let n = k + 1;
            if n % 16 == 0 {
                let (sn, cn) = (theta * n as f64).sin_cos();
                s = sn;
                c = cn;
            } else {
                let (sn, cn) = (s * c1 + c * s1, c * c1 - s * s1);
                s = sn;
                c = cn;
            }
            acc += self.cos_at(k) * c + self.sin_at(k) * s;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let modes = self.modes();
        let mut cos = Vec::with_capacity(modes);
        let mut sin = Vec::with_capacity(modes);
        for k in 0..modes {
            let w = 2.0 * PI * (k + 1) as f64;
            cos.push(self.sin_at(k) * w);
            sin.push(-self.cos_at(k) * w);
        }
        Self {
            constant: ZERO,
            cos,
            sin,
        }
        .trimmed()
    }

    /// Series of `x -> f(1 - x)`.
    pub fn reflect(&self) -> Self {
        Self {
            constant: self.constant,
            cos: self.cos.clone(),
            sin: self.sin.iter().map(|&b| -b).collect(),
        }
    }

    /// Series of `x -> f(x + t)`.
    pub fn translate(&self, t: f64) -> Self {
        let modes = self.modes();
        let mut cos = Vec::with_capacity(modes);
        let mut sin = Vec::with_capacity(modes);
        for k in 0..modes {
            let phase = 2.0 * PI * (k + 1) as f64 * t.rem_euclid(1.0);
            let (sp, cp) = phase.sin_cos();
            let (a, b) = (self.cos_at(k), self.sin_at(k));
            cos.push(a * cp + b * sp);
            sin.push(b * cp - a * sp);
        }
        Self {
            constant: self.constant,
            cos,
            sin,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            constant: self.constant * factor,
            cos: self.cos.iter().map(|&a| a * factor).collect(),
            sin: self.sin.iter().map(|&b| b * factor).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    /// `||f||^2 = int_0^1 |f|^2` by Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        let oscillating: f64 = self
            .cos
            .iter()
            .chain(self.sin.iter())
            .map(|c| c.norm_sqr())
            .sum();
        self.constant.norm_sqr() + 0.5 * oscillating
    }

    /// Sup norm bound `|c| + sum |a_n| + |b_n|`.
    pub fn abs_sum(&self) -> f64 {
        self.all_coefficients().map(|c| c.norm()).sum()
    }

    /// Samples `f(k h)` for `k = 0..=count`.
    pub fn sample(&self, h: f64, count: usize) -> Vec<Complex64> {
        (0..=count).map(|k| self.eval(k as f64 * h)).collect()
    }
}

/// Symmetry transforms acting on coefficient pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Symmetry {
    /// `(p, q) -> (p, -q)`.
    Star,
    /// `psi(x) -> psi(1 - x)`.
    Reflect,
    /// Star followed by reflection.
    StarReflect,
    /// `psi(x) -> psi(x + t)`.
    Translate(f64),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientPair {
    #[serde(default)]
    pub p: TrigSeries,
    #[serde(default)]
    pub q: TrigSeries,
}

impl CoefficientPair {
    pub fn new(p: TrigSeries, q: TrigSeries) -> Self {
        Self { p, q }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn validate(&self, max_modes: usize) -> Result<()> {
        self.p.check_modes(max_modes)?;
        self.q.check_modes(max_modes)
    }

    pub fn is_real(&self) -> bool {
        self.p.is_real() && self.q.is_real()
    }

    pub fn is_zero(&self) -> bool {
        self.p.is_zero() && self.q.is_zero()
    }

    pub fn transform(&self, kind: Symmetry) -> Self {
        match kind {
            Symmetry::Star => Self::new(self.p.clone(), self.q.neg()),
            Symmetry::Reflect => Self::new(self.p.reflect(), self.q.reflect()),
            Symmetry::StarReflect => Self::new(self.p.reflect(), self.q.neg().reflect()),
            Symmetry::Translate(t) => Self::new(self.p.translate(t), self.q.translate(t)),
        }
    }

    pub fn star(&self) -> Self {
        self.transform(Symmetry::Star)
    }

    pub fn reflect(&self) -> Self {
        self.transform(Symmetry::Reflect)
    }

    pub fn star_reflect(&self) -> Self {
        self.transform(Symmetry::StarReflect)
    }

    pub fn translate(&self, t: f64) -> Self {
        self.transform(Symmetry::Translate(t))
    }

    /// `sqrt(||p||^2 + ||p'||^2 + ||q||^2)`.
    pub fn norm_h1(&self) -> f64 {
        (self.p.l2_norm_sq() + self.p.derivative().l2_norm_sq() + self.q.l2_norm_sq()).sqrt()
    }

    /// Short human-readable description for reports.
    pub fn describe(&self) -> String {
        format!("p: {}; q: {}", describe_series(&self.p), describe_series(&self.q))
    }
}

/// Applies a symmetry transform (free-function form).
pub fn symmetry_transform(psi: &CoefficientPair, kind: Symmetry) -> CoefficientPair {
    psi.transform(kind)
}

pub fn eval_series(s: &TrigSeries, x: f64) -> Complex64 {
    s.eval(x)
}

pub fn norm_h1(psi: &CoefficientPair) -> f64 {
    psi.norm_h1()
}

fn describe_series(s: &TrigSeries) -> String {
    let fmt = |c: Complex64| {
        if c.im == 0.0 {
            format!("{}", c.re)
        } else {
            format!("({}{:+}i)", c.re, c.im)
        }
    };
    let mut terms = Vec::new();
    if s.constant != ZERO {
        terms.push(fmt(s.constant));
    }
    for (k, &a) in s.cos.iter().enumerate() {
        if a != ZERO {
            terms.push(format!("{}*cos(2pi*{}x)", fmt(a), k + 1));
        }
    }
    for (k, &b) in s.sin.iter().enumerate() {
        if b != ZERO {
            terms.push(format!("{}*sin(2pi*{}x)", fmt(b), k + 1));
        }
    }
    if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(" + ")
    }
}

/// On-disk scalar: a bare number, or `[re, im]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum ScalarRepr {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Complex64> for ScalarRepr {
    fn from(c: Complex64) -> Self {
        if c.im == 0.0 {
            ScalarRepr::Real(c.re)
        } else {
            ScalarRepr::Complex([c.re, c.im])
        }
    }
}

impl From<ScalarRepr> for Complex64 {
    fn from(s: ScalarRepr) -> Self {
        match s {
            ScalarRepr::Real(re) => Complex64::new(re, 0.0),
            ScalarRepr::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesRepr {
    #[serde(default = "zero_scalar")]
    constant: ScalarRepr,
    #[serde(default)]
    cos: Vec<ScalarRepr>,
    #[serde(default)]
    sin: Vec<ScalarRepr>,
}

fn zero_scalar() -> ScalarRepr {
    ScalarRepr::Real(0.0)
}

impl TryFrom<SeriesRepr> for TrigSeries {
    type Error = SpectralError;

    fn try_from(r: SeriesRepr) -> Result<Self> {
        let s = TrigSeries {
            constant: r.constant.into(),
            cos: r.cos.into_iter().map(Into::into).collect(),
            sin: r.sin.into_iter().map(Into::into).collect(),
        };
        s.check_modes(usize::MAX)?;
        Ok(s)
    }
}

impl From<TrigSeries> for SeriesRepr {
    fn from(s: TrigSeries) -> Self {
        SeriesRepr {
            constant: s.constant.into(),
            cos: s.cos.into_iter().map(Into::into).collect(),
            sin: s.sin.into_iter().map(Into::into).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn eval_examples() {
        assert_abs_diff_eq!(TrigSeries::real(0.0, &[1.0], &[]).eval(0.0).re, 1.0);
        assert_abs_diff_eq!(TrigSeries::real(0.0, &[], &[1.0]).eval(0.25).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            TrigSeries::real(2.0, &[0.0, 3.0], &[]).eval(0.5).re,
            5.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn high_modes_match_direct_trig() {
        let coeffs: Vec<f64> = (0..40).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let s = TrigSeries::real(0.3, &coeffs, &coeffs);
        for &x in &[0.0, 0.123, 0.5, 0.987] {
            let direct: f64 = 0.3
                + coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, a)| {
                        let w = 2.0 * PI * (k + 1) as f64 * x;
                        a * (w.cos() + w.sin())
                    })
                    .sum::<f64>();
            assert_abs_diff_eq!(s.eval(x).re, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_examples() {
        let psi = CoefficientPair::new(TrigSeries::cos_mode(1, 1.0), TrigSeries::sin_mode(1, 1.0));
        let star = psi.star();
        assert_eq!(star.p, psi.p);
        assert_eq!(star.q.sin, vec![c(-1.0)]);

        let reflected = TrigSeries::cos_mode(1, 1.0).reflect();
        assert_eq!(reflected, TrigSeries::cos_mode(1, 1.0));

        let shifted = TrigSeries::sin_mode(1, 1.0).translate(0.5);
        for &x in &[0.0, 0.1, 0.37] {
            assert_abs_diff_eq!(shifted.eval(x).re, -(2.0 * PI * x).sin(), epsilon = 1e-14);
        }
    }

    #[test]
    fn norm_examples() {
        assert_eq!(CoefficientPair::zero().norm_h1(), 0.0);
        let psi = CoefficientPair::new(TrigSeries::cos_mode(1, 0.05), TrigSeries::zero());
        let expected = 0.05 * ((1.0 + 4.0 * PI * PI) / 2.0).sqrt();
        assert_abs_diff_eq!(psi.norm_h1(), expected, epsilon = 1e-15);
        let psi = CoefficientPair::new(TrigSeries::zero(), TrigSeries::constant(-0.7));
        assert_abs_diff_eq!(psi.norm_h1(), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn parseval_matches_trapezoid() {
        let psi = CoefficientPair::new(
            TrigSeries::real(0.01, &[0.05, 0.0, -0.02], &[0.0, 0.03]),
            TrigSeries::real(-0.02, &[0.01], &[0.04, 0.0, 0.0, 0.01]),
        );
        let dp = psi.p.derivative();
        let n = 1024;
        let quad: f64 = (0..n)
            .map(|k| {
                let x = k as f64 / n as f64;
                psi.p.eval(x).norm_sqr() + dp.eval(x).norm_sqr() + psi.q.eval(x).norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        let rel = (psi.norm_h1() - quad.sqrt()).abs() / psi.norm_h1();
        assert!(rel < 1e-10, "rel {rel}");
    }

    #[test]
    fn derivative_matches_central_differences() {
        let s = TrigSeries::real(0.2, &[0.3, -0.1], &[0.05, 0.0, 0.07]);
        let ds = s.derivative();
        let x = 0.31;
        let mut prev = f64::INFINITY;
        for &h in &[1e-2, 5e-3, 2.5e-3] {
            let fd = (s.eval(x + h) - s.eval(x - h)) / (2.0 * h);
            let err = (fd - ds.eval(x)).norm();
            // O(h^2): halving h quarters the error.
            assert!(err < prev / 3.5 || prev.is_infinite(), "err {err} prev {prev}");
            prev = err;
        }
    }

    #[test]
    fn serde_schema_round_trip() {
        let json = r#"{"p": {"constant": 0.1, "cos": [0.05]}, "q": {"sin": [[0.0, 0.02]]}}"#;
        let psi: CoefficientPair = serde_json::from_str(json).unwrap();
        assert_eq!(psi.p.cos, vec![c(0.05)]);
        assert_eq!(psi.q.sin, vec![Complex64::new(0.0, 0.02)]);
        assert!(!psi.is_real());
        let back: CoefficientPair = serde_json::from_str(&serde_json::to_string(&psi).unwrap()).unwrap();
        assert_eq!(back, psi);

        let bad = r#"{"p": {"constant": 0.1, "cosine": [0.05]}}"#;
        assert!(serde_json::from_str::<CoefficientPair>(bad).is_err());
    }

    #[test]
    fn mode_cap_enforced() {
        let s = TrigSeries::real(0.0, &vec![0.1; 33], &[]);
        assert!(s.check_modes(DEFAULT_MAX_MODES).is_err());
        assert!(s.check_modes(64).is_ok());
    }

    fn series_strategy() -> impl Strategy<Value = TrigSeries> {
        (
            -1.0..1.0f64,
            prop::collection::vec(-1.0..1.0f64, 0..6),
            prop::collection::vec(-1.0..1.0f64, 0..6),
        )
            .prop_map(|(c0, a, b)| TrigSeries::real(c0, &a, &b))
    }

    fn max_gap(a: &TrigSeries, b: &TrigSeries) -> f64 {
        (0..64)
            .map(|k| {
                let x = k as f64 / 64.0;
                (a.eval(x) - b.eval(x)).norm()
            })
            .fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn evaluation_is_periodic(s in series_strategy(), x in -3.0..3.0f64) {
            prop_assert!((s.eval(x + 1.0) - s.eval(x)).norm() < 1e-12);
        }

        #[test]
        fn translations_compose(s in series_strategy(), t1 in 0.0..1.0f64, t2 in 0.0..1.0f64) {
            let composed = s.translate(t1).translate(t2);
            let direct = s.translate((t1 + t2).rem_euclid(1.0));
            prop_assert!(max_gap(&composed, &direct) < 1e-12);
        }

        #[test]
        fn reflect_commutes_with_derivative_up_to_sign(s in series_strategy()) {
            let lhs = s.reflect().derivative();
            let rhs = s.derivative().reflect().neg();
            prop_assert!(max_gap(&lhs, &rhs) < 1e-12);
        }

        #[test]
        fn involutions(s in series_strategy(), t in series_strategy()) {
            let psi = CoefficientPair::new(s, t);
            prop_assert_eq!(psi.star().star(), psi.clone());
            prop_assert_eq!(psi.reflect().reflect(), psi.clone());
        }

        #[test]
        fn translation_matches_shifted_evaluation(s in series_strategy(), t in 0.0..1.0f64, x in 0.0..1.0f64) {
            prop_assert!((s.translate(t).eval(x) - s.eval(x + t)).norm() < 1e-12);
        }
    }
}
