use thiserror::Error;

/// Failures raised by the spectral pipelines.
///
/// Most variants are regime signals rather than bugs: they report that a
/// coefficient pair or spectral parameter lies outside the perturbative
/// region where the constructions are valid.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpectralError {
    #[error("non-finite value during integration (|z| = {z_abs:.3}, steps = {steps})")]
    NonFinite { z_abs: f64, steps: usize },

    #[error("two multipliers tie for the tau_3 branch (gap {gap:.3e})")]
    AmbiguousBranch { gap: f64 },

    #[error("multiplier is not simple (residual {residual:.3e}, nearest other {separation:.3e})")]
    NotSimple { residual: f64, separation: f64 },

    #[error("Floquet solution vanishes: min |eta| = {min_abs:.3e}")]
    VanishingEta { min_abs: f64 },

    #[error("function vanishes on the contour near lambda = {at}")]
    ZeroOnContour { at: num_complex::Complex64 },

    #[error("{what} did not converge: {detail}")]
    NonConvergent { what: &'static str, detail: String },

    #[error("{what}: expected {expected} zero(s) in domain n = {n}, found {found}")]
    WrongCount {
        what: &'static str,
        n: i64,
        expected: i64,
        found: i64,
    },

    #[error("square-root branch is not positive: {detail}")]
    BranchError { detail: String },

    #[error("small denominator |D(lambda)| = {value:.3e} below {threshold}")]
    SmallDenominator { value: f64, threshold: f64 },

    #[error("gap [r_n^-, r_n^+] is degenerate for n = {n} (width {width:.3e})")]
    DegenerateGap { n: i64, width: f64 },

    #[error("lost tracking at step {step}: jump {jump:.3e} exceeds half the gap")]
    LostTracking { step: usize, jump: f64 },

    #[error("norm_h1(psi) = {norm:.4} is not below the smallness threshold {threshold}")]
    OutsideRegime { norm: f64, threshold: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{stage}: {inner}")]
    Stage { stage: String, inner: Box<SpectralError> },
}

impl SpectralError {
    /// True for errors that signal the coefficients or spectral parameter
    /// left the small-coefficient regime.
    pub fn is_regime_error(&self) -> bool {
        if let SpectralError::Stage { inner, .. } = self {
            return inner.is_regime_error();
        }
        matches!(
            self,
            SpectralError::WrongCount { .. }
                | SpectralError::OutsideRegime { .. }
                | SpectralError::NonConvergent { .. }
                | SpectralError::SmallDenominator { .. }
                | SpectralError::VanishingEta { .. }
                | SpectralError::NotSimple { .. }
                | SpectralError::AmbiguousBranch { .. }
                | SpectralError::BranchError { .. }
                | SpectralError::ZeroOnContour { .. }
                | SpectralError::DegenerateGap { .. }
                | SpectralError::LostTracking { .. }
                | SpectralError::NonFinite { .. }
        )
    }
}

/// Attaches the pipeline stage that produced an error.
pub trait WithStage<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T>;
}

impl<T> WithStage<T> for Result<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T> {
        self.map_err(|e| SpectralError::Stage {
            stage: stage.into(),
            inner: Box::new(e),
        })
    }
}

pub type Result<T> = std::result::Result<T, SpectralError>;
