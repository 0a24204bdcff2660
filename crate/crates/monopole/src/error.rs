use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonopoleError {
    #[error("matrix is singular to working precision (condition estimate {cond:.3e})")]
    SingularMatrix { cond: f64 },
    #[error("theta series needs radius {needed:.1} beyond the cap {cap:.1}")]
    ConvergenceFailure { needed: f64, cap: f64 },
    #[error("Atiyah-Ward polynomial vanishes identically at this point")]
    DegenerateConstraint,
    #[error("gauge reconstruction failed: {0}")]
    GaugeUndetermined(String),
    #[error("quadrature path passes within {distance:.3e} of a branch point")]
    PathCrossesBranchPoint { distance: f64 },
    #[error("z = {z} is too close to a pole of the flow")]
    PoleProximity { z: f64 },
    #[error("curve point lies on the exceptional divisor of component {component}")]
    DivisorCollision { component: usize },
    #[error("adaptive step underflow at z = {z}")]
    StepSizeUnderflow { z: f64 },
    #[error("gauge flow condition number {cond:.3e} exceeds the cap")]
    ConditionBlowup { cond: f64 },
    #[error("Weyl frame is rank deficient (condition {cond:.3e})")]
    RankDeficientW { cond: f64 },
    #[error("normalizable subspace is ambiguous: singular values {singular_values:?}")]
    SubspaceAmbiguous { singular_values: Vec<f64> },
    #[error("Panagopoulos kernel is singular at z = {z}")]
    QSingular { z: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("calibration failed: {0}")]
    CalibrationFailure(String),
    #[error("boundary extrapolation is unstable: {0}")]
    ExtrapolationUnstable(String),
    #[error("adjugate pivot vanishes along the path at z = {z}")]
    PivotVanishes { z: f64 },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl MonopoleError {
    /// Stable kebab-case tag, used as a status in tabular output.
    pub fn kind(&self) -> &'static str {
        match self {
            MonopoleError::SingularMatrix { .. } => "singular-matrix",
            MonopoleError::ConvergenceFailure { .. } => "convergence-failure",
            MonopoleError::DegenerateConstraint => "degenerate-constraint",
            MonopoleError::GaugeUndetermined(_) => "gauge-undetermined",
            MonopoleError::PathCrossesBranchPoint { .. } => "path-crosses-branch-point",
            MonopoleError::PoleProximity { .. } => "pole-proximity",
            MonopoleError::DivisorCollision { .. } => "divisor-collision",
            MonopoleError::StepSizeUnderflow { .. } => "step-size-underflow",
            MonopoleError::ConditionBlowup { .. } => "condition-blowup",
            MonopoleError::RankDeficientW { .. } => "rank-deficient-w",
            MonopoleError::SubspaceAmbiguous { .. } => "subspace-ambiguous",
            MonopoleError::QSingular { .. } => "q-singular",
            MonopoleError::Unsupported(_) => "unsupported",
            MonopoleError::CalibrationFailure(_) => "calibration-failure",
            MonopoleError::ExtrapolationUnstable(_) => "extrapolation-unstable",
            MonopoleError::PivotVanishes { .. } => "pivot-vanishes",
            MonopoleError::Schema(_) => "schema",
            MonopoleError::Validation(_) => "validation",
            MonopoleError::InvalidInput(_) => "invalid-input",
        }
    }
}

pub type Result<T> = std::result::Result<T, MonopoleError>;
