use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coefficient list is empty")]
    EmptyCoefficients,
    #[error("polynomial degree {0} is not an even number >= 2")]
    OddDegree(usize),
    #[error("leading coefficient {0} is not positive")]
    NonpositiveLeading(f64),
    #[error("inputs are inconsistent: {0}")]
    InconsistentInputs(String),

    #[error("integrand is not finite at x = {0}")]
    NonFiniteIntegrand(f64),
    #[error("evaluation point {0} is outside the open interval (-1, 1)")]
    EvaluationPointOutsideOpenInterval(f64),
    #[error("contour integrand does not decay: |g| = {magnitude:e} at the truncation point")]
    TailNotDecaying { magnitude: f64 },
    #[error("invalid contour parameters: {0}")]
    InvalidContour(String),

    #[error("endpoint Newton iteration diverged at ({b1}, {b2}), residuals ({r0:e}, {r1:e})")]
    NewtonDiverged { b1: f64, b2: f64, r0: f64, r1: f64 },
    #[error("density becomes negative (min {0:e}); the support is probably not one interval")]
    MultiBandSuspected(f64),
    #[error("density polynomial has degree {got}, expected {expected}")]
    DegreeMismatch { got: usize, expected: usize },

    #[error("point {0} lies on the branch cut")]
    BranchCut(String),
    #[error("spike value {0} is not positive")]
    NonpositiveSpike(f64),
    #[error("search horizon exceeded: {0}")]
    SearchHorizonExceeded(String),
    #[error("G has no interior maximum beyond c(a) for a = {0}")]
    NoInteriorMaximum(f64),
    #[error("u = {0} is at or left of the soft edge")]
    AtEdge(f64),

    #[error("test function is not smooth enough (Chebyshev tail {0:e})")]
    NonSmoothInput(f64),
    #[error("beta = {0} requires a nu-measure plug-in")]
    NuRequired(f64),
    #[error("u = {u} is outside the domain u > c(a) = {c}")]
    OutsideDomain { u: f64, c: f64 },
    #[error("the subcritical limit law is not available")]
    SubcriticalUnsupported,
    #[error("component index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("gap x2 - x1 = {0} is not positive")]
    DegenerateGap(f64),

    #[error("beta = {0} has no dense matrix model")]
    UnsupportedBeta(f64),
    #[error("spike-weight series did not converge within {0} terms")]
    SeriesTruncationInsufficient(usize),
    #[error("step-size adaptation did not converge: acceptance {0}")]
    NonConvergedAdaptation(f64),
    #[error("sample is empty")]
    EmptySample,

    #[error("series and contour routes disagree: {series} vs {contour}")]
    ContourDisagreement { series: f64, contour: f64 },

    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("support [{0}, {1}] is not [-1, 1]")]
    SupportNotNormalized(f64, f64),
    #[error("indicator acceptance {0:e} is below 1e-3")]
    IndicatorStarvation(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
}
