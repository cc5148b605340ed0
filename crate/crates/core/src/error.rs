use thiserror::Error;

/// Failure modes shared by every construction in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("degenerate metric: det I = {0:e}")]
    DegenerateMetric(f64),
    #[error("grid too small: {nx}x{ny} nodes, need at least {min}x{min}")]
    GridTooSmall { nx: usize, ny: usize, min: usize },
    #[error("grids are not conformable: {0}")]
    Shape(String),
    #[error("degenerate node {index}: e^u = {value:e}")]
    DegenerateNode { index: usize, value: f64 },
    #[error("spinor pair vanishes at node {0}")]
    ZeroSpinor(usize),
    #[error("path dependence {defect:e} exceeds {tol:e}")]
    PathDependence { defect: f64, tol: f64 },
    #[error("normal is not unit at node {index}: |N| = {norm}")]
    NonUnitNormal { index: usize, norm: f64 },
    #[error("A21 vanishes at node {0}")]
    VanishingA21(usize),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("theta series not converged within lattice radius {0}")]
    ThetaConvergence(usize),
    #[error("theta divisor too close at node {0}")]
    ThetaDivisor(usize),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("division by zero: {0}")]
    ZeroDivision(&'static str),
    #[error("H' reached zero near {at}")]
    SignFlip { at: f64 },
    #[error("series recurrence breaks down at index {0}")]
    Recurrence(usize),
    #[error("outside domain: {0}")]
    Domain(String),
    #[error("singular locus: {0}")]
    SingularLocus(String),
    #[error("y is of the excluded form c*x^(-theta)")]
    ExcludedFamily,
    #[error("normalization failure: {0}")]
    Normalization(String),
    #[error("real part leaks into imaginary quaternion form: {0:e}")]
    RealLeak(f64),
    #[error("not an immersion at node {0}")]
    NonImmersion(usize),
    #[error("pole at node {0}")]
    Pole(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
