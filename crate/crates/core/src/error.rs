use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimensions must be even and at least 8, got {0}x{1}x{2}")]
    BadGrid(usize, usize, usize),
    #[error("field does not have zero mean: |mean| = {mean:.3e} vs {tol:.3e} allowed")]
    NonZeroMean { mean: f64, tol: f64 },
    #[error("flow map is not a diffeomorphism: min J = {min_j:.6}")]
    SingularMap { min_j: f64 },
    #[error("pressure iteration failed to converge after {iterations} iterations, residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("step rejected: max |J - 1| = {jac_drift:.3e} exceeds {tol:.3e}")]
    StepRejected { jac_drift: f64, tol: f64 },
    #[error("density {value:.6} left the validated pressure-law interval [{lo:.6}, {hi:.6}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("initial data is not divergence-free: residual {residual:.3e}")]
    NotDivergenceFree { residual: f64 },
    #[error("decay fit requires strictly positive samples")]
    NonPositiveSamples,
    #[error("decay fit window holds {got} samples, need at least {need}")]
    WindowTooSmall { got: usize, need: usize },
    #[error("pressure law must be positive and strictly increasing on [{lo:.4}, {hi:.4}]")]
    BadPressureLaw { lo: f64, hi: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
