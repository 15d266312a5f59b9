use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid gas state: rho={rho}, P={p}")]
    InvalidState { rho: f64, p: f64 },
    #[error("vacuum: enthalpy term B-|u|^2/2 = {h} is not positive")]
    Vacuum { h: f64 },
    #[error("invalid gas model: gamma={gamma}, beta={beta}")]
    InvalidModel { gamma: f64, beta: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("upstream flow not supersonic at x2={x2} (M={mach})")]
    NotSupersonic { x2: f64, mach: f64 },
    #[error("non-positive mass flux {value} at x2={x2}")]
    FlowReversal { x2: f64, value: f64 },
    #[error("zero speed state has no characteristic speeds")]
    ZeroSpeed,
    #[error("incompatible elliptic data: defect {defect:e}")]
    IncompatibleData { defect: f64 },
    #[error("coefficient {which} not positive: {value}")]
    NonPositiveCoefficient { which: String, value: f64 },
    #[error("linear solver failed after {iterations} iterations (residual {residual:e})")]
    LinearSolver { iterations: usize, residual: f64 },
    #[error("marching step too large: h1*max|dy2/dy1| = {ratio} h2, refine y1")]
    Cfl { ratio: f64 },
    #[error("flow lost supersonicity: min M^2 = {min_mach2}")]
    LostSupersonic { min_mach2: f64 },
    #[error("Picard iteration did not converge; update history {history:?}")]
    Picard { history: Vec<f64> },
    #[error("degenerate background: {0}")]
    DegenerateBackground(String),
    #[error("degenerate shock: pressure jump {jump} at y2={y2}")]
    DegenerateShock { jump: f64, y2: f64 },
    #[error("no admissible shock position: J2={j2} outside [{lo}, {hi}] on bracket {bracket:?}")]
    NoShockPosition { j2: f64, lo: f64, hi: f64, bracket: (f64, f64) },
    #[error("degenerate shock selection: J1 varies by {spread:e} only (flat nozzle regime)")]
    DegenerateSelection { spread: f64 },
    #[error("J1 is not monotone on bracket {bracket:?}")]
    NotMonotone { bracket: (f64, f64) },
    #[error("shock position inconsistent with data: defect {defect:e}")]
    InconsistentPosition { defect: f64 },
    #[error("shock front leaves the nozzle: psi={psi}")]
    FrontOutOfRange { psi: f64 },
    #[error("iterate left the trust region: distance {distance:e} > radius {radius:e}; try a smaller sigma")]
    TrustRegion { distance: f64, radius: f64 },
    #[error("fixed-point iteration did not converge; update history {history:?}")]
    NonConvergence { history: Vec<f64> },
    #[error("residual {name} = {value:e} exceeds tolerance {tol:e}")]
    ResidualCheck { name: String, value: f64, tol: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 1,
            Error::DegenerateBackground(_)
            | Error::NotSupersonic { .. }
            | Error::DegenerateShock { .. }
            | Error::InvalidModel { .. } => 2,
            Error::NoShockPosition { .. }
            | Error::DegenerateSelection { .. }
            | Error::NotMonotone { .. }
            | Error::InconsistentPosition { .. }
            | Error::FrontOutOfRange { .. } => 3,
            Error::Picard { .. }
            | Error::NonConvergence { .. }
            | Error::TrustRegion { .. }
            | Error::ResidualCheck { .. }
            | Error::LinearSolver { .. } => 4,
            _ => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
