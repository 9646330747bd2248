use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped by the stage that raises them. [`Error::is_validation`]
/// separates bad input from solver failures, which the CLI maps onto
/// distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    // --- configuration ---
    #[error("NegativeRate: `{field}` must be non-negative (got {value})")]
    NegativeRate { field: &'static str, value: f64 },
    #[error("NonPositive: `{field}` must be strictly positive (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("NonFinite: `{field}` is not a finite number")]
    NonFinite { field: &'static str },
    #[error("BranchingNotNormalized: beta_ps + beta_pd = {sum} (beta_ps = {beta_ps}, beta_pd = {beta_pd}); must equal 1")]
    BranchingNotNormalized {
        beta_ps: f64,
        beta_pd: f64,
        sum: f64,
    },
    #[error("BranchingOutOfRange: `{field}` = {value} is outside [0, 1]")]
    BranchingOutOfRange { field: &'static str, value: f64 },
    #[error("BadDirection: `{field}` must be +1 or -1 (got {value})")]
    BadDirection { field: &'static str, value: i32 },
    #[error("MotionDisabled: operation needs `motion.enabled = true`")]
    MotionDisabled,
    #[error("UnknownLevel: `{0}` is not one of S, P, D, Q")]
    UnknownLevel(String),
    #[error("UnknownAxis: `{0}` does not name a scannable frequency field")]
    UnknownAxis(String),
    #[error("InvalidInput: {0}")]
    InvalidInput(String),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    // --- solvers ---
    #[error("NotHermitian: Hamiltonian deviates from its adjoint by {deviation:e}")]
    NotHermitian { deviation: f64 },
    #[error("NonPhysicalState: {0}")]
    NonPhysicalState(String),
    #[error("DegenerateKernel: singular-value gap {gap:e} below threshold; steady state is not unique")]
    DegenerateKernel { gap: f64 },
    #[error("NoConvergence: {0}")]
    NoConvergence(String),
    #[error("DefectiveGenerator: eigenbasis condition number {condition:e} exceeds limit")]
    DefectiveGenerator { condition: f64 },
    #[error("FitFailed: {0}")]
    FitFailed(String),
    #[error("ZeroFluorescence: steady-state photon flux {flux:e} is too small to normalize g2")]
    ZeroFluorescence { flux: f64 },
    #[error("NoJumps: the photon records contain no fluorescence photons")]
    NoJumps,
    #[error("ZeroDetuningC: the perturbative three-photon analysis needs laser_c.detuning != 0")]
    ZeroDetuningC,
    #[error("ZeroCoupling: the Lambda eigensystem needs a non-zero combined Rabi frequency")]
    ZeroCoupling,
    #[error("TruncationNotConverged: Floquet order {order} differs from order {next} by {delta:e}")]
    TruncationNotConverged { order: usize, next: usize, delta: f64 },
    #[error("TooCoarse: peak at {location} MHz spans only {points:.1} grid points across its FWHM (need 5)")]
    TooCoarse { location: f64, points: f64 },
}

impl Error {
    /// True for errors caused by the user's input rather than by a solver.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NegativeRate { .. }
                | Error::NonPositive { .. }
                | Error::NonFinite { .. }
                | Error::BranchingNotNormalized { .. }
                | Error::BranchingOutOfRange { .. }
                | Error::BadDirection { .. }
                | Error::MotionDisabled
                | Error::UnknownLevel(_)
                | Error::UnknownAxis(_)
                | Error::InvalidInput(_)
                | Error::Parse(_)
                | Error::Io(_)
        )
    }
}

impl Error {
    /// The variant name, used as a machine-readable tag.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NegativeRate { .. } => "NegativeRate",
            Error::NonPositive { .. } => "NonPositive",
            Error::NonFinite { .. } => "NonFinite",
            Error::BranchingNotNormalized { .. } => "BranchingNotNormalized",
            Error::BranchingOutOfRange { .. } => "BranchingOutOfRange",
            Error::BadDirection { .. } => "BadDirection",
            Error::MotionDisabled => "MotionDisabled",
            Error::UnknownLevel(_) => "UnknownLevel",
            Error::UnknownAxis(_) => "UnknownAxis",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NonPhysicalState(_) => "NonPhysicalState",
            Error::DegenerateKernel { .. } => "DegenerateKernel",
            Error::NoConvergence(_) => "NoConvergence",
            Error::DefectiveGenerator { .. } => "DefectiveGenerator",
            Error::FitFailed(_) => "FitFailed",
            Error::ZeroFluorescence { .. } => "ZeroFluorescence",
            Error::NoJumps => "NoJumps",
            Error::ZeroDetuningC => "ZeroDetuningC",
            Error::ZeroCoupling => "ZeroCoupling",
            Error::TruncationNotConverged { .. } => "TruncationNotConverged",
            Error::TooCoarse { .. } => "TooCoarse",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
