use core::fmt;

/// Failure modes of the toolkit. Variants map one to one onto the failure
/// conditions of the individual operations.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Non-finite entry or asymmetry above tolerance.
    InvalidMatrix,
    /// Shapes or vector lengths disagree.
    InvalidDimension { expected: usize, found: usize },
    /// Rank-deficient map whose right-hand side is inconsistent.
    InfeasibleAffine { residual: f64 },
    /// No certificate allows an exact distance computation.
    OracleUnavailable,
    /// A face of dimension zero was requested.
    EmptyFace,
    /// A sample point handed to the exposing test is not feasible.
    InvalidSample { index: usize, berr: f64 },
    /// Newton budget exhausted at one barrier parameter.
    MaxIterations { alpha: f64, res_primal: f64, res_dual: f64, res_cent: f64 },
    /// Backtracking could not decrease the residual.
    LineSearchStall { alpha: f64, res_primal: f64, res_dual: f64, res_cent: f64 },
    /// The constraint map has dependent rows.
    NotSurjective { rank: usize, m: usize },
    /// Not enough trace points for the requested computation.
    InsufficientTrace { needed: usize, found: usize },
    /// The path failed, so the Slater alternative cannot be decided.
    Undecided,
    /// Limit of the dual path is numerically zero.
    NoExposingVectorFound,
    /// Facial reduction hit its iteration budget.
    FrDiverged { completed: usize },
    /// Singularity degree could not be established.
    SdUndecided { completed: usize },
    /// Series with nonpositive or non-finite entries, or too short.
    InvalidSeries,
    /// Instance specification rejected.
    InvalidSpec(&'static str),
    /// Random generator failed to produce a nondegenerate instance.
    GenFailed,
    /// Argument outside the domain of a closed-form fixture.
    OutOfDomain,
    /// Configuration value out of range.
    InvalidConfig(&'static str),
    /// Certificate data does not replay.
    CertificateMismatch(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidMatrix => write!(f, "invalid matrix: non-finite or asymmetric entries"),
            Error::InvalidDimension { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InfeasibleAffine { residual } => {
                write!(f, "affine system is inconsistent (residual {residual:e})")
            }
            Error::OracleUnavailable => write!(f, "no forward-error oracle for this instance"),
            Error::EmptyFace => write!(f, "face of dimension zero"),
            Error::InvalidSample { index, berr } => {
                write!(f, "sample {index} is not feasible (backward error {berr:e})")
            }
            Error::MaxIterations { alpha, res_primal, res_dual, res_cent } => write!(
                f,
                "centering at alpha={alpha:e} exceeded the iteration budget \
                 (primal {res_primal:e}, dual {res_dual:e}, centrality {res_cent:e})"
            ),
            Error::LineSearchStall { alpha, res_primal, res_dual, res_cent } => write!(
                f,
                "line search stalled at alpha={alpha:e} \
                 (primal {res_primal:e}, dual {res_dual:e}, centrality {res_cent:e})"
            ),
            Error::NotSurjective { rank, m } => {
                write!(f, "constraint map is not surjective (rank {rank} < m = {m})")
            }
            Error::InsufficientTrace { needed, found } => {
                write!(f, "trace too short: need {needed} points, have {found}")
            }
            Error::Undecided => write!(f, "Slater alternative undecided: path failure"),
            Error::NoExposingVectorFound => write!(f, "dual limit is numerically zero"),
            Error::FrDiverged { completed } => {
                write!(f, "facial reduction did not terminate after {completed} steps")
            }
            Error::SdUndecided { completed } => {
                write!(f, "singularity degree undecided after {completed} steps")
            }
            Error::InvalidSeries => write!(f, "series must be positive, finite and long enough"),
            Error::InvalidSpec(why) => write!(f, "invalid instance spec: {why}"),
            Error::GenFailed => write!(f, "generator could not draw a nondegenerate instance"),
            Error::OutOfDomain => write!(f, "argument outside the fixture's domain"),
            Error::InvalidConfig(why) => write!(f, "invalid configuration: {why}"),
            Error::CertificateMismatch(why) => write!(f, "certificate does not replay: {why}"),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
