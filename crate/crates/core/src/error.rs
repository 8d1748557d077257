use std::fmt;

use thiserror::Error;

/// Why a quadrature refused to produce a number.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivergenceReason {
    /// The running estimate exceeded the magnitude cap.
    MagnitudeCap,
    /// The panel budget was exhausted before the error target was met.
    PanelCap,
    /// A panel could no longer be split and still carried a large error.
    Singular,
    /// The integrand returned NaN or an infinity.
    NonFinite,
    /// A semi-infinite tail failed to decay.
    Tail,
}

impl fmt::Display for DivergenceReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DivergenceReason::MagnitudeCap => "magnitude cap exceeded",
            DivergenceReason::PanelCap => "panel cap exceeded",
            DivergenceReason::Singular => "non-integrable singularity",
            DivergenceReason::NonFinite => "non-finite integrand value",
            DivergenceReason::Tail => "tail does not decay",
        };
        f.write_str(s)
    }
}

/// Report attached to a divergent integral.
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub reason: DivergenceReason,
    /// Last estimate seen before giving up.
    pub estimate: f64,
    pub panels: usize,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (last estimate {:e}, {} panels)",
            self.reason, self.estimate, self.panels
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infinite mass: {0}")]
    InfiniteMass(String),

    #[error("zero mass region: nothing to sample")]
    ZeroMass,

    #[error("divergent integral: {0}")]
    Divergent(Divergence),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("kernel factors are not pairwise disjoint")]
    NonDisjoint,

    #[error("{rejected} of {total} functional evaluations were not finite")]
    Rejections { rejected: usize, total: usize },

    #[error("domain check failed for {field}: {detail}")]
    DomainCheck { field: String, detail: String },

    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<Divergence> for Error {
    fn from(d: Divergence) -> Self {
        Error::Divergent(d)
    }
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
