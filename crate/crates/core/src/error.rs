use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: shape mismatch, left {left:?} vs right {right:?}")]
    ShapeMismatch {
        context: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{context}: expected width {expected}, got {got}")]
    WidthMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{context}: sequence length {got} is shorter than required {needed}")]
    SequenceTooShort {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("{context}: sequence lengths differ, {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("degenerate 6d rotation encoding (zero or parallel columns) at element {index}")]
    DegenerateRotation { index: usize },

    #[error("axis must have unit norm, |axis| = {norm}")]
    NonUnitAxis { norm: f64 },

    #[error("malformed skeleton: {0}")]
    Topology(String),

    #[error("timestep {t} out of range [0, {max})")]
    TimestepOutOfRange { t: usize, max: usize },

    #[error("alpha_bar is 1 at t = {t}; noise direction undefined")]
    DivisionGuard { t: usize },

    #[error("sampler timestep subset is empty")]
    EmptySubset,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("stitch coverage gap at frame {frame}")]
    CoverageGap { frame: usize },

    #[error("{context}: bad magic {found:?}, expected {expected:?}")]
    BadMagic {
        context: &'static str,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("{context}: unsupported format version {found}, expected {expected}")]
    VersionMismatch {
        context: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("{context}: file truncated")]
    Truncated { context: &'static str },

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
