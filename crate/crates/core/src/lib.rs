//! Rigid cross-pose estimation from soft correspondences and goal flow.
//!
//! Given an action cloud, an anchor cloud, bidirectional soft correspondences
//! with importance weights, a per-point goal-flow field and a blend weight
//! `w`, the solver returns the SE(3) transform minimizing
//!
//! ```text
//! J(R, t) = (1 - w) [ sum_i alpha_i^A |R p_i^A + t - v_i^A|^2
//!                   + sum_i alpha_i^B |R^T (p_i^B - t) - v_i^B|^2 ]
//!         +       w   sum_i           |R p_i^A + t - (p_i^A + d_i)|^2
//! ```
//!
//! in closed form via a weighted SVD. The crate also ships an independent
//! numerical oracle used to certify the closed form, synthetic scenario
//! generation with exact ground truth, the evaluation loss suite, and a CLI
//! (`crosspose generate | solve | eval | sweep`).

pub mod geometry;
pub mod harness;
pub mod io;
pub mod losses;
pub mod oracle;
pub mod solver;
pub mod synthetic;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point cloud must contain at least one point")]
    EmptyCloud,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("rotation is not orthonormal (defect {defect:.3e})")]
    NotOrthonormal { defect: f64 },
    #[error("rotation matrix is a reflection (negative determinant)")]
    Reflection,
    #[error("{what}: expected {expected} rows, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("alpha weights must be nonnegative with a positive sum")]
    InvalidAlpha,
    #[error("blend weight {0} is outside [0, 1]")]
    BlendOutOfRange(f64),
    #[error("degenerate geometry: weighted cross-covariance has rank < 2")]
    DegenerateGeometry,
    #[error("all effective weights are zero")]
    InvalidWeights,
    #[error("{0}")]
    InvalidArgument(&'static str),
    #[error("joint axis direction must have nonzero finite norm")]
    InvalidAxis,
    #[error("unknown corruption `{0}` (expected corr-outliers, flow-outliers, flow-scale or alpha-randomize)")]
    UnknownCorruption(String),
    #[error("unknown scenario kind `{0}` (expected free-floating or articulated)")]
    UnknownKind(String),
    #[error("unsupported scenario version {0}, expected 1")]
    UnsupportedVersion(u32),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
