use thiserror::Error;

/// Errors raised by graph construction, spectral computations and the perturbation pipeline.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("internal graph is disconnected")]
    DisconnectedGraph,
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("internal graph has no edges")]
    EmptyGraph,
    #[error("tail attached to unknown vertex {0}")]
    UnknownBoundaryVertex(usize),
    #[error("zero tail count at vertex {0}")]
    ZeroTailCount(usize),
    #[error("vertex {0} carries no tail")]
    NotBoundaryVertex(usize),
    #[error("parameter {name} = {value} out of range")]
    ParamOutOfRange { name: &'static str, value: f64 },
    #[error("bad coin block sizes: n = {n}, n_i = {n_i}")]
    BadBlockSizes { n: usize, n_i: usize },
    #[error("truncation depth {0} too small for the state support")]
    DepthTooSmall(usize),
    #[error("eigenvalue clusters {0} and {1} are closer than ten cluster tolerances")]
    ClusterAmbiguity(String, String),
    #[error("eigenvalue within {distance:e} of the integration contour")]
    SingularResolventNearContour { distance: f64 },
    #[error("|mu| = {0} is not inside the open unit disk")]
    NotAResonance(f64),
    #[error("no convergence after {steps} steps (last increment {increment:e})")]
    NoConvergence { steps: usize, increment: f64 },
    #[error("value {0} outside the admissible range")]
    OutOfRange(f64),
    #[error("classification mismatch at {value}: expected multiplicity {expected}, found {found}")]
    ClassificationMismatch {
        value: String,
        expected: usize,
        found: usize,
    },
    #[error("contour around {center} encloses {found} eigenvalues, expected {expected}")]
    GroupEscapedContour {
        center: String,
        expected: usize,
        found: usize,
    },
    #[error("first-order operator is not semisimple at {0}")]
    Stage1NotSemisimple(String),
    #[error("bound violated: {0}")]
    BoundViolated(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the input configuration rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::DisconnectedGraph
                | Error::InvalidEdge(..)
                | Error::DuplicateEdge(..)
                | Error::EmptyGraph
                | Error::UnknownBoundaryVertex(_)
                | Error::ZeroTailCount(_)
                | Error::NotBoundaryVertex(_)
                | Error::ParamOutOfRange { .. }
                | Error::BadBlockSizes { .. }
                | Error::NotAResonance(_)
                | Error::OutOfRange(_)
                | Error::Input(_)
        )
    }
}
