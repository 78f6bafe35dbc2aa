use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("letter {letter} is out of range for rank {rank}")]
    LetterOutOfRange { letter: i32, rank: usize },

    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("invalid word syntax {0:?}")]
    WordSyntax(String),

    #[error("endomorphism image of generator {generator} is empty")]
    EmptyImage { generator: usize },

    #[error("expected {expected} generator images, found {found}")]
    ImageCount { expected: usize, found: usize },

    #[error("edge path is not composable at position {position}")]
    NotComposable { position: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid marking: {0}")]
    InvalidMarking(String),

    #[error("invalid graph map: {0}")]
    InvalidMap(String),

    #[error("path is not closed")]
    OpenPath,

    #[error("loop is not immersed (backtrack at position {position})")]
    NotImmersed { position: usize },

    #[error("map is not an immersion at vertex {vertex}")]
    NotImmersion { vertex: usize },

    #[error("map has an illegal turn at vertex {vertex}")]
    IllegalTurns { vertex: usize },

    #[error("matrix is reducible")]
    ReducibleMatrix,

    #[error("power iteration did not converge after {iterations} iterations (last estimate {last})")]
    NoConvergence { iterations: usize, last: f64 },

    #[error("filtration depth {requested} exceeds computed depth {computed}")]
    DepthExceeded { requested: usize, computed: usize },

    #[error("edge set is not an invariant forest: {0}")]
    NotInvariantForest(String),

    #[error("collapse leaves a graph without edges")]
    DegenerateCollapse,

    #[error("word {0} is not admissible")]
    NotAdmissible(String),

    #[error("no preimage for power {power} of map {map}")]
    MissingPreimage { map: usize, power: usize },

    #[error("expected {expected} rings, found {found}")]
    RingCount { expected: usize, found: usize },

    #[error("catalog scale {scale} is smaller than requested scale {requested}")]
    CatalogScale { scale: usize, requested: usize },

    #[error("maps are defined on different graphs")]
    DifferentGraphs,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}
