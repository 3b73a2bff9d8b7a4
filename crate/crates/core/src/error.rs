use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("resolution {0} is not a power of two >= 2")]
    InvalidResolution(usize),
    #[error("incompatible spaces: resolution {left} vs {right}")]
    SpaceMismatch { left: usize, right: usize },
    #[error("cell index {cell} out of range for resolution {resolution}")]
    CellOutOfRange { cell: usize, resolution: usize },
    #[error("cell indices must be strictly increasing")]
    UnsortedCells,
    #[error("forward array is not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("cannot parse rational {0:?}; expected \"p/q\"")]
    InvalidRational(String),
    #[error("symbol {0} is not in {{0, 1}}")]
    InvalidSymbol(u8),
    #[error("cylinder constrains coordinate {coord} outside the rank-{rank} window")]
    OutsideWindow { coord: i64, rank: u32 },
    #[error("atom index {index} out of range for rank {rank}")]
    AtomOutOfRange { index: usize, rank: u32 },
    #[error("atoms unrealizable: resolution 2^{log2} cannot carry rank {rank}")]
    AtomsUnrealizable { log2: u32, rank: u32 },
    #[error("target rank {target} exceeds set rank {rank}")]
    RankTooHigh { target: u32, rank: u32 },
    #[error("neighborhood and candidate use different set representations; a bridge is required")]
    MissingBridge,
    #[error("bridge has {got} sets but the collection has {expected}")]
    BridgeLength { expected: usize, got: usize },
    #[error("candidate representation is not supported for this center")]
    RepresentationMismatch,
    #[error("invalid neighborhood: {0}")]
    InvalidNeighborhood(&'static str),
    #[error("precision unattainable at rank {max_rank} for set {index}: best error {best}")]
    PrecisionUnattainable { index: usize, max_rank: u32, best: String },
    #[error("containment violated at {level}: fine deviation {fine}, coarse deviation {coarse}")]
    ContainmentViolated { level: String, fine: String, coarse: String },
    #[error("scan budget exceeded: {needed} intersections > {budget}; lower the cardinality bound")]
    ScanBudgetExceeded { needed: u128, budget: u128 },
    #[error("set family indices must be distinct (duplicate {0})")]
    DuplicateIndex(i64),
    #[error("cardinality bound must be >= 1")]
    InvalidCardinality,
    #[error("half measure unattainable on {0} cells")]
    HalfMeasureUnattainable(usize),
    #[error("seed set must have measure exactly 1/2 (has {0} of {1} cells)")]
    NotHalfMeasure(usize, usize),
    #[error("gap target unattainable: achieved {achieved} >= target {target}")]
    GapUnattainable { achieved: String, target: String },
    #[error("tower accuracy {a} is not below 1/{k}")]
    AccuracyPrecondition { a: String, k: u64 },
    #[error("set has measure zero")]
    ZeroMeasure,
    #[error("tower invariant violated: {0}")]
    TowerInvariant(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
