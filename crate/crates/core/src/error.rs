use std::path::PathBuf;

use crate::complex::{Family, Layout};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("layout {layout} is not defined for the {family} family")]
    LayoutMismatch { family: Family, layout: Layout },
    #[error("layout {layout} requires an even rank, got {rank}")]
    OddRank { layout: Layout, rank: usize },
    #[error("rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },
    #[error("rank must be positive")]
    ZeroRank,
    #[error("malformed relation parameters: {0}")]
    MalformedParams(String),
    #[error("Möbius decomposition undefined at dimension {dim}: |c| = {modulus:e} is below the guard threshold")]
    DecompositionUndefined { dim: usize, modulus: f64 },
    #[error("{kind} id {id} out of range (size {size})")]
    IdOutOfRange { kind: &'static str, id: usize, size: usize },
    #[error("regularization coefficient must be non-negative, got {0}")]
    NegativeCoefficient(f64),
    #[error("non-finite score encountered")]
    NonFinite,
    #[error("training diverged at epoch {epoch}, batch {batch}: objective = {value}")]
    Divergence { epoch: usize, batch: usize, value: f64 },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing split file {0}")]
    MissingFile(PathBuf),
    #[error("{split}:{line}: {msg}")]
    Parse { split: String, line: usize, msg: String },
    #[error("split {0} is empty")]
    EmptySplit(String),
    #[error("{split}:{line}: duplicate triple")]
    DuplicateTriple { split: String, line: usize },
    #[error("reciprocal augmentation already applied")]
    AlreadyReciprocal,
    #[error("synthetic graph settings produce an empty held-out set (density {density}, {n_entities} entities)")]
    DensityTooLow { density: f64, n_entities: usize },
    #[error("invalid synthetic graph settings: {0}")]
    SynthConfig(String),
    #[error("model vocabulary ({model_entities} entities, {model_relations} relations) does not match dataset ({data_entities}, {data_relations})")]
    VocabMismatch {
        model_entities: usize,
        model_relations: usize,
        data_entities: usize,
        data_relations: usize,
    },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("both samples have zero variance")]
    DegenerateSample,
    #[error("t-test needs at least 2 values per sample, got {0}")]
    SampleTooSmall(usize),
    #[error("report: {0}")]
    Report(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Numerical failures (as opposed to bad input or usage).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite | Error::Divergence { .. } | Error::DecompositionUndefined { .. }
        )
    }
}
