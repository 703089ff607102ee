use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type. Each variant names the operation or field that
/// violated its contract so CLI messages stay actionable.
#[derive(Debug, Error)]
pub enum Error {
    // ---- tensor file format ----
    #[error("{path}: bad magic {found:?}, expected \"GEVT\"")]
    BadMagic { path: PathBuf, found: [u8; 4] },
    #[error("{path}: unsupported format version {version}, expected 1")]
    UnsupportedVersion { path: PathBuf, version: u8 },
    #[error("{path}: unsupported dtype code {code}")]
    UnsupportedDtypeCode { path: PathBuf, code: u8 },
    #[error("{path}: ndim {ndim} outside supported range 1..=4")]
    BadNdim { path: PathBuf, ndim: u8 },
    #[error("{path}: payload length {actual} bytes disagrees with header ({expected} expected)")]
    PayloadLengthMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("write {path}: tensor dtype {dtype} is not storable")]
    UnstorableDtype { path: PathBuf, dtype: &'static str },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // ---- IDX / CIFAR ----
    #[error("{path}: IDX magic 0x{found:08x} is neither labels (0x00000801) nor images (0x00000803)")]
    IdxBadMagic { path: PathBuf, found: u32 },
    #[error("{path}: file length {length} is not a multiple of the {record_size}-byte record")]
    CifarBadLength {
        path: PathBuf,
        length: u64,
        record_size: usize,
    },

    // ---- sample sets ----
    #[error("labels length {labels} does not match sample count {samples}")]
    LabelCountMismatch { labels: usize, samples: usize },
    #[error("label {label} at row {row} outside [0, {class_count})")]
    LabelOutOfRange {
        label: i64,
        row: usize,
        class_count: usize,
    },
    #[error("sample tensor must have 1-3 trailing dims, got shape {shape:?}")]
    BadSampleShape { shape: Vec<usize> },
    #[error("sample data must be uint8 or float32, got {dtype}")]
    BadSampleDtype { dtype: &'static str },
    #[error("class {class} has {available} samples, fewer than the requested {requested}")]
    InsufficientClassSamples {
        class: usize,
        available: usize,
        requested: usize,
    },
    #[error("cannot merge sets: {reason}")]
    MergeMismatch { reason: String },

    // ---- classifiers ----
    #[error("{operation}: training set is empty")]
    EmptyTrainingSet { operation: &'static str },
    #[error("{operation}: {n} training samples is fewer than {class_count} classes")]
    TooFewSamples {
        operation: &'static str,
        n: usize,
        class_count: usize,
    },
    #[error("{operation}: non-finite value encountered in input")]
    NonFiniteInput { operation: &'static str },
    #[error("training diverged: non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("classifier spec field {field}: {reason}")]
    BadClassifierSpec { field: &'static str, reason: String },
    #[error("input has {got} features but the model was trained on {expected}")]
    FeatureDimMismatch { expected: usize, got: usize },
    #[error("penultimate features are undefined for a random forest; use the raw feature matrix instead")]
    NoPenultimateFeatures,
    #[error("k={k} exceeds class count {class_count}")]
    TopKOutOfRange { k: usize, class_count: usize },
    #[error("m={m} exceeds corpus size {corpus}")]
    NeighborCountOutOfRange { m: usize, corpus: usize },
    #[error("probability matrix row {row} sums to {sum}, outside 1 +/- {tolerance}")]
    NotRowStochastic { row: usize, sum: f64, tolerance: f64 },
    #[error("probability matrix entry at ({row}, {col}) is negative or non-finite: {value}")]
    BadProbabilityEntry { row: usize, col: usize, value: f32 },

    // ---- metric protocols ----
    #[error("{operation}: class count {class_count} must be at least 2")]
    TooFewClasses {
        operation: &'static str,
        class_count: usize,
    },
    #[error("split protocol yields an empty split ({rows} rows for {split_count} splits)")]
    EmptySplit { rows: usize, split_count: usize },
    #[error("moment estimation requires at least 2 samples, got {n}")]
    TooFewMomentSamples { n: usize },
    #[error("covariance of the {side} input is not positive semidefinite: eigenvalue {eigenvalue:.3e} below -1e-6 * trace ({trace:.3e})")]
    NotPositiveSemidefinite {
        side: &'static str,
        eigenvalue: f64,
        trace: f64,
    },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("fid variant {variant} requires at least {minimum} {side} samples, got {got}")]
    InsufficientFidSamples {
        variant: &'static str,
        side: &'static str,
        minimum: usize,
        got: usize,
    },
    #[error("images must be square, got {height}x{width}")]
    NonSquareImages { height: usize, width: usize },
    #[error("image side {side} is not min_resolution {min_resolution} times a power of two")]
    BadPyramidSide { side: usize, min_resolution: usize },
    #[error("pyramid level side {side} is below the 7x7 patch size")]
    LevelTooSmall { side: usize },
    #[error("descriptor row counts differ after subsampling: {left} vs {right}")]
    DescriptorCountMismatch { left: usize, right: usize },
    #[error("{operation}: input has no rows")]
    EmptyInput { operation: &'static str },

    // ---- gan-eval / synth-lab ----
    #[error("{field} must be in [0, 1], got {value}")]
    RateOutOfRange { field: &'static str, value: f64 },
    #[error("{field} must be nonnegative, got {value}")]
    NegativeParameter { field: &'static str, value: f64 },
    #[error("{operation}: sizes must be ascending, positive, and divisible by the class count {class_count}; offending size {size}")]
    BadSweepSize {
        operation: &'static str,
        size: usize,
        class_count: usize,
    },
    #[error("{operation}: pool holds {pool} samples, fewer than the largest requested size {requested}")]
    PoolTooSmall {
        operation: &'static str,
        pool: usize,
        requested: usize,
    },
    #[error("{operation} requires uint8 image data")]
    RequiresU8 { operation: &'static str },
    #[error("class {class} to drop is outside [0, {class_count})")]
    DropClassOutOfRange { class: usize, class_count: usize },
    #[error("mixture spec invalid: {reason}")]
    BadMixtureSpec { reason: String },
    #[error("{operation}: {count} is not divisible by class count {class_count}")]
    NotDivisibleByClasses {
        operation: &'static str,
        count: usize,
        class_count: usize,
    },

    // ---- reports / CLI ----
    #[error("report {path}: {reason}")]
    BadReport { path: PathBuf, reason: String },
    #[error("report merge: inputs disagree on digest for {key}")]
    ReportMergeConflict { key: String },
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
