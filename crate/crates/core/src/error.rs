use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AdqError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AdqError {
    #[error("bad magic in {path}: expected {expected:?}, found {found:?}")]
    BadMagic {
        path: PathBuf,
        expected: [u8; 4],
        found: [u8; 4],
    },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated at byte offset {offset} (expected {expected} bytes)")]
    TruncatedFile { offset: u64, expected: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checksum mismatch for {path}: manifest says {expected}, file hashes to {actual}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },
    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },
    #[error("unknown item id {0}")]
    UnknownId(u32),
    #[error("invalid bin count m={m} for M={items} items")]
    InvalidBinCount { m: usize, items: usize },
    #[error("patch side {side} does not fit a {width}x{height} image")]
    PatchTooLarge {
        side: usize,
        width: usize,
        height: usize,
    },
    #[error("no image for item {0}")]
    MissingImage(u32),
    #[error("cosine similarity of a zero vector")]
    ZeroVector,
    #[error("bin has {0} members, at least 2 are required")]
    BinTooSmall(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("alpha must lie in [0, 1], got {0}")]
    BadAlpha(f64),
    #[error("keep ratio must lie in (0, 1], got {0}")]
    BadKeepRatio(f64),
    #[error("quota {quota} exceeds size {size} of bin {bin}")]
    QuotaExceedsBin { bin: usize, quota: usize, size: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<AdqError>,
    },
}

impl AdqError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AdqError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, detail: impl ToString) -> Self {
        AdqError::Parse {
            what,
            detail: detail.to_string(),
        }
    }

    /// Wraps the error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        AdqError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code used by the command line tool.
    ///
    /// 2 = configuration error, 3 = I/O or file format error, 4 = invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            AdqError::Stage { source, .. } => source.exit_code(),
            AdqError::Config(_)
            | AdqError::BadAlpha(_)
            | AdqError::BadKeepRatio(_)
            | AdqError::InvalidBinCount { .. }
            | AdqError::PatchTooLarge { .. } => 2,
            AdqError::BadMagic { .. }
            | AdqError::UnsupportedVersion(_)
            | AdqError::TruncatedFile { .. }
            | AdqError::Io { .. }
            | AdqError::ChecksumMismatch { .. }
            | AdqError::Parse { .. } => 3,
            _ => 4,
        }
    }
}
