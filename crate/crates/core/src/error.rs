use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown element symbol {0:?}")]
    UnknownElement(String),

    #[error("invalid molecule: {0}")]
    InvalidMolecule(String),

    #[error("charge equilibration did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("grid of {voxels} voxels exceeds the budget of {budget}")]
    VoxelBudget { voxels: usize, budget: usize },

    #[error("point ({0}, {1}, {2}) lies outside the grid bounds")]
    OutsideGrid(f64, f64, f64),

    #[error("isovalue {iso} is not strictly inside the grid range [{min}, {max}]")]
    IsovalueOutOfRange { iso: f64, min: f64, max: f64 },

    #[error("isosurface extraction produced an empty mesh")]
    EmptyMesh,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ambiguous alignment: {0}")]
    AmbiguousAlignment(String),

    #[error("format error in member {member:?}: {msg}")]
    Format { member: String, msg: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("labels have zero variance")]
    ZeroVariance,

    #[error("uncalibratable: fitted slope {0} is too close to zero")]
    Uncalibratable(f64),

    #[error("labels contain a single class")]
    SingleClass,

    #[error("value must be strictly positive, got {0}")]
    NonPositive(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("zip archive: {0}")]
    Zip(#[from] zip::result::ZipError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
