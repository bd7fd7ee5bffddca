use std::fmt;
use std::io;
use std::path::PathBuf;

/// Where in an input a parse failure happened.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    /// 1-based line number in a text file or text header.
    Line(usize),
    /// 0-based byte offset into a binary payload.
    Byte(u64),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Byte(n) => write!(f, "byte {n}"),
        }
    }
}

/// Coarse error families. The CLI maps each family to one exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorFamily {
    /// An input file is missing, unreadable, or malformed.
    Input,
    /// Inputs parse but violate a scene invariant.
    Validation,
    /// The configuration or scene spec is invalid.
    Config,
    /// Geometry is degenerate (empty cloud, collinear ground, oversized grid).
    Geometry,
    /// Risk evaluation could not proceed (missing density, bad domain).
    Risk,
    /// An output could not be written.
    Output,
}

impl ErrorFamily {
    pub fn name(self) -> &'static str {
        match self {
            ErrorFamily::Input => "input",
            ErrorFamily::Validation => "validation",
            ErrorFamily::Config => "config",
            ErrorFamily::Geometry => "geometry",
            ErrorFamily::Risk => "risk",
            ErrorFamily::Output => "output",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{source_name}: {location}: {message}")]
    Malformed {
        source_name: String,
        location: Location,
        message: String,
    },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error(
        "camera {camera}: mask is {}x{}, camera is {}x{}",
        found.0, found.1, expected.0, expected.1
    )]
    DimensionMismatch {
        camera: String,
        expected: (u32, u32),
        found: (u32, u32),
    },

    #[error("{source_name}: class index {class} is not in the class table ({classes} classes)")]
    UnknownClassIndex {
        source_name: String,
        class: u32,
        classes: usize,
    },

    #[error(
        "camera {camera}: rotation is not a proper rotation \
         (max |RᵀR - I| = {orthogonality_error:.3e}, det = {determinant})"
    )]
    NonOrthonormalRotation {
        camera: String,
        orthogonality_error: f64,
        determinant: f64,
    },

    #[error("camera {camera}: {reason}")]
    InvalidCamera { camera: String, reason: String },

    #[error("camera id {0:?} appears more than once")]
    DuplicateCamera(String),

    #[error("{source_name}: {message}")]
    Config {
        source_name: String,
        message: String,
    },

    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("no material density configured for class {class:?}")]
    MissingDensity { class: String },

    #[error("domain error: {0}")]
    Domain(String),
}

impl Error {
    pub fn family(&self) -> ErrorFamily {
        match self {
            Error::Malformed { .. } | Error::Read { .. } => ErrorFamily::Input,
            Error::DimensionMismatch { .. }
            | Error::UnknownClassIndex { .. }
            | Error::NonOrthonormalRotation { .. }
            | Error::InvalidCamera { .. }
            | Error::DuplicateCamera(_) => ErrorFamily::Validation,
            Error::Config { .. } | Error::InvalidSpec(_) => ErrorFamily::Config,
            Error::EmptyCloud | Error::DegenerateGeometry(_) => ErrorFamily::Geometry,
            Error::MissingDensity { .. } | Error::Domain(_) => ErrorFamily::Risk,
            Error::Write { .. } => ErrorFamily::Output,
        }
    }

    pub(crate) fn malformed(
        source_name: impl Into<String>,
        location: Location,
        message: impl Into<String>,
    ) -> Self {
        Error::Malformed {
            source_name: source_name.into(),
            location,
            message: message.into(),
        }
    }

    pub(crate) fn config(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            source_name: source_name.into(),
            message: message.into(),
        }
    }

    pub(crate) fn read(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Read {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn write(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Write {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
