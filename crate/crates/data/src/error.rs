use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum DataError {
    /// Malformed file contents; `offset` is the byte position of the fault.
    Parse { offset: usize, msg: String },
    /// Well-formed but unsupported variant (colour PFM, 8-bit disparity PNG).
    Unsupported(String),
    /// Argument outside the documented domain.
    Parameter(String),
    /// Manifest does not follow the schema.
    Manifest(String),
    /// A manifest entry references a file that does not exist.
    MissingFile { index: usize, path: PathBuf },
    Io { path: PathBuf, source: std::io::Error },
    Png(String),
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::Parse { offset, msg } => write!(f, "parse error at byte {offset}: {msg}"),
            DataError::Unsupported(m) => write!(f, "unsupported format: {m}"),
            DataError::Parameter(m) => write!(f, "parameter error: {m}"),
            DataError::Manifest(m) => write!(f, "manifest error: {m}"),
            DataError::MissingFile { index, path } => {
                write!(f, "sample {index}: missing file {}", path.display())
            }
            DataError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            DataError::Png(m) => write!(f, "png error: {m}"),
        }
    }
}

impl std::error::Error for DataError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            DataError::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, DataError>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}
