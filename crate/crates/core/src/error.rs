use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Signed distance is undefined without both phases present.
    #[error("no interface")]
    NoInterface,

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("pixel size mismatch: {left} nm vs {right} nm")]
    PixelSizeMismatch { left: f64, right: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no kernel set loaded for defocus {defocus} nm")]
    MissingKernels { defocus: f64 },

    #[error("non-finite loss {loss} at iteration {iteration}")]
    NonFiniteLoss { iteration: usize, loss: f64 },

    #[error("non-finite value in input at index {index}")]
    NonFiniteInput { index: usize },

    #[error("target has zero perimeter")]
    ZeroPerimeter,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero intensity at edge pixel ({x}, {y}); log slope undefined")]
    ZeroIntensity { x: usize, y: usize },

    #[error("{0}")]
    Format(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("layout constraints unsatisfiable: {0}")]
    Unsatisfiable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
