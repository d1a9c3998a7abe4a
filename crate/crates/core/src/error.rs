use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gamma has a pole at {0}")]
    Pole(f64),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("Mittag-Leffler series for alpha={alpha}, z={z} did not converge within {terms} terms")]
    MittagLefflerNonConvergence { alpha: f64, z: f64, terms: usize },

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("invalid kernel parameter: {0}")]
    KernelParameter(String),

    #[error("kernel `{kernel}` violates admissibility at x={x}: {reason}")]
    KernelViolation {
        kernel: String,
        x: f64,
        value: f64,
        reason: String,
    },

    #[error("could not invert psi at y={y} within [{lo}, {hi}]")]
    InverseFailure { y: f64, lo: f64, hi: f64 },

    #[error("quadrature refinement levels disagree: {coarse} vs {fine}")]
    QuadratureNonConvergence { coarse: f64, fine: f64 },

    #[error("function supplies psi-derivatives up to order {available}, order {requested} needed")]
    InsufficientDerivatives { requested: usize, available: usize },

    #[error("difference stencil at x={x} leaves the interval [{a}, {b}]")]
    StencilOutOfRange { x: f64, a: f64, b: f64 },

    #[error("integer order {0} has no series decomposition")]
    IntegerOrder(f64),

    #[error("non-finite solver state at x={x}")]
    NonFiniteState { x: f64 },

    #[error("decomposition coefficient A_N vanishes (N={0})")]
    DegenerateCoefficient(usize),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("model: {0}")]
    Model(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
