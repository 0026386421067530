use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("the discrete curve does not cut any element of the background mesh")]
    EmptyActiveMesh,

    #[error("element {element} has {crossings} boundary crossings (multiple-component cut); refine the mesh")]
    MultipleComponentCut { element: usize, crossings: usize },

    #[error("degenerate cut in element {element}: {reason}")]
    DegenerateCut { element: usize, reason: String },

    #[error("closest point projection from ({x}, {y}) did not converge")]
    ProjectionFailure { x: f64, y: f64 },

    #[error("singular geometry: |grad phi| = {0:e}")]
    SingularGeometry(f64),

    #[error(
        "numerically singular matrix: lambda_min = {lambda_min:e}, lambda_max = {lambda_max:e}"
    )]
    NumericallySingular { lambda_min: f64, lambda_max: f64 },

    #[error("conjugate gradients stagnated after {iterations} iterations (condition estimate {kappa_estimate:e})")]
    Conditioning {
        iterations: usize,
        kappa_estimate: f64,
    },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("nonpositive diagonal entry {value:e} in row {row}")]
    NonPositiveDiagonal { row: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
