use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input matrix differs from its conjugate transpose.
    #[error("operator is not Hermitian: max |O - O†| entry is {max_asymmetry:e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The analytic probability mass outside the grid exceeds the tolerance
    /// for the requested detector family.
    #[error(
        "grid half-width {half_width} too small: tail mass {tail_mass:e} exceeds {tolerance:e}; \
         need L >= {required_half_width}"
    )]
    GridTooNarrow { half_width: f64, tail_mass: f64, tolerance: f64, required_half_width: f64 },

    /// ⟨Ψf|Ψi⟩-driven divergence regime: the postselected detector state is
    /// (numerically) the zero vector.
    #[error("postselection probability vanishes ({probability:e} < floor {floor:e})")]
    VanishingProbability { probability: f64, floor: f64 },

    #[error("weak value diverges: |<Psi_f|Psi_i>| = {overlap:e} < floor {floor:e}")]
    VanishingOverlap { overlap: f64, floor: f64 },

    /// Detector state is an eigenstate of the coupled observable, so the
    /// two-dimensional closed forms are undefined.
    #[error("detector state is an eigenstate of the coupled observable (variance {variance:e})")]
    DegenerateDetector { variance: f64 },

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("no valid selections at g = {g:e}: every candidate fell below the probability floor")]
    NoValidSelections { g: f64 },

    #[error("singular transform: {0}")]
    Singular(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
