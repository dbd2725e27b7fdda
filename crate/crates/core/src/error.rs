use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alphabet must contain at least one symbol")]
    EmptyAlphabet,

    #[error("duplicate symbol `{0}` in alphabet")]
    DuplicateSymbol(String),

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("index {index} out of range for alphabet of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("table shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid value {value} in {table} at entry {index}")]
    InvalidValue { table: String, index: usize, value: f64 },

    #[error("every entry of the row is -inf")]
    AllZeroRow,

    #[error("{what} sums to {sum}, not 1")]
    NotStochastic { what: String, sum: f64 },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("observation sequence has zero probability under the model")]
    ImpossibleObservation,

    #[error("enumeration of {needed} sequences exceeds the budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("{0}")]
    ModeMismatch(String),
}
