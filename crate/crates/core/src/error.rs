use thiserror::Error;

/// A base classifier could not produce a label for its input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ClassifierError(pub String);

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("classifier failed at base index {base_index}: {source}")]
    Classifier {
        base_index: usize,
        #[source]
        source: ClassifierError,
    },

    #[error("enumeration refused: {required} evaluations required but the budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input (files, flags) rather than
    /// internal failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Argument(_)
                | Error::ModelFile(_)
                | Error::Parse { .. }
                | Error::Csv(_)
                | Error::BudgetExceeded { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
