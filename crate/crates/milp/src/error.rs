use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("brute force supports at most {max} integer variables, model has {found}")]
    TooManyIntegers { max: usize, found: usize },
    #[error("MPS parse error at line {line}: {msg}")]
    MpsParse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
