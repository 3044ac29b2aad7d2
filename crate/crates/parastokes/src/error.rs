use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// The CLI maps `Syntax`, `UnknownIdent` and `Invalid` to exit code 2,
/// `Collision` to 4 and everything else to 3.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier '{name}' at position {pos}")]
    UnknownIdent { pos: usize, name: String },
    #[error("pole at z = {re}{im:+}i")]
    Pole { re: f64, im: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("collision or degeneracy: {0}")]
    Collision(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}

pub(crate) fn numerical<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Numerical(msg.into()))
}
