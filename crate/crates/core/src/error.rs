use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fixture has {count} vertices but the enumeration cap is {cap}")]
    FixtureTooLarge { count: usize, cap: usize },

    #[error("coupling invariant violated: {0}")]
    InvariantFailure(String),

    #[error("crossing curves do not intersect inside the lambda grid; widen the grid ({0})")]
    WidenGrid(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}

pub(crate) fn check_unit(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return invalid(format!("{name} must lie in [0, 1], got {value}"));
    }
    Ok(())
}
