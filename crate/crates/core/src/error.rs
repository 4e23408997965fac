use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        // Written as a match so NaN operands fail the check.
        match $cond {
            true => {}
            false => return Err($crate::error::Error::InvalidArgument(format!($($arg)+))),
        }
    };
}
pub(crate) use ensure;
