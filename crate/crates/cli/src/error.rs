use std::fmt;

/// A flag combination that can never succeed; exits with code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Invalid arguments reported by the library are usage errors too: they
/// come from geometry, model or flag values, not from the environment.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err
        .chain()
        .any(|c| c.is::<Usage>() || matches!(c.downcast_ref::<ctstreak::Error>(), Some(ctstreak::Error::InvalidArgument(_))));
    if usage {
        EXIT_USAGE
    } else {
        EXIT_RUNTIME
    }
}
