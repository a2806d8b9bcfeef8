//! Exit-code taxonomy: 2 configuration, 3 dataset, 4 backend, 5 port busy,
//! 1 anything else.

use std::fmt;

pub const CONFIG: u8 = 2;
pub const DATASET: u8 = 3;
pub const BACKEND: u8 = 4;
pub const PORT_BUSY: u8 = 5;

/// An error tagged with the process exit code it should produce.
#[derive(Debug)]
pub struct Coded {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for Coded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl std::error::Error for Coded {}

pub fn coded(code: u8, error: impl Into<anyhow::Error>) -> anyhow::Error {
    Coded {
        code,
        error: error.into(),
    }
    .into()
}

/// Classifies a library error by where it came from.
pub fn from_core(e: fcxl_core::Error) -> anyhow::Error {
    use fcxl_core::Error as E;
    let code = match &e {
        E::Dataset(_) | E::Io(_) | E::Image(_) => DATASET,
        E::InvalidParameter(_) => CONFIG,
        E::Backend(_) => BACKEND,
        _ => 1,
    };
    coded(code, e)
}

pub fn code_of(e: &anyhow::Error) -> u8 {
    e.downcast_ref::<Coded>().map_or(1, |c| c.code)
}
