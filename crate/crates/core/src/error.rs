use std::path::PathBuf;

use thiserror::Error;

use crate::airy::AiryError;
use crate::besselsim::SimError;
use crate::constants::ConstantsError;
use crate::edwardsmc::PolymerError;
use crate::rate::RateError;
use crate::spectral::SpectralError;
use crate::sturm::SturmError;

/// Any failure surfaced by the library or the command line.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Airy(#[from] AiryError),
    #[error(transparent)]
    Sturm(#[from] SturmError),
    #[error(transparent)]
    Constants(#[from] ConstantsError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Polymer(#[from] PolymerError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by the caller's options rather than by the
    /// computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Usage(_)
                | Error::Sturm(SturmError::InvalidConfig(_))
                | Error::Sim(SimError::InvalidConfig(_))
                | Error::Polymer(PolymerError::InvalidConfig(_))
        )
    }
}
