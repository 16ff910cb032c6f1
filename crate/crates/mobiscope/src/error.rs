use std::io;
use std::path::PathBuf;

use mobiscope_core::demographics::DemographicsError;
use mobiscope_core::did::DidError;
use mobiscope_core::gridagg::GridError;
use mobiscope_core::lisa::LisaError;
use mobiscope_core::mobility::MobilityError;
use mobiscope_core::{GeoError, TimeError};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{}:{line}: {msg}", path.display())]
    Row { path: PathBuf, line: u64, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("privacy violation: phone {phone} spans {minutes} minutes, more than 24 hours")]
    Privacy { phone: String, minutes: i32 },
    #[error("{0}")]
    Data(String),
    #[error("internal: {0}")]
    Internal(String),
    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn row(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Row { path: path.into(), line, msg: msg.into() }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }

    /// Process exit status: 2 config, 3 data, 4 internal.
    /// The innermost error under any stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Row { .. } | Error::Io { .. } | Error::Privacy { .. } | Error::Data(_) => 3,
            Error::Internal(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {
        $(impl From<$t> for Error {
            fn from(e: $t) -> Self {
                Error::Data(e.to_string())
            }
        })*
    };
}

data_error!(DemographicsError, DidError, GeoError, GridError, LisaError, TimeError);

impl From<MobilityError> for Error {
    fn from(e: MobilityError) -> Self {
        match e {
            MobilityError::SpanExceeded { phone, minutes } => Error::Privacy { phone: phone.0, minutes },
            e => Error::Data(e.to_string()),
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.into().in_stage(stage))
    }
}
