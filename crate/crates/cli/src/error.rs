//! Mapping from library errors to process exit codes.

use std::fmt;

use latentseal::codec::CodecError;
use latentseal::ecies::EciesError;
use latentseal::henon::HenonError;
use latentseal::image::ImageError;
use latentseal::metrics::MetricsError;
use latentseal::pipeline::PipelineError;
use latentseal::transfer::TransferError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Io = 3,
    Auth = 4,
    Format = 5,
    Divergence = 6,
    Shape = 7,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Usage, message)
    }

    pub fn code(&self) -> u8 {
        self.kind as u8
    }

    /// Prefix the message with the file or peer it concerns.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(ExitKind::Io, e.to_string())
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        let kind = match e {
            ImageError::Io(_) => ExitKind::Io,
            _ => ExitKind::Format,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<HenonError> for CliError {
    fn from(e: HenonError) -> Self {
        let kind = match e {
            HenonError::Divergence { .. } => ExitKind::Divergence,
            HenonError::LengthMismatch { .. } => ExitKind::Shape,
            _ => ExitKind::Format,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<EciesError> for CliError {
    fn from(e: EciesError) -> Self {
        let kind = match e {
            EciesError::AuthFailure => ExitKind::Auth,
            EciesError::EntropyFailure(_) => ExitKind::Io,
            _ => ExitKind::Format,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::Image(e) => e.into(),
            CodecError::Io(e) => e.into(),
            CodecError::ShapeMismatch(_) | CodecError::MTooLarge { .. } => {
                Self::new(ExitKind::Shape, e.to_string())
            }
            CodecError::Config(_) => Self::usage(e.to_string()),
            _ => Self::new(ExitKind::Format, e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        let kind = match e {
            MetricsError::DimMismatch(..) => ExitKind::Shape,
            MetricsError::WindowTooLarge { .. } => ExitKind::Usage,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::BadHeader(_) => Self::new(ExitKind::Format, e.to_string()),
            PipelineError::Oversize(_) => Self::new(ExitKind::Shape, e.to_string()),
            PipelineError::Codec(e) => e.into(),
            PipelineError::Chaos(e) => e.into(),
            PipelineError::Crypto(e) => e.into(),
            PipelineError::Metrics(e) => e.into(),
        }
    }
}

impl From<TransferError> for CliError {
    fn from(e: TransferError) -> Self {
        let kind = match e {
            TransferError::Connection(_) | TransferError::Io(_) => ExitKind::Io,
            TransferError::FrameTooLarge(_) | TransferError::BadHeader(_) => ExitKind::Format,
            TransferError::BadRate => ExitKind::Usage,
        };
        Self::new(kind, e.to_string())
    }
}
