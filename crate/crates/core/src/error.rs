use std::path::PathBuf;

/// Errors raised across the compass library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed questionnaire: {0}")]
    MalformedQuestionnaire(String),

    #[error("proposition `{proposition}` has no text for language `{language}`")]
    MissingLanguageText { proposition: String, language: String },

    #[error("domain-count mismatch: {0}")]
    DomainCountMismatch(String),

    #[error("missing answer for proposition `{0}`")]
    MissingAnswer(String),

    #[error("unknown proposition id `{0}`")]
    UnknownProposition(String),

    #[error("malformed template file: {0}")]
    MalformedTemplates(String),

    #[error("language `{0}` is not available")]
    MissingLanguage(String),

    #[error("malformed response log: {0}")]
    MalformedLog(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("network failure: {0}")]
    Network(String),

    #[error("malformed service response: {0}")]
    MalformedResponse(String),

    #[error("context overflow: {0}")]
    ContextOverflow(String),

    #[error("service rejected the request with status {status}: {message}")]
    Service { status: u16, message: String },

    #[error("scripted failure: {0}")]
    Scripted(String),

    #[error("degenerate direction: class means coincide")]
    DegenerateDirection,

    #[error("single-class dataset: probes need both labels")]
    SingleClass,

    #[error("malformed tensor container: {0}")]
    MalformedTensors(String),

    #[error("malformed plan: {0}")]
    MalformedPlan(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether a generation request that failed with this error may be retried.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Network(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
