//! Live interpretation sessions over HTTP: JSON requests, server-sent event
//! feeds, idle expiry and optional journals.

mod http;
mod session;
pub mod wire;

pub use http::{router, serve, AppState, ServiceConfig};
pub use session::{read_journal, replay, Journal, JournalEntry, LivePredictor, LiveSession, LiveState, SessionSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    /// The solver ran out of budget.
    #[error("{0}")]
    Overflow(String),
    /// The session store is full.
    #[error("{0}")]
    Busy(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Io(e.to_string())
    }
}

#[cfg(test)]
mod tests;
