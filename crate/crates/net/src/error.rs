use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("frame of {0} bytes exceeds the limit")]
    FrameTooLarge(usize),

    #[error("malformed frame: {0}")]
    Malformed(String),

    #[error("timed out talking to {0}")]
    Timeout(String),

    #[error("{endpoint}: expected {expected} answer bits, got {got}")]
    LengthMismatch { endpoint: String, expected: usize, got: usize },

    #[error("{endpoint} replied {code}: {detail}")]
    Remote { endpoint: String, code: String, detail: String },

    #[error("{endpoint}: {detail}")]
    Protocol { endpoint: String, detail: String },

    #[error("store file: {0}")]
    Store(String),
}

pub type NetResult<T> = std::result::Result<T, NetError>;

impl From<NetError> for ipir_core::Error {
    fn from(e: NetError) -> Self {
        ipir_core::Error::Transport(e.to_string())
    }
}
