use std::fmt::Display;

/// Failure classes and their process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration (exit 1).
    Usage(anyhow::Error),
    /// Unreadable or invalid input data (exit 2).
    Data(anyhow::Error),
    /// Anything that fails after inputs were accepted (exit 3).
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Runtime(e) => e,
        }
    }

    pub fn usage(msg: impl Display) -> Failure {
        Failure::Usage(anyhow::anyhow!("{msg}"))
    }
}

pub trait ResultExt<T> {
    fn usage_ctx<C: Display + Send + Sync + 'static>(self, f: impl FnOnce() -> C) -> Result<T, Failure>;
    fn data_ctx<C: Display + Send + Sync + 'static>(self, f: impl FnOnce() -> C) -> Result<T, Failure>;
    fn runtime_ctx<C: Display + Send + Sync + 'static>(self, f: impl FnOnce() -> C) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn usage_ctx<C: Display + Send + Sync + 'static>(self, f: impl FnOnce() -> C) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into().context(f())))
    }

    fn data_ctx<C: Display + Send + Sync + 'static>(self, f: impl FnOnce() -> C) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(e.into().context(f())))
    }

    fn runtime_ctx<C: Display + Send + Sync + 'static>(self, f: impl FnOnce() -> C) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into().context(f())))
    }
}
