use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside its domain (bad geometry, out-of-range coordinate, ...).
    #[error("{0}")]
    Domain(String),

    /// A trace file record could not be parsed or failed validation.
    #[error("trace line {line}: {msg}")]
    TraceParse { line: usize, msg: String },

    /// A statistic was requested over an empty population.
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    /// A configuration failed validation; `field` names the offending key.
    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    /// The simulation made no forward progress for too long (policy bug).
    #[error("livelock detected at cycle {cycle}: no state change for {idle_cycles} cycles")]
    Livelock { cycle: u64, idle_cycles: u64 },

    #[error("aggregation error: {0}")]
    Aggregate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
