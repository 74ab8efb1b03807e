use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("log contains no usable records")]
    EmptyLog,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid fold count {k} for {n} examples (need 2 <= k <= n)")]
    InvalidFoldCount { k: usize, n: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
