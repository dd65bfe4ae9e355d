use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("negative value for {what}: {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("simultaneous {0} in one slot")]
    Exclusivity(&'static str),
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("topology is not radial: {0}")]
    NotRadial(String),
    #[error("reserve commitment {p_as} kW exceeds half the battery capacity {limit} kW")]
    ReserveTooLarge { p_as: f64, limit: f64 },
    #[error("local buy price {buy} below feed-in price {sell}")]
    InvertedPrices { buy: f64, sell: f64 },
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("insufficient history: need {needed} days, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}
