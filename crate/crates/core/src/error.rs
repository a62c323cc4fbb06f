use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs was violated (bad sizes, indices, ordering).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The requested operation needs something the network cannot provide,
    /// e.g. second derivatives of a ReLU network.
    #[error("capability: {0}")]
    Capability(String),

    /// A loss component evaluated to NaN or infinity.
    #[error("non-finite loss in {term} term: {value}")]
    NonFiniteLoss { term: &'static str, value: f64 },

    /// A gradient or forward value became non-finite during training.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A user-supplied function returned a non-finite value at a quadrature node.
    #[error("evaluation of {what} is non-finite at x = {node:?}")]
    Evaluation { what: String, node: Vec<f64> },

    #[error("configuration: {0}")]
    Config(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
