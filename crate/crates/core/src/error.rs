use thiserror::Error;

/// Errors reported by the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NgoError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("CFL condition violated: max|speed|·dt/dx = {courant:.4} ≥ 1")]
    Cfl { courant: f64 },

    #[error("zero-mean precondition violated: |mean| = {mean:.3e} exceeds {tolerance:.3e}")]
    NonzeroMean { mean: f64, tolerance: f64 },

    #[error("degenerate coefficient `{name}` at {} grid node(s), first at index {}", nodes.len(), nodes[0])]
    Degenerate { name: &'static str, nodes: Vec<usize> },

    #[error("{0}")]
    Unsupported(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
}

pub type Result<T, E = NgoError> = std::result::Result<T, E>;
