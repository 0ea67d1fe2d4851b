//! Reverse-mode differentiation over dense matrices, feed-forward networks and
//! the Adam optimizer.
//!
//! Input gradients of a critic are computed with forward-mode tangents inside
//! the same tape, so a gradient penalty can itself be differentiated.

mod adam;
mod network;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use network::{column_mean, Activation, BoundNetwork, DenseNetwork, Layer, LayerRecord, NetworkRecord, OutputRange};
pub use tape::{sigmoid, softplus, Gradients, Graph, Var};

/// One-sided penalty `mean(max(0, norm - 1)^2)` over a column of norms.
pub fn one_sided_penalty(g: &mut Graph, norms: Var) -> Var {
    let shifted = g.add_scalar(norms, -1.0);
    let excess = g.relu(shifted);
    let sq = g.square(excess);
    g.mean(sq)
}
