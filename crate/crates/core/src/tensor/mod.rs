//! Dense arrays and reverse-mode differentiation.
//!
//! A [`Graph`] is built fresh for every forward pass. Operations on it
//! return [`Var`] handles carrying the forward value; when gradients are
//! enabled each op also appends a record holding whatever its backward rule
//! needs. [`Graph::backward`] walks those records in reverse construction
//! order and returns a [`Gradients`] map keyed by leaf.

mod array;
mod graph;
mod kernels;
mod rng;

pub use array::Tensor;
pub use graph::{Gradients, Graph, NodeId, Var};
pub use kernels::{broadcast_shapes, gemm};
pub use rng::RngState;
