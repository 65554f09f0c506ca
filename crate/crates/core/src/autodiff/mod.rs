//! Reverse-mode automatic differentiation over small dense tensors.
//!
//! A [`Graph`] is an append-only tape: every node is created after its
//! inputs, so a single reverse sweep over the node list visits nodes in
//! reverse topological order. Leaves are either free values ([`Graph::make`])
//! or views of parameters held in a [`ParamStore`] ([`Graph::param`]).
//!
//! Min and max reductions are hard selections: the gradient is routed to the
//! first selected input only.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::grad_check;
pub use graph::{softmax, GradientMap, Graph, NodeId, OpKind};
pub use params::{accumulate, Param, ParamGrads, ParamId, ParamStore};
pub use tensor::{gaussian_kernel, squared_distance, Tensor};
