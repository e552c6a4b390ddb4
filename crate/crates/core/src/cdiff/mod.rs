//! Complex automatic differentiation.
//!
//! Reverse mode over a [`Tape`] with Wirtinger partials for parameter
//! gradients, and order-2 forward [`Jet2`] values for derivatives of network
//! outputs with respect to their complex input.

mod jet;
mod scalar;
mod tape;

pub use jet::{jet_forward, Jet2};
pub use scalar::{Field, Holo, C64, ONE, ZERO};
pub use tape::{Gradients, NodeKind, Primitive, Tape, TapeNode, Var};
