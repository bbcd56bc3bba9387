//! Hybrid quantum-classical convolutional networks on a dense statevector
//! simulator.
//!
//! * [`sim`], [`circuit`], [`oracle`]: few-qubit simulation and a dense
//!   Kronecker-product reference.
//! * [`gradients`]: parameter-shift gradients with a finite-difference check.
//! * [`quanv`]: the quanvolutional layer (2×2 window, angle encoding, 4-qubit
//!   filter, Z readout).
//! * [`nn`]: dense/conv/ReLU/softmax layers and SGD/Adam.
//! * [`mera`]: reversed-MERA quantum CNN with controlled or
//!   measurement-conditioned pooling.
//! * [`mnist`]: IDX loading, 28×28 → 10×10 box downscaling, epoch sampling.
//! * [`model`], [`train`], [`harness`]: the three comparison models, the
//!   training loop, and the CLI plumbing (config, checkpoints, CSV).

pub mod circuit;
pub mod error;
pub mod gradients;
pub mod harness;
pub mod mera;
pub mod mnist;
pub mod model;
pub mod nn;
pub mod oracle;
pub mod quanv;
pub mod rng;
pub mod sim;
pub mod train;

pub use circuit::{run_circuit, Angle, Circuit, GateOp, Observable, Param, ParameterVector};
pub use error::{Error, Result};
pub use gradients::{finite_difference_oracle, parameter_shift_grad};
pub use oracle::dense_unitary_oracle;
pub use sim::{GateKind, StateVector, C64};
