//! Black-box adversarial attacks on triangle-mesh classifiers.
//!
//! The victim classifier is only ever queried for prediction vectors. An
//! imitating network (per-vertex lift, gated recurrent aggregation along a
//! random walk, linear read-out) is distilled from those vectors with a KL
//! divergence loss, and its input gradients then drive small displacements
//! of the vertices visited by successive random walks until the imitator
//! stops predicting the source class.
//!
//! Module map:
//! - [`mesh`]: mesh type, adjacency, OFF/OBJ/PLY I/O, unit-sphere normalization
//! - [`synth`]: procedural primitives and the labeled desk-scale dataset
//! - [`walk`]: random walks over mesh edges
//! - [`nn`]: the walk network with hand-written reverse mode and checkpoints
//! - [`classifiers`]: victims, distillation, agreement
//! - [`attack`]: the walk-driven attack, targeted variant and random baseline
//! - [`eval`]: accuracy, L2 distortion, heat maps, cross-attack matrix

pub mod attack;
pub mod classifiers;
pub mod error;
pub mod eval;
mod fsutil;
pub mod mesh;
pub mod nn;
pub mod seed;
pub mod synth;
pub mod walk;

pub use error::{Error, Result};
pub use fsutil::{write_atomic, write_string_atomic};
