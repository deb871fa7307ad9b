//! Self-contained numerical learning primitives.
//!
//! Everything is 64-bit and hand-derived for the fixed MLP topology: dense
//! feed-forward networks with exact reverse-mode gradients, bias-corrected
//! Adam, Ornstein–Uhlenbeck exploration noise, tanh squashing into bounded
//! action boxes, and a central-finite-difference gradient verifier.

pub mod adam;
pub mod checkpoint;
pub mod codec;
pub mod net;
pub mod ou;
pub mod squash;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, NetworkSnapshot, Section};
pub use net::{finite_diff_check, DenseNet, ForwardCache, GradCheck, Gradients};
pub use ou::OuProcess;
pub use squash::{squash_action, squash_log_jacobian, unsquash_action, ActionBox};
