//! The autodecoder networks: fixed-architecture MLPs over (latent code,
//! point) inputs with occupancy/SDF/normal heads, hand-derived reverse-mode
//! gradients, an Adam optimizer, and versioned checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod net;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, RngSnapshot};
pub use net::{Architecture, FeatureMask, Forward, HeadGrads, Network};
