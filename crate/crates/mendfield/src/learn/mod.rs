//! Training, inference, and restoration extraction for the joint-field
//! autodecoder: [`loss`] defines the objective, [`train`] fits networks and
//! latent codes to a dataset of labeled probe sets, and [`infer`] recovers
//! codes for an unseen fractured shape and extracts its restoration mesh.

pub mod infer;
pub mod loss;
pub mod train;

pub use infer::{
    extract_restoration, extract_restoration_from, infer_codes, repair, InferConfig,
    InferenceResult, DEFAULT_EXTRACT_RESOLUTION,
};
pub use loss::{loss_cb, loss_f, loss_r, loss_reg, LossWeights};
pub use train::{train, EpochRecord, Model, TrainConfig, TrainOutcome, DEFAULT_LR_CODES, DEFAULT_LR_NET};
