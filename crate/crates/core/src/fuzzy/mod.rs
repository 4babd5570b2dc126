//! Fuzzy-attention decoder: FFT token features, Modified-Laplace rule
//! firing with log-softmax aggregation, a two-layer MLP head, and AdamW
//! training with hand-written gradients.

mod checkpoint;
mod features;
mod gradcheck;
mod model;
mod train;

pub use checkpoint::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC};
pub use features::{fft_features, FeatureConfig, FeatureMatrix};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, COORDS_PER_GROUP};
pub use model::{firing_strengths, membership, FuzzyModel, ModelDims, ParamGroup, Prediction};
pub use train::{input_scale_for, train, TrainConfig, TrainOutcome};
