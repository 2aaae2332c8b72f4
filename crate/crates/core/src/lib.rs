//! Linear latent-space decoding of voxel responses.
//!
//! The crate fits a linear map from bias-augmented latent vectors to voxel
//! activations, inverts it to predict latents from held-out responses, offers
//! a PCA eigen-image codec as a baseline latent space, and scores predictions
//! with pairwise decoding accuracy and correlation distance. A seeded
//! synthetic generator and brute-force oracles make every stage checkable
//! without real recordings.

pub mod dataio;
pub mod eigenimage;
pub mod error;
mod linalg;
pub mod linmap;
pub mod matrix;
pub mod metrics;
pub mod roi;
pub mod synth;

pub use dataio::{ImageGeometry, ImageSet, MatrixFormat};
pub use eigenimage::EigenImageModel;
pub use error::{Error, Result};
pub use linmap::{DecodeOptions, Decoded, EncoderMap, Warning};
pub use matrix::Matrix;
pub use metrics::PairwiseReport;
pub use roi::RoiMask;
pub use synth::{SynthConfig, SynthDataset};
