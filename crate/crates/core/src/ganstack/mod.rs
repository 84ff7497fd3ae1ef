//! Generator, critic/classifier, audited target model, their training
//! losses and loops, and the model file format.

pub mod bundle;
pub mod format;
pub mod losses;
pub mod mlp;
pub mod train;

pub use bundle::{
    argmax, AttributeVector, BundleSpec, Critic, GanMode, LossWeights, ModelBundle, TargetModel,
};
pub use mlp::{Head, Layer, Mlp};
pub use train::{sample_attribute_prior, train, train_target, EpochLosses, TargetTrainConfig, TrainConfig};
