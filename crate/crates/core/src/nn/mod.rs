//! Residual 1-D convolutional network mapping a homodyne record to a
//! Cholesky factor, hence to a physical density matrix.

mod arch;
mod head;
mod layers;
mod model;
mod train;

pub use arch::{Architecture, BlockSpec, InputEncoding, LayerKind};
pub use head::{
    density_from_cholesky, loss_frobenius, CholeskyFactor, DIAGONAL_FLOOR, HEAD_CLAMP,
    IDENTITY_BIAS,
};
pub use model::{NetworkModel, Prediction};
pub use train::{
    evaluate, train, train_with, EpochRecord, Evaluation, SampleInput, TrainOptions, TrainOutcome,
    TrainingSample, TrainingSet,
};
