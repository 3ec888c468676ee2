//! Transition-matrix training: objective, gradient, optimizer and loop.

mod matrix;
mod objective;
mod rmsprop;
mod train;

pub use matrix::{
    refine_vector, transform_batch, xavier_bound, xavier_init, MatrixMeta, NormalizationMode,
    TransitionMatrix,
};
pub use objective::{
    build_similarity_matrix, coherence_conditions_report, compute_loss, loss_gradient,
    CoherenceReport, LossBreakdown, SimilarityMatrix,
};
pub use rmsprop::{rmsprop_step, RmsProp, RmsPropParams};
pub use train::{
    prepare_sets, train, EpochRecord, TrainOutcome, TrainerConfig, TrainingLog, DEFAULT_BATCH_SIZE,
    DEFAULT_OUTER_EPOCHS, GLOVE_LAMBDA, WORD2VEC_LAMBDA,
};
