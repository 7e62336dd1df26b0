//! Supervised-copy training and sMCL ensembling.

mod assignments;
mod ensemble;
mod instance;
mod loss;
mod optim;

pub use assignments::{purity, read_assignments, summarize_assignments, write_assignments, AssignmentSummary};
pub use ensemble::{
    ensemble_mixture_loglik, member_perplexities, mixture_loglik, select_inference_model,
    smcl_assign, smcl_train_epoch, Assignment, Ensemble, EnsembleConfig, EpochOptions, EpochStats,
    Precision,
};
pub use instance::{instances, make_copy_labels, CopySupervision, Instance};
pub use loss::{argmax, next_token_accuracy, nll_loss, sequence_nll};
pub use optim::{adam_step, grad_norm, OptimizerConfig};
