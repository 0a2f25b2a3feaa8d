//! Numerical core for projection-based activations: exact second-order-cone
//! projection and its grouped multivariate activation, a verified catalog of
//! scalar proximal operators, projected/proximal gradient descent whose
//! iterations are exactly reproduced by single dense layers, and a minimal
//! trainable feedforward network around them.

pub mod coneproj;
pub mod numerics;
pub mod pgdsolver;
pub mod proxcat;
pub mod tinynet;

pub use coneproj::{
    antisym_diff, decompose, macs_count, mpu_backward, mpu_forward, oracle_project, project_box,
    project_cone, project_orthant, ConeError, ConeSpec, MacsReport, ProjectionOutcome, Region,
};
pub use numerics::{random_spd, spectral_norm, Mat64, Rng, SpectralNorm, Vec64};
pub use pgdsolver::{
    brute_force_qp, certify_contraction, default_step, equivalence_report, fnn_from_qp, pgd_solve,
    prox_grad_solve, rnn_unroll, FeasibleSet, PgdConfig, ProblemSpec, QpProblem, SetSpec,
    SolveError, Trajectory,
};
pub use proxcat::{
    catalog, leaky_of, moreau_envelope, prox_oracle, verify_leaky_theorem, Potential, ProxEntry,
    ProxError,
};
pub use tinynet::{
    load_checkpoint, mse_loss, save_checkpoint, train, ActivationSpec, CheckpointError, Dataset,
    EpochRecord, Gradients, Layer, NetError, Network, SplitData, TrainConfig,
};
