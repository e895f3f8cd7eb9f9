//! Transition kernel of the particle system: which unit loses its share,
//! how selection tilts the urn, and where the vacant share goes.

mod conditional;
mod migration;
mod removal;
mod selection;

pub use conditional::{
    branch_probabilities, branch_terms, effective_pi, normalizer, sample_full_conditional,
    BranchOutcome, BranchProbabilities, BranchTerms,
};
pub use migration::MigrationKernel;
pub use removal::{removal_weights, select_target, RemovalPolicy};
pub use selection::{CustomSelection, Sigma, SelectionSpec, WeightFn, MAX_REJECTION_ATTEMPTS};
