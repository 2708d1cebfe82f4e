//! Multi-group one-inclusion graph learning on finite domains.
//!
//! Concepts are bitvectors over an explicit point set. The learner builds the
//! one-inclusion graph of the group-realizable concepts on the sample plus the
//! test point, orients it with a multi-group matching, and reads off a
//! prediction. Everything on the solver path is exact rational arithmetic.

pub mod agnostic;
pub mod concept;
pub mod density;
pub mod error;
pub mod evaluation;
mod flow;
pub mod matching;
pub mod oig;
pub mod learner;
pub mod rational;

pub use concept::{
    enumerate_group_realizable, is_group_realizable_target, project_class, vc_dimension,
    vc_restricted, Behavior, ConceptClass, Domain, GroupFamily, LabeledSample, SetDescriptor,
};
pub use density::{max_subgraph_density, verify_haussler, DensityReport};
pub use error::{Error, Result};
pub use matching::{
    brute_force_optimum, build_network, build_network_explicit, find_valid_augmenting_matching,
    solve_matching, trivial_dual, verify_optimality, CapacityMode, DualCertificate,
    GroupFlowState, Matching, MgNetwork,
};
pub use oig::{build_oig, g_relevant_edges, Oig};
pub use rational::Rational;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
