//! Multi-objective design space exploration for HLS directive tuning.
//!
//! The crate covers the whole flow: kernel description and directive
//! encoding ([`design`]), design-space construction and pruning ([`space`]),
//! initial sampling ([`sampling`]), Pareto machinery and ADRS ([`pareto`]),
//! QoR backends ([`qor`]), the adaptive evolutionary loop and an NSGA-II
//! baseline ([`search`]), and the advisor contract ([`advisor`]).

pub mod advisor;
pub mod cli;
pub mod design;
pub mod fixtures;
pub mod pareto;
pub mod qor;
pub mod sampling;
pub mod search;
pub mod space;

pub use design::{
    config_hash, emit_tcl, encode_feature_vector, ArrayDirective, DirectiveConfig, HlsDesign, LoopDirective,
    PartitionType, ProjectSettings,
};
pub use pareto::{adrs, Objectives, UtilWeights};
pub use qor::{QoR, QorBackend};
pub use space::{DesignSpace, PruneRuleSet};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
