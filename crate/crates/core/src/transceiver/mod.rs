//! The four evaluated transmission schemes and the MLC rate-allocation design.

mod chain;
mod config;
mod design;

pub use chain::{Decoded, Encoded, Interleaver, Transceiver, Workspace};
pub use config::{SchemeDesign, SchemeKind};
pub use design::{
    bracket_search, design_rate_allocation, level_bler, per_level_budget, trim_to_total,
    Allocation, AllocationOptions, CandidateResult, DesignTargets, LevelSearch,
};
