//! Monte Carlo evaluation, behavioral baselines and the synthetic world.

mod behavioral;
mod compare;
mod simulate;
mod world;

pub use behavioral::{estimate_behavioral, BehavioralPolicy};
pub use compare::{compare_obp, ComparisonRow, ComparisonTable};
pub use simulate::{
    simulate, simulate_all_counts, BatterStrategy, Dynamics, Profile, SimulationResult,
    SwingTable, BLOCK, PITCH_CAP,
};
pub use world::{
    base_velocity, generate_world, BatterTier, CohortSpec, PerTier, PitcherTier, Roster,
    RosterEntry, SyntheticBatter, SyntheticPitcher, SyntheticWorld, Tier, TierCounts,
    WILD_DISTANCE, WILD_EVERY, WILD_RATE,
};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::game::GameError;
use crate::solver::SolverError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("no records to estimate from")]
    EmptyTrainingSet,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incomplete policy: {0}")]
    IncompletePolicy(String),
    #[error("invalid cohort spec: {0}")]
    SpecError(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Child seed for a named sub-stream of `seed`.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}
