//! Equilibrium versus behavioral OBP from every starting count, both played
//! in the same world.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::game::{build_kernel, Count, MatchupModels};
use crate::solver::{batter_best_response, EquilibriumSolution};

use super::behavioral::BehavioralPolicy;
use super::simulate::{simulate_all_counts, BatterStrategy, Dynamics, Profile};
use super::{derive_seed, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub count: Count,
    /// Solver value at this count.
    pub sg_value: f64,
    pub sg_obp: f64,
    pub sg_se: f64,
    pub behavioral_obp: f64,
    pub behavioral_se: f64,
    /// behavioral − sg.
    pub reduction: f64,
    /// Exact value of a best-responding batter against the behavioral pitcher.
    pub best_response_obp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub n: usize,
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<6}{:>9}{:>9}{:>8}{:>11}{:>8}{:>11}{:>9}",
            "count", "sg_value", "sg_obp", "se", "behavioral", "se", "reduction", "br_obp"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<6}{:>9.4}{:>9.4}{:>8.4}{:>11.4}{:>8.4}{:>11.4}{:>9.4}",
                r.count.to_string(),
                r.sg_value,
                r.sg_obp,
                r.sg_se,
                r.behavioral_obp,
                r.behavioral_se,
                r.reduction,
                r.best_response_obp
            );
        }
        s
    }
}

pub fn compare_obp(
    models: &MatchupModels,
    solved: &EquilibriumSolution,
    behavioral: &BehavioralPolicy,
    n: usize,
    seed: u64,
) -> Result<ComparisonTable, SimError> {
    let actions = models.actions();
    let sg = Profile::from_solution(solved, &actions);
    let mixes = behavioral.pitcher_mixes(&actions)?;
    let base = Profile {
        actions: actions.clone(),
        pitcher: mixes.clone(),
        batter: BatterStrategy::Reactive(behavioral.swing_table()),
    };
    let world = Dynamics::World(models);
    let sg_runs = simulate_all_counts(world, &sg, n, derive_seed(seed, "sg"))?;
    let base_runs = simulate_all_counts(world, &base, n, derive_seed(seed, "behavioral"))?;
    let kernel = build_kernel(models)?;
    let br = batter_best_response(&kernel, &mixes);
    let rows = Count::all()
        .zip(sg_runs.iter().zip(&base_runs))
        .map(|(count, (s, b))| ComparisonRow {
            count,
            sg_value: solved.value(count),
            sg_obp: s.obp,
            sg_se: s.standard_error,
            behavioral_obp: b.obp,
            behavioral_se: b.standard_error,
            reduction: b.obp - s.obp,
            best_response_obp: br[count.index()],
        })
        .collect();
    Ok(ComparisonTable { n, seed, rows })
}
