//! Inner approximations of equilibrium payoff regions by sweeping objective
//! directions in payoff space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::correlation::CompactGame;
use crate::equilibrium::{solve_equilibrium_with, Concept, EquilibriumError, Objective};
use crate::exec::Execution;
use crate::lp::SolveOptions;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RegionPoint {
    pub dx: f64,
    pub dy: f64,
    pub u1: f64,
    pub u2: f64,
    /// Optimal `dx·u1 + dy·u2`.
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PayoffRegionSample {
    pub concept: Concept,
    pub points: Vec<RegionPoint>,
}

/// `k` unit vectors at evenly spaced angles, rotated by a seeded offset.
pub fn directions(k: usize, seed: u64) -> Vec<(f64, f64)> {
    let step = std::f64::consts::TAU / k.max(1) as f64;
    let offset = ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..step);
    (0..k)
        .map(|j| {
            let a = offset + step * j as f64;
            (a.cos(), a.sin())
        })
        .collect()
}

pub fn sample_payoff_region(
    space: &CompactGame,
    concept: Concept,
    dirs: &[(f64, f64)],
    options: &SolveOptions,
    exec: Execution,
) -> Result<PayoffRegionSample, EquilibriumError> {
    let points = exec
        .map(dirs, |&(dx, dy)| {
            let sol = solve_equilibrium_with(
                space,
                concept,
                &Objective::Direction { dx, dy },
                None,
                options,
                Execution::Sequential,
            )?;
            Ok(RegionPoint {
                dx,
                dy,
                u1: sol.utilities[0],
                u2: sol.utilities[1],
                value: sol.objective,
            })
        })
        .into_iter()
        .collect::<Result<_, EquilibriumError>>()?;
    Ok(PayoffRegionSample { concept, points })
}

impl PayoffRegionSample {
    pub const CSV_HEADER: &'static str = "concept,dx,dy,u1,u2";

    pub fn csv_rows(&self) -> Vec<String> {
        self.points
            .iter()
            .map(|p| format!("{},{:.9},{:.9},{:.9},{:.9}", self.concept, p.dx, p.dy, p.u1, p.u2))
            .collect()
    }

    /// Whether every point of `self` lies in the outer approximation of
    /// `outer` (the intersection of its supporting half-planes), up to `margin`.
    pub fn nested_in(&self, outer: &PayoffRegionSample, margin: f64) -> bool {
        self.points.iter().all(|p| {
            outer
                .points
                .iter()
                .all(|h| h.dx * p.u1 + h.dy * p.u2 <= h.value + margin)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_unit_and_seeded() {
        let a = directions(8, 3);
        assert_eq!(a, directions(8, 3));
        assert_ne!(a, directions(8, 4));
        for (x, y) in a {
            assert!(((x * x + y * y) - 1.0).abs() < 1e-12);
        }
    }
}
