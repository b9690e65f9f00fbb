//! Fixtures shared by the benchmarks under `benches/`.

use prgd_core::baselines::Scenario;
use prgd_core::seed::rng_from;
use prgd_core::{IteratePoint, SceneGeometry, SecrecyProblem, SystemConfig};

/// A secrecy problem on one seeded channel realization plus a random start.
pub fn fixture(cfg: &SystemConfig, seed: u64) -> (SecrecyProblem, IteratePoint) {
    let scn = Scenario::generate(cfg, &SceneGeometry::default(), seed).expect("default geometry is valid");
    let problem = SecrecyProblem::new(scn.channels, cfg).expect("generated channels match the config");
    let init = IteratePoint::random(cfg.point_shape(), &mut rng_from(seed ^ 0x5eed));
    (problem, init)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_feasible() {
        let (problem, init) = fixture(&SystemConfig::desk(), 1);
        assert!(init.constraint_residual() < 1e-12);
        assert!(problem.objective(&init).unwrap().is_finite());
    }
}
