use proptest::prelude::*;
use seglab::almgren::ReactionSpec;
use seglab::grid::Grid2D;
use seglab::solver::{planar_traces, solve_gp, solve_lv, CompetitionParams, Init, SolveOptions};

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

    // with λ = ω = 0 each component is subharmonic, so it stays below its trace
    #[test]
    fn gp_states_obey_the_maximum_principle(beta in 1.0_f64..1000.0, amplitude in 0.5_f64..5.0) {
        let g = Grid2D::unit_square(24).unwrap();
        let bc = planar_traces(&g, amplitude).unwrap();
        let p = CompetitionParams::uniform(2, 0.0, 0.0, beta);
        let (u, rep) = solve_gp(&p, &bc, g, &Init::Harmonic, &SolveOptions::default()).unwrap();
        prop_assert!(rep.residual <= 1e-8);
        for c in u.components() {
            prop_assert!(c.min() >= 0.0);
            prop_assert!(c.max() <= amplitude * (1.0 + 1e-9), "{} > {}", c.max(), amplitude);
        }
    }

    #[test]
    fn lv_overlap_shrinks_with_beta(beta in 10.0_f64..100.0) {
        let g = Grid2D::unit_square(24).unwrap();
        let bc = planar_traces(&g, 1.0).unwrap();
        let f = ReactionSpec::zero(2);
        let opts = SolveOptions::default();
        let (_, low) = solve_lv(&f, beta, &bc, g, &Init::Harmonic, &opts).unwrap();
        let (_, high) = solve_lv(&f, 10.0 * beta, &bc, g, &Init::Harmonic, &opts).unwrap();
        prop_assert!(high.interaction < low.interaction);
    }
}
