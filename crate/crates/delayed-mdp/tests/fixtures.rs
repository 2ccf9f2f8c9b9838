//! Fixture invariants and their frozen reference values.

use delayed_mdp::delay::{augment, augment_mtd, DelaySpec};
use delayed_mdp::fixtures::{
    belief_counterexample, maze_3x3, mtd_counterexample, random_mdp, tlc_random, MazeConfig,
};
use delayed_mdp::mdp::graph::is_communicating;
use delayed_mdp::mdp::io::{read_mdp, write_mdp};
use delayed_mdp::mdp::optimal_gain;
use delayed_mdp::util::trial_rng;

#[test]
fn mixed_delay_beats_the_shorter_mean_delay() {
    for eps in [0.0, 0.1, 0.25, 0.4] {
        let fx = mtd_counterexample(eps).unwrap();
        let mixed = augment_mtd(&fx.mdp, &fx.mixed).unwrap();
        let one = augment_mtd(&fx.mdp, &fx.one_step).unwrap();
        let (g_mixed, _) = optimal_gain(&mixed.mdp, 1e-12).unwrap();
        let (g_one, _) = optimal_gain(&one.mdp, 1e-12).unwrap();
        assert!(
            (g_mixed - fx.expected_mixed).abs() < 1e-9,
            "eps {eps}: {g_mixed}"
        );
        assert!(
            (g_one - fx.expected_one_step).abs() < 1e-9,
            "eps {eps}: {g_one}"
        );
    }
    assert!((mtd_counterexample(0.1).unwrap().expected_mixed - 0.55).abs() < 1e-15);
}

#[test]
fn belief_fixture_terminals_are_absorbing() {
    let fx = belief_counterexample();
    assert_eq!(
        (fx.mdp.n_states(), fx.mdp.n_actions(), fx.delay),
        (18, 2, 2)
    );
    assert_eq!((fx.expected_augmented, fx.expected_belief), (13.75, 12.5));
    for s in 10..18 {
        for a in 0..2 {
            assert_eq!(fx.mdp.p(s, a)[s], 1.0);
        }
    }
}

#[test]
fn generated_fixtures_are_communicating() {
    for seed in 0..20 {
        let mut rng = trial_rng(501, seed);
        assert!(is_communicating(&random_mdp(5, 3, 0.5, &mut rng).unwrap()));
        assert!(is_communicating(&tlc_random(5, 2, 0.5, &mut rng).unwrap()));
    }
    assert!(is_communicating(&maze_3x3(&MazeConfig::default()).unwrap()));
}

#[test]
fn text_format_round_trips_fixtures_and_augmentations() {
    let fx = belief_counterexample();
    let maze = maze_3x3(&MazeConfig::default()).unwrap();
    let aug = augment(
        &maze,
        &DelaySpec::MtdIsm {
            lambda: vec![0.5, 0.5],
        },
    )
    .unwrap();
    for (mdp, note) in [
        (&fx.mdp, None),
        (&maze, Some("maze")),
        (&aug.mdp, Some("ism maze")),
    ] {
        let text = write_mdp(mdp, note);
        let parsed = read_mdp(&text).unwrap();
        assert_eq!(&parsed.mdp, mdp);
        assert_eq!(write_mdp(&parsed.mdp, note), text);
    }
}
