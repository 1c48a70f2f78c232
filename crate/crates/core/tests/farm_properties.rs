//! Properties of the fixed-induction episode score and the layout search.

use fowfsim::farm::{
    evaluate_candidate, optimize_layout, EpisodeSpec, Objective, SearchBounds, SearchOptions,
};
use fowfsim::scenario::{RunContext, ScenarioConfig};

fn config(turbines: usize, spacing: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::load("preset:scenario1").unwrap();
    cfg.layout.turbines = turbines;
    cfg.layout.spacing_diameters = spacing;
    cfg.run.duration = cfg.search.episode_duration;
    cfg
}

fn episode(ctx: &RunContext, cfg: &ScenarioConfig) -> EpisodeSpec {
    let mut e = EpisodeSpec::new(ctx.wind.clone(), Some(cfg.wind.seed));
    e.duration = cfg.search.episode_duration;
    e.induction = cfg.search.induction;
    e.window_fraction = cfg.search.window_fraction;
    e.overlap_weight = cfg.search.overlap_weight;
    e
}

#[test]
fn lone_turbine_score_falls_with_lateral_offset() {
    let cfg = config(1, 7.0);
    let ctx = RunContext::new(&cfg).unwrap();
    let spec = episode(&ctx, &cfg);
    for sign in [1.0, -1.0] {
        let evals: Vec<_> = [0.0, 20.0, 40.0, 60.0, 80.0]
            .iter()
            .map(|y| {
                evaluate_candidate(
                    &ctx.env,
                    &ctx.layout,
                    &[sign * y],
                    &spec,
                    Objective::MaximizeProjectedSpeed,
                )
                .unwrap()
            })
            .collect();
        for pair in evals.windows(2) {
            let (near, far) = (&pair[0], &pair[1]);
            assert!(far.is_feasible());
            assert!(
                far.score < near.score,
                "{:?} scores {} but {:?} scores {}",
                far.candidate,
                far.score,
                near.candidate,
                near.score
            );
            assert!(far.metrics[0].yaw.abs() > near.metrics[0].yaw.abs());
        }
    }
}

#[test]
fn without_wake_interaction_the_search_returns_to_the_row() {
    // At 40 diameters no wake reaches the next rotor, so yawing only costs.
    let cfg = config(3, 40.0);
    let ctx = RunContext::new(&cfg).unwrap();
    let spec = episode(&ctx, &cfg);
    let bounds = SearchBounds::symmetric(3, 100.0);
    let result = optimize_layout(
        &ctx.env,
        &ctx.layout,
        &[32.0, -32.0, 32.0],
        &bounds,
        Objective::MaximizeProjectedSpeed,
        &spec,
        SearchOptions::default(),
    )
    .unwrap();
    for y in &result.best.candidate {
        assert!(y.abs() <= 4.0, "targets {:?}", result.best.candidate);
    }
}

#[test]
fn search_is_deterministic() {
    let cfg = config(3, 7.0);
    let ctx = RunContext::new(&cfg).unwrap();
    let spec = episode(&ctx, &cfg);
    let bounds = SearchBounds::symmetric(3, 100.0);
    let options = SearchOptions {
        initial_mesh: 32.0,
        min_mesh: 8.0,
        budget: 60,
    };
    let run = || {
        optimize_layout(
            &ctx.env,
            &ctx.layout,
            &[0.0; 3],
            &bounds,
            Objective::MaximizeProjectedSpeed,
            &spec,
            options,
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.best.candidate, b.best.candidate);
    assert_eq!(a.best.score.to_bits(), b.best.score.to_bits());
    let scores = |r: &fowfsim::farm::SearchResult| -> Vec<(Vec<f64>, u64)> {
        r.trace
            .iter()
            .map(|t| (t.candidate.clone(), t.score.to_bits()))
            .collect()
    };
    assert_eq!(scores(&a), scores(&b));
}
