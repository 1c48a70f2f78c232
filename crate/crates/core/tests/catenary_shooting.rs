//! Catenary tension against a shooting solver on the hanging-line equations.

mod oracles;

use fowfsim::frame::Vector2;
use fowfsim::mooring::{horizontal_tension, MooringSystem};
use fowfsim::params::PhysicalParams;
use fowfsim::plant::PlantEnv;

use oracles::catenary::{line, shooting_tension};

#[test]
fn tension_matches_shooting_over_feasible_range() {
    let l = line();
    let (slack, taut) = (l.slack_span(), l.taut_span());
    let mut worst: f64 = 0.0;
    for k in 1..=24 {
        let span = slack + (taut - slack) * k as f64 / 25.0;
        let closed = horizontal_tension(&l, span).unwrap();
        let shot = shooting_tension(&l, span);
        let rel = (closed - shot).abs() / shot;
        worst = worst.max(rel);
        assert!(
            rel < 0.005,
            "span {span:.2}: {closed:.1} N vs shooting {shot:.1} N"
        );
    }
    println!("worst relative tension error {worst:.2e}");
}

#[test]
fn restoring_force_is_odd_about_neutral() {
    let env = PlantEnv::new(PhysicalParams::default()).unwrap();
    let system: &MooringSystem = &env.mooring;
    for offset in [5.0, 20.0, 60.0, 100.0] {
        let plus = system.net_force(Vector2::new(0.0, offset)).unwrap();
        let minus = system.net_force(Vector2::new(0.0, -offset)).unwrap();
        assert!(plus.y < 0.0, "sway +{offset} m must be pulled back");
        assert!(
            (plus.y + minus.y).abs() <= 1e-3 * plus.y.abs(),
            "{plus:?} vs {minus:?}"
        );
        assert!((plus.x - minus.x).abs() <= 1e-3 * plus.y.abs());
    }
}
