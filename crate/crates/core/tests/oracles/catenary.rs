//! Catenary tension against an independent shooting solver that integrates
//! the hanging-line equations from the touchdown point up to the fairlead.

use fowfsim::mooring::{horizontal_tension, MooringLineSpec, GRAVITY};
use fowfsim::params::PhysicalParams;

pub fn line() -> MooringLineSpec {
    PhysicalParams::default().mooring.lines()[0]
}

/// Horizontal span of the suspended part for horizontal tension `h_t`,
/// and its arc length. Integrates `dx/ds = cos φ`, `dz/ds = sin φ`,
/// `dφ/ds = w cos²φ / H` with RK4 from the flat touchdown point until the
/// line reaches the fairlead height.
fn shoot(line: &MooringLineSpec, h_t: f64) -> (f64, f64) {
    let w = line.mass_per_length * GRAVITY;
    let height = line.water_depth - line.fairlead_draft;
    let f = |phi: f64| {
        let c = phi.cos();
        [c, phi.sin(), w * c * c / h_t]
    };
    let ds = (h_t / w / 200.0).min(0.25);
    let (mut x, mut z, mut phi, mut s) = (0.0, 0.0, 0.0, 0.0);
    loop {
        let k1 = f(phi);
        let k2 = f(phi + 0.5 * ds * k1[2]);
        let k3 = f(phi + 0.5 * ds * k2[2]);
        let k4 = f(phi + ds * k3[2]);
        let step = |i: usize| ds / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        let (nx, nz, nphi) = (x + step(0), z + step(1), phi + step(2));
        if nz >= height {
            // Linear interpolation to the crossing within the last step.
            let frac = (height - z) / (nz - z);
            return (x + frac * (nx - x), s + frac * ds);
        }
        x = nx;
        z = nz;
        phi = nphi;
        s += ds;
    }
}

/// Total anchor-to-fairlead span for horizontal tension `h_t`.
fn shooting_span(line: &MooringLineSpec, h_t: f64) -> f64 {
    let (x, s) = shoot(line, h_t);
    x + (line.unstretched_length - s)
}

/// Horizontal tension for `span` by bisection on the shooting span.
pub fn shooting_tension(line: &MooringLineSpec, span: f64) -> f64 {
    let (mut lo, mut hi) = (1.0, line.taut_tension());
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if shooting_span(line, mid) < span {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest relative gap between the closed-form and shooting tensions over
/// 24 spans strictly between slack and taut.
pub fn worst_relative_error() -> f64 {
    let l = line();
    let (slack, taut) = (l.slack_span(), l.taut_span());
    (1..=24)
        .map(|k| {
            let span = slack + (taut - slack) * k as f64 / 25.0;
            let closed = horizontal_tension(&l, span).unwrap();
            let shot = shooting_tension(&l, span);
            (closed - shot).abs() / shot
        })
        .fold(0.0, f64::max)
}
