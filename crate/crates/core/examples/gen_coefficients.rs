//! Regenerates `data/coefficients.txt` from the analytic rotor surrogate.
//!
//! ```text
//! cargo run -p fowfsim --example gen_coefficients > crates/core/data/coefficients.txt
//! ```

fn main() {
    print!(
        "{}",
        fowfsim::aero::CoefficientTable::from_surrogate().to_text()
    );
}
