//! Recompute the calibrated scenario constants and the mega-sample targets.
//!
//! ```text
//! cargo run --release -p surprise-sampling --example derive_constants > crates/core/data/constants.toml
//! ```

use surprise::simulation::constants::{derive_all, to_toml};

fn main() {
    print!("{}", to_toml(&derive_all()));
}
