//! Finite-difference check of every analytic gradient on a few random scenes.
//!
//! ```text
//! cargo run --release --example gradcheck -- [scenes] [seed]
//! ```

use confsplat::backward::gradcheck::{run_gradcheck, GradcheckConfig};

fn main() -> confsplat::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenes = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let report = run_gradcheck(&GradcheckConfig {
        scenes,
        seed,
        ..Default::default()
    })?;
    print!("{}", report.table());
    println!("{}", if report.passed() { "all gradients match" } else { "mismatches found" });
    Ok(())
}
