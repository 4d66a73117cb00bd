//! Shows how per-primitive confidence trades photometric error against the
//! log penalty and how it raises the densification threshold.

use confsplat::loss::{confidence_loss, confidence_pixel_gradient};
use confsplat::train::effective_threshold;

fn main() -> confsplat::Result<()> {
    let beta: f64 = 0.075;
    println!("pixel error   optimal confidence   loss at optimum");
    for err in [0.01, 0.05, 0.1, 0.3] {
        // d/dC (err*C - beta ln C) = 0  =>  C = beta / err
        let c = (beta / err).clamp(0.001, 5.0);
        let loss = confidence_loss(&[err], &[c], beta)?;
        println!("{err:>11.2} {c:>20.3} {loss:>17.4}   (gradient {:.1e})", confidence_pixel_gradient(err, c, beta));
    }
    println!();
    println!("confidence   densify threshold");
    for g in [0.1, 0.5, 1.0, 3.0] {
        println!("{g:>10.1} {:>19.1e}", effective_threshold(2e-4, g));
    }
    Ok(())
}
