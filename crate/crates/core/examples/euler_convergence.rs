//! Coupled Euler levels for a model with a Gaussian part. Successive levels
//! share Brownian increments and jump epochs, so their differences are sharp.

use rrlevy::identities::IdentityContext;
use rrlevy::model::presets::m1_diffusive;
use rrlevy::simulator::{run_coupled_euler, SimConfig};

fn main() -> rrlevy::Result<()> {
    let model = m1_diffusive();
    let (x, a, q) = (1.0, 2.0, 0.5);
    let exact = IdentityContext::new(model.clone())?.one_sided_exit(q, x, a)?;
    let steps = [4e-2, 1e-2, 2.5e-3];
    let run = run_coupled_euler(&model, &SimConfig::euler(x, a, q, steps[2], 10_000, 3), &steps)?;
    for (h, level) in steps.iter().zip(&run.levels) {
        let e = level.get("exit_lt");
        println!("h = {h:<8} exit {:.5} +/- {:.5}  bias {:+.5}", e.mean, e.stderr, e.mean - exact);
    }
    for d in &run.exit_lt_differences {
        println!("level difference {:+.5} +/- {:.5}", d.mean, d.stderr);
    }
    Ok(())
}
