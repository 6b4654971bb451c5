//! Exact event-driven simulation of the refracted-reflected process, compared
//! with the closed-form values, plus a short path trace.

use rrlevy::identities::IdentityContext;
use rrlevy::model::presets::m1;
use rrlevy::simulator::{run_ensemble, trace_csv, trace_paths, SimConfig};

fn main() -> rrlevy::Result<()> {
    let model = m1();
    let ctx = IdentityContext::new(model.clone())?;
    let (x, a, q) = (1.0, 2.0, 0.5);
    let cfg = SimConfig::exact(x, a, q, 50_000, 7);
    let set = run_ensemble(&model, &cfg)?;
    let exact = [
        ("exit_lt", ctx.one_sided_exit(q, x, a)?),
        ("dividends", ctx.dividends_npv(q, x, a)?),
        ("capital_injection", ctx.capital_injection_npv(q, x, a)?),
    ];
    for (name, value) in exact {
        let e = set.get(name);
        println!("{name:>18}: {:.5} +/- {:.5}  formula {value:.5}", e.mean, e.stderr);
    }
    print!("{}", trace_csv(&trace_paths(&model, &cfg, 1)?));
    Ok(())
}
