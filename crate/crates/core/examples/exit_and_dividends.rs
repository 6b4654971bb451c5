//! Upcrossing transform and expected discounted dividends as the upper level
//! moves, with the infinite-horizon limit for comparison.

use rrlevy::identities::IdentityContext;
use rrlevy::model::presets::m1;

fn main() -> rrlevy::Result<()> {
    let ctx = IdentityContext::new(m1())?;
    let (q, x) = (0.5, 0.5);
    println!("{:>5} {:>14} {:>14}", "a", "exit", "dividends");
    for a in [1.0, 2.0, 4.0, 8.0, 16.0] {
        println!("{a:>5.1} {:>14.10} {:>14.10}", ctx.one_sided_exit(q, x, a)?, ctx.dividends_npv(q, x, a)?);
    }
    match ctx.dividends_npv_inf(q, x)?.finite() {
        Some(v) => println!("a -> inf  dividends = {v:.10}"),
        None => println!("a -> inf  dividends diverge"),
    }
    Ok(())
}
