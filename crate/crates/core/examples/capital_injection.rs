//! Expected discounted capital injections needed to keep the refracted
//! process above zero, for several refraction rates.

use rrlevy::identities::IdentityContext;
use rrlevy::model::presets::m1;

fn main() -> rrlevy::Result<()> {
    let (q, x, a) = (0.5, 0.5, 3.0);
    println!("{:>6} {:>14} {:>14}", "delta", "finite a", "a = inf");
    for delta in [0.0, 0.1, 0.2, 0.4] {
        let ctx = IdentityContext::new(m1().with_delta(delta))?;
        println!("{delta:>6.2} {:>14.10} {:>14.10}", ctx.capital_injection_npv(q, x, a)?, ctx.capital_injection_npv_inf(q, x)?);
    }
    Ok(())
}
