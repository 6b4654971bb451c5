//! Joint transform of the upcrossing time and the time spent below the
//! refraction level, together with the resolvent density it integrates.

use rrlevy::identities::IdentityContext;
use rrlevy::model::presets::h2;

fn main() -> rrlevy::Result<()> {
    let ctx = IdentityContext::new(h2())?;
    let (q, x, a) = (0.4, 0.6, 2.5);
    println!("{:>5} {:>14} {:>14}", "p", "below", "above");
    for p in [0.0, 0.1, 0.5, 2.0] {
        println!("{p:>5.2} {:>14.10} {:>14.10}", ctx.occupation_below_lt(p, q, x, a)?, ctx.occupation_above_lt(p, q, x, a)?);
    }
    println!("p = 0 reduces to the exit transform {:.10}", ctx.one_sided_exit(q, x, a)?);
    for z in [0.25, 0.75, 1.5, 2.25] {
        println!("resolvent density at z = {z}: {:.10}", ctx.resolvent_density(q, x, a, z)?);
    }
    Ok(())
}
