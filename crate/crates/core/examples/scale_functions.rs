//! Tabulates the scale functions of the refracted process and compares the
//! closed-form and Talbot backends.

use rrlevy::model::presets::m1;
use rrlevy::scale::{ScaleEvaluator, ScaleOptions};
use rrlevy::Target;

fn main() -> rrlevy::Result<()> {
    let model = m1();
    let q = 0.5;
    let ev = ScaleEvaluator::build(&model, q, Target::Y)?;
    let talbot = ScaleEvaluator::build_with(&model, q, Target::Y, ScaleOptions { force_inversion: true, ..Default::default() })?;
    println!("Phi = {:.12}  backend = {}", ev.right_inverse(), ev.backend().label());
    println!("{:>5} {:>16} {:>16} {:>16} {:>10}", "x", "W", "Z", "Zbar", "talbot");
    for i in 0..=8 {
        let x = 0.5 * i as f64;
        let rel = (ev.w(x) - talbot.w(x)).abs() / ev.w(x).abs().max(1e-12);
        println!("{x:>5.2} {:>16.10} {:>16.10} {:>16.10} {rel:>10.2e}", ev.w(x), ev.z(x), ev.z_bar(x));
    }
    Ok(())
}
