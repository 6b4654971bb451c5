//! Runs the analytic and degeneracy suites and prints the summary table.

use rrlevy::model::presets::m1;
use rrlevy::verifier::{all_pass, run_suite, summary_table, Suite};

fn main() -> rrlevy::Result<()> {
    let model = m1();
    for suite in [Suite::Analytic, Suite::Degeneracy] {
        let reports = run_suite(&model, suite, 1)?;
        println!("{suite}: {}", if all_pass(&reports) { "pass" } else { "fail" });
        print!("{}", summary_table(&reports));
    }
    Ok(())
}
