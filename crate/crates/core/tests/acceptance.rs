//! Full-tier acceptance run: one line per criterion, non-zero exit on failure.
//! `OCCUPATH_ACCEPTANCE_TIER=quick` selects the reduced tier.

use occupath::harness::{acceptance_suite_with, Tier};

fn main() {
    let tier = match std::env::var("OCCUPATH_ACCEPTANCE_TIER").as_deref() {
        Ok("quick") => Tier::Quick,
        _ => Tier::Full,
    };
    println!("acceptance suite, {tier:?} tier");
    let report = acceptance_suite_with(tier, |o| {
        println!("{}", o.line());
        if !o.z.is_empty() {
            let z: Vec<String> = o.z.iter().map(|(n, v)| format!("{n}={v:.3}")).collect();
            println!("    {}", z.join(" "));
        }
    });
    let failed = report.outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        report.outcomes.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
