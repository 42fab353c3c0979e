//! Compares the analytic gradient with central finite differences on a small
//! random instance that switches on every loss term.
//!
//! cargo run --example gradcheck

use nnevclus::training::{grad_check, GradCheckOptions, InstanceSpec};
use nnevclus::FocalScheme;

fn main() -> nnevclus::Result<()> {
    let spec = InstanceSpec {
        n: 8,
        d: 3,
        hidden: vec![5],
        clusters: 3,
        scheme: FocalScheme::PairsPlus,
        gate: true,
        constraints: 4,
        labels: 3,
        lambda: 0.1,
        ..Default::default()
    };
    let report = grad_check(&spec.build()?, &GradCheckOptions::default())?;
    for b in &report.blocks {
        println!("{:>6}: max relative error {:.2e} (largest |g| {:.2e})", b.name, b.max_rel_error, b.max_abs_gradient);
    }
    println!("{} (tolerance {:.0e})", if report.passed { "PASS" } else { "FAIL" }, report.tolerance);
    Ok(())
}
