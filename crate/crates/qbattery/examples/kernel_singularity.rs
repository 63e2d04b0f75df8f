//! The logarithmic kernel singularity of the free energy operator, made
//! quantitative: sweep the ε-mixed power P(ε) near a pure state and fit
//! P(ε) = a + b·log ε. Population leaking into the kernel at rate γ picks
//! up the log ε weight, so b = γ/β; a stationary state gives a flat sweep.
//!
//! Run with: cargo run --example kernel_singularity

use qbattery::bounds::singularity_probe;
use qbattery::scenarios::{named_model, BuiltScenario, NamedModelParams};

fn main() -> qbattery::Result<()> {
    let grid = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

    for (name, expect) in [
        ("qubit-amplitude-damping", "b ≈ γ/β = 1"),
        ("qubit-dephasing", "a ≈ b ≈ 0 (stationary)"),
    ] {
        let scenario = named_model(name, &NamedModelParams::default())?;
        let BuiltScenario::Open { model, .. } = scenario.build()? else {
            unreachable!()
        };
        let ctx = scenario.thermo_context()?;
        let fit = singularity_probe(&model, &ctx, 0, &grid)?;

        println!("{name} from the excited state ({expect}):");
        println!("{:>10} {:>16}", "epsilon", "P(epsilon)");
        for &(eps, p) in &fit.points {
            println!("{eps:>10.0e} {p:>16.8}");
        }
        println!(
            "  fit: a = {:.6}, b = {:.6}, residual = {:.2e}, poor_fit = {}\n",
            fit.intercept, fit.log_slope, fit.residual, fit.poor_fit
        );
    }
    Ok(())
}
