//! Free energy operator fundamentals on a single qubit: the Gibbs
//! cancellation, the two W_max routes, entropy, and ergotropy.
//!
//! Run with: cargo run --example free_energy_basics

use qbattery::thermo::{
    equilibrium_free_energy, ergotropy, free_energy_operator, max_extractable_work,
    nonequilibrium_free_energy, thermal_state, von_neumann_entropy, RegularizationPolicy,
    ThermoContext,
};
use qbattery::{DensityMatrix, HermitianOperator};

fn main() -> qbattery::Result<()> {
    let beta = 1.0;
    let h = HermitianOperator::from_diagonal(&[0.5, -0.5]);
    let ctx = ThermoContext::new(beta, h.clone())?;
    let reg = RegularizationPolicy::default();

    // The thermal state is the fixed point: F(τ_β) is a multiple of the
    // identity and the extractable work vanishes.
    let tau = thermal_state(&ctx)?;
    let f_tau = free_energy_operator(&ctx, &tau, &reg)?;
    println!("thermal state populations: {:?}", tau.eigenvalues());
    println!(
        "F(τ_β) diagonal: [{:.6}, {:.6}]  (equilibrium free energy: {:.6})",
        f_tau.matrix()[(0, 0)].re,
        f_tau.matrix()[(1, 1)].re,
        equilibrium_free_energy(&ctx)
    );
    println!("W_max(τ_β) = {:.3e}", max_extractable_work(&ctx, &tau)?);

    // A charged battery: the excited state.
    let excited = DensityMatrix::basis_state(2, 0)?;
    println!("\nexcited battery:");
    println!("  energy        = {:.6}", excited.expectation(&h)?);
    println!(
        "  entropy       = {:.6} nats",
        von_neumann_entropy(&excited)
    );
    println!(
        "  F(ρ)          = {:.6}",
        nonequilibrium_free_energy(&ctx, &excited)?
    );
    // W_max is evaluated through the relative entropy and cross-checked
    // against F(ρ) - F(τ) internally.
    println!(
        "  W_max         = {:.6}",
        max_extractable_work(&ctx, &excited)?
    );
    println!("  ergotropy     = {:.6}", ergotropy(&h, &excited)?);

    // The free energy operator of a rank-deficient state depends on the
    // regularization policy: support truncation drops the singular log,
    // ε-mixing keeps it with a large negative weight.
    let f_trunc = free_energy_operator(&ctx, &excited, &reg)?;
    let f_mixed = free_energy_operator(
        &ctx,
        &excited,
        &RegularizationPolicy::EpsilonMix { epsilon: 1e-6 },
    )?;
    println!("\nF on the pure excited state:");
    println!(
        "  support-truncate: diag [{:.4}, {:.4}]",
        f_trunc.matrix()[(0, 0)].re,
        f_trunc.matrix()[(1, 1)].re
    );
    println!(
        "  epsilon-mix 1e-6: diag [{:.4}, {:.4}]   (log ε weight on the kernel)",
        f_mixed.matrix()[(0, 0)].re,
        f_mixed.matrix()[(1, 1)].re
    );
    Ok(())
}
