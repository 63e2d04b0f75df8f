//! The two quantum-Fisher-information routes side by side: the
//! rank-cutoff eigensum (finite on every state) against the
//! symmetric-logarithmic-derivative form (full-rank oracle).
//!
//! Run with: cargo run --example qfi_crosscheck

use qbattery::bounds::{qfi_eigsum, qfi_sld};
use qbattery::dynamics::lindblad_rhs;
use qbattery::scenarios::{random_density, random_lindblad};

fn main() -> qbattery::Result<()> {
    println!(
        "{:>4} {:>14} {:>14} {:>12}",
        "dim", "eigsum", "sld", "rel dev"
    );
    for dim in 2..=6 {
        let rho = random_density(dim, dim, 100 + dim as u64)?;
        let model = random_lindblad(dim, 2, 1.0, 200 + dim as u64)?;
        let rho_dot = lindblad_rhs(&model, &rho)?;
        let via_sum = qfi_eigsum(rho.spectral(), rho_dot.matrix(), 1e-10)?;
        let via_sld = qfi_sld(&rho, rho_dot.matrix())?;
        let rel = (via_sum.value - via_sld).abs() / via_sld.abs();
        println!(
            "{dim:>4} {:>14.8} {via_sld:>14.8} {rel:>12.2e}",
            via_sum.value
        );
    }

    // Rank-deficient states: the SLD route is out of domain, the eigensum
    // stays finite and reports what it excluded.
    println!("\nrank-deficient state, dim 5, rank 2:");
    let rho = random_density(5, 2, 7)?;
    let model = random_lindblad(5, 2, 1.0, 8)?;
    let rho_dot = lindblad_rhs(&model, &rho)?;
    let q = qfi_eigsum(rho.spectral(), rho_dot.matrix(), 1e-10)?;
    println!(
        "  eigsum = {:.6} (finite), rank used = {}, excluded pairs = {}",
        q.value, q.rank_used, q.excluded_pairs
    );
    println!(
        "  sld    = {:?}",
        qfi_sld(&rho, rho_dot.matrix()).err().map(|e| e.to_string())
    );
    Ok(())
}
