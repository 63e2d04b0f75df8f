//! The closed/open asymmetry for a battery pure in an eigenstate of the
//! free energy operator: zero power under any closed (unitary) coupling at
//! a product state, but nonzero power under Lindblad channels — the kernel
//! correlations carry it.
//!
//! Run with: cargo run --example eigenstate_power

use qbattery::bounds::{cusumano_power, eigenstate_open_bound};
use qbattery::dynamics::{power_closed, power_open, ClosedModel, LindbladModel};
use qbattery::scenarios::{random_density, random_hermitian, sigma_minus, sigma_plus};
use qbattery::thermo::centered_free_energy_operator;
use qbattery::{
    CompositeSpace, DensityMatrix, HermitianOperator, RegularizationPolicy, ThermoContext,
};

fn main() -> qbattery::Result<()> {
    let omega = 1.0;
    let gamma = 1.0;
    let h_w = HermitianOperator::from_diagonal(&[omega / 2.0, -omega / 2.0]);
    let ctx = ThermoContext::new(1.0, h_w.clone())?;
    let reg = RegularizationPolicy::default();
    let excited = DensityMatrix::basis_state(2, 0)?;

    // Closed side: any product state with the battery in an F eigenstate
    // has exactly zero charging power, whatever the interaction.
    let space = CompositeSpace::new([2, 1, 1, 2])?;
    let h0 = space.embed_battery(&h_w)?;
    let v = random_hermitian(4, 0.7, 1);
    let model = ClosedModel::new(space, h0, v)?;
    let sigma = random_density(2, 2, 2)?;
    let full = DensityMatrix::new(HermitianOperator::new(
        sigma.matrix().kronecker(excited.matrix()),
    )?)?;
    let p_closed = power_closed(&full, &ctx, &reg, &model)?;
    println!("closed system, battery = |e⟩⟨e|, random interaction:");
    println!("  P = {p_closed:.3e}  (eigenstate ⇒ zero power)");

    // Open side: the same battery state under amplitude damping has
    // P = γ·w_g ≠ 0 even though σ_F = 0.
    let damping = LindbladModel::new(h_w.clone(), vec![(gamma, sigma_minus())])?;
    let p_open = power_open(&damping, &excited, &ctx, &reg)?;
    let df = centered_free_energy_operator(&ctx, &excited, &reg)?;
    let spec = df.eig();
    let n = spec
        .eigenvalues()
        .iter()
        .position(|w| w.abs() < 1e-12)
        .unwrap();
    let signed = cusumano_power(&damping, &spec, n)?;
    let bound = eigenstate_open_bound(&damping, &spec, n)?;
    println!("\nopen system, amplitude damping from |e⟩⟨e|:");
    println!("  P            = {p_open:.6}   (tr(ρ̇ F), support-truncated F)");
    println!("  Σγ w_m|L|²   = {signed:.6}   (eigenstate-case equality)");
    println!("  Σγ|w_m||L|²  = {bound:.6}   (eigenstate-case bound)");
    assert!((p_open - signed).abs() < 1e-12);
    assert!(p_open.abs() <= bound + 1e-12);

    // Pumping from the ground state: the battery charges at rate γ·ω even
    // though the state is an F eigenstate with σ_F = 0.
    let ground = DensityMatrix::basis_state(2, 1)?;
    let pumping = LindbladModel::new(h_w, vec![(gamma, sigma_plus())])?;
    let p_pump = power_open(&pumping, &ground, &ctx, &reg)?;
    println!("\nopen system, pumping from |g⟩⟨g|:");
    println!("  P = {p_pump:.6}   (nonzero charging power at a pure eigenstate)");
    Ok(())
}
