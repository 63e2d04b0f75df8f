//! Property tests for the structural invariants: spectral reconstruction,
//! partial-trace consistency, quantifier positivity, and report
//! recomposition, over randomized dimensions and seeds.

use proptest::prelude::*;

use qbattery::bounds::{kernel_term, open_bound, qfi_eigsum};
use qbattery::density::expectation;
use qbattery::dynamics::lindblad_rhs;
use qbattery::scenarios::{
    haar_unitary, named_model, random_density, random_hermitian, random_lindblad, NamedModelParams,
};
use qbattery::thermo::{
    centered_free_energy_operator, covariance, max_extractable_work, thermal_state, variance,
    RegularizationPolicy, ThermoContext,
};
use qbattery::{CompositeSpace, DensityMatrix, HermitianOperator, Subsystem};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn eig_reconstructs_operator(dim in 2usize..=16, seed in 0u64..1_000_000) {
        let a = random_hermitian(dim, 1.0, seed);
        let spec = a.eig();
        let err = (spec.reconstruct() - a.matrix()).norm() / a.matrix().norm().max(1e-300);
        prop_assert!(err < 1e-10, "reconstruction error {err}");
        // Orthonormality of the eigenvector columns.
        let u = spec.eigenvectors();
        let gram_defect = (u.adjoint() * u
            - qbattery::CMatrix::identity(dim, dim))
        .norm();
        prop_assert!(gram_defect < 1e-10 * (dim as f64), "gram defect {gram_defect}");
    }

    #[test]
    fn partial_trace_keeps_trace_and_positivity(
        d_s in 1usize..=3,
        d_w in 2usize..=3,
        rank in 1usize..=4,
        seed in 0u64..1_000_000,
    ) {
        let space = CompositeSpace::new([d_s, 1, 1, d_w]).unwrap();
        let total = space.total_dim();
        let rho = random_density(total, rank.min(total), seed).unwrap();
        let red = space.partial_trace(&rho, Subsystem::Battery).unwrap();
        prop_assert!((red.trace() - 1.0).abs() < 1e-12);
        prop_assert!(red.eigenvalues().iter().all(|&l| l >= 0.0));

        // Embedded expectation equals reduced expectation.
        let a = random_hermitian(d_w, 1.0, seed ^ 0xABCD);
        let lhs = expectation(&rho, &space.embed_battery(&a).unwrap()).unwrap();
        let rhs = expectation(&red, &a).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn covariance_is_cauchy_schwarz_bounded(
        dim in 2usize..=6,
        seed in 0u64..1_000_000,
    ) {
        let rho = random_density(dim, dim, seed).unwrap();
        let a = random_hermitian(dim, 1.0, seed ^ 0x1111);
        let b = random_hermitian(dim, 1.0, seed ^ 0x2222);
        let c = covariance(&rho, &a, &b).unwrap();
        let bound = variance(&rho, &a).unwrap() * variance(&rho, &b).unwrap();
        prop_assert!(c.norm_sqr() <= bound + 1e-10);
        let swapped = covariance(&rho, &b, &a).unwrap();
        prop_assert!((c - swapped.conj()).norm() < 1e-10);
    }

    #[test]
    fn wmax_nonnegative_and_zero_only_at_thermal(
        dim in 2usize..=5,
        seed in 0u64..1_000_000,
    ) {
        let h = random_hermitian(dim, 1.0, seed);
        let ctx = ThermoContext::new(1.0, h).unwrap();
        let rho = random_density(dim, dim, seed ^ 0x3333).unwrap();
        let w = max_extractable_work(&ctx, &rho).unwrap();
        prop_assert!(w >= 0.0);
        let tau = thermal_state(&ctx).unwrap();
        prop_assert!(max_extractable_work(&ctx, &tau).unwrap().abs() < 1e-11);
    }

    #[test]
    fn lindblad_rhs_is_traceless_hermitian(
        dim in 2usize..=5,
        rank in 1usize..=5,
        seed in 0u64..1_000_000,
    ) {
        let model = random_lindblad(dim, 2, 1.0, seed).unwrap();
        let rho = random_density(dim, rank.min(dim), seed ^ 0x4444).unwrap();
        let rhs = lindblad_rhs(&model, &rho).unwrap();
        prop_assert!(rhs.trace().abs() < 1e-12 * rhs.norm().max(1.0));
        // Hermiticity is enforced by the return type; the raw asymmetry is
        // already below the constructor tolerance.
    }

    #[test]
    fn qfi_is_nonnegative_and_finite_any_rank(
        dim in 2usize..=6,
        rank in 1usize..=6,
        seed in 0u64..1_000_000,
    ) {
        let rank = rank.min(dim);
        let rho = random_density(dim, rank, seed).unwrap();
        let model = random_lindblad(dim, 2, 1.0, seed ^ 0x5555).unwrap();
        let rho_dot = lindblad_rhs(&model, &rho).unwrap();
        let q = qfi_eigsum(rho.spectral(), rho_dot.matrix(), 1e-10).unwrap();
        prop_assert!(q.value >= 0.0 && q.value.is_finite());
        if rank == dim {
            let ctx = ThermoContext::new(1.0, model.hamiltonian().clone()).unwrap();
            let df = centered_free_energy_operator(
                &ctx, &rho, &RegularizationPolicy::default()).unwrap();
            let k = kernel_term(rho.spectral(), rho_dot.matrix(), &df, 1e-10).unwrap();
            prop_assert_eq!(k, 0.0, "kernel term must vanish at full rank");
        }
    }

    #[test]
    fn open_bound_reports_recompose_and_hold(
        dim in 2usize..=4,
        seed in 0u64..1_000_000,
    ) {
        let model = random_lindblad(dim, 2, 1.0, seed).unwrap();
        let rho = random_density(dim, dim, seed ^ 0x6666).unwrap();
        let ctx = ThermoContext::new(1.0, model.hamiltonian().clone()).unwrap();
        let report = open_bound(
            &model, &rho, &ctx, &RegularizationPolicy::default(), 1e-10, "prop").unwrap();
        prop_assert!(!report.violated);
        let recomposed = report.recompute_rhs().unwrap();
        prop_assert!((recomposed - report.rhs).abs() <= 1e-15 * report.rhs.abs().max(1.0));
        prop_assert_eq!(report.violated, report.slack < -report.tol_violation);
    }

    #[test]
    fn quantifiers_invariant_under_global_rotation(
        dim in 2usize..=5,
        seed in 0u64..1_000_000,
    ) {
        let h = random_hermitian(dim, 1.0, seed);
        let rho = random_density(dim, dim, seed ^ 0x7777).unwrap();
        let ctx = ThermoContext::new(0.8, h.clone()).unwrap();
        let u = haar_unitary(dim, seed ^ 0x8888);
        let rot = |m: &qbattery::CMatrix| &u * m * u.adjoint();
        let h_rot = HermitianOperator::new(rot(h.matrix())).unwrap();
        let rho_rot = DensityMatrix::new(HermitianOperator::new(rot(rho.matrix())).unwrap()).unwrap();
        let ctx_rot = ThermoContext::new(0.8, h_rot).unwrap();
        let w = max_extractable_work(&ctx, &rho).unwrap();
        let w_rot = max_extractable_work(&ctx_rot, &rho_rot).unwrap();
        prop_assert!((w - w_rot).abs() < 1e-9 * w.abs().max(1.0));
    }

    #[test]
    fn named_scenarios_roundtrip_with_random_params(
        gamma in 0.1f64..3.0,
        beta in 0.2f64..5.0,
        seed in 0u64..1_000_000,
    ) {
        for name in ["qubit-amplitude-damping", "qubit-dephasing", "qubit-pumping"] {
            let scenario = named_model(name, &NamedModelParams {
                gamma: Some(gamma),
                beta: Some(beta),
                seed: Some(seed),
                ..NamedModelParams::default()
            }).unwrap();
            let text = scenario.to_toml_string().unwrap();
            let reparsed = qbattery::scenarios::load_scenario(&text).unwrap();
            prop_assert_eq!(&scenario, &reparsed);
        }
    }
}
