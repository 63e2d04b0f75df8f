//! Random-instance verification campaigns for both bounds, printing the
//! worst slack seen. A violation would serialize the instance for replay
//! and flag the run.
//!
//! Run with: cargo run --release --example bound_fuzzing

use qbattery::cli::{closed_campaign, open_campaign, CampaignKind, VerifyOptions};

fn main() -> qbattery::Result<()> {
    let closed = closed_campaign(&VerifyOptions {
        instances: 2000,
        seed: 42,
        ..VerifyOptions::default()
    })?;
    println!("closed bound, 2000 random full-rank instances:");
    for b in &closed.bounds {
        println!(
            "  {}: {} evaluations, {} violations, worst slack {:.3e} ({})",
            b.name, b.evaluations, b.violation_count, b.worst_slack, b.worst_instance
        );
    }

    let open = open_campaign(&VerifyOptions {
        kind: CampaignKind::Open,
        models: vec![
            "qubit-amplitude-damping".into(),
            "qubit-dephasing".into(),
            "qubit-pumping".into(),
        ],
        states_per_model: 5,
        time_samples: 100,
        seed: 42,
        ..VerifyOptions::default()
    })?;
    println!("\nopen bound along Lindblad trajectories:");
    for b in &open.bounds {
        println!(
            "  {}: {} evaluations, {} violations, worst slack {:.3e}",
            b.name, b.evaluations, b.violation_count, b.worst_slack
        );
    }

    assert!(closed.all_passed && open.all_passed);
    println!("\nall bounds held");
    Ok(())
}
