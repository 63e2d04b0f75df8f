//! Scenario files end to end: write a TOML document, load and validate it,
//! run it, and print the head of the quantifier table.
//!
//! Run with: cargo run --example scenario_files

use qbattery::report::simulate_scenario;
use qbattery::scenarios::load_scenario;

const DOC: &str = r#"
kind = "open"
beta = 1.0
seed = 11

[model]
name = "qubit-pumping"
gamma = 0.5

[initial_state]
kind = "ground"

[grid]
t_start = 0.0
t_end = 8.0
n_samples = 17

[regularization]
mode = "support-truncate"
"#;

fn main() -> qbattery::Result<()> {
    let scenario = load_scenario(DOC)?;
    println!(
        "loaded scenario: {:?}, β = {}",
        scenario.kind, scenario.beta
    );

    // Configs round-trip exactly.
    let reparsed = load_scenario(&scenario.to_toml_string()?)?;
    assert_eq!(scenario, reparsed);

    let record = simulate_scenario(&scenario)?;
    println!("scenario hash: {}", record.scenario_hash);
    let csv = record.to_csv_string();
    for line in csv.lines().take(6) {
        println!("{line}");
    }
    println!("... ({} rows total)", record.rows.len());

    // Strict config validation names the offending field.
    let err = load_scenario(&DOC.replace("beta = 1.0", "beta = -2.0")).unwrap_err();
    println!("\nvalidation demo: {err}");
    Ok(())
}
