//! Run the lag, RMS and power protocols and print their reports.

use voltplug::host::report::{render_table, ValidationReport};
use voltplug::host::{presets, run_lag_protocol, run_power_protocol, run_rms_protocol};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let resistive = presets::preset("resistive").expect("bundled preset");
    let inductive = presets::preset("inductive").expect("bundled preset");

    let mut reports: Vec<ValidationReport> = vec![
        run_lag_protocol(&resistive, 30)?,
        run_lag_protocol(&inductive, 30)?,
    ];
    reports.extend(run_rms_protocol(&resistive, 30, 60.0)?);
    reports.push(run_power_protocol(&resistive, 30)?);
    print!("{}", render_table(&reports));

    match run_power_protocol(&inductive, 30) {
        Ok(_) => println!("unexpected: power protocol accepted an inductive load"),
        Err(e) => println!("inductive power run refused: {e}"),
    }
    Ok(())
}
