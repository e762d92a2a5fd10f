//! Peak-based versus direct RMS on noisy readings.

use voltplug::host::{presets, Harness};
use voltplug::metering::rms_from_peak;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = presets::preset("resistive").expect("bundled preset");
    let readings = Harness::default().readings(&scenario, 5)?;
    println!("{:>10} {:>10} {:>10} {:>10}", "t (s)", "truth", "peak", "direct");
    for r in &readings {
        println!(
            "{:>10.0} {:>10.2} {:>10.2} {:>10.2}",
            r.start_us as f64 * 1e-6,
            r.truth_vrms,
            rms_from_peak(r.analysis.v_peak),
            r.analysis.measurement.vrms
        );
    }
    Ok(())
}
