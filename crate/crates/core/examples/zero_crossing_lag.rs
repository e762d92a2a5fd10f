//! Phase lag of an inductive load from falling zero crossings, with and
//! without compensation for the sequential voltage/current reads.

use voltplug::host::presets;
use voltplug::metering::{self, zero_crossing, CrossingPair, MeterConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = CrossingPair::new(3.0, 0.0, -1.0, 100.0)?;
    println!("crossing between (0 us, +3) and (100 us, -1): {} us", zero_crossing(&pair)?);

    let scenario = presets::preset("inductive_clean").expect("bundled preset");
    let stream = scenario.run()?;
    for skew_compensation in [true, false] {
        let cfg = MeterConfig {
            skew_compensation,
            ..MeterConfig::default()
        };
        let a = metering::analyze(
            &stream.voltage(),
            &stream.current(),
            &scenario.chain,
            &scenario.adc,
            &cfg,
        )?;
        println!(
            "skew compensation {skew_compensation:5}: {} crossing pairs, phi = {:.3} deg",
            a.lags.len(),
            a.measurement.phi_deg.unwrap_or(f64::NAN)
        );
    }
    println!(
        "expected shift without compensation: {:.3} deg",
        scenario.timing.skew_us as f64 * 1e-6 * 360.0 * scenario.waveform.freq_hz
    );
    Ok(())
}
