//! Generate the quantized sample stream of a noisy resistive load and print
//! the first few rows of its CSV form.

use voltplug::simkernel::{LoadModel, NoiseModel, Scenario, WaveformSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut scenario = Scenario::new(
        "demo",
        WaveformSpec {
            vrms: 127.0,
            freq_hz: 60.0,
            phase0_deg: 0.0,
            load: LoadModel::Resistive { resistance: 50.0 },
            noise: NoiseModel {
                sigma_v: 1.0,
                sigma_i: 0.01,
                seed: 7,
                drift_sigma_v: 0.0,
            },
        },
    );
    scenario.duration_us = 20_000;

    let stream = scenario.run()?;
    let csv = stream.to_csv_string();
    for line in csv.lines().take(9) {
        println!("{line}");
    }
    let v = stream.voltage();
    let (lo, hi) = v.iter().fold((u16::MAX, 0), |(lo, hi), s| (lo.min(s.code), hi.max(s.code)));
    println!("{} samples, voltage codes span {lo}..={hi}", stream.samples.len());
    Ok(())
}
