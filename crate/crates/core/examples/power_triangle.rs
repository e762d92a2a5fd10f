//! Active, apparent and reactive power for a few loads.

use voltplug::metering::{self, MeterConfig};
use voltplug::simkernel::{Harmonic, LoadModel, NoiseModel, Scenario, WaveformSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let loads = [
        ("heater", LoadModel::Resistive { resistance: 20.0 }),
        ("motor", LoadModel::Inductive { phase_deg: 36.87, irms: 4.0 }),
        (
            "smps",
            LoadModel::Switched {
                irms: 2.0,
                phase_deg: 0.0,
                harmonics: vec![
                    Harmonic { order: 3, amplitude: 0.5, phase_deg: 0.0 },
                    Harmonic { order: 5, amplitude: 0.25, phase_deg: 0.0 },
                ],
            },
        ),
    ];
    println!("{:<8} {:>9} {:>9} {:>9} {:>7}", "load", "P (W)", "S (VA)", "Q (var)", "P/S");
    for (name, load) in loads {
        let scenario = Scenario::new(
            name,
            WaveformSpec {
                vrms: 127.0,
                freq_hz: 60.0,
                phase0_deg: 0.0,
                load,
                noise: NoiseModel::noiseless(),
            },
        );
        let stream = scenario.run()?;
        let m = metering::measure(
            &stream.voltage(),
            &stream.current(),
            &scenario.chain,
            &scenario.adc,
            &MeterConfig::default(),
        )?;
        println!(
            "{name:<8} {:>9.1} {:>9.1} {:>9.1} {:>7.3}",
            m.p_active,
            m.s_apparent,
            m.q_reactive,
            m.p_active / m.s_apparent
        );
    }
    Ok(())
}
