//! ADC code conversion and trailing-window offset removal.

use voltplug::metering::{
    adc_to_millivolts, code_to_current, offset_filter_gain, remove_offset, DEFAULT_OFFSET_WINDOW,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for code in [0u16, 510, 512, 519, 1023] {
        let mv = adc_to_millivolts(code)?;
        let amps = code_to_current(code, 66.0)?;
        println!("code {code:4} -> {mv:9.4} mV -> {amps:+8.4} A (66 mV/A sensor)");
    }

    // A 60 Hz tone riding on the 2.5 V bias, sampled every 500 us.
    let w = 2.0 * std::f64::consts::PI * 60.0 * 1e-6;
    let raw: Vec<(f64, f64)> = (0..400)
        .map(|k| {
            let t = k as f64 * 500.0;
            (t, 2500.0 + 800.0 * (w * t).sin())
        })
        .collect();
    let centered = remove_offset(&raw, DEFAULT_OFFSET_WINDOW)?;
    let settled = centered.settled();
    let mean = settled.iter().map(|p| p.1).sum::<f64>() / settled.len() as f64;
    let peak = settled.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    println!(
        "window {}: {} warm-up samples, residual mean {mean:.3} mV, peak {peak:.1} mV",
        centered.window, centered.warmup
    );
    println!(
        "filter gain at 60 Hz: {:.4} (the meter divides by it)",
        offset_filter_gain(DEFAULT_OFFSET_WINDOW, 500.0, 60.0)
    );
    Ok(())
}
