//! Record a scripted session as a transcript and replay it byte for byte.

use voltplug::host::{presets, transcript};
use voltplug::{Device, DeviceConfig, DeviceOptions};

fn device() -> Device {
    Device::new(
        presets::preset("resistive_clean").expect("bundled preset"),
        DeviceOptions::default(),
        DeviceConfig::default(),
    )
    .expect("valid preset")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let script = "@boot key_pin=1\n> AT\n> AT+ROLE=1\n@boot key_pin=0\n> RELAY ON\n@advance 100000\n> STATUS\n";
    let golden = transcript::record(script, &mut device())?;
    print!("{golden}");
    transcript::replay(&golden, &mut device())?;
    println!("# replay matched");

    let tampered = golden.replace("< OK", "< ok");
    if let Err(e) = transcript::replay(&tampered, &mut device()) {
        println!("# tampered transcript: {e}");
    }
    Ok(())
}
