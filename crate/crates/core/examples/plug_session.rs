//! Configure the plug in AT mode, reboot it into data mode and drive the
//! relay through the typed client.

use voltplug::host::link::ReadOutcome;
use voltplug::host::{presets, Client, InProcess};
use voltplug::wire::{AtCommand, DeviceName};
use voltplug::{Device, DeviceConfig, DeviceOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = presets::preset("resistive_clean").expect("bundled preset");
    let boot_at = DeviceConfig {
        key_pin_at_boot: true,
        ..DeviceConfig::default()
    };
    let mut device = Device::new(scenario, DeviceOptions::default(), boot_at)?;
    println!("booted in {} mode", device.mode());
    println!("AT+NAME=kitchen -> {}", device.handle_line("AT+NAME=kitchen"));
    println!("AT+PSWD=12 -> {}", device.handle_line("AT+PSWD=12"));

    let config = DeviceConfig {
        key_pin_at_boot: false,
        ..device.config().clone()
    };
    device.power_on(config);
    println!("rebooted in {} mode as {:?}", device.mode(), device.config().name.as_str());

    let mut client = Client::new(InProcess::new(device, 50_000));
    client.relay(true)?;
    for _ in 0..3 {
        match client.read()? {
            ReadOutcome::Busy => println!("READ -> BUSY"),
            ReadOutcome::Measurement(m) => println!("READ -> {}", m.to_json()),
        }
    }
    client.relay(false)?;
    println!("{}", client.status()?);
    if let Err(e) = client.at(AtCommand::Name(DeviceName::new("other")?)) {
        println!("AT in data mode: {e}");
    }
    Ok(())
}
