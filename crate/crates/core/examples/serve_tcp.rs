//! Serve a plug on a loopback socket and talk to it over TCP.

use std::net::TcpListener;

use voltplug::host::{presets, serve, Client, TcpTransport};
use voltplug::{Device, DeviceConfig, DeviceOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let mut device = Device::new(
        presets::preset("inductive_clean").expect("bundled preset"),
        DeviceOptions::default(),
        DeviceConfig::default(),
    )?;
    let server = std::thread::spawn(move || serve(listener, &mut device, 50_000, Some(1)));
    println!("plug listening on {addr}");

    let mut client = Client::new(TcpTransport::connect(addr)?);
    client.relay(true)?;
    for line in ["STATUS", "READ", "READ", "FOO"] {
        println!("> {line}\n< {}", client.raw(line)?);
    }
    drop(client);
    server.join().expect("server thread")?;
    Ok(())
}
