//! Byte links between host and plug, and a typed client over them.
//!
//! A plug served over TCP advances its virtual clock by a fixed step for
//! every received line, so a remote session is as deterministic as an
//! in-process one.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};

use super::HostError;
use crate::device::{Device, AT_ERROR, AT_OK};
use crate::metering::Measurement;
use crate::wire::{self, Command, Frame};

/// Sends one line and returns the one-line reply, without terminators.
pub trait Transport {
    fn exchange(&mut self, line: &str) -> Result<String, HostError>;
}

/// Plug living in the same process. Each exchange first advances virtual
/// time by `step_us`.
#[derive(Debug, Clone)]
pub struct InProcess {
    pub device: Device,
    pub step_us: u64,
}

impl InProcess {
    pub fn new(device: Device, step_us: u64) -> Self {
        Self { device, step_us }
    }
}

impl Transport for InProcess {
    fn exchange(&mut self, line: &str) -> Result<String, HostError> {
        self.device.advance(self.step_us);
        let frame = Frame::new(line).map_err(|e| HostError::Protocol(e.to_string()))?;
        let reply = self.device.feed(&frame.to_bytes());
        Ok(String::from_utf8_lossy(&reply).trim_end_matches('\n').to_string())
    }
}

#[derive(Debug)]
pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl TcpTransport {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, HostError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
        })
    }
}

impl Transport for TcpTransport {
    fn exchange(&mut self, line: &str) -> Result<String, HostError> {
        let frame = Frame::new(line).map_err(|e| HostError::Protocol(e.to_string()))?;
        self.writer.write_all(&frame.to_bytes())?;
        self.writer.flush()?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(HostError::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "plug closed the connection",
            )));
        }
        Ok(reply.trim_end_matches(['\r', '\n']).to_string())
    }
}

/// Result of a `READ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ReadOutcome {
    Measurement(Measurement),
    Busy,
}

pub struct Client<T: Transport> {
    transport: T,
}

impl<T: Transport> Client<T> {
    pub fn new(transport: T) -> Self {
        Self { transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    pub fn raw(&mut self, line: &str) -> Result<String, HostError> {
        self.transport.exchange(line)
    }

    /// Sends a command and maps `ERR ...` and `ERROR:(0)` replies to errors.
    pub fn send(&mut self, cmd: &Command) -> Result<String, HostError> {
        let reply = self.transport.exchange(wire::encode(cmd).payload())?;
        if let Some(msg) = reply.strip_prefix("ERR ") {
            return Err(HostError::Protocol(msg.to_string()));
        }
        if reply == AT_ERROR {
            return Err(HostError::Protocol(format!("{cmd} rejected")));
        }
        Ok(reply)
    }

    pub fn relay(&mut self, on: bool) -> Result<(), HostError> {
        let cmd = if on { Command::RelayOn } else { Command::RelayOff };
        self.expect_ok(&cmd)
    }

    pub fn read(&mut self) -> Result<ReadOutcome, HostError> {
        let reply = self.send(&Command::Read)?;
        if reply == "BUSY" {
            return Ok(ReadOutcome::Busy);
        }
        serde_json::from_str(&reply)
            .map(ReadOutcome::Measurement)
            .map_err(|_| HostError::UnexpectedReply(reply))
    }

    pub fn status(&mut self) -> Result<String, HostError> {
        self.send(&Command::Status)
    }

    pub fn at(&mut self, cmd: wire::AtCommand) -> Result<(), HostError> {
        self.expect_ok(&Command::At(cmd))
    }

    fn expect_ok(&mut self, cmd: &Command) -> Result<(), HostError> {
        let reply = self.send(cmd)?;
        if reply == AT_OK {
            Ok(())
        } else {
            Err(HostError::UnexpectedReply(reply))
        }
    }
}

/// Serves `device` to one connection at a time until `max_connections`
/// (if any) have been handled. The plug keeps its state across connections.
pub fn serve(
    listener: TcpListener,
    device: &mut Device,
    step_us: u64,
    max_connections: Option<usize>,
) -> Result<(), HostError> {
    for (k, stream) in listener.incoming().enumerate() {
        serve_connection(stream?, device, step_us)?;
        if max_connections.is_some_and(|m| k + 1 >= m) {
            break;
        }
    }
    Ok(())
}

fn serve_connection(stream: TcpStream, device: &mut Device, step_us: u64) -> Result<(), HostError> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            return Ok(());
        }
        if line.last() == Some(&b'\n') {
            device.advance(step_us);
        }
        let reply = device.feed(&line);
        if !reply.is_empty() && writer.write_all(&reply).is_err() {
            return Ok(());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{DeviceConfig, DeviceOptions};
    use crate::host::presets;

    fn client() -> Client<InProcess> {
        let device = Device::new(
            presets::preset("resistive_clean").unwrap(),
            DeviceOptions::default(),
            DeviceConfig::default(),
        )
        .unwrap();
        Client::new(InProcess::new(device, 50_000))
    }

    #[test]
    fn in_process_session() {
        let mut c = client();
        assert_eq!(c.read().unwrap(), ReadOutcome::Busy);
        c.relay(true).unwrap();
        c.raw("STATUS").unwrap();
        let ReadOutcome::Measurement(m) = c.read().unwrap() else {
            panic!("expected a measurement")
        };
        assert!(m.irms > 7.0);
        c.relay(false).unwrap();
        c.raw("STATUS").unwrap();
        c.raw("STATUS").unwrap();
        let ReadOutcome::Measurement(m) = c.read().unwrap() else {
            panic!("expected a measurement")
        };
        assert_eq!(m.irms, 0.0);
        assert!(matches!(c.raw("NOPE"), Ok(r) if r.starts_with("ERR ")));
        assert!(matches!(c.send(&Command::At(wire::AtCommand::Test)), Err(HostError::Protocol(_))));
    }

    #[test]
    fn tcp_round_trip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let mut device = client().transport().device.clone();
        let server = std::thread::spawn(move || {
            serve(listener, &mut device, 50_000, Some(1)).unwrap();
            device
        });
        let mut c = Client::new(TcpTransport::connect(addr).unwrap());
        c.relay(true).unwrap();
        assert!(c.status().unwrap().starts_with("STATUS RELAY=ON UPTIME_US=100000"));
        drop(c);
        let device = server.join().unwrap();
        assert!(device.relay().closed);
    }
}
