//! The virtual plug: relay, measurement loop and the dual-mode serial endpoint.
//!
//! The serial module boots into AT mode only when its key pin is high at
//! power-on. In AT mode it answers configuration commands with `OK` or
//! `ERROR:(0)`; otherwise it is a transparent link to the firmware, which
//! understands the data verbs from [`crate::wire`].
//!
//! Virtual time only moves through [`Device::tick`]. Samples are produced
//! on demand from the scenario's [`Sampler`] and the relay state is applied
//! to each sample as it is generated.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metering::{self, MeterConfig, Measurement};
use crate::simkernel::{Sample, Sampler, Scenario, SimError};
use crate::wire::{self, AtCommand, Command, DeviceName, LineCodec, Password, Role, WireError};

/// Rated load current of the relay contacts.
pub const RELAY_RATING_A: f64 = 10.0;

pub const AT_OK: &str = "OK";
pub const AT_ERROR: &str = "ERROR:(0)";

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("{command} is not accepted in {mode} mode")]
    ProtocolState { mode: DeviceMode, command: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceMode {
    At,
    Data,
}

impl fmt::Display for DeviceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeviceMode::At => write!(f, "AT"),
            DeviceMode::Data => write!(f, "data"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RelayState {
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub name: DeviceName,
    pub password: Password,
    pub role: Role,
    pub key_pin_at_boot: bool,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            name: DeviceName::new("HC-05").expect("valid default name"),
            password: Password::new("1234").expect("valid default password"),
            role: Role::Slave,
            key_pin_at_boot: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceOptions {
    pub meter: MeterConfig,
    /// Mains cycles per measurement window.
    pub window_cycles: u32,
    /// Open the relay when a measurement exceeds the rating.
    pub auto_trip: bool,
}

impl Default for DeviceOptions {
    fn default() -> Self {
        Self {
            meter: MeterConfig::default(),
            window_cycles: 2,
            auto_trip: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Ok,
    AtError,
    Busy,
    Measurement(Measurement),
    Status { relay: RelayState, uptime_us: u64 },
    Error(String),
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Response::Ok => f.write_str(AT_OK),
            Response::AtError => f.write_str(AT_ERROR),
            Response::Busy => f.write_str("BUSY"),
            Response::Measurement(m) => f.write_str(&m.to_json()),
            Response::Status { relay, uptime_us } => write!(
                f,
                "STATUS RELAY={} UPTIME_US={uptime_us}",
                if relay.closed { "ON" } else { "OFF" }
            ),
            Response::Error(msg) => write!(f, "ERR {msg}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Device {
    scenario: Scenario,
    options: DeviceOptions,
    config: DeviceConfig,
    mode: DeviceMode,
    relay: RelayState,
    sampler: Sampler,
    now_us: u64,
    history: VecDeque<(Sample, Sample)>,
    next_window: u64,
    log: Vec<Measurement>,
    codec: LineCodec,
}

impl Device {
    /// Builds a device and powers it on with `config`.
    pub fn new(
        scenario: Scenario,
        options: DeviceOptions,
        config: DeviceConfig,
    ) -> Result<Self, DeviceError> {
        scenario.validate()?;
        let sampler = scenario.sampler()?;
        let mut device = Self {
            now_us: scenario.timing.start_us,
            scenario,
            options,
            config: config.clone(),
            mode: DeviceMode::Data,
            relay: RelayState::default(),
            sampler,
            history: VecDeque::new(),
            next_window: 1,
            log: Vec::new(),
            codec: LineCodec::new(),
        };
        device.power_on(config);
        Ok(device)
    }

    /// Resets the device to its power-on state. The relay opens, the sample
    /// clock restarts and the measurement log is cleared.
    pub fn power_on(&mut self, config: DeviceConfig) -> DeviceMode {
        self.mode = if config.key_pin_at_boot {
            DeviceMode::At
        } else {
            DeviceMode::Data
        };
        self.config = config;
        self.relay = RelayState::default();
        self.sampler = self
            .scenario
            .sampler()
            .expect("scenario validated at construction");
        self.now_us = self.scenario.timing.start_us;
        self.history.clear();
        self.next_window = 1;
        self.log.clear();
        self.codec = LineCodec::new();
        self.mode
    }

    pub fn mode(&self) -> DeviceMode {
        self.mode
    }

    pub fn relay(&self) -> RelayState {
        self.relay
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn now_us(&self) -> u64 {
        self.now_us
    }

    pub fn uptime_us(&self) -> u64 {
        self.now_us - self.scenario.timing.start_us
    }

    /// Snapshot of all measurements produced since power-on.
    pub fn log(&self) -> &[Measurement] {
        &self.log
    }

    pub fn latest(&self) -> Option<&Measurement> {
        self.log.last()
    }

    pub fn handle_at(&mut self, line: &str) -> Result<Response, DeviceError> {
        if self.mode != DeviceMode::At {
            return Err(DeviceError::ProtocolState {
                mode: self.mode,
                command: line.to_string(),
            });
        }
        let Ok(cmd) = wire::parse_at(line) else {
            return Ok(Response::AtError);
        };
        match cmd {
            AtCommand::Test => {}
            AtCommand::Name(name) => self.config.name = name,
            AtCommand::Password(pin) => self.config.password = pin,
            AtCommand::Role(role) => self.config.role = role,
        }
        Ok(Response::Ok)
    }

    pub fn handle_command(&mut self, cmd: &Command) -> Result<Response, DeviceError> {
        if self.mode != DeviceMode::Data || matches!(cmd, Command::At(_)) {
            return Err(DeviceError::ProtocolState {
                mode: self.mode,
                command: cmd.to_string(),
            });
        }
        Ok(match cmd {
            Command::RelayOn => {
                self.relay.closed = true;
                Response::Ok
            }
            Command::RelayOff => {
                self.relay.closed = false;
                Response::Ok
            }
            Command::Read => match self.log.last() {
                Some(m) => Response::Measurement(m.clone()),
                None => Response::Busy,
            },
            Command::Status => Response::Status {
                relay: self.relay,
                uptime_us: self.uptime_us(),
            },
            Command::At(_) => unreachable!("rejected above"),
        })
    }

    /// Handles one received line and returns the reply payload.
    pub fn handle_line(&mut self, line: &str) -> String {
        self.handle_frame(wire::Frame::new(line)).to_string()
    }

    fn handle_frame(&mut self, frame: Result<wire::Frame, WireError>) -> Response {
        match self.mode {
            DeviceMode::At => match frame {
                Ok(frame) => self
                    .handle_at(frame.payload())
                    .unwrap_or(Response::AtError),
                Err(_) => Response::AtError,
            },
            DeviceMode::Data => {
                let frame = match frame {
                    Ok(frame) => frame,
                    Err(e) => return Response::Error(e.to_string()),
                };
                match wire::decode(&frame) {
                    Ok(cmd) => self
                        .handle_command(&cmd)
                        .unwrap_or_else(|e| Response::Error(e.to_string())),
                    Err(e) => Response::Error(e.to_string()),
                }
            }
        }
    }

    /// Serial-port view: consumes raw bytes and returns the reply bytes for
    /// every completed line.
    pub fn feed(&mut self, bytes: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for frame in self.codec.push(bytes) {
            let reply = self.handle_frame(frame).to_string();
            out.extend_from_slice(reply.as_bytes());
            out.push(b'\n');
        }
        out
    }

    fn window_end_us(&self, k: u64) -> f64 {
        let cycles = (k * self.options.window_cycles as u64) as f64;
        self.scenario.timing.start_us as f64 + cycles * 1e6 / self.options.meter.freq_hz
    }

    /// Advances virtual time to `now_us`, sampling every pair whose voltage
    /// sample is due and measuring every window that has ended. Returns the
    /// newest measurement produced by this call. Earlier times are ignored.
    pub fn tick(&mut self, now_us: u64) -> Option<Measurement> {
        self.now_us = self.now_us.max(now_us);
        if self.mode != DeviceMode::Data {
            return None;
        }
        let mut newest = None;
        loop {
            let end = self.window_end_us(self.next_window);
            // Sample up to the window end or to now, whichever is first.
            while (self.sampler.next_t_us() as f64) < end && self.sampler.next_t_us() <= self.now_us {
                let pair = self.sampler.next_pair(self.relay.closed);
                self.history.push_back(pair);
            }
            if end > self.now_us as f64 {
                break;
            }
            if let Some(m) = self.measure_window(end) {
                newest = Some(m);
            }
            self.next_window += 1;
        }
        newest
    }

    /// Advances virtual time by `dt_us`.
    pub fn advance(&mut self, dt_us: u64) -> Option<Measurement> {
        self.tick(self.now_us + dt_us)
    }

    fn measure_window(&mut self, end: f64) -> Option<Measurement> {
        let period = self.scenario.timing.period_us as f64;
        let window_len = self.options.window_cycles as f64 * 1e6 / self.options.meter.freq_hz;
        let start = end - window_len;
        let in_window = self
            .history
            .iter()
            .filter(|(v, _)| (v.t_us as f64) >= start && (v.t_us as f64) < end)
            .count();
        let warmup = self.options.meter.offset_window.saturating_sub(1);
        let needed = in_window + warmup;
        let keep = needed + (window_len / period).ceil() as usize + 2;
        let result = if in_window > 0 && self.history.len() >= needed {
            let first = self.history.len() - needed;
            let (v, i): (Vec<Sample>, Vec<Sample>) = self.history.range(first..).copied().unzip();
            metering::measure(
                &v,
                &i,
                &self.scenario.chain,
                &self.scenario.adc,
                &self.options.meter,
            )
            .ok()
        } else {
            None
        };
        while self.history.len() > keep {
            self.history.pop_front();
        }
        let mut m = result?;
        m.t_us = end.round() as u64;
        m.out_of_spec = m.irms > RELAY_RATING_A;
        if m.out_of_spec && self.options.auto_trip {
            self.relay.closed = false;
        }
        self.log.push(m.clone());
        Some(m)
    }
}
