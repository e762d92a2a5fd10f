//! The `voltplug` command line.
//!
//! Exit codes: 0 on success, 1 when the plug or a protocol run fails, 2 on
//! usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::TcpListener;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::link::{self, Client, InProcess, ReadOutcome, TcpTransport, Transport};
use super::log::MeasurementLog;
use super::protocols::{Harness, DEFAULT_INTERVAL_S, DEFAULT_READINGS};
use super::report::{self, ValidationReport};
use super::{presets, HostError};
use crate::device::{Device, DeviceConfig, DeviceOptions};
use crate::simkernel::Scenario;

pub const SEED_ENV: &str = "VOLTPLUG_SEED";

#[derive(Debug, Parser)]
#[command(name = "voltplug", version, about = "Virtual smart plug and metering validation harness")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario JSON file or preset name.
    #[arg(long, default_value = "resistive")]
    scenario: String,
    /// Noise seed; falls back to $VOLTPLUG_SEED, then to the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct Target {
    /// Address of a plug started with `serve`. Without it a fresh in-process
    /// plug is used.
    #[arg(long)]
    connect: Option<String>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Virtual time the in-process plug runs before each line it receives.
    #[arg(long, default_value_t = 100_000)]
    settle_us: u64,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write the sample stream of a scenario as CSV.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        duration_us: Option<u64>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Serve a virtual plug over TCP, one connection at a time.
    Serve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        /// Virtual microseconds that pass per received line.
        #[arg(long, default_value_t = 50_000)]
        step_us: u64,
        /// Boot with the key pin high (AT mode).
        #[arg(long)]
        key_pin: bool,
        /// Exit after this many connections.
        #[arg(long)]
        max_connections: Option<usize>,
    },
    /// Switch the relay.
    Relay {
        state: RelayArg,
        #[command(flatten)]
        target: Target,
    },
    /// Fetch the latest measurement as JSON.
    Read {
        #[command(flatten)]
        target: Target,
        /// Close the relay before reading (in-process plug only).
        #[arg(long)]
        relay_on: bool,
    },
    /// Run a validation protocol.
    Validate {
        protocol: ProtocolArg,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = DEFAULT_READINGS)]
        n: usize,
        /// Virtual seconds between readings.
        #[arg(long, default_value_t = DEFAULT_INTERVAL_S)]
        interval_s: f64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
        /// Also write the reports as JSON to this file.
        #[arg(long)]
        out: Option<String>,
    },
    /// Log operations.
    Log {
        #[command(subcommand)]
        action: LogCmd,
    },
}

#[derive(Debug, Subcommand)]
enum LogCmd {
    /// Run a plug with the relay closed and export its measurement log.
    Export {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1_000_000)]
        duration_us: u64,
        #[arg(long, value_enum, default_value_t = LogFormat::Jsonl)]
        format: LogFormat,
        /// Include the raw samples.
        #[arg(long)]
        samples: bool,
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RelayArg {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Lag,
    Rms,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LogFormat {
    Jsonl,
    Csv,
}

enum Failure {
    Usage(String),
    Runtime(HostError),
}

impl From<HostError> for Failure {
    fn from(e: HostError) -> Self {
        Failure::Runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn resolve_seed(explicit: Option<u64>) -> Result<Option<u64>, Failure> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario, Failure> {
    let seed = resolve_seed(args.seed)?;
    let scenario = presets::load(&args.scenario)?;
    Ok(match seed {
        Some(s) => scenario.with_seed(s),
        None => scenario,
    })
}

fn sink<'a>(path: &Option<String>, out: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(out),
    })
}

fn execute(cmd: Cmd, out: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Cmd::Simulate {
            scenario,
            duration_us,
            out: path,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(d) = duration_us {
                s.duration_us = d;
            }
            let stream = s.run().map_err(HostError::from)?;
            let mut w = sink(&path, out)?;
            stream.write_csv(&mut w).map_err(HostError::from)?;
            w.flush()?;
        }
        Cmd::Serve {
            scenario,
            listen,
            step_us,
            key_pin,
            max_connections,
        } => {
            let s = load_scenario(&scenario)?;
            let config = DeviceConfig {
                key_pin_at_boot: key_pin,
                ..DeviceConfig::default()
            };
            let mut device = Device::new(s, DeviceOptions::default(), config).map_err(HostError::from)?;
            let listener = TcpListener::bind(&listen)?;
            writeln!(out, "listening on {}", listener.local_addr()?)?;
            out.flush()?;
            link::serve(listener, &mut device, step_us, max_connections)?;
        }
        Cmd::Relay { state, target } => {
            let on = matches!(state, RelayArg::On);
            with_client(&target, |c| {
                c.relay(on)?;
                Ok("OK".to_string())
            }, out)?;
        }
        Cmd::Read { target, relay_on } => {
            if relay_on && target.connect.is_some() {
                return Err(Failure::Usage(
                    "--relay-on applies to the in-process plug; use `relay on` with --connect".into(),
                ));
            }
            with_client(&target, |c| {
                if relay_on {
                    c.relay(true)?;
                }
                match c.read()? {
                    ReadOutcome::Measurement(m) => Ok(m.to_json()),
                    ReadOutcome::Busy => Ok("BUSY".to_string()),
                }
            }, out)?;
        }
        Cmd::Validate {
            protocol,
            scenario,
            n,
            interval_s,
            format,
            out: path,
        } => {
            if n < 2 {
                return Err(Failure::Usage("--n must be at least 2".into()));
            }
            if !(interval_s.is_finite() && interval_s >= 0.0) {
                return Err(Failure::Usage("--interval-s must be >= 0".into()));
            }
            let s = load_scenario(&scenario)?;
            let harness = Harness {
                interval_virtual_s: interval_s,
                ..Harness::default()
            };
            let reports: Vec<ValidationReport> = match protocol {
                ProtocolArg::Lag => vec![harness.run_lag(&s, n)?],
                ProtocolArg::Rms => harness.run_rms(&s, n)?.to_vec(),
                ProtocolArg::Power => vec![harness.run_power(&s, n)?],
            };
            let rendered = match format {
                ReportFormat::Table => report::render_table(&reports),
                ReportFormat::Json => report::render_json(&reports) + "\n",
                ReportFormat::Csv => report::render_csv(&reports),
            };
            out.write_all(rendered.as_bytes())?;
            if let Some(p) = path {
                std::fs::write(p, report::render_json(&reports) + "\n")?;
            }
        }
        Cmd::Log {
            action:
                LogCmd::Export {
                    scenario,
                    duration_us,
                    format,
                    samples,
                    out: path,
                },
        } => {
            let s = load_scenario(&scenario)?;
            let log = record_log(s, duration_us, samples)?;
            let mut w = sink(&path, out)?;
            match format {
                LogFormat::Jsonl => log.write_jsonl(&mut w)?,
                LogFormat::Csv => log.write_csv(&mut w)?,
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn with_client(
    target: &Target,
    action: impl FnOnce(&mut Client<Box<dyn Transport>>) -> Result<String, HostError>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let transport: Box<dyn Transport> = match &target.connect {
        Some(addr) => Box::new(TcpTransport::connect(addr.as_str())?),
        None => {
            let s = load_scenario(&target.scenario)?;
            let device =
                Device::new(s, DeviceOptions::default(), DeviceConfig::default()).map_err(HostError::from)?;
            Box::new(InProcess::new(device, target.settle_us))
        }
    };
    let mut client = Client::new(transport);
    let line = action(&mut client)?;
    writeln!(out, "{line}")?;
    Ok(())
}

impl Transport for Box<dyn Transport> {
    fn exchange(&mut self, line: &str) -> Result<String, HostError> {
        (**self).exchange(line)
    }
}

/// Runs an in-process plug with the relay closed for `duration_us` and logs
/// every measurement, and optionally every sample, in time order.
pub fn record_log(scenario: Scenario, duration_us: u64, samples: bool) -> Result<MeasurementLog, HostError> {
    let id = scenario.id.clone();
    let stream = if samples {
        Some(
            Scenario {
                duration_us,
                ..scenario.clone()
            }
            .run()?,
        )
    } else {
        None
    };
    let mut device = Device::new(scenario, DeviceOptions::default(), DeviceConfig::default())?;
    device.handle_line("RELAY ON");
    device.advance(duration_us);
    let mut log = MeasurementLog::new();
    let measurements = device.log();
    match stream {
        None => {
            for m in measurements {
                log.push_measurement(&id, m)?;
            }
        }
        Some(stream) => {
            // Merge both time-ordered sequences.
            let mut ms = measurements.iter().peekable();
            for sample in &stream.samples {
                while let Some(m) = ms.next_if(|m| m.t_us <= sample.t_us) {
                    log.push_measurement(&id, m)?;
                }
                log.push_sample(&id, sample)?;
            }
            for m in ms {
                log.push_measurement(&id, m)?;
            }
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            std::iter::once("voltplug").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(call(&["simulate", "--bogus"]).0, 2);
        assert_eq!(call(&[]).0, 2);
        assert_eq!(call(&["validate", "volts"]).0, 2);
        assert_eq!(call(&["validate", "lag", "--n", "1"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn runtime_errors_exit_1() {
        let (code, _, err) = call(&["validate", "power", "--scenario", "inductive", "--n", "3"]);
        assert_eq!(code, 1);
        assert!(err.contains("resistive"));
        assert_eq!(call(&["simulate", "--scenario", "missing.json"]).0, 1);
    }

    #[test]
    fn read_in_process() {
        let (code, out, _) = call(&["read", "--scenario", "resistive_clean"]);
        assert_eq!(code, 0);
        let m: crate::metering::Measurement = serde_json::from_str(out.trim()).unwrap();
        assert_eq!(m.irms, 0.0);
        let (_, out, _) = call(&["read", "--scenario", "resistive_clean", "--settle-us", "0"]);
        assert_eq!(out, "BUSY\n");
        assert_eq!(call(&["relay", "on", "--scenario", "resistive_clean"]).1, "OK\n");
        let (_, out, _) = call(&["read", "--scenario", "resistive_clean", "--relay-on"]);
        let m: crate::metering::Measurement = serde_json::from_str(out.trim()).unwrap();
        assert!(m.irms > 7.0);
    }

    #[test]
    fn log_is_monotone_with_samples() {
        let log = record_log(presets::preset("resistive_clean").unwrap(), 200_000, true).unwrap();
        let times: Vec<u64> = log.records().iter().map(|r| r.t_virtual_us).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
        assert!(log.len() > 800);
    }
}
