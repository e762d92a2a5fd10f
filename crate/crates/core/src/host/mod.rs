//! Host side: plug client, validation protocols, logs and the command line.

pub mod cli;
pub mod link;
pub mod log;
pub mod presets;
pub mod protocols;
pub mod report;
pub mod transcript;

use thiserror::Error;

use crate::device::DeviceError;
use crate::metering::MeterError;
use crate::simkernel::SimError;

pub use link::{serve, Client, InProcess, TcpTransport, Transport};
pub use log::{LogEntry, LogRecord, MeasurementLog};
pub use protocols::{run_lag_protocol, run_power_protocol, run_rms_protocol, Harness, Reading};
pub use report::{stats, Protocol, ValidationReport};

#[derive(Debug, Error)]
pub enum HostError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("device replied with an error: {0}")]
    Protocol(String),
    #[error("unexpected reply {0:?}")]
    UnexpectedReply(String),
    #[error("log records must be appended in time order: {last} then {next}")]
    NonMonotone { last: u64, next: u64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Meter(#[from] MeterError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
