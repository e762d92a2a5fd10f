//! A virtual smart plug.
//!
//! * [`simkernel`] generates the mains waveform, the load current and the
//!   quantized sensor samples a plug would read.
//! * [`metering`] turns those samples into RMS values, powers and the
//!   voltage/current phase lag.
//! * [`device`] is the plug itself: relay, measurement loop and a serial
//!   endpoint with an AT configuration mode.
//! * [`wire`] is the line protocol shared by device and host.
//! * [`host`] drives a plug, runs the statistical validation protocols and
//!   implements the `voltplug` command line.

pub mod device;
pub mod host;
pub mod metering;
pub mod simkernel;
pub mod wire;

pub use device::{Device, DeviceConfig, DeviceMode, DeviceOptions};
pub use metering::{MeterConfig, Measurement};
pub use simkernel::{Sample, SampleStream, Scenario};
