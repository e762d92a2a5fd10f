//! The three statistical validation protocols.
//!
//! Each reading is an independent measurement burst at its own point in
//! virtual time, `interval_virtual_s` apart. A burst samples enough pairs to
//! settle the offset filter and then one measurement window, exactly like the
//! device's first measurement. The mains RMS of every reading is perturbed by
//! the scenario's `drift_sigma_v`; the simulator knows that value, so it plays
//! the reference meter.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::report::{Protocol, ValidationReport};
use super::HostError;
use crate::device::DeviceOptions;
use crate::metering::{self, Analysis};
use crate::simkernel::{LoadModel, Sample, Scenario};

pub const DEFAULT_READINGS: usize = 30;
pub const DEFAULT_INTERVAL_S: f64 = 60.0;

/// One burst: the reference RMS voltage and everything the meter derived.
#[derive(Debug, Clone)]
pub struct Reading {
    pub start_us: u64,
    pub truth_vrms: f64,
    pub analysis: Analysis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Harness {
    pub options: DeviceOptions,
    pub interval_virtual_s: f64,
}

impl Default for Harness {
    fn default() -> Self {
        Self {
            options: DeviceOptions::default(),
            interval_virtual_s: DEFAULT_INTERVAL_S,
        }
    }
}

impl Harness {
    /// Samples in one burst: offset warm-up plus one measurement window.
    pub fn burst_len(&self, scenario: &Scenario) -> usize {
        let window_us = self.options.window_cycles as f64 * 1e6 / scenario.waveform.freq_hz;
        let in_window = (window_us / scenario.timing.period_us as f64).ceil() as usize;
        self.options.meter.offset_window.saturating_sub(1) + in_window + 1
    }

    /// Scenario for reading `j`: shifted start, drifted RMS and its own seed.
    pub fn reading_scenarios(&self, scenario: &Scenario, n: usize) -> Vec<Scenario> {
        let noise = scenario.waveform.noise;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let step_us = (self.interval_virtual_s * 1e6).round() as u64;
        (0..n)
            .map(|j| {
                let seed = rng.next_u64();
                let z: f64 = StandardNormal.sample(&mut rng);
                let mut s = scenario.clone().with_seed(seed);
                s.waveform.vrms = scenario.waveform.vrms + noise.drift_sigma_v * z;
                s.timing.start_us = scenario.timing.start_us + j as u64 * step_us;
                s
            })
            .collect()
    }

    pub fn readings(&self, scenario: &Scenario, n: usize) -> Result<Vec<Reading>, HostError> {
        scenario.validate()?;
        let len = self.burst_len(scenario);
        self.reading_scenarios(scenario, n)
            .into_iter()
            .map(|s| {
                let mut sampler = s.sampler()?;
                let (v, i): (Vec<Sample>, Vec<Sample>) =
                    (0..len).map(|_| sampler.next_pair(true)).unzip();
                let analysis =
                    metering::analyze(&v, &i, &s.chain, &s.adc, &self.options.meter)?;
                Ok(Reading {
                    start_us: s.timing.start_us,
                    truth_vrms: s.waveform.vrms,
                    analysis,
                })
            })
            .collect()
    }

    pub fn run_lag(&self, scenario: &Scenario, n: usize) -> Result<ValidationReport, HostError> {
        let reference = match scenario.waveform.load {
            LoadModel::Resistive { .. } => 0.0,
            LoadModel::Inductive { phase_deg, .. } | LoadModel::Switched { phase_deg, .. } => {
                phase_deg
            }
        };
        let readings = self.readings(scenario, n).map_err(|e| match e {
            HostError::Meter(m) => HostError::InsufficientData(m.to_string()),
            other => other,
        })?;
        let mut values = Vec::with_capacity(n);
        for r in &readings {
            let phi = r.analysis.measurement.phi_deg.ok_or_else(|| {
                HostError::InsufficientData(format!(
                    "no current crossing in the reading at {} us",
                    r.start_us
                ))
            })?;
            values.push(phi);
        }
        ValidationReport::from_values(
            Protocol::Lag,
            "crossing",
            "deg",
            &scenario.id,
            scenario.waveform.noise.seed,
            values,
            Some(reference),
        )
    }

    /// Reports for the reference meter, the peak method and the direct method.
    pub fn run_rms(&self, scenario: &Scenario, n: usize) -> Result<[ValidationReport; 3], HostError> {
        let readings = self.readings(scenario, n)?;
        let id = &scenario.id;
        let seed = scenario.waveform.noise.seed;
        let truth: Vec<f64> = readings.iter().map(|r| r.truth_vrms).collect();
        let peak: Vec<f64> = readings
            .iter()
            .map(|r| metering::rms_from_peak(r.analysis.v_peak))
            .collect();
        let direct: Vec<f64> = readings.iter().map(|r| r.analysis.measurement.vrms).collect();
        let truth_report =
            ValidationReport::from_values(Protocol::Rms, "truth", "V", id, seed, truth, None)?;
        let reference = Some(truth_report.mean);
        let peak =
            ValidationReport::from_values(Protocol::Rms, "peak", "V", id, seed, peak, reference)?;
        let direct =
            ValidationReport::from_values(Protocol::Rms, "direct", "V", id, seed, direct, reference)?;
        Ok([truth_report, peak, direct])
    }

    /// Report over the per-reading differences `s - p`. The reference is the
    /// mean apparent power, so `error_pct` is the mean difference relative to
    /// the mean of `s`.
    pub fn run_power(&self, scenario: &Scenario, n: usize) -> Result<ValidationReport, HostError> {
        if !matches!(scenario.waveform.load, LoadModel::Resistive { .. }) {
            return Err(HostError::Precondition(
                "the power protocol needs a resistive load".into(),
            ));
        }
        let readings = self.readings(scenario, n)?;
        let diffs: Vec<f64> = readings
            .iter()
            .map(|r| r.analysis.measurement.s_apparent - r.analysis.measurement.p_active)
            .collect();
        let s_mean = readings
            .iter()
            .map(|r| r.analysis.measurement.s_apparent)
            .sum::<f64>()
            / readings.len().max(1) as f64;
        let mut report = ValidationReport::from_values(
            Protocol::Power,
            "s_minus_p",
            "W",
            &scenario.id,
            scenario.waveform.noise.seed,
            diffs,
            Some(s_mean),
        )?;
        report.error_abs = Some(report.mean.abs());
        report.error_pct = (s_mean > 0.0).then(|| 100.0 * report.mean / s_mean);
        Ok(report)
    }
}

pub fn run_lag_protocol(scenario: &Scenario, n: usize) -> Result<ValidationReport, HostError> {
    Harness::default().run_lag(scenario, n)
}

/// Returns the truth, peak and direct reports, in that order.
pub fn run_rms_protocol(
    scenario: &Scenario,
    n: usize,
    interval_virtual_s: f64,
) -> Result<[ValidationReport; 3], HostError> {
    Harness {
        interval_virtual_s,
        ..Harness::default()
    }
    .run_rms(scenario, n)
}

pub fn run_power_protocol(scenario: &Scenario, n: usize) -> Result<ValidationReport, HostError> {
    Harness::default().run_power(scenario, n)
}
