//! Deterministic model of the world the plug observes.
//!
//! A [`WaveformSpec`] describes the mains line and the attached load, a
//! [`SensorChain`] maps line quantities to the millivolt levels seen at the
//! microcontroller pins, and an [`AdcModel`] turns those into integer codes.
//! [`Sampler`] ties them together on a virtual microsecond clock, reading the
//! voltage channel first and the current channel `skew_us` later, the way a
//! single multiplexed converter does.

use std::f64::consts::{PI, SQRT_2};
use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, SimError> {
    Err(SimError::Config(msg.into()))
}

/// One harmonic component of a switched-mode load current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    /// Amplitude relative to the fundamental, 0..=1.
    pub amplitude: f64,
    #[serde(default)]
    pub phase_deg: f64,
}

/// Load attached to the plug.
///
/// For `inductive` and `switched` loads `irms` is the RMS of the
/// fundamental current component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LoadModel {
    Resistive {
        resistance: f64,
    },
    Inductive {
        phase_deg: f64,
        irms: f64,
    },
    Switched {
        irms: f64,
        #[serde(default)]
        phase_deg: f64,
        #[serde(default)]
        harmonics: Vec<Harmonic>,
    },
}

impl LoadModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let check_phase = |phase_deg: f64| {
            if !(0.0..90.0).contains(&phase_deg) {
                return config_err(format!("phase_deg {phase_deg} outside [0, 90)"));
            }
            Ok(())
        };
        let check_irms = |irms: f64| {
            if !(irms >= 0.0 && irms.is_finite()) {
                return config_err(format!("irms {irms} must be >= 0"));
            }
            Ok(())
        };
        match self {
            LoadModel::Resistive { resistance } => {
                if !(*resistance > 0.0 && resistance.is_finite()) {
                    return config_err(format!("resistance {resistance} must be > 0"));
                }
            }
            LoadModel::Inductive { phase_deg, irms } => {
                check_phase(*phase_deg)?;
                check_irms(*irms)?;
            }
            LoadModel::Switched {
                irms,
                phase_deg,
                harmonics,
            } => {
                check_phase(*phase_deg)?;
                check_irms(*irms)?;
                let mut seen = Vec::with_capacity(harmonics.len());
                for h in harmonics {
                    if h.order < 3 || h.order % 2 == 0 {
                        return config_err(format!("harmonic order {} must be odd and >= 3", h.order));
                    }
                    if seen.contains(&h.order) {
                        return config_err(format!("harmonic order {} declared twice", h.order));
                    }
                    if !(0.0..=1.0).contains(&h.amplitude) {
                        return config_err(format!("harmonic amplitude {} outside [0, 1]", h.amplitude));
                    }
                    seen.push(h.order);
                }
            }
        }
        Ok(())
    }
}

/// Line-referred additive noise. `drift_sigma_v` is the spread of the line
/// RMS voltage between readings taken minutes apart; it is only consulted
/// by the validation protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(default)]
    pub sigma_v: f64,
    #[serde(default)]
    pub sigma_i: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub drift_sigma_v: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_v: 0.0,
            sigma_i: 0.0,
            seed: 0,
            drift_sigma_v: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("sigma_v", self.sigma_v),
            ("sigma_i", self.sigma_i),
            ("drift_sigma_v", self.drift_sigma_v),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return config_err(format!("{name} {v} must be >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformSpec {
    pub vrms: f64,
    #[serde(default = "default_freq")]
    pub freq_hz: f64,
    #[serde(default)]
    pub phase0_deg: f64,
    pub load: LoadModel,
    #[serde(default)]
    pub noise: NoiseModel,
}

fn default_freq() -> f64 {
    60.0
}

impl WaveformSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.vrms > 0.0 && self.vrms.is_finite()) {
            return config_err(format!("vrms {} must be > 0", self.vrms));
        }
        if !(self.freq_hz > 0.0 && self.freq_hz.is_finite()) {
            return config_err(format!("freq_hz {} must be > 0", self.freq_hz));
        }
        self.load.validate()?;
        self.noise.validate()
    }

    pub fn period_us(&self) -> f64 {
        1e6 / self.freq_hz
    }

    /// Noise-free line voltage and load current at `t_us`.
    pub fn instantaneous(&self, t_us: f64) -> (f64, f64) {
        let omega_t = 2.0 * PI * self.freq_hz * t_us * 1e-6 + self.phase0_deg.to_radians();
        let v = SQRT_2 * self.vrms * omega_t.sin();
        let i = match &self.load {
            LoadModel::Resistive { resistance } => v / resistance,
            LoadModel::Inductive { phase_deg, irms } => {
                SQRT_2 * irms * (omega_t - phase_deg.to_radians()).sin()
            }
            LoadModel::Switched {
                irms,
                phase_deg,
                harmonics,
            } => {
                let fundamental = (omega_t - phase_deg.to_radians()).sin();
                let distortion: f64 = harmonics
                    .iter()
                    .map(|h| h.amplitude * (h.order as f64 * omega_t - h.phase_deg.to_radians()).sin())
                    .sum();
                SQRT_2 * irms * (fundamental + distortion)
            }
        };
        (v, i)
    }
}

/// Free-function form of [`WaveformSpec::instantaneous`].
pub fn instantaneous(spec: &WaveformSpec, t_us: f64) -> (f64, f64) {
    spec.instantaneous(t_us)
}

/// How the voltage sensor maps line volts to pin millivolts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VoltageMode {
    /// Transformer ratio times divider gain.
    #[default]
    Ideal,
    /// Single fitted constant `k_v_empirical_mv_per_v`.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorChain {
    pub acs_sensitivity_mv_per_a: f64,
    pub acs_vcc_mv: f64,
    pub acs_quiescent_mv: f64,
    pub xfmr_ratio: f64,
    pub divider_gain: f64,
    pub dc_level_mv: f64,
    pub k_v_empirical_mv_per_v: f64,
    pub voltage_mode: VoltageMode,
}

/// ACS712 sensitivities for the 5 A, 20 A and 30 A parts.
pub const ACS712_SENSITIVITIES_MV_PER_A: [f64; 3] = [185.0, 100.0, 66.0];

impl Default for SensorChain {
    fn default() -> Self {
        Self {
            acs_sensitivity_mv_per_a: 66.0,
            acs_vcc_mv: 5000.0,
            acs_quiescent_mv: 2500.0,
            xfmr_ratio: 6.0 / 100.0,
            divider_gain: 1.2 / 13.2,
            dc_level_mv: 2500.0,
            k_v_empirical_mv_per_v: 5.2,
            voltage_mode: VoltageMode::Ideal,
        }
    }
}

impl SensorChain {
    pub fn validate(&self) -> Result<(), SimError> {
        if !ACS712_SENSITIVITIES_MV_PER_A.contains(&self.acs_sensitivity_mv_per_a) {
            return config_err(format!(
                "acs_sensitivity_mv_per_a {} is not one of 185, 100, 66",
                self.acs_sensitivity_mv_per_a
            ));
        }
        if !(self.xfmr_ratio > 0.0 && self.xfmr_ratio < 1.0) {
            return config_err(format!("xfmr_ratio {} outside (0, 1)", self.xfmr_ratio));
        }
        if !(self.divider_gain > 0.0 && self.divider_gain < 1.0) {
            return config_err(format!("divider_gain {} outside (0, 1)", self.divider_gain));
        }
        if !(self.dc_level_mv > 0.0 && self.dc_level_mv < self.acs_vcc_mv) {
            return config_err(format!("dc_level_mv {} outside (0, vcc)", self.dc_level_mv));
        }
        if !(self.k_v_empirical_mv_per_v > 0.0) {
            return config_err("k_v_empirical_mv_per_v must be > 0");
        }
        Ok(())
    }

    /// Millivolts at the ADC pin per line volt, excluding the DC level.
    pub fn voltage_gain_mv_per_v(&self) -> f64 {
        match self.voltage_mode {
            VoltageMode::Ideal => 1000.0 * self.xfmr_ratio * self.divider_gain,
            VoltageMode::Empirical => self.k_v_empirical_mv_per_v,
        }
    }

    /// Pin-to-line ratio computed from the peak design point including the
    /// DC level (3.7 V / 220 V ≈ 16.8 mV/V for the defaults). It is kept for
    /// reference only: because it folds the DC bias into the slope it does not
    /// describe the AC transfer and is not used for conversion.
    pub fn dc_inclusive_linearity_mv_per_v(&self, v_in_peak: f64) -> f64 {
        let ideal = 1000.0 * self.xfmr_ratio * self.divider_gain;
        (self.dc_level_mv + ideal * v_in_peak) / v_in_peak
    }

    /// Sensor outputs in millivolts for the given line quantities.
    pub fn sense(&self, v_line: f64, i_line: f64) -> (f64, f64) {
        let v_sens = self.dc_level_mv + self.voltage_gain_mv_per_v() * v_line;
        let i_sens = self.acs_quiescent_mv + self.acs_sensitivity_mv_per_a * i_line;
        (v_sens, i_sens)
    }
}

pub fn sense(v_line: f64, i_line: f64, chain: &SensorChain) -> (f64, f64) {
    chain.sense(v_line, i_line)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdcModel {
    pub bits: u32,
    pub vref_mv: u32,
}

impl Default for AdcModel {
    fn default() -> Self {
        Self {
            bits: 10,
            vref_mv: 5000,
        }
    }
}

impl AdcModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(1..=16).contains(&self.bits) {
            return config_err(format!("bits {} outside 1..=16", self.bits));
        }
        if self.vref_mv == 0 {
            return config_err("vref_mv must be > 0");
        }
        Ok(())
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    pub fn max_code(&self) -> u16 {
        (self.levels() - 1) as u16
    }

    /// Millivolts per code step.
    pub fn lsb_mv(&self) -> f64 {
        self.vref_mv as f64 / self.levels() as f64
    }

    /// Returns the code and whether the input had to be clamped.
    pub fn quantize(&self, volts_mv: f64) -> (u16, bool) {
        let raw = (volts_mv * self.levels() as f64 / self.vref_mv as f64).floor();
        let max = self.max_code() as f64;
        if raw.is_nan() || raw < 0.0 {
            (0, true)
        } else if raw > max {
            (self.max_code(), true)
        } else {
            (raw as u16, false)
        }
    }
}

pub fn quantize(volts_mv: f64, adc: &AdcModel) -> (u16, bool) {
    adc.quantize(volts_mv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerTiming {
    pub period_us: u64,
    pub skew_us: u64,
    pub start_us: u64,
}

impl Default for SamplerTiming {
    fn default() -> Self {
        Self {
            period_us: 500,
            skew_us: 112,
            start_us: 0,
        }
    }
}

impl SamplerTiming {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.period_us == 0 || self.period_us <= self.skew_us {
            return config_err(format!(
                "timing requires period_us > skew_us (got {} and {})",
                self.period_us, self.skew_us
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "V")]
    Voltage,
    #[serde(rename = "I")]
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub t_us: u64,
    pub channel: Channel,
    pub code: u16,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampleStream {
    pub samples: Vec<Sample>,
}

pub const CSV_HEADER: &str = "t_us,channel,code,saturated";

impl SampleStream {
    pub fn channel(&self, channel: Channel) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.channel == channel)
    }

    pub fn voltage(&self) -> Vec<Sample> {
        self.channel(Channel::Voltage).copied().collect()
    }

    pub fn current(&self) -> Vec<Sample> {
        self.channel(Channel::Current).copied().collect()
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), SimError> {
        let mut writer = csv::Writer::from_writer(out);
        for s in &self.samples {
            writer.serialize(s)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, SimError> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != CSV_HEADER {
            return config_err(format!("unexpected csv header {header:?}"));
        }
        let samples = reader.deserialize().collect::<Result<Vec<Sample>, _>>()?;
        Ok(Self { samples })
    }
}

/// Everything needed to reproduce a sample stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_scenario_id")]
    pub id: String,
    pub waveform: WaveformSpec,
    #[serde(default)]
    pub chain: SensorChain,
    #[serde(default)]
    pub adc: AdcModel,
    #[serde(default)]
    pub timing: SamplerTiming,
    #[serde(default = "default_duration")]
    pub duration_us: u64,
}

fn default_scenario_id() -> String {
    "scenario".to_string()
}

fn default_duration() -> u64 {
    1_000_000
}

impl Scenario {
    pub fn new(id: impl Into<String>, waveform: WaveformSpec) -> Self {
        Self {
            id: id.into(),
            waveform,
            chain: SensorChain::default(),
            adc: AdcModel::default(),
            timing: SamplerTiming::default(),
            duration_us: default_duration(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.waveform.validate()?;
        self.chain.validate()?;
        self.adc.validate()?;
        self.timing.validate()
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.waveform.noise.seed = seed;
        self
    }

    pub fn sampler(&self) -> Result<Sampler, SimError> {
        Sampler::new(&self.waveform, &self.chain, &self.adc, &self.timing)
    }

    pub fn run(&self) -> Result<SampleStream, SimError> {
        run_sampler(&self.waveform, &self.chain, &self.adc, &self.timing, self.duration_us)
    }
}

/// Incremental sample generator.
///
/// Each step yields one voltage sample at `start + k * period` and one current
/// sample `skew` later. Noise is drawn for every sample regardless of the
/// relay state so the random sequence depends only on the seed.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: WaveformSpec,
    chain: SensorChain,
    adc: AdcModel,
    timing: SamplerTiming,
    rng: ChaCha8Rng,
    k: u64,
}

impl Sampler {
    pub fn new(
        spec: &WaveformSpec,
        chain: &SensorChain,
        adc: &AdcModel,
        timing: &SamplerTiming,
    ) -> Result<Self, SimError> {
        spec.validate()?;
        chain.validate()?;
        adc.validate()?;
        timing.validate()?;
        Ok(Self {
            spec: spec.clone(),
            chain: *chain,
            adc: *adc,
            timing: *timing,
            rng: ChaCha8Rng::seed_from_u64(spec.noise.seed),
            k: 0,
        })
    }

    pub fn timing(&self) -> &SamplerTiming {
        &self.timing
    }

    /// Timestamp of the next voltage sample.
    pub fn next_t_us(&self) -> u64 {
        self.timing.start_us + self.k * self.timing.period_us
    }

    /// Produces the next (voltage, current) pair. With `load_connected`
    /// false the line current, noise included, is zero.
    pub fn next_pair(&mut self, load_connected: bool) -> (Sample, Sample) {
        let t_v = self.next_t_us();
        let t_i = t_v + self.timing.skew_us;
        let nv: f64 = StandardNormal.sample(&mut self.rng);
        let ni: f64 = StandardNormal.sample(&mut self.rng);
        self.k += 1;

        let (v_line, _) = self.spec.instantaneous(t_v as f64);
        let v_line = v_line + self.spec.noise.sigma_v * nv;
        let i_line = if load_connected {
            let (_, i) = self.spec.instantaneous(t_i as f64);
            i + self.spec.noise.sigma_i * ni
        } else {
            0.0
        };

        let (v_mv, _) = self.chain.sense(v_line, 0.0);
        let (_, i_mv) = self.chain.sense(0.0, i_line);
        let (v_code, v_sat) = self.adc.quantize(v_mv);
        let (i_code, i_sat) = self.adc.quantize(i_mv);
        (
            Sample {
                t_us: t_v,
                channel: Channel::Voltage,
                code: v_code,
                saturated: v_sat,
            },
            Sample {
                t_us: t_i,
                channel: Channel::Current,
                code: i_code,
                saturated: i_sat,
            },
        )
    }
}

/// Samples `duration_us` of virtual time with the load connected.
pub fn run_sampler(
    spec: &WaveformSpec,
    chain: &SensorChain,
    adc: &AdcModel,
    timing: &SamplerTiming,
    duration_us: u64,
) -> Result<SampleStream, SimError> {
    let mut sampler = Sampler::new(spec, chain, adc, timing)?;
    if duration_us < timing.period_us {
        return config_err(format!(
            "duration_us {duration_us} shorter than one sampling period {}",
            timing.period_us
        ));
    }
    let steps = duration_us.div_ceil(timing.period_us);
    let mut samples = Vec::with_capacity(2 * steps as usize);
    for _ in 0..steps {
        let (v, i) = sampler.next_pair(true);
        samples.push(v);
        samples.push(i);
    }
    Ok(SampleStream { samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resistive(vrms: f64, r: f64) -> WaveformSpec {
        WaveformSpec {
            vrms,
            freq_hz: 60.0,
            phase0_deg: 0.0,
            load: LoadModel::Resistive { resistance: r },
            noise: NoiseModel::noiseless(),
        }
    }

    #[test]
    fn positive_peak_of_127v_line() {
        let spec = resistive(127.0, 10.0);
        let quarter = spec.period_us() / 4.0;
        let (v, i) = spec.instantaneous(quarter);
        assert!((v - 179.605).abs() < 1e-2, "{v}");
        assert!((i - v / 10.0).abs() < 1e-12);
        assert_eq!(spec.instantaneous(0.0).0, 0.0);
    }

    #[test]
    fn inductive_current_crossing_offset() {
        let spec = WaveformSpec {
            load: LoadModel::Inductive {
                phase_deg: 42.0,
                irms: 1.0,
            },
            ..resistive(127.0, 1.0)
        };
        // Upward crossing of the current: solve by bisection on the continuous waveform.
        let (mut lo, mut hi) = (100.0, 5000.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if spec.instantaneous(mid).1 < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 1944.444).abs() < 1e-2, "{lo}");
    }

    #[test]
    fn sensor_transfer_points() {
        let chain = SensorChain::default();
        assert_eq!(chain.sense(0.0, 0.0), (2500.0, 2500.0));
        assert!((chain.sense(0.0, 30.0).1 - 4480.0).abs() < 1e-9);
        assert!((chain.sense(220.0, 0.0).0 - 3700.0).abs() < 1e-9);
        assert!((220.0 * chain.xfmr_ratio - 13.2).abs() < 1e-12);
        assert!((13.2 * chain.divider_gain - 1.2).abs() < 1e-12);
        let empirical = SensorChain {
            voltage_mode: VoltageMode::Empirical,
            ..chain
        };
        assert!((empirical.sense(100.0, 0.0).0 - 3020.0).abs() < 1e-9);
        assert!((chain.dc_inclusive_linearity_mv_per_v(220.0) - 16.818).abs() < 1e-3);
    }

    #[test]
    fn quantize_examples() {
        let adc = AdcModel::default();
        assert_eq!(adc.quantize(2500.0), (512, false));
        assert_eq!(adc.quantize(0.0), (0, false));
        assert_eq!(adc.quantize(5000.0), (1023, true));
        assert_eq!(adc.quantize(-3.0), (0, true));
        assert_eq!(adc.quantize(3700.0), (757, false));
    }

    #[test]
    fn invalid_configurations_rejected() {
        let bad_timing = SamplerTiming {
            period_us: 100,
            skew_us: 100,
            start_us: 0,
        };
        assert!(bad_timing.validate().is_err());
        assert!(LoadModel::Resistive { resistance: 0.0 }.validate().is_err());
        assert!(LoadModel::Inductive {
            phase_deg: 90.0,
            irms: 1.0
        }
        .validate()
        .is_err());
        let dup = LoadModel::Switched {
            irms: 1.0,
            phase_deg: 0.0,
            harmonics: vec![
                Harmonic {
                    order: 3,
                    amplitude: 0.2,
                    phase_deg: 0.0,
                },
                Harmonic {
                    order: 3,
                    amplitude: 0.1,
                    phase_deg: 0.0,
                },
            ],
        };
        assert!(dup.validate().is_err());
        let even = LoadModel::Switched {
            irms: 1.0,
            phase_deg: 0.0,
            harmonics: vec![Harmonic {
                order: 4,
                amplitude: 0.2,
                phase_deg: 0.0,
            }],
        };
        assert!(even.validate().is_err());
        let spec = resistive(127.0, 10.0);
        let short = run_sampler(
            &spec,
            &SensorChain::default(),
            &AdcModel::default(),
            &SamplerTiming::default(),
            10,
        );
        assert!(matches!(short, Err(SimError::Config(_))));
    }

    #[test]
    fn zero_skew_streams_are_proportional() {
        let spec = resistive(127.0, 16.0);
        let chain = SensorChain::default();
        let adc = AdcModel::default();
        let timing = SamplerTiming {
            period_us: 500,
            skew_us: 0,
            start_us: 0,
        };
        let stream = run_sampler(&spec, &chain, &adc, &timing, 50_000).unwrap();
        let v = stream.voltage();
        let i = stream.current();
        assert_eq!(v.len(), i.len());
        for (vs, is) in v.iter().zip(&i) {
            assert_eq!(vs.t_us, is.t_us);
            let (v_line, i_line) = spec.instantaneous(vs.t_us as f64);
            let dv = vs.code as f64 - adc.quantize(chain.sense(v_line, 0.0).0).0 as f64;
            let di = is.code as f64 - adc.quantize(chain.sense(0.0, i_line).1).0 as f64;
            assert_eq!((dv, di), (0.0, 0.0));
            assert!(v_line * i_line >= 0.0);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let mut spec = resistive(127.0, 16.0);
        spec.noise = NoiseModel {
            sigma_v: 2.0,
            sigma_i: 0.05,
            seed: 42,
            drift_sigma_v: 0.0,
        };
        let scenario = Scenario::new("det", spec);
        let a = scenario.run().unwrap().to_csv_string();
        let b = scenario.run().unwrap().to_csv_string();
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
        let c = scenario.clone().with_seed(43).run().unwrap().to_csv_string();
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip() {
        let scenario = Scenario::new("rt", resistive(127.0, 16.0));
        let stream = run_sampler(
            &scenario.waveform,
            &scenario.chain,
            &scenario.adc,
            &scenario.timing,
            5_000,
        )
        .unwrap();
        let text = stream.to_csv_string();
        let back = SampleStream::read_csv(text.as_bytes()).unwrap();
        assert_eq!(stream, back);
        assert!(SampleStream::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn scenario_json_uses_field_names() {
        let scenario = Scenario::new("json", resistive(127.0, 16.0));
        let json = scenario.to_json_pretty();
        for key in [
            "\"vrms\"",
            "\"freq_hz\"",
            "\"kind\": \"resistive\"",
            "\"acs_sensitivity_mv_per_a\"",
            "\"bits\"",
            "\"period_us\"",
            "\"skew_us\"",
        ] {
            assert!(json.contains(key), "missing {key}");
        }
        assert_eq!(Scenario::from_json(&json).unwrap(), scenario);
    }
}
