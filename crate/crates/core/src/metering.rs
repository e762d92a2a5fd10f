//! Offset removal, code conversion, zero-crossing lag, RMS and power.
//!
//! Series are `(t_us, value)` points with `t_us` as `f64` microseconds.
//! Cycle-based quantities are integrated over the span between the first and
//! last falling zero crossing of the voltage, using the piecewise-linear
//! interpolant of the integrand. Every such integral has non-negative sample
//! weights, so `|P| <= Vrms * Irms` holds up to rounding.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simkernel::{AdcModel, Channel, Sample, SensorChain};

pub const DEFAULT_OFFSET_WINDOW: usize = 70;

/// Relative slack allowed when `s < |p|` before it is reported as an error.
pub const POWER_CONSISTENCY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MeterError {
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid crossing pair: vp={vp}, vn={vn}, tp={tp_us}, tn={tn_us}")]
    InvalidPair {
        vp: f64,
        vn: f64,
        tp_us: f64,
        tn_us: f64,
    },
    #[error("no matching voltage crossing: {0}")]
    Pairing(String),
    #[error("misaligned series: {0}")]
    Misaligned(String),
    #[error("apparent power {s} below |active power| {p}")]
    Inconsistent { s: f64, p: f64 },
}

pub type Result<T> = std::result::Result<T, MeterError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeterConfig {
    pub offset_window: usize,
    pub freq_hz: f64,
    /// Use the true current timestamps for crossings and resample current
    /// onto the voltage timestamps before multiplying. When off, each current
    /// sample is treated as if it had been taken with its voltage sample.
    pub skew_compensation: bool,
    /// Divide out the moving-average filter's attenuation at `freq_hz`.
    pub compensate_offset_filter: bool,
}

impl Default for MeterConfig {
    fn default() -> Self {
        Self {
            offset_window: DEFAULT_OFFSET_WINDOW,
            freq_hz: 60.0,
            skew_compensation: true,
            compensate_offset_filter: true,
        }
    }
}

impl MeterConfig {
    pub fn period_us(&self) -> f64 {
        1e6 / self.freq_hz
    }
}

/// Pin millivolts for a code, on the default 10-bit / 5000 mV converter.
pub fn adc_to_millivolts(code: u16) -> Result<f64> {
    adc_to_millivolts_with(code, &AdcModel::default())
}

pub fn adc_to_millivolts_with(code: u16, adc: &AdcModel) -> Result<f64> {
    if code > adc.max_code() {
        return Err(MeterError::Domain(format!(
            "code {code} exceeds {}",
            adc.max_code()
        )));
    }
    // Integer product first; the divisor is a power of two so the quotient is exact.
    Ok((code as u64 * adc.vref_mv as u64) as f64 / adc.levels() as f64)
}

/// Raw current including the sensor's quiescent offset.
pub fn code_to_current(code: u16, sensitivity_mv_per_a: f64) -> Result<f64> {
    if !(sensitivity_mv_per_a > 0.0) {
        return Err(MeterError::Domain(format!(
            "sensitivity {sensitivity_mv_per_a} must be > 0"
        )));
    }
    Ok(adc_to_millivolts(code)? / sensitivity_mv_per_a)
}

/// Raw line voltage including the DC bias, per the chain's voltage mode.
pub fn code_to_line_volts(code: u16, chain: &SensorChain, adc: &AdcModel) -> Result<f64> {
    Ok(adc_to_millivolts_with(code, adc)? / chain.voltage_gain_mv_per_v())
}

/// Output of [`remove_offset`]. The first `warmup` points had an incomplete
/// averaging window.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredSeries {
    pub points: Vec<(f64, f64)>,
    pub window: usize,
    pub warmup: usize,
}

impl CenteredSeries {
    pub fn settled(&self) -> &[(f64, f64)] {
        &self.points[self.warmup..]
    }

    pub fn is_warmup(&self, index: usize) -> bool {
        index < self.warmup
    }

    fn scale(&mut self, factor: f64) {
        for p in &mut self.points {
            p.1 *= factor;
        }
    }
}

/// Subtracts the mean of the trailing `window` raw values (current one
/// included) from each point.
pub fn remove_offset(raw: &[(f64, f64)], window: usize) -> Result<CenteredSeries> {
    if window == 0 {
        return Err(MeterError::Domain("offset window must be > 0".into()));
    }
    if raw.len() < window {
        return Err(MeterError::InsufficientData(format!(
            "{} points, offset window needs {window}",
            raw.len()
        )));
    }
    if raw.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(MeterError::Domain("timestamps must be strictly increasing".into()));
    }
    let points = raw
        .iter()
        .enumerate()
        .map(|(k, &(t, x))| {
            let lo = (k + 1).saturating_sub(window);
            let span = &raw[lo..=k];
            let sum: f64 = span.iter().map(|p| p.1).sum();
            let count = span.len() as f64;
            // Written as (count*x - sum)/count so a constant input yields exactly zero
            // whenever the sum is exact (e.g. integer ADC codes).
            (t, (count * x - sum) / count)
        })
        .collect();
    Ok(CenteredSeries {
        points,
        window,
        warmup: window - 1,
    })
}

/// Magnitude response of `x - mean(last window samples)` at `freq_hz` for
/// samples spaced `period_us` apart.
pub fn offset_filter_gain(window: usize, period_us: f64, freq_hz: f64) -> f64 {
    let omega = 2.0 * PI * freq_hz * period_us * 1e-6;
    let n = window as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for k in 0..window {
        let a = omega * k as f64;
        re += a.cos();
        im -= a.sin();
    }
    let (hr, hi) = (1.0 - re / n, -im / n);
    (hr * hr + hi * hi).sqrt()
}

/// Last positive sample before a falling crossing and the first negative one after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingPair {
    pub vp: f64,
    pub tp_us: f64,
    pub vn: f64,
    pub tn_us: f64,
}

impl CrossingPair {
    pub fn new(vp: f64, tp_us: f64, vn: f64, tn_us: f64) -> Result<Self> {
        let pair = Self { vp, tp_us, vn, tn_us };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vp > 0.0 && self.vn < 0.0 && self.tn_us > self.tp_us) {
            return Err(MeterError::InvalidPair {
                vp: self.vp,
                vn: self.vn,
                tp_us: self.tp_us,
                tn_us: self.tn_us,
            });
        }
        Ok(())
    }
}

/// Crossing instant from the four-point rational expression.
///
/// Times are re-referenced to the pair's midpoint before evaluation; the
/// expression is translation-equivariant and this keeps the squared time
/// terms small for large absolute timestamps.
pub fn zero_crossing(pair: &CrossingPair) -> Result<f64> {
    pair.validate()?;
    let mid = 0.5 * (pair.tp_us + pair.tn_us);
    let (tp, tn) = (pair.tp_us - mid, pair.tn_us - mid);
    let (vp, vn) = (pair.vp, pair.vn);
    let num = -(tp * tn * vp) + (vp * tn * tn) + (vn * tp * tp) - (vn * tp * tn);
    let den = (vp * tn) - (tn * vn) - (tp * vp) + (tp * vn);
    Ok(mid + num / den)
}

/// Fraction of the largest absolute sample used as the crossing hysteresis.
pub const CROSSING_HYSTERESIS: f64 = 0.25;

/// Falling crossings of a centered series.
///
/// Zero-valued samples are skipped so each pair is (last positive, first
/// negative). Detection is armed once the series exceeds `+hysteresis` and
/// disarmed when it falls below `-hysteresis`; every crossing seen while
/// armed belongs to one edge and the edge is reported as their mean. Noise
/// around a rising edge therefore never yields a falling crossing.
pub fn falling_crossings(points: &[(f64, f64)], hysteresis: f64) -> Vec<f64> {
    let h = hysteresis.max(0.0);
    let mut out = Vec::new();
    let mut armed = false;
    let mut edge: Vec<f64> = Vec::new();
    let mut last_positive: Option<(f64, f64)> = None;
    let flush = |edge: &mut Vec<f64>, out: &mut Vec<f64>| {
        if !edge.is_empty() {
            out.push(edge.iter().sum::<f64>() / edge.len() as f64);
            edge.clear();
        }
    };
    for &(t, x) in points {
        if x > h && !armed {
            armed = true;
            edge.clear();
        }
        if x > 0.0 {
            last_positive = Some((t, x));
        } else if x < 0.0 {
            if let Some((tp, vp)) = last_positive.take() {
                if armed {
                    let pair = CrossingPair {
                        vp,
                        tp_us: tp,
                        vn: x,
                        tn_us: t,
                    };
                    edge.push(zero_crossing(&pair).expect("pair built from signed samples"));
                }
            }
            if x < -h && armed {
                armed = false;
                flush(&mut edge, &mut out);
            }
        }
    }
    flush(&mut edge, &mut out);
    out
}

/// Hysteresis used by [`analyze`] for a series.
pub fn crossing_hysteresis(points: &[(f64, f64)]) -> f64 {
    CROSSING_HYSTERESIS * points.iter().map(|p| p.1.abs()).fold(0.0, f64::max)
}

/// Positive `phi_deg` means the current lags the voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagEstimate {
    pub td_us: f64,
    pub phi_deg: f64,
}

fn wrap_degrees(phi: f64) -> f64 {
    let mut wrapped = phi % 360.0;
    if wrapped <= -180.0 {
        wrapped += 360.0;
    } else if wrapped > 180.0 {
        wrapped -= 360.0;
    }
    wrapped
}

pub fn lag(zc_current_us: f64, zv_voltage_us: f64, freq_hz: f64) -> LagEstimate {
    let td_us = zc_current_us - zv_voltage_us;
    LagEstimate {
        td_us,
        phi_deg: wrap_degrees(td_us * 1e-6 * 360.0 * freq_hz),
    }
}

/// Pairs each current crossing with the nearest voltage crossing. Current
/// crossings with no voltage crossing within half a period are skipped; it is
/// an error if that leaves no pair at all.
pub fn pair_lags(current: &[f64], voltage: &[f64], freq_hz: f64) -> Result<Vec<LagEstimate>> {
    if current.is_empty() || voltage.is_empty() {
        return Err(MeterError::Pairing("no crossings to pair".into()));
    }
    let half = 0.5e6 / freq_hz;
    let lags: Vec<LagEstimate> = current
        .iter()
        .filter_map(|&zc| {
            let zv = voltage
                .iter()
                .copied()
                .min_by(|a, b| (a - zc).abs().total_cmp(&(b - zc).abs()))?;
            ((zc - zv).abs() <= half).then(|| lag(zc, zv, freq_hz))
        })
        .collect();
    if lags.is_empty() {
        return Err(MeterError::Pairing(format!(
            "{} current crossings, none within half a period of a voltage crossing",
            current.len()
        )));
    }
    Ok(lags)
}

pub fn rms_from_peak(v_peak: f64) -> f64 {
    v_peak / SQRT_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsValue {
    pub rms: f64,
    pub cycles_used: u32,
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let k = points.partition_point(|p| p.0 <= t);
    if k == 0 {
        return points[0].1;
    }
    if k == points.len() {
        return points[k - 1].1;
    }
    let (t0, y0) = points[k - 1];
    let (t1, y1) = points[k];
    y0 + (y1 - y0) * (t - t0) / (t1 - t0)
}

/// Mean over `[a, b]` of the piecewise-linear interpolant through `points`.
fn span_mean(points: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let mut integral = 0.0;
    for w in points.windows(2) {
        let (t0, t1) = (w[0].0, w[1].0);
        let lo = t0.max(a);
        let hi = t1.min(b);
        if hi <= lo {
            continue;
        }
        integral += 0.5 * (interpolate(points, lo) + interpolate(points, hi)) * (hi - lo);
    }
    integral / (b - a)
}

fn cycle_span(points: &[(f64, f64)], crossings: &[f64]) -> Result<(f64, f64, u32)> {
    if crossings.len() < 2 {
        return Err(MeterError::InsufficientData(format!(
            "{} crossings, need at least 2 for one full cycle",
            crossings.len()
        )));
    }
    let (a, b) = (crossings[0], crossings[crossings.len() - 1]);
    let (first, last) = match (points.first(), points.last()) {
        (Some(f), Some(l)) => (f.0, l.0),
        _ => return Err(MeterError::InsufficientData("empty series".into())),
    };
    if a < first || b > last || b <= a {
        return Err(MeterError::InsufficientData(
            "crossings outside the series span".into(),
        ));
    }
    Ok((a, b, (crossings.len() - 1) as u32))
}

/// RMS over the whole cycles between the first and last crossing.
pub fn true_rms(series: &[(f64, f64)], crossings: &[f64]) -> Result<RmsValue> {
    let (a, b, cycles_used) = cycle_span(series, crossings)?;
    let squares: Vec<(f64, f64)> = series.iter().map(|&(t, x)| (t, x * x)).collect();
    Ok(RmsValue {
        rms: span_mean(&squares, a, b).max(0.0).sqrt(),
        cycles_used,
    })
}

/// Linearly interpolates `current` onto the timestamps of `voltage`.
/// Voltage points outside the current's time range are dropped from both.
pub fn coregister(
    voltage: &[(f64, f64)],
    current: &[(f64, f64)],
) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let (Some(first), Some(last)) = (current.first(), current.last()) else {
        return (Vec::new(), Vec::new());
    };
    voltage
        .iter()
        .filter(|p| p.0 >= first.0 && p.0 <= last.0)
        .map(|&(t, v)| ((t, v), (t, interpolate(current, t))))
        .unzip()
}

/// Mean instantaneous power over whole cycles. Both series must share timestamps.
pub fn active_power(v: &[(f64, f64)], i: &[(f64, f64)], crossings: &[f64]) -> Result<f64> {
    if v.len() != i.len() || v.iter().zip(i).any(|(a, b)| a.0 != b.0) {
        return Err(MeterError::Misaligned(
            "voltage and current must share timestamps".into(),
        ));
    }
    let (a, b, _) = cycle_span(v, crossings)?;
    let product: Vec<(f64, f64)> = v.iter().zip(i).map(|(a, b)| (a.0, a.1 * b.1)).collect();
    Ok(span_mean(&product, a, b))
}

pub fn apparent_power(vrms: f64, irms: f64) -> Result<f64> {
    if !(vrms >= 0.0 && irms >= 0.0) {
        return Err(MeterError::Domain(format!(
            "rms values must be >= 0 (vrms={vrms}, irms={irms})"
        )));
    }
    Ok(vrms * irms)
}

pub fn reactive_power(s: f64, p: f64) -> Result<f64> {
    let p_abs = p.abs();
    if s >= p_abs {
        return Ok((s * s - p * p).max(0.0).sqrt());
    }
    if p_abs - s <= POWER_CONSISTENCY_TOLERANCE * p_abs.max(1e-300) {
        return Ok(0.0);
    }
    Err(MeterError::Inconsistent { s, p })
}

/// Snapshot reported over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub vrms: f64,
    pub irms: f64,
    pub p_active: f64,
    pub s_apparent: f64,
    pub q_reactive: f64,
    /// Absent when the current has no zero crossings (e.g. relay open).
    pub phi_deg: Option<f64>,
    pub t_us: u64,
    pub cycles_used: u32,
    /// Set by the device when `irms` exceeds the relay rating.
    #[serde(default)]
    pub out_of_spec: bool,
}

impl Measurement {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measurement serializes")
    }
}

/// Intermediate products of one metering pass.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub measurement: Measurement,
    pub voltage: CenteredSeries,
    pub current: CenteredSeries,
    pub voltage_crossings: Vec<f64>,
    pub current_crossings: Vec<f64>,
    pub lags: Vec<LagEstimate>,
    /// Largest centered voltage sample between the first and last crossing.
    pub v_peak: f64,
}

fn check_channel(samples: &[Sample], channel: Channel) -> Result<()> {
    if let Some(s) = samples.iter().find(|s| s.channel != channel) {
        return Err(MeterError::Misaligned(format!(
            "sample at {} us is on the wrong channel",
            s.t_us
        )));
    }
    Ok(())
}

fn center_codes(samples: &[Sample], adc: &AdcModel, window: usize) -> Result<CenteredSeries> {
    let mut raw = Vec::with_capacity(samples.len());
    for s in samples {
        if s.code > adc.max_code() {
            return Err(MeterError::Domain(format!(
                "code {} exceeds {}",
                s.code,
                adc.max_code()
            )));
        }
        raw.push((s.t_us as f64, s.code as f64));
    }
    remove_offset(&raw, window)
}

/// Runs the complete chain on one voltage and one current stream.
///
/// Offsets are removed in the code domain (integer sums keep a constant input
/// at exactly zero) and then scaled to line volts and amperes.
pub fn analyze(
    v_stream: &[Sample],
    i_stream: &[Sample],
    chain: &SensorChain,
    adc: &AdcModel,
    cfg: &MeterConfig,
) -> Result<Analysis> {
    check_channel(v_stream, Channel::Voltage)?;
    check_channel(i_stream, Channel::Current)?;
    let period = cfg.period_us();

    let mut voltage = center_codes(v_stream, adc, cfg.offset_window)?;
    let mut current = center_codes(i_stream, adc, cfg.offset_window)?;

    let lsb = adc.lsb_mv();
    let mut v_scale = lsb / chain.voltage_gain_mv_per_v();
    let mut i_scale = lsb / chain.acs_sensitivity_mv_per_a;
    if cfg.compensate_offset_filter && v_stream.len() > 1 {
        let dt = (v_stream[v_stream.len() - 1].t_us - v_stream[0].t_us) as f64
            / (v_stream.len() - 1) as f64;
        let gain = offset_filter_gain(cfg.offset_window, dt, cfg.freq_hz);
        if gain > 1e-3 {
            v_scale /= gain;
            i_scale /= gain;
        }
    }
    voltage.scale(v_scale);
    current.scale(i_scale);

    if !cfg.skew_compensation {
        if v_stream.len() != i_stream.len() {
            return Err(MeterError::Misaligned(format!(
                "{} voltage and {} current samples",
                v_stream.len(),
                i_stream.len()
            )));
        }
        for (k, (vs, is)) in v_stream.iter().zip(i_stream).enumerate() {
            if is.t_us < vs.t_us || (is.t_us - vs.t_us) as f64 >= period {
                return Err(MeterError::Misaligned(format!(
                    "current sample {k} is not paired with its voltage sample"
                )));
            }
            current.points[k].0 = voltage.points[k].0;
        }
    }

    let v_settled = voltage.settled();
    let i_settled = current.settled();
    let voltage_crossings = falling_crossings(v_settled, crossing_hysteresis(v_settled));
    let current_crossings = falling_crossings(i_settled, crossing_hysteresis(i_settled));

    let (v_reg, i_reg) = coregister(v_settled, i_settled);
    let vrms = true_rms(&v_reg, &voltage_crossings)?;
    let irms = true_rms(&i_reg, &voltage_crossings)?;
    let p_active = active_power(&v_reg, &i_reg, &voltage_crossings)?;
    let s_apparent = apparent_power(vrms.rms, irms.rms)?;
    let q_reactive = reactive_power(s_apparent, p_active)?;

    let (lags, phi_deg) = if current_crossings.is_empty() {
        (Vec::new(), None)
    } else {
        let lags = pair_lags(&current_crossings, &voltage_crossings, cfg.freq_hz)?;
        let phi = lags.iter().map(|l| l.phi_deg).sum::<f64>() / lags.len() as f64;
        (lags, Some(phi))
    };

    let (a, b) = (voltage_crossings[0], voltage_crossings[voltage_crossings.len() - 1]);
    let v_peak = v_settled
        .iter()
        .filter(|p| p.0 >= a && p.0 <= b)
        .map(|p| p.1)
        .fold(0.0, f64::max);

    let t_us = v_stream
        .last()
        .map(|s| s.t_us)
        .unwrap_or_default()
        .max(i_stream.last().map(|s| s.t_us).unwrap_or_default());

    Ok(Analysis {
        measurement: Measurement {
            vrms: vrms.rms,
            irms: irms.rms,
            p_active,
            s_apparent,
            q_reactive,
            phi_deg,
            t_us,
            cycles_used: vrms.cycles_used,
            out_of_spec: false,
        },
        voltage,
        current,
        voltage_crossings,
        current_crossings,
        lags,
        v_peak,
    })
}

pub fn measure(
    v_stream: &[Sample],
    i_stream: &[Sample],
    chain: &SensorChain,
    adc: &AdcModel,
    cfg: &MeterConfig,
) -> Result<Measurement> {
    analyze(v_stream, i_stream, chain, adc, cfg).map(|a| a.measurement)
}
