use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::HostError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Lag,
    Rms,
    Power,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Lag => "lag",
            Protocol::Rms => "rms",
            Protocol::Power => "power",
        }
    }
}

/// Arithmetic mean and population (n-divisor) standard deviation.
pub fn stats(values: &[f64]) -> Result<(f64, f64), HostError> {
    if values.len() < 2 {
        return Err(HostError::InsufficientData(format!(
            "statistics need at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub protocol: Protocol,
    /// Which estimator produced the values (`truth`, `peak`, `direct`, ...).
    pub method: String,
    pub unit: String,
    pub scenario_id: String,
    pub seed: u64,
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_estimator: String,
    pub reference_value: Option<f64>,
    pub error_abs: Option<f64>,
    pub error_pct: Option<f64>,
    pub values: Vec<f64>,
}

impl ValidationReport {
    /// Builds a report; error fields are filled only when a reference exists,
    /// and the percentage only when that reference is non-zero.
    pub fn from_values(
        protocol: Protocol,
        method: &str,
        unit: &str,
        scenario_id: &str,
        seed: u64,
        values: Vec<f64>,
        reference_value: Option<f64>,
    ) -> Result<Self, HostError> {
        let (mean, std_dev) = stats(&values)?;
        let error_abs = reference_value.map(|r| (mean - r).abs());
        let error_pct = reference_value
            .filter(|r| *r != 0.0)
            .map(|r| 100.0 * (mean - r).abs() / r.abs());
        Ok(Self {
            protocol,
            method: method.to_string(),
            unit: unit.to_string(),
            scenario_id: scenario_id.to_string(),
            seed,
            n: values.len(),
            mean,
            std_dev,
            std_estimator: "population".to_string(),
            reference_value,
            error_abs,
            error_pct,
            values,
        })
    }
}

fn fmt2(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".to_string())
}

pub fn render_json(reports: &[ValidationReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

/// Fixed-width table with two decimals per number.
pub fn render_table(reports: &[ValidationReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# std_dev uses the population (n) divisor");
    let _ = writeln!(
        out,
        "{:<8} {:<10} {:<6} {:>4} {:>12} {:>10} {:>12} {:>10} {:>8}",
        "protocol", "method", "unit", "n", "mean", "std_dev", "reference", "error", "error_%"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<8} {:<10} {:<6} {:>4} {:>12} {:>10} {:>12} {:>10} {:>8}",
            r.protocol.as_str(),
            r.method,
            r.unit,
            r.n,
            format!("{:.2}", r.mean),
            format!("{:.2}", r.std_dev),
            fmt2(r.reference_value),
            fmt2(r.error_abs),
            fmt2(r.error_pct),
        );
    }
    out
}

pub fn render_csv(reports: &[ValidationReport]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "protocol",
            "method",
            "unit",
            "scenario_id",
            "seed",
            "n",
            "mean",
            "std_dev",
            "std_estimator",
            "reference_value",
            "error_abs",
            "error_pct",
        ])
        .expect("in-memory csv");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        writer
            .write_record([
                r.protocol.as_str().to_string(),
                r.method.clone(),
                r.unit.clone(),
                r.scenario_id.clone(),
                r.seed.to_string(),
                r.n.to_string(),
                r.mean.to_string(),
                r.std_dev.to_string(),
                r.std_estimator.clone(),
                opt(r.reference_value),
                opt(r.error_abs),
                opt(r.error_pct),
            ])
            .expect("in-memory csv");
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("ascii csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_examples() {
        assert_eq!(stats(&[5.0, 5.0, 5.0]).unwrap(), (5.0, 0.0));
        let (m, s) = stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - 1.118_033_988_749_895).abs() < 1e-12);
        assert!(stats(&[]).is_err());
        assert!(stats(&[1.0]).is_err());
    }

    #[test]
    fn error_fields_follow_reference() {
        let r = ValidationReport::from_values(Protocol::Lag, "crossing", "deg", "s", 1, vec![1.0, 3.0], None)
            .unwrap();
        assert_eq!((r.error_abs, r.error_pct), (None, None));
        let r = ValidationReport::from_values(Protocol::Lag, "crossing", "deg", "s", 1, vec![1.0, 3.0], Some(0.0))
            .unwrap();
        assert_eq!((r.error_abs, r.error_pct), (Some(2.0), None));
        let r = ValidationReport::from_values(Protocol::Rms, "peak", "V", "s", 1, vec![99.0, 101.0], Some(50.0))
            .unwrap();
        assert_eq!((r.error_abs, r.error_pct), (Some(50.0), Some(100.0)));
    }

    #[test]
    fn table_matches_json_at_two_decimals() {
        let r = ValidationReport::from_values(
            Protocol::Rms,
            "direct",
            "V",
            "s",
            7,
            vec![131.771, 131.2049, 130.9],
            Some(131.0),
        )
        .unwrap();
        let table = render_table(std::slice::from_ref(&r));
        let row = table.lines().nth(2).unwrap();
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols[4], format!("{:.2}", r.mean));
        assert_eq!(cols[5], format!("{:.2}", r.std_dev));
        assert_eq!(cols[7], format!("{:.2}", r.error_abs.unwrap()));
        let back: Vec<ValidationReport> = serde_json::from_str(&render_json(std::slice::from_ref(&r))).unwrap();
        assert_eq!(back[0], r);
        assert!(render_csv(&[r]).starts_with("protocol,method"));
    }
}
