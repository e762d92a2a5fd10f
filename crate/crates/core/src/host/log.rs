//! Append-only measurement and sample logs.

use std::io;

use serde::{Deserialize, Serialize};

use super::HostError;
use crate::metering::Measurement;
use crate::simkernel::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogEntry {
    Measurement(Measurement),
    Sample(Sample),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t_virtual_us: u64,
    pub scenario_id: String,
    pub entry: LogEntry,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementLog {
    records: Vec<LogRecord>,
}

pub const CSV_HEADER: [&str; 13] = [
    "t_virtual_us",
    "scenario_id",
    "type",
    "vrms",
    "irms",
    "p_active",
    "s_apparent",
    "q_reactive",
    "phi_deg",
    "cycles_used",
    "out_of_spec",
    "channel",
    "code",
];

impl MeasurementLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a record; its time may not precede the previous one.
    pub fn push(&mut self, record: LogRecord) -> Result<(), HostError> {
        if let Some(last) = self.records.last() {
            if record.t_virtual_us < last.t_virtual_us {
                return Err(HostError::NonMonotone {
                    last: last.t_virtual_us,
                    next: record.t_virtual_us,
                });
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn push_measurement(&mut self, scenario_id: &str, m: &Measurement) -> Result<(), HostError> {
        self.push(LogRecord {
            t_virtual_us: m.t_us,
            scenario_id: scenario_id.to_string(),
            entry: LogEntry::Measurement(m.clone()),
        })
    }

    pub fn push_sample(&mut self, scenario_id: &str, s: &Sample) -> Result<(), HostError> {
        self.push(LogRecord {
            t_virtual_us: s.t_us,
            scenario_id: scenario_id.to_string(),
            entry: LogEntry::Sample(*s),
        })
    }

    pub fn write_jsonl<W: io::Write>(&self, mut out: W) -> Result<(), HostError> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: io::BufRead>(input: R) -> Result<Self, HostError> {
        let mut log = Self::new();
        for line in input.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                log.push(serde_json::from_str(&line)?)?;
            }
        }
        Ok(log)
    }

    /// Flat CSV; columns that do not apply to a record are left empty.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), HostError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            let mut row = vec![String::new(); CSV_HEADER.len()];
            row[0] = r.t_virtual_us.to_string();
            row[1] = r.scenario_id.clone();
            match &r.entry {
                LogEntry::Measurement(m) => {
                    row[2] = "measurement".into();
                    row[3] = m.vrms.to_string();
                    row[4] = m.irms.to_string();
                    row[5] = m.p_active.to_string();
                    row[6] = m.s_apparent.to_string();
                    row[7] = m.q_reactive.to_string();
                    row[8] = m.phi_deg.map(|p| p.to_string()).unwrap_or_default();
                    row[9] = m.cycles_used.to_string();
                    row[10] = m.out_of_spec.to_string();
                }
                LogEntry::Sample(s) => {
                    row[2] = "sample".into();
                    row[11] = match s.channel {
                        crate::simkernel::Channel::Voltage => "V".into(),
                        crate::simkernel::Channel::Current => "I".into(),
                    };
                    row[12] = s.code.to_string();
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simkernel::Channel;

    fn m(t_us: u64) -> Measurement {
        Measurement {
            vrms: 127.0,
            irms: 1.0,
            p_active: 127.0,
            s_apparent: 127.0,
            q_reactive: 0.0,
            phi_deg: Some(0.5),
            t_us,
            cycles_used: 2,
            out_of_spec: false,
        }
    }

    #[test]
    fn append_only_and_monotone() {
        let mut log = MeasurementLog::new();
        log.push_measurement("a", &m(10)).unwrap();
        log.push_measurement("a", &m(10)).unwrap();
        assert!(matches!(
            log.push_measurement("a", &m(9)),
            Err(HostError::NonMonotone { last: 10, next: 9 })
        ));
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn jsonl_round_trip_and_csv() {
        let mut log = MeasurementLog::new();
        log.push_measurement("a", &m(10)).unwrap();
        log.push_sample(
            "a",
            &Sample {
                t_us: 20,
                channel: Channel::Current,
                code: 512,
                saturated: false,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"type\":\"measurement\""));
        assert_eq!(MeasurementLog::read_jsonl(&buf[..]).unwrap(), log);
        let mut csv_buf = Vec::new();
        log.write_csv(&mut csv_buf).unwrap();
        let csv_text = String::from_utf8(csv_buf).unwrap();
        assert_eq!(csv_text.lines().count(), 3);
        assert!(csv_text.lines().nth(2).unwrap().ends_with(",I,512"));
    }
}
