//! Golden transcript replay.
//!
//! A transcript is a text file with one directive per line:
//!
//! ```text
//! # comment
//! @boot key_pin=1      power-cycle the plug with the key pin high or low
//! @advance 100000      move virtual time forward (microseconds)
//! > RELAY ON           bytes sent to the plug (LF appended)
//! < OK                 expected reply line, compared byte for byte
//! ```
//!
//! Blank lines are ignored. Sent lines are not validated, so malformed
//! frames can be exercised.

use thiserror::Error;

use crate::device::{Device, DeviceConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscriptError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: expected {expected:?}, got {actual:?}")]
    Mismatch {
        line: usize,
        expected: String,
        actual: String,
    },
    #[error("{count} reply line(s) never checked, first: {first:?}")]
    Unchecked { count: usize, first: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Boot { key_pin: bool },
    Advance(u64),
    Send(String),
    Expect(String),
}

pub fn parse(text: &str) -> Result<Vec<(usize, Step)>, TranscriptError> {
    let mut steps = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let syntax = |reason: &str| TranscriptError::Syntax {
            line,
            reason: reason.to_string(),
        };
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let step = if let Some(rest) = raw.strip_prefix("> ") {
            Step::Send(rest.to_string())
        } else if raw == ">" {
            Step::Send(String::new())
        } else if let Some(rest) = raw.strip_prefix("< ") {
            Step::Expect(rest.to_string())
        } else if let Some(rest) = raw.strip_prefix("@boot ") {
            match rest.trim() {
                "key_pin=0" => Step::Boot { key_pin: false },
                "key_pin=1" => Step::Boot { key_pin: true },
                _ => return Err(syntax("expected key_pin=0 or key_pin=1")),
            }
        } else if let Some(rest) = raw.strip_prefix("@advance ") {
            Step::Advance(rest.trim().parse().map_err(|_| syntax("bad microsecond count"))?)
        } else {
            return Err(syntax("unknown directive"));
        };
        steps.push((line, step));
    }
    Ok(steps)
}

/// Replays `text` against `device`, keeping its configuration across boots
/// apart from the key pin. Every reply line must be matched by a `<` line.
pub fn replay(text: &str, device: &mut Device) -> Result<(), TranscriptError> {
    let mut pending: std::collections::VecDeque<String> = Default::default();
    for (line, step) in parse(text)? {
        match step {
            Step::Boot { key_pin } => {
                if let Some(first) = pending.front() {
                    return Err(TranscriptError::Unchecked {
                        count: pending.len(),
                        first: first.clone(),
                    });
                }
                let config = DeviceConfig {
                    key_pin_at_boot: key_pin,
                    ..device.config().clone()
                };
                device.power_on(config);
            }
            Step::Advance(dt) => {
                device.advance(dt);
            }
            Step::Send(payload) => {
                let mut bytes = payload.into_bytes();
                bytes.push(b'\n');
                let reply = device.feed(&bytes);
                let text = String::from_utf8_lossy(&reply).into_owned();
                pending.extend(text.lines().map(str::to_string));
            }
            Step::Expect(expected) => {
                let actual = pending.pop_front().unwrap_or_default();
                if actual != expected {
                    return Err(TranscriptError::Mismatch {
                        line,
                        expected,
                        actual,
                    });
                }
            }
        }
    }
    match pending.front() {
        Some(first) => Err(TranscriptError::Unchecked {
            count: pending.len(),
            first: first.clone(),
        }),
        None => Ok(()),
    }
}

/// Runs the `>` and `@` directives of `text` and writes a transcript with
/// the actual replies. Used to produce golden files.
pub fn record(text: &str, device: &mut Device) -> Result<String, TranscriptError> {
    let mut out = String::new();
    for (_, step) in parse(text)? {
        match step {
            Step::Boot { key_pin } => {
                let config = DeviceConfig {
                    key_pin_at_boot: key_pin,
                    ..device.config().clone()
                };
                device.power_on(config);
                out.push_str(&format!("@boot key_pin={}\n", key_pin as u8));
            }
            Step::Advance(dt) => {
                device.advance(dt);
                out.push_str(&format!("@advance {dt}\n"));
            }
            Step::Send(payload) => {
                out.push_str(&format!("> {payload}\n"));
                let mut bytes = payload.into_bytes();
                bytes.push(b'\n');
                let reply = device.feed(&bytes);
                for l in String::from_utf8_lossy(&reply).lines() {
                    out.push_str(&format!("< {l}\n"));
                }
            }
            Step::Expect(_) => {}
        }
    }
    Ok(out)
}
