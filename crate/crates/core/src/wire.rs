//! Line framing and the command grammars.
//!
//! Every frame is one printable-ASCII line terminated by LF. Parsing is
//! case-sensitive and whitespace-exact.
//!
//! Data verbs: `RELAY ON`, `RELAY OFF`, `READ`, `STATUS`.
//! AT verbs: `AT`, `AT+NAME=<name>`, `AT+PSWD=<4 digits>`, `AT+ROLE=0|1`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_PAYLOAD: usize = 256;
pub const MAX_NAME_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("frame error: {0}")]
    Frame(String),
    #[error("unknown verb {token:?}")]
    UnknownVerb { token: String },
    #[error("bad argument for {command}: {reason}")]
    Argument { command: String, reason: String },
}

/// A validated line payload. The terminator is implied.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    payload: String,
}

impl Frame {
    pub fn new(payload: impl Into<String>) -> Result<Self, WireError> {
        let payload = payload.into();
        if payload.len() > MAX_PAYLOAD {
            return Err(WireError::Frame(format!(
                "payload of {} bytes exceeds {MAX_PAYLOAD}",
                payload.len()
            )));
        }
        if let Some(b) = payload.bytes().find(|b| !(0x20..=0x7e).contains(b)) {
            return Err(WireError::Frame(format!("byte 0x{b:02x} not allowed")));
        }
        Ok(Self { payload })
    }

    pub fn payload(&self) -> &str {
        &self.payload
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload.len() + 1);
        out.extend_from_slice(self.payload.as_bytes());
        out.push(b'\n');
        out
    }

    /// Parses one complete LF-terminated frame.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        match bytes.split_last() {
            Some((b'\n', body)) => {
                let text = std::str::from_utf8(body)
                    .map_err(|_| WireError::Frame("payload is not ASCII".into()))?;
                Self::new(text)
            }
            _ => Err(WireError::Frame("missing LF terminator".into())),
        }
    }
}

/// Splits an arbitrary byte stream into frames.
#[derive(Debug, Clone, Default)]
pub struct LineCodec {
    buf: Vec<u8>,
    overflow: bool,
}

impl LineCodec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds bytes and returns every line completed by them. A CR before
    /// the LF is tolerated and stripped. Over-long lines yield a frame error
    /// once their terminator arrives.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<Result<Frame, WireError>> {
        let mut out = Vec::new();
        for &b in bytes {
            if b == b'\n' {
                if self.buf.last() == Some(&b'\r') {
                    self.buf.pop();
                }
                let result = if self.overflow {
                    Err(WireError::Frame(format!("line exceeds {MAX_PAYLOAD} bytes")))
                } else {
                    self.buf.push(b'\n');
                    Frame::from_bytes(&self.buf)
                };
                out.push(result);
                self.buf.clear();
                self.overflow = false;
            } else if self.buf.len() > MAX_PAYLOAD {
                self.overflow = true;
            } else {
                self.buf.push(b);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Slave,
    Master,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DeviceName(String);

impl DeviceName {
    pub fn new(name: impl Into<String>) -> Result<Self, WireError> {
        let name = name.into();
        let arg_err = |reason: &str| WireError::Argument {
            command: "AT+NAME".into(),
            reason: reason.into(),
        };
        if name.is_empty() || name.len() > MAX_NAME_LEN {
            return Err(arg_err("name must be 1 to 32 characters"));
        }
        if !name.bytes().all(|b| (0x20..=0x7e).contains(&b)) {
            return Err(arg_err("name must be printable ASCII"));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for DeviceName {
    type Error = WireError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<DeviceName> for String {
    fn from(value: DeviceName) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Password(String);

impl Password {
    pub fn new(pin: impl Into<String>) -> Result<Self, WireError> {
        let pin = pin.into();
        if pin.len() != 4 || !pin.bytes().all(|b| b.is_ascii_digit()) {
            return Err(WireError::Argument {
                command: "AT+PSWD".into(),
                reason: "password must be exactly 4 digits".into(),
            });
        }
        Ok(Self(pin))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Password {
    type Error = WireError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<Password> for String {
    fn from(value: Password) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtCommand {
    Test,
    Name(DeviceName),
    Password(Password),
    Role(Role),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    RelayOn,
    RelayOff,
    Read,
    Status,
    At(AtCommand),
}

impl fmt::Display for AtCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtCommand::Test => write!(f, "AT"),
            AtCommand::Name(n) => write!(f, "AT+NAME={}", n.as_str()),
            AtCommand::Password(p) => write!(f, "AT+PSWD={}", p.as_str()),
            AtCommand::Role(Role::Slave) => write!(f, "AT+ROLE=0"),
            AtCommand::Role(Role::Master) => write!(f, "AT+ROLE=1"),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::RelayOn => write!(f, "RELAY ON"),
            Command::RelayOff => write!(f, "RELAY OFF"),
            Command::Read => write!(f, "READ"),
            Command::Status => write!(f, "STATUS"),
            Command::At(at) => at.fmt(f),
        }
    }
}

pub fn encode(cmd: &Command) -> Frame {
    Frame::new(cmd.to_string()).expect("validated commands always fit a frame")
}

pub fn decode(frame: &Frame) -> Result<Command, WireError> {
    let line = frame.payload();
    match line {
        "RELAY ON" => Ok(Command::RelayOn),
        "RELAY OFF" => Ok(Command::RelayOff),
        "READ" => Ok(Command::Read),
        "STATUS" => Ok(Command::Status),
        _ if line.starts_with("AT") => parse_at(line).map(Command::At),
        _ => Err(WireError::UnknownVerb {
            token: line.split(' ').next().unwrap_or_default().to_string(),
        }),
    }
}

/// Decodes raw bytes holding exactly one LF-terminated frame.
pub fn decode_bytes(bytes: &[u8]) -> Result<Command, WireError> {
    decode(&Frame::from_bytes(bytes)?)
}

pub fn parse_at(line: &str) -> Result<AtCommand, WireError> {
    if line == "AT" {
        return Ok(AtCommand::Test);
    }
    let Some(rest) = line.strip_prefix("AT+") else {
        return Err(WireError::UnknownVerb {
            token: line.to_string(),
        });
    };
    let (verb, arg) = match rest.split_once('=') {
        Some((verb, arg)) => (verb, arg),
        None => {
            return Err(WireError::UnknownVerb {
                token: format!("AT+{rest}"),
            })
        }
    };
    match verb {
        "NAME" => DeviceName::new(arg).map(AtCommand::Name),
        "PSWD" => Password::new(arg).map(AtCommand::Password),
        "ROLE" => match arg {
            "0" => Ok(AtCommand::Role(Role::Slave)),
            "1" => Ok(AtCommand::Role(Role::Master)),
            _ => Err(WireError::Argument {
                command: "AT+ROLE".into(),
                reason: format!("expected 0 or 1, got {arg:?}"),
            }),
        },
        _ => Err(WireError::UnknownVerb {
            token: format!("AT+{verb}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_verbs() {
        assert_eq!(encode(&Command::RelayOn).to_bytes(), b"RELAY ON\n");
        assert_eq!(decode_bytes(b"READ\n").unwrap(), Command::Read);
        assert_eq!(decode_bytes(b"STATUS\n").unwrap(), Command::Status);
        assert_eq!(
            decode_bytes(b"RELAYON\n"),
            Err(WireError::UnknownVerb {
                token: "RELAYON".into()
            })
        );
        assert!(decode_bytes(b"read\n").is_err());
        assert!(decode_bytes(b"READ \n").is_err());
        assert!(decode_bytes(b"RELAY  ON\n").is_err());
    }

    #[test]
    fn at_grammar() {
        assert_eq!(parse_at("AT").unwrap(), AtCommand::Test);
        assert_eq!(
            parse_at("AT+NAME=plug01").unwrap(),
            AtCommand::Name(DeviceName::new("plug01").unwrap())
        );
        assert_eq!(parse_at("AT+ROLE=0").unwrap(), AtCommand::Role(Role::Slave));
        assert_eq!(parse_at("AT+ROLE=1").unwrap(), AtCommand::Role(Role::Master));
        assert!(matches!(
            parse_at("AT+PSWD=abcd"),
            Err(WireError::Argument { .. })
        ));
        assert!(matches!(
            parse_at("AT+PSWD=12A4"),
            Err(WireError::Argument { .. })
        ));
        assert!(parse_at("AT+PSWD=12345").is_err());
        assert!(parse_at("AT+ROLE=2").is_err());
        assert!(parse_at("AT+NAME=").is_err());
        assert!(parse_at(&format!("AT+NAME={}", "x".repeat(33))).is_err());
        assert!(matches!(parse_at("AT+UART"), Err(WireError::UnknownVerb { .. })));
        assert!(matches!(parse_at("AT+FOO=1"), Err(WireError::UnknownVerb { .. })));
    }

    #[test]
    fn frame_limits() {
        assert!(Frame::new("x".repeat(256)).is_ok());
        assert!(matches!(Frame::new("x".repeat(257)), Err(WireError::Frame(_))));
        assert!(Frame::new("A\tB").is_err());
        assert!(Frame::from_bytes(b"READ").is_err());
        assert!(Frame::from_bytes(b"RE\nAD\n").is_err());
        assert!(Frame::from_bytes(&[0xff, b'\n']).is_err());
    }

    #[test]
    fn codec_splits_and_handles_overflow() {
        let mut codec = LineCodec::new();
        assert!(codec.push(b"REA").is_empty());
        let frames = codec.push(b"D\r\nSTATUS\n");
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].as_ref().unwrap().payload(), "READ");
        assert_eq!(frames[1].as_ref().unwrap().payload(), "STATUS");
        let mut long = vec![b'a'; 1000];
        long.push(b'\n');
        let frames = codec.push(&long);
        assert!(matches!(frames[0], Err(WireError::Frame(_))));
        let frames = codec.push(b"READ\n");
        assert_eq!(frames[0].as_ref().unwrap().payload(), "READ");
    }
}
