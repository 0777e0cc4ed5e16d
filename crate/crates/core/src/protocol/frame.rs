//! Fixed-length frame codecs.
//!
//! ```text
//! SensorFrame   (10)  11 | src:u16 | temp:i8 hum:u8 gas:u16 flame:u8 state:u8 batt:u8
//! ControlMessage (2)  kind:'a'|'b'|'c'|'d' | value:u8
//! ControlPacket  (5)  11 | dst:u16 | ControlMessage
//! RadioFrame    (25)  7E | len:u16=22 | type:u8 | radio:u64 | net:u16 | opts:u8 | inner[10]
//! ```
//!
//! Multi-byte integers are big-endian. A radio frame carries either a sensor
//! frame (type `0x90`, uplink) or a control packet padded with zeros to ten
//! bytes (type `0x10`, downlink). Stripping the 15 header bytes is what the
//! Mist coordinator does before forwarding to the Fog node.

use serde::{Deserialize, Serialize};

use super::{ProtocolError, Result};
use crate::energy::OperatingMode;

/// First byte of sensor frames and control packets.
pub const FRAME_IDENTIFIER: u8 = 0x11;
pub const SENSOR_FRAME_LEN: usize = 10;
pub const CONTROL_MESSAGE_LEN: usize = 2;
pub const CONTROL_PACKET_LEN: usize = 5;
pub const RADIO_FRAME_LEN: usize = 25;
pub const RADIO_HEADER_LEN: usize = 15;
pub const RADIO_START_DELIMITER: u8 = 0x7E;
pub const RADIO_TYPE_UPLINK: u8 = 0x90;
pub const RADIO_TYPE_DOWNLINK: u8 = 0x10;
/// Bytes after the length field.
const RADIO_LENGTH_FIELD: u16 = (RADIO_FRAME_LEN - 3) as u16;
const RADIO_INNER_LEN: usize = RADIO_FRAME_LEN - RADIO_HEADER_LEN;

/// Largest sleep time a control message may request, seconds.
pub const MAX_SLEEP_TIME: u8 = 3;

fn exact_len(buf: &[u8], expected: usize) -> Result<()> {
    match buf.len() {
        n if n < expected => Err(ProtocolError::Truncated { expected, actual: n }),
        n if n > expected => Err(ProtocolError::TrailingBytes { expected, actual: n }),
        _ => Ok(()),
    }
}

fn check_identifier(byte: u8) -> Result<()> {
    if byte != FRAME_IDENTIFIER {
        return Err(ProtocolError::BadIdentifier(byte));
    }
    Ok(())
}

/// The seven sensor bytes of a report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorReadings {
    pub temperature_c: i8,
    pub humidity_pct: u8,
    pub gas_level: u16,
    pub flame: u8,
    pub state: u8,
    pub battery_pct: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub source_addr: u16,
    pub readings: SensorReadings,
}

impl SensorFrame {
    pub fn encode(&self) -> [u8; SENSOR_FRAME_LEN] {
        let r = &self.readings;
        let [a0, a1] = self.source_addr.to_be_bytes();
        let [g0, g1] = r.gas_level.to_be_bytes();
        [FRAME_IDENTIFIER, a0, a1, r.temperature_c as u8, r.humidity_pct, g0, g1, r.flame, r.state, r.battery_pct]
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        exact_len(buf, SENSOR_FRAME_LEN)?;
        check_identifier(buf[0])?;
        Ok(Self {
            source_addr: u16::from_be_bytes([buf[1], buf[2]]),
            readings: SensorReadings {
                temperature_c: buf[3] as i8,
                humidity_pct: buf[4],
                gas_level: u16::from_be_bytes([buf[5], buf[6]]),
                flame: buf[7],
                state: buf[8],
                battery_pct: buf[9],
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlarmCommand {
    /// `'L'`, sound the alarm.
    On,
    /// `'D'`, silence it.
    Off,
}

/// A two-byte control: which setting to change and its new value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlMessage {
    /// `'a'`
    Alarm(AlarmCommand),
    /// `'b'`, regular sleep time in seconds, 0 to 3.
    SleepTime(u8),
    /// `'c'`, long sleep time in seconds; also switches the device to Away.
    LongSleep(u8),
    /// `'d'`, operating mode: `'R'`, `'E'` or `'A'`.
    Mode(OperatingMode),
}

impl ControlMessage {
    pub const KIND_ALARM: u8 = b'a';
    pub const KIND_SLEEP_TIME: u8 = b'b';
    pub const KIND_LONG_SLEEP: u8 = b'c';
    pub const KIND_MODE: u8 = b'd';

    pub fn kind(&self) -> u8 {
        match self {
            Self::Alarm(_) => Self::KIND_ALARM,
            Self::SleepTime(_) => Self::KIND_SLEEP_TIME,
            Self::LongSleep(_) => Self::KIND_LONG_SLEEP,
            Self::Mode(_) => Self::KIND_MODE,
        }
    }

    fn value(&self) -> u8 {
        match *self {
            Self::Alarm(AlarmCommand::On) => b'L',
            Self::Alarm(AlarmCommand::Off) => b'D',
            Self::SleepTime(s) | Self::LongSleep(s) => s,
            Self::Mode(OperatingMode::Regular) => b'R',
            Self::Mode(OperatingMode::Emergency) => b'E',
            Self::Mode(OperatingMode::LongSleep) => b'A',
        }
    }

    pub fn encode(&self) -> [u8; CONTROL_MESSAGE_LEN] {
        [self.kind(), self.value()]
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        exact_len(buf, CONTROL_MESSAGE_LEN)?;
        let (kind, value) = (buf[0], buf[1]);
        let out_of_range = || ProtocolError::ControlValueOutOfRange { kind: kind as char, value };
        match kind {
            Self::KIND_ALARM => match value {
                b'L' => Ok(Self::Alarm(AlarmCommand::On)),
                b'D' => Ok(Self::Alarm(AlarmCommand::Off)),
                _ => Err(out_of_range()),
            },
            Self::KIND_SLEEP_TIME if value <= MAX_SLEEP_TIME => Ok(Self::SleepTime(value)),
            Self::KIND_SLEEP_TIME => Err(out_of_range()),
            Self::KIND_LONG_SLEEP => Ok(Self::LongSleep(value)),
            Self::KIND_MODE => match value {
                b'R' => Ok(Self::Mode(OperatingMode::Regular)),
                b'E' => Ok(Self::Mode(OperatingMode::Emergency)),
                b'A' => Ok(Self::Mode(OperatingMode::LongSleep)),
                _ => Err(out_of_range()),
            },
            other => Err(ProtocolError::UnknownControlKind(other)),
        }
    }
}

/// A control message addressed to one device, as sent from Fog to Mist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlPacket {
    pub dest_addr: u16,
    pub control: ControlMessage,
}

impl ControlPacket {
    pub fn encode(&self) -> [u8; CONTROL_PACKET_LEN] {
        let [a0, a1] = self.dest_addr.to_be_bytes();
        let [k, v] = self.control.encode();
        [FRAME_IDENTIFIER, a0, a1, k, v]
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        exact_len(buf, CONTROL_PACKET_LEN)?;
        check_identifier(buf[0])?;
        Ok(Self { dest_addr: u16::from_be_bytes([buf[1], buf[2]]), control: ControlMessage::decode(&buf[3..5])? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadioPayload {
    Sensor(SensorFrame),
    Control(ControlPacket),
}

/// Over-the-air frame between a device and the radio coordinator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadioFrame {
    /// Source for uplink frames, destination for downlink frames.
    pub radio_addr: u64,
    pub network_addr: u16,
    pub options: u8,
    pub payload: RadioPayload,
}

impl RadioFrame {
    pub fn frame_type(&self) -> u8 {
        match self.payload {
            RadioPayload::Sensor(_) => RADIO_TYPE_UPLINK,
            RadioPayload::Control(_) => RADIO_TYPE_DOWNLINK,
        }
    }

    pub fn encode(&self) -> [u8; RADIO_FRAME_LEN] {
        let mut out = [0u8; RADIO_FRAME_LEN];
        out[0] = RADIO_START_DELIMITER;
        out[1..3].copy_from_slice(&RADIO_LENGTH_FIELD.to_be_bytes());
        out[3] = self.frame_type();
        out[4..12].copy_from_slice(&self.radio_addr.to_be_bytes());
        out[12..14].copy_from_slice(&self.network_addr.to_be_bytes());
        out[14] = self.options;
        match &self.payload {
            RadioPayload::Sensor(s) => out[RADIO_HEADER_LEN..].copy_from_slice(&s.encode()),
            RadioPayload::Control(c) => {
                out[RADIO_HEADER_LEN..RADIO_HEADER_LEN + CONTROL_PACKET_LEN].copy_from_slice(&c.encode())
            }
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        exact_len(buf, RADIO_FRAME_LEN)?;
        if buf[0] != RADIO_START_DELIMITER {
            return Err(ProtocolError::BadDelimiter(buf[0]));
        }
        let length = u16::from_be_bytes([buf[1], buf[2]]);
        if length != RADIO_LENGTH_FIELD {
            return Err(ProtocolError::BadLength(length));
        }
        let inner = &buf[RADIO_HEADER_LEN..];
        let payload = match buf[3] {
            RADIO_TYPE_UPLINK => RadioPayload::Sensor(SensorFrame::decode(inner)?),
            RADIO_TYPE_DOWNLINK => {
                let (packet, padding) = inner.split_at(CONTROL_PACKET_LEN);
                if padding.iter().any(|&b| b != 0) {
                    return Err(ProtocolError::NonZeroPadding);
                }
                RadioPayload::Control(ControlPacket::decode(packet)?)
            }
            other => return Err(ProtocolError::UnknownFrameType(other)),
        };
        let mut addr = [0u8; 8];
        addr.copy_from_slice(&buf[4..12]);
        Ok(Self {
            radio_addr: u64::from_be_bytes(addr),
            network_addr: u16::from_be_bytes([buf[12], buf[13]]),
            options: buf[14],
            payload,
        })
    }

    /// The ten payload bytes without the radio header.
    pub fn inner_bytes(&self) -> [u8; RADIO_INNER_LEN] {
        let mut inner = [0u8; RADIO_INNER_LEN];
        inner.copy_from_slice(&self.encode()[RADIO_HEADER_LEN..]);
        inner
    }
}
