//! Fog/Mist control protocol: frame codecs, address translation and the
//! device-side control state machine.

mod address;
mod device;
mod frame;

use std::fmt::Write as _;

use thiserror::Error;

pub use address::{Address, AddressError, AddressTable};
pub use device::{DeviceError, DeviceState};
pub use frame::{
    AlarmCommand, ControlMessage, ControlPacket, RadioFrame, RadioPayload, SensorFrame, SensorReadings,
    CONTROL_MESSAGE_LEN, CONTROL_PACKET_LEN, FRAME_IDENTIFIER, MAX_SLEEP_TIME, RADIO_FRAME_LEN, RADIO_HEADER_LEN,
    RADIO_START_DELIMITER, RADIO_TYPE_DOWNLINK, RADIO_TYPE_UPLINK, SENSOR_FRAME_LEN,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("buffer too short: need {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("buffer too long: expected {expected} bytes, got {actual}")]
    TrailingBytes { expected: usize, actual: usize },
    #[error("invalid identifier byte {0:#04x}")]
    BadIdentifier(u8),
    #[error("invalid start delimiter {0:#04x}")]
    BadDelimiter(u8),
    #[error("invalid length field {0}")]
    BadLength(u16),
    #[error("unknown radio frame type {0:#04x}")]
    UnknownFrameType(u8),
    #[error("unknown control kind {0:#04x}")]
    UnknownControlKind(u8),
    #[error("control '{kind}' does not accept value {value:#04x}")]
    ControlValueOutOfRange { kind: char, value: u8 },
    #[error("non-zero padding after control packet")]
    NonZeroPadding,
    #[error("frame carries the wrong kind of payload")]
    UnexpectedPayload,
    #[error(transparent)]
    Address(#[from] AddressError),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

/// Space-separated lowercase hex, e.g. `11 01 02 62 03`.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 3);
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{b:02x}");
    }
    out
}
