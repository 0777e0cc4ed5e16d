//! Short ↔ radio address translation kept by the Mist coordinator.
//!
//! The table is single-writer. Concurrent readers need their own snapshot
//! (`clone`) or external locking; nothing here synchronises.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::frame::{ControlPacket, RadioFrame, RadioPayload, SensorFrame};
use super::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Address {
    /// 16-bit address used between Fog and Mist.
    Short(u16),
    /// 64-bit radio hardware address.
    Radio(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("no mapping for {0:?}")]
    NotFound(Address),
    #[error("{0:?} is already mapped")]
    Conflict(Address),
}

/// Bijective map between short and radio addresses.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressTable {
    to_radio: BTreeMap<u16, u64>,
    to_short: BTreeMap<u64, u16>,
}

impl AddressTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.to_radio.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_radio.is_empty()
    }

    /// Adds a pair. Either side already being mapped is a conflict, even to
    /// the same counterpart.
    pub fn insert(&mut self, short: u16, radio: u64) -> Result<(), AddressError> {
        if self.to_radio.contains_key(&short) {
            return Err(AddressError::Conflict(Address::Short(short)));
        }
        if self.to_short.contains_key(&radio) {
            return Err(AddressError::Conflict(Address::Radio(radio)));
        }
        self.to_radio.insert(short, radio);
        self.to_short.insert(radio, short);
        Ok(())
    }

    /// Removes the pair containing `addr`, returning it as `(short, radio)`.
    pub fn remove(&mut self, addr: Address) -> Option<(u16, u64)> {
        let (short, radio) = match addr {
            Address::Short(s) => (s, *self.to_radio.get(&s)?),
            Address::Radio(r) => (*self.to_short.get(&r)?, r),
        };
        self.to_radio.remove(&short);
        self.to_short.remove(&radio);
        Some((short, radio))
    }

    pub fn radio_for(&self, short: u16) -> Result<u64, AddressError> {
        self.to_radio.get(&short).copied().ok_or(AddressError::NotFound(Address::Short(short)))
    }

    pub fn short_for(&self, radio: u64) -> Result<u16, AddressError> {
        self.to_short.get(&radio).copied().ok_or(AddressError::NotFound(Address::Radio(radio)))
    }

    /// The counterpart of `addr`; applying it twice gives `addr` back.
    pub fn translate(&self, addr: Address) -> Result<Address, AddressError> {
        match addr {
            Address::Short(s) => self.radio_for(s).map(Address::Radio),
            Address::Radio(r) => self.short_for(r).map(Address::Short),
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u16, u64)> + '_ {
        self.to_radio.iter().map(|(&s, &r)| (s, r))
    }

    /// Uplink at the Mist node: drop the radio header and stamp the sender's
    /// short address on the sensor frame.
    pub fn compress(&self, frame: &RadioFrame) -> Result<SensorFrame, ProtocolError> {
        let RadioPayload::Sensor(inner) = frame.payload else {
            return Err(ProtocolError::UnexpectedPayload);
        };
        let short = self.short_for(frame.radio_addr)?;
        Ok(SensorFrame { source_addr: short, ..inner })
    }

    /// Downlink at the Mist node: wrap a Fog control packet in a radio frame
    /// addressed to the destination's hardware address.
    pub fn expand(&self, packet: &ControlPacket, network_addr: u16) -> Result<RadioFrame, ProtocolError> {
        Ok(RadioFrame {
            radio_addr: self.radio_for(packet.dest_addr)?,
            network_addr,
            options: 0,
            payload: RadioPayload::Control(*packet),
        })
    }
}
