//! Device-side handling of control messages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::frame::{AlarmCommand, ControlMessage, MAX_SLEEP_TIME};
use crate::energy::OperatingMode;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("regular sleep of {0} s exceeds the {max} s limit", max = MAX_SLEEP_TIME)]
    SleepAboveLimit(f64),
    #[error("sleep time must be non-negative, got {0} s")]
    NegativeSleep(f64),
}

/// What a device is currently doing, as far as its controller is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub mode: OperatingMode,
    /// Sleep of the cycle the device is running now.
    pub sleep_s: f64,
    pub alarm_on: bool,
    /// Sensors stay powered in every mode; a fire alarm never stops sensing.
    pub sensors_on: bool,
    /// Sleep to return to when switched back to Regular.
    pub regular_sleep_s: f64,
    /// Sleep used in Away mode.
    pub long_sleep_s: f64,
}

impl DeviceState {
    pub fn regular(sleep_s: f64, long_sleep_s: f64) -> Result<Self, DeviceError> {
        check_regular_sleep(sleep_s)?;
        if !(long_sleep_s >= 0.0) {
            return Err(DeviceError::NegativeSleep(long_sleep_s));
        }
        Ok(Self {
            mode: OperatingMode::Regular,
            sleep_s,
            alarm_on: false,
            sensors_on: true,
            regular_sleep_s: sleep_s,
            long_sleep_s,
        })
    }

    /// The state after `msg`. Sleep changes take effect from the next cycle;
    /// the caller decides when that is.
    pub fn apply_control(&self, msg: ControlMessage) -> Result<Self, DeviceError> {
        let mut next = *self;
        match msg {
            ControlMessage::Alarm(cmd) => next.alarm_on = cmd == AlarmCommand::On,
            ControlMessage::SleepTime(s) => {
                let s = f64::from(s);
                check_regular_sleep(s)?;
                next.regular_sleep_s = s;
                if next.mode == OperatingMode::Regular {
                    next.sleep_s = s;
                }
            }
            ControlMessage::LongSleep(s) => {
                next.long_sleep_s = f64::from(s);
                next.mode = OperatingMode::LongSleep;
                next.sleep_s = next.long_sleep_s;
            }
            ControlMessage::Mode(mode) => {
                next.mode = mode;
                next.sleep_s = match mode {
                    OperatingMode::Regular => next.regular_sleep_s,
                    OperatingMode::Emergency => 0.0,
                    OperatingMode::LongSleep => next.long_sleep_s,
                };
                if mode == OperatingMode::Emergency {
                    next.alarm_on = true;
                }
            }
        }
        Ok(next)
    }
}

fn check_regular_sleep(sleep_s: f64) -> Result<(), DeviceError> {
    if !(sleep_s >= 0.0) {
        return Err(DeviceError::NegativeSleep(sleep_s));
    }
    if sleep_s > f64::from(MAX_SLEEP_TIME) {
        return Err(DeviceError::SleepAboveLimit(sleep_s));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn regular() -> DeviceState {
        DeviceState::regular(0.0, 4.0).unwrap()
    }

    #[test]
    fn sleep_time_sets_cycle() {
        let s = regular().apply_control(ControlMessage::SleepTime(3)).unwrap();
        assert_eq!(s.sleep_s, 3.0);
        assert_eq!(s.mode, OperatingMode::Regular);
        assert!(matches!(regular().apply_control(ControlMessage::SleepTime(4)), Err(DeviceError::SleepAboveLimit(_))));
        assert!(DeviceState::regular(3.5, 4.0).is_err());
    }

    #[test]
    fn alarm_toggles() {
        let on = regular().apply_control(ControlMessage::Alarm(AlarmCommand::On)).unwrap();
        assert!(on.alarm_on);
        let off = regular().apply_control(ControlMessage::Alarm(AlarmCommand::Off)).unwrap();
        let twice = off.apply_control(ControlMessage::Alarm(AlarmCommand::Off)).unwrap();
        assert_eq!(off, twice);
        assert!(!twice.alarm_on);
    }

    #[test]
    fn modes_use_their_canonical_sleep() {
        let s = regular().apply_control(ControlMessage::SleepTime(2)).unwrap();
        let away = s.apply_control(ControlMessage::LongSleep(58)).unwrap();
        assert_eq!((away.mode, away.sleep_s), (OperatingMode::LongSleep, 58.0));
        let em = away.apply_control(ControlMessage::Mode(OperatingMode::Emergency)).unwrap();
        assert_eq!((em.mode, em.sleep_s, em.alarm_on), (OperatingMode::Emergency, 0.0, true));
        let back = em.apply_control(ControlMessage::Mode(OperatingMode::Regular)).unwrap();
        assert_eq!((back.mode, back.sleep_s), (OperatingMode::Regular, 2.0));
        let away_again = back.apply_control(ControlMessage::Mode(OperatingMode::LongSleep)).unwrap();
        assert_eq!(away_again.sleep_s, 58.0);
        // Sleep time changes while away are remembered for the return.
        let tuned = away_again.apply_control(ControlMessage::SleepTime(1)).unwrap();
        assert_eq!(tuned.sleep_s, 58.0);
        let home = tuned.apply_control(ControlMessage::Mode(OperatingMode::Regular)).unwrap();
        assert_eq!(home.sleep_s, 1.0);
    }

    fn message() -> impl Strategy<Value = ControlMessage> {
        prop_oneof![
            any::<bool>().prop_map(|on| ControlMessage::Alarm(if on { AlarmCommand::On } else { AlarmCommand::Off })),
            any::<u8>().prop_map(ControlMessage::SleepTime),
            any::<u8>().prop_map(ControlMessage::LongSleep),
            prop_oneof![Just(OperatingMode::Regular), Just(OperatingMode::Emergency), Just(OperatingMode::LongSleep)]
                .prop_map(ControlMessage::Mode),
        ]
    }

    proptest! {
        #[test]
        fn regular_never_exceeds_limit(msgs in proptest::collection::vec(message(), 0..40)) {
            let mut s = regular();
            for m in msgs {
                if let Ok(next) = s.apply_control(m) {
                    s = next;
                }
                if s.mode == OperatingMode::Regular {
                    prop_assert!(s.sleep_s <= f64::from(MAX_SLEEP_TIME));
                }
            }
        }
    }
}
