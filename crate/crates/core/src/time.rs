//! Session-relative time.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Microseconds since the start of a recording session.
///
/// Wall-clock time only appears in pod metadata; every replay computation
/// works on these relative offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub const fn from_micros(us: u64) -> Self {
        Timestamp(us)
    }

    /// Rounds to the nearest microsecond; negative and NaN inputs map to zero.
    pub fn from_secs_f64(secs: f64) -> Self {
        if secs.is_nan() || secs <= 0.0 {
            return Timestamp(0);
        }
        Timestamp((secs * 1e6).round() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, other: Timestamp) -> Timestamp {
        Timestamp(self.0.saturating_sub(other.0))
    }

    pub fn abs_diff(self, other: Timestamp) -> u64 {
        self.0.abs_diff(other.0)
    }

    /// `mm:ss` with whole seconds truncated; minutes are not wrapped at 60.
    pub fn mmss(self) -> String {
        let secs = self.0 / 1_000_000;
        format!("{:02}:{:02}", secs / 60, secs % 60)
    }

    /// Inverse of [`Timestamp::mmss`] (to whole-second resolution).
    pub fn parse_mmss(s: &str) -> Option<Timestamp> {
        let (m, sec) = s.trim().split_once(':')?;
        let m: u64 = m.parse().ok()?;
        let sec: u64 = sec.parse().ok()?;
        if sec >= 60 {
            return None;
        }
        Some(Timestamp((m * 60 + sec) * 1_000_000))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs_f64())
    }
}

/// Saturates at zero.
impl std::ops::Sub for Timestamp {
    type Output = Timestamp;
    fn sub(self, o: Timestamp) -> Timestamp {
        self.saturating_sub(o)
    }
}

impl From<u64> for Timestamp {
    fn from(us: u64) -> Self {
        Timestamp(us)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mmss_formatting() {
        assert_eq!(Timestamp(0).mmss(), "00:00");
        assert_eq!(Timestamp(10_500_000).mmss(), "00:10");
        assert_eq!(Timestamp(3_725_000_000).mmss(), "62:05");
        assert_eq!(Timestamp::parse_mmss("62:05"), Some(Timestamp(3_725_000_000)));
        assert_eq!(Timestamp::parse_mmss("1:75"), None);
    }

    #[test]
    fn seconds_conversion() {
        assert_eq!(Timestamp::from_secs_f64(10.5), Timestamp(10_500_000));
        assert_eq!(Timestamp::from_secs_f64(-3.0), Timestamp(0));
        assert_eq!(Timestamp(2_240_000).as_secs_f64(), 2.24);
    }
}
