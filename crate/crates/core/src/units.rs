//! Exact bandwidth arithmetic.
//!
//! All bandwidths are integer bits per second. Feasibility checks downstream are
//! strict inequalities on sums of these values, so no floating point is involved
//! anywhere on the allocation path.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};
use std::str::FromStr;

use thiserror::Error;

/// Bandwidth in bits per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Bandwidth(u64);

impl Bandwidth {
    pub const ZERO: Bandwidth = Bandwidth(0);

    pub const fn from_bps(bits_per_sec: u64) -> Self {
        Bandwidth(bits_per_sec)
    }

    pub const fn from_kbps(kbps: u64) -> Self {
        Bandwidth(kbps * 1_000)
    }

    pub const fn from_mbps(mbps: u64) -> Self {
        Bandwidth(mbps * 1_000_000)
    }

    pub const fn bps(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn as_mbps_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: Self) -> Self {
        Bandwidth(self.0.saturating_sub(rhs.0))
    }

    pub fn min(self, rhs: Self) -> Self {
        Bandwidth(self.0.min(rhs.0))
    }

    pub fn max(self, rhs: Self) -> Self {
        Bandwidth(self.0.max(rhs.0))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Largest fraction-scaled value, rounded to whole bits/s.
    ///
    /// Used for the degradation floors (1-xi)*requested; round-to-nearest keeps
    /// clean decimal fractions exact (0.7 * 120 kbps = 84 kbps).
    pub fn scaled(self, fraction: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&fraction));
        Bandwidth((self.0 as f64 * fraction).round() as u64)
    }
}

impl Add for Bandwidth {
    type Output = Bandwidth;
    fn add(self, rhs: Self) -> Self {
        Bandwidth(self.0 + rhs.0)
    }
}

impl AddAssign for Bandwidth {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sub for Bandwidth {
    type Output = Bandwidth;
    fn sub(self, rhs: Self) -> Self {
        Bandwidth(self.0 - rhs.0)
    }
}

impl SubAssign for Bandwidth {
    fn sub_assign(&mut self, rhs: Self) {
        self.0 -= rhs.0;
    }
}

impl Mul<u64> for Bandwidth {
    type Output = Bandwidth;
    fn mul(self, rhs: u64) -> Self {
        Bandwidth(self.0 * rhs)
    }
}

impl Sum for Bandwidth {
    fn sum<I: Iterator<Item = Bandwidth>>(iter: I) -> Self {
        iter.fold(Bandwidth::ZERO, Add::add)
    }
}

/// Errors from parsing a bandwidth literal.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum BandwidthParseError {
    #[error("empty bandwidth value")]
    Empty,
    #[error("invalid bandwidth literal `{0}`")]
    Invalid(String),
    #[error("`{0}` is not a whole number of bits per second")]
    NotIntegral(String),
}

impl FromStr for Bandwidth {
    type Err = BandwidthParseError;

    /// Accepts `64 kbps`, `0.5Mbps`, `20 Mbps`, `120000` (plain bits/s) and the
    /// like. Suffixes are case-insensitive. Decimal values are scaled with
    /// integer arithmetic and must land on whole bits per second.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = s.trim();
        if raw.is_empty() {
            return Err(BandwidthParseError::Empty);
        }
        let lower = raw.to_ascii_lowercase();
        let (num, multiplier) = if let Some(n) = lower.strip_suffix("mbps") {
            (n, 1_000_000u64)
        } else if let Some(n) = lower.strip_suffix("kbps") {
            (n, 1_000u64)
        } else if let Some(n) = lower.strip_suffix("bps") {
            (n, 1u64)
        } else {
            (lower.as_str(), 1u64)
        };
        let num = num.trim();
        if num.is_empty() {
            return Err(BandwidthParseError::Invalid(raw.to_string()));
        }

        let (int_part, frac_part) = match num.split_once('.') {
            Some((i, f)) => (i, f),
            None => (num, ""),
        };
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || (int_part.is_empty() && frac_part.is_empty())
        {
            return Err(BandwidthParseError::Invalid(raw.to_string()));
        }

        let int_value: u128 = if int_part.is_empty() {
            0
        } else {
            int_part
                .parse()
                .map_err(|_| BandwidthParseError::Invalid(raw.to_string()))?
        };
        let mut total = int_value
            .checked_mul(multiplier as u128)
            .ok_or_else(|| BandwidthParseError::Invalid(raw.to_string()))?;

        // Fractional digits: digit k contributes digit * multiplier / 10^k.
        let mut scale = multiplier as u128;
        for ch in frac_part.chars() {
            let digit = ch.to_digit(10).unwrap() as u128;
            if !scale.is_multiple_of(10) {
                if digit != 0 {
                    return Err(BandwidthParseError::NotIntegral(raw.to_string()));
                }
                continue;
            }
            scale /= 10;
            total += digit * scale;
        }

        u64::try_from(total)
            .map(Bandwidth)
            .map_err(|_| BandwidthParseError::Invalid(raw.to_string()))
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 > 0 && self.0.is_multiple_of(1_000_000) {
            write!(f, "{} Mbps", self.0 / 1_000_000)
        } else if self.0 > 0 && self.0.is_multiple_of(1_000) {
            write!(f, "{} kbps", self.0 / 1_000)
        } else {
            write!(f, "{} bps", self.0)
        }
    }
}
