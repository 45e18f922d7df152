//! Scalar code and channel parameters.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Nats per bit.
pub const LN_2: f64 = std::f64::consts::LN_2;

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * LN_2
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

/// Channel capacity `½ ln(1 + snr)` in nats.
pub fn capacity(snr: f64) -> f64 {
    0.5 * snr.ln_1p()
}

/// Code and channel parameters of a SPARC.
///
/// `L` sections of `M` columns each, block length `n`, rate `R = L ln M / n`
/// nats, average power `P` and noise variance `sigma2`. The rate is always the
/// exact value implied by `(L, M, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    sections: usize,
    section_size: usize,
    block_len: usize,
    rate: f64,
    power: f64,
    sigma2: f64,
    snr: f64,
    capacity: f64,
}

impl CodeParams {
    /// Builds parameters for a fixed block length; the rate follows from
    /// `L ln M = n R`.
    pub fn new(
        sections: usize,
        section_size: usize,
        block_len: usize,
        power: f64,
        sigma2: f64,
    ) -> Result<Self> {
        if sections == 0 {
            return Err(Error::invalid("L", "must be at least 1"));
        }
        if section_size < 2 || !section_size.is_power_of_two() {
            return Err(Error::invalid(
                "M",
                format!("{section_size} is not a power of two >= 2"),
            ));
        }
        if block_len == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::invalid("P", format!("{power} is not positive")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(
                "sigma2",
                format!("{sigma2} is not positive"),
            ));
        }
        let snr = power / sigma2;
        let rate = sections as f64 * (section_size as f64).ln() / block_len as f64;
        Ok(Self {
            sections,
            section_size,
            block_len,
            rate,
            power,
            sigma2,
            snr,
            capacity: capacity(snr),
        })
    }

    /// Chooses the smallest block length whose rate does not exceed
    /// `rate_target` (nats) and recomputes the exact rate.
    ///
    /// A target at or above capacity is accepted here; operations that need
    /// `R < C` check [`CodeParams::require_below_capacity`].
    pub fn derive(
        sections: usize,
        section_size: usize,
        rate_target: f64,
        power: f64,
        sigma2: f64,
    ) -> Result<Self> {
        if !(rate_target > 0.0 && rate_target.is_finite()) {
            return Err(Error::invalid(
                "R",
                format!("{rate_target} is not a positive rate"),
            ));
        }
        if section_size < 2 || !section_size.is_power_of_two() {
            return Err(Error::invalid(
                "M",
                format!("{section_size} is not a power of two >= 2"),
            ));
        }
        let raw = sections as f64 * (section_size as f64).ln() / rate_target;
        // Absorb representation error when L ln M / R is an integer.
        let n = if (raw - raw.round()).abs() <= 1e-9 * raw.max(1.0) {
            raw.round()
        } else {
            raw.ceil()
        };
        Self::new(sections, section_size, n.max(1.0) as usize, power, sigma2)
    }

    /// Number of sections `L`.
    pub fn l(&self) -> usize {
        self.sections
    }

    /// Columns per section `M`.
    pub fn m(&self) -> usize {
        self.section_size
    }

    /// Block length `n`.
    pub fn n(&self) -> usize {
        self.block_len
    }

    /// Total number of columns `N = ML`.
    pub fn columns(&self) -> usize {
        self.sections * self.section_size
    }

    /// Rate in nats per channel use.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn rate_bits(&self) -> f64 {
        nats_to_bits(self.rate)
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// Capacity in nats.
    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Fractional gap from capacity, `(C - R) / C`.
    pub fn delta_r(&self) -> f64 {
        (self.capacity - self.rate) / self.capacity
    }

    pub fn ln_m(&self) -> f64 {
        (self.section_size as f64).ln()
    }

    pub fn bits_per_section(&self) -> usize {
        self.section_size.trailing_zeros() as usize
    }

    pub fn below_capacity(&self) -> bool {
        self.rate < self.capacity
    }

    pub fn require_below_capacity(&self) -> Result<()> {
        if self.below_capacity() {
            Ok(())
        } else {
            Err(Error::RateAboveCapacity {
                rate: self.rate,
                capacity: self.capacity,
            })
        }
    }
}
