//! Messages, coefficient vectors and the bit mapping.
//!
//! Bits map to a message by taking consecutive groups of `log2 M` bits,
//! most significant bit first, one group per section.

use rand::RngExt;

use crate::rng::StreamRng;
use crate::{CodeParams, Error, PowerAllocation, Result};

/// Selected column within each section, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Message {
    sections: Vec<usize>,
}

impl Message {
    pub fn new(sections: Vec<usize>, params: &CodeParams) -> Result<Self> {
        if sections.len() != params.l() {
            return Err(Error::DimensionMismatch {
                context: "message length",
                expected: params.l(),
                actual: sections.len(),
            });
        }
        if let Some(bad) = sections.iter().find(|&&s| s >= params.m()) {
            return Err(Error::invalid(
                "message",
                format!("index {bad} out of range for M = {}", params.m()),
            ));
        }
        Ok(Self { sections })
    }

    /// Uniform draw from the codebook.
    pub fn random(params: &CodeParams, rng: &mut StreamRng) -> Self {
        let m = params.m();
        Self {
            sections: (0..params.l()).map(|_| rng.random_range(0..m)).collect(),
        }
    }

    pub fn sections(&self) -> &[usize] {
        &self.sections
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn from_bits(bits: &[bool], params: &CodeParams) -> Result<Self> {
        let width = params.bits_per_section();
        let expected = width * params.l();
        if bits.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "bit vector length",
                expected,
                actual: bits.len(),
            });
        }
        let sections = bits
            .chunks(width)
            .map(|group| group.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize))
            .collect();
        Ok(Self { sections })
    }

    pub fn to_bits(&self, params: &CodeParams) -> Vec<bool> {
        let width = params.bits_per_section();
        self.sections
            .iter()
            .flat_map(|&s| (0..width).rev().map(move |k| (s >> k) & 1 == 1))
            .collect()
    }

    /// Dense `β` with `√(n P_ℓ)` at the selected column of each section.
    pub fn to_beta(&self, params: &CodeParams, alloc: &PowerAllocation) -> BetaVector {
        let m = params.m();
        let mut values = vec![0.0; params.columns()];
        for (ell, (&col, amp)) in self
            .sections
            .iter()
            .zip(alloc.amplitudes(params.n()))
            .enumerate()
        {
            values[ell * m + col] = amp;
        }
        BetaVector {
            values,
            section_size: m,
        }
    }
}

/// Dense length-`ML` coefficient vector.
///
/// Codebook elements have exactly one non-zero per section, but decoder
/// estimates and test inputs need not, so the type itself does not enforce it.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaVector {
    values: Vec<f64>,
    section_size: usize,
}

impl BetaVector {
    pub fn from_values(values: Vec<f64>, section_size: usize) -> Result<Self> {
        if section_size == 0 || values.len() % section_size != 0 {
            return Err(Error::DimensionMismatch {
                context: "beta length",
                expected: section_size,
                actual: values.len(),
            });
        }
        Ok(Self {
            values,
            section_size,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn section_size(&self) -> usize {
        self.section_size
    }

    pub fn sections(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.section_size)
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// True if every section has exactly one non-zero equal to `√(n P_ℓ)`.
    pub fn is_codeword(&self, params: &CodeParams, alloc: &PowerAllocation) -> bool {
        let amps = alloc.amplitudes(params.n());
        self.values.len() == params.columns()
            && self.sections().zip(&amps).all(|(sec, &a)| {
                let nz: Vec<_> = sec.iter().filter(|v| **v != 0.0).collect();
                nz.len() == 1 && *nz[0] == a
            })
    }
}
