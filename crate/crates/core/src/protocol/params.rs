use serde::{Deserialize, Serialize};

use crate::code::SegmentationPlan;
use crate::error::{invalid, Result};
use crate::montgomery::MAX_PRODUCT_BITS;

/// Public system parameters shared by all three parties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Code length in bits.
    pub d: usize,
    /// Number of substrings and hash tables.
    pub l: usize,
    /// Signature slots per layer; each key holds `T^2` residues.
    pub t: usize,
    pub c_r: u32,
    pub c_n: u32,
}

impl SystemParams {
    pub fn new(d: usize, l: usize, t: usize, c_r: u32, c_n: u32) -> Result<Self> {
        let p = Self { d, l, t, c_r, c_n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let plan = SegmentationPlan::new(self.d, self.l)?;
        if self.t == 0 {
            return Err(invalid("T must be at least 1"));
        }
        if !(2..=28).contains(&self.c_n) || self.c_r == 0 {
            return Err(invalid(format!("unsupported widths c_R = {}, c_N = {}", self.c_r, self.c_n)));
        }
        let s = plan.max_len() as u32;
        if s + self.c_r > MAX_PRODUCT_BITS || self.c_n + self.c_r > MAX_PRODUCT_BITS || 2 * self.c_n > MAX_PRODUCT_BITS {
            return Err(invalid(format!(
                "s = {s}, c_R = {}, c_N = {} exceed 64-bit residue arithmetic",
                self.c_r, self.c_n
            )));
        }
        Ok(())
    }

    pub fn plan(&self) -> SegmentationPlan {
        SegmentationPlan::new(self.d, self.l).expect("validated parameters")
    }

    /// Maximum substring length `ceil(D / L)`.
    pub fn s(&self) -> usize {
        self.d.div_ceil(self.l)
    }
}
