//! Ray hash: per-float bit extraction from the IEEE-754 encoding and the
//! xor swizzle that packs six float hashes into a 48-bit predictor key.
//!
//! For precision `p` a float contributes its sign bit, the `p` most
//! significant exponent bits and the `p` most significant mantissa bits,
//! packed as `sign | exponent | mantissa` (high to low) into `1 + 2p` bits.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Ray, Vec3};

pub const MIN_PRECISION: u8 = 1;
pub const MAX_PRECISION: u8 = 7;

/// Bit width of one key lane.
pub const LANE_BITS: u32 = 16;
const LANE_MASK: u64 = (1 << LANE_BITS) - 1;

/// `(origin axis, direction axis)` xor-ed into each lane, lane 0 first.
pub const LANE_PAIRING: [(usize, usize); 3] = [(0, 2), (1, 1), (2, 0)];

const EXPONENT_TOP: u32 = 30;
const MANTISSA_TOP: u32 = 22;

#[derive(Debug, Error, PartialEq)]
pub enum HashError {
    #[error("cannot hash non-finite value {0}")]
    NonFiniteInput(f32),
    #[error("hash precision {0} outside {MIN_PRECISION}..={MAX_PRECISION}")]
    BadPrecision(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct HashConfig {
    precision_bits: u8,
}

impl HashConfig {
    pub fn new(precision_bits: u8) -> Result<HashConfig, HashError> {
        if !(MIN_PRECISION..=MAX_PRECISION).contains(&precision_bits) {
            return Err(HashError::BadPrecision(precision_bits));
        }
        Ok(HashConfig { precision_bits })
    }

    pub fn precision_bits(self) -> u8 {
        self.precision_bits
    }

    /// Width of one float hash, `1 + 2p`.
    pub fn float_hash_bits(self) -> u32 {
        1 + 2 * self.precision_bits as u32
    }

    /// The next looser configuration, if any.
    pub fn coarser(self) -> Option<HashConfig> {
        HashConfig::new(self.precision_bits - 1).ok()
    }
}

impl Default for HashConfig {
    fn default() -> Self {
        HashConfig { precision_bits: 6 }
    }
}

impl TryFrom<u8> for HashConfig {
    type Error = HashError;
    fn try_from(p: u8) -> Result<Self, HashError> {
        HashConfig::new(p)
    }
}

impl From<HashConfig> for u8 {
    fn from(c: HashConfig) -> u8 {
        c.precision_bits
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FloatHash(pub u16);

pub fn map_float_to_hash(f: f32, cfg: HashConfig) -> Result<FloatHash, HashError> {
    if !f.is_finite() {
        return Err(HashError::NonFiniteInput(f));
    }
    let p = cfg.precision_bits as u32;
    let bits = f.to_bits();
    let mask = (1u32 << p) - 1;
    let sign = bits >> 31;
    let exponent = (bits >> (EXPONENT_TOP + 1 - p)) & mask;
    let mantissa = (bits >> (MANTISSA_TOP + 1 - p)) & mask;
    Ok(FloatHash(((sign << (2 * p)) | (exponent << p) | mantissa) as u16))
}

/// 48-bit predictor table key: three 16-bit lanes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredictorKey(u64);

impl PredictorKey {
    pub const BITS: u32 = 3 * LANE_BITS;

    pub fn from_lanes(lanes: [u16; 3]) -> PredictorKey {
        PredictorKey(
            lanes[0] as u64 | (lanes[1] as u64) << LANE_BITS | (lanes[2] as u64) << (2 * LANE_BITS),
        )
    }

    pub fn from_raw(value: u64) -> Option<PredictorKey> {
        (value >> Self::BITS == 0).then_some(PredictorKey(value))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn lane(self, k: usize) -> u16 {
        ((self.0 >> (LANE_BITS * k as u32)) & LANE_MASK) as u16
    }

    pub fn lanes(self) -> [u16; 3] {
        [self.lane(0), self.lane(1), self.lane(2)]
    }

    /// Projects a key computed at `fine` precision onto `fine - 1` by dropping
    /// the lowest exponent and mantissa bit of every lane. Xor is bitwise, so
    /// this commutes with the per-float extraction.
    pub fn coarsen(self, fine: HashConfig) -> Option<PredictorKey> {
        let coarse = fine.coarser()?;
        let p = fine.precision_bits as u32;
        let q = coarse.precision_bits as u32;
        let mask = (1u16 << p) - 1;
        let lanes = self.lanes().map(|lane| {
            let sign = lane >> (2 * p);
            let exponent = (lane >> p) & mask;
            let mantissa = lane & mask;
            (sign << (2 * q)) | ((exponent >> 1) << q) | (mantissa >> 1)
        });
        Some(PredictorKey::from_lanes(lanes))
    }
}

impl fmt::Display for PredictorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:012x}", self.0)
    }
}

/// Hashes raw origin/direction components; [`hash_ray`] is the usual entry point.
pub fn hash_components(
    origin: Vec3,
    direction: Vec3,
    cfg: HashConfig,
) -> Result<PredictorKey, HashError> {
    let mut lanes = [0u16; 3];
    for (lane, &(o_axis, d_axis)) in lanes.iter_mut().zip(LANE_PAIRING.iter()) {
        let ho = map_float_to_hash(origin[o_axis], cfg)?;
        let hd = map_float_to_hash(direction[d_axis], cfg)?;
        *lane = ho.0 ^ hd.0;
    }
    Ok(PredictorKey::from_lanes(lanes))
}

pub fn hash_ray(ray: &Ray, cfg: HashConfig) -> Result<PredictorKey, HashError> {
    hash_components(ray.origin, ray.direction, cfg)
}
