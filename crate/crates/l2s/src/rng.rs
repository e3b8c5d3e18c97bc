//! Stateless deterministic randomness for batch sampling and simulator noise.
//!
//! Every draw in this crate is a pure function of a small tuple of integers
//! (seed, step, slot, stream). The tuple is absorbed into a 64-bit LCG state
//! and passed through the PCG RXS-M-XS output permutation. Only wrapping
//! integer arithmetic is involved, so a given tuple yields the same draw on
//! every platform, build, and thread schedule.
//!
//! Algorithm, fixed for the life of the on-disk formats:
//!
//! ```text
//! state <- 0
//! for each part p:   state <- (state XOR p) * 6364136223846793005 + 1442695040888963407
//! word  <- ((state >> ((state >> 59) + 5)) XOR state) * 12605985483714917081
//! out   <- (word >> 43) XOR word
//! ```

const LCG_MUL: u64 = 6364136223846793005;
const LCG_INC: u64 = 1442695040888963407;
const RXS_M: u64 = 12605985483714917081;

/// PCG RXS-M-XS-64 output permutation.
#[inline]
fn permute(state: u64) -> u64 {
    let word = ((state >> ((state >> 59) + 5)) ^ state).wrapping_mul(RXS_M);
    (word >> 43) ^ word
}

/// Hash an ordered tuple of integers to one 64-bit value.
#[inline]
pub fn hash_parts(parts: &[u64]) -> u64 {
    let mut state = 0u64;
    for &p in parts {
        state = (state ^ p).wrapping_mul(LCG_MUL).wrapping_add(LCG_INC);
    }
    permute(state)
}

/// Map a hash to the unit interval `[0, 1)` using its top 53 bits.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Map a hash to `0..len` without modulo bias worth speaking of
/// (128-bit multiply-shift; bias is O(len / 2^64)).
#[inline]
pub fn bounded(h: u64, len: usize) -> usize {
    debug_assert!(len > 0);
    ((h as u128 * len as u128) >> 64) as usize
}

/// One standard normal deviate from a hash, via Box-Muller on two
/// sub-streams. Deterministic given the input hash.
pub fn standard_normal(h: u64) -> f64 {
    // u1 in (0, 1] so the log is finite; u2 in [0, 1).
    let u1 = ((hash_parts(&[h, 1]) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = unit_f64(hash_parts(&[h, 2]));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
