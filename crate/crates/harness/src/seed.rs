//! Per-trial seed derivation.
//!
//! Each field is folded into the state with the splitmix64 finalizer, so a
//! trial's seed depends only on the master seed and its own coordinates.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `h = mix64(master + G)`, then `h = mix64(h ^ (field + G))` for
/// `n`, `k`, the bit pattern of `c` and `trial`, in that order.
pub fn trial_seed(master: u64, n: usize, k: usize, c: f64, trial: usize) -> u64 {
    // -0.0 and 0.0 name the same grid point
    let c_bits = if c == 0.0 { 0 } else { c.to_bits() };
    [n as u64, k as u64, c_bits, trial as u64]
        .iter()
        .fold(mix64(master.wrapping_add(GOLDEN)), |h, &f| {
            mix64(h ^ f.wrapping_add(GOLDEN))
        })
}
