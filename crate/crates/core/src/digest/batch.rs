//! Eight-way Keccak-256 for the collision walkers.
//!
//! Independent walks advance in lockstep, so their messages can be hashed as
//! eight interleaved sponge states. On x86-64 with AVX-512F each state lane is
//! one 512-bit register; everywhere else (and for messages that do not fit in
//! one rate block) the scalar permutation is used per message. Both paths
//! return identical values.

use super::{low_mask, truncated_u64, RATE};

pub const LANES: usize = 8;

/// Low-order `bits` (≤ 64) of the Keccak-256 digest of each message.
pub fn truncated_u64_x8(messages: [&[u8]; LANES], bits: u32) -> [u64; LANES] {
    #[cfg(target_arch = "x86_64")]
    {
        if messages.iter().all(|m| m.len() < RATE) && avx512::available() {
            // SAFETY: the CPU supports AVX-512F (checked at runtime above).
            let low = unsafe { avx512::single_block_low_lanes(&messages) };
            let mask = low_mask(bits);
            return low.map(|lane| lane.swap_bytes() & mask);
        }
    }
    messages.map(|m| truncated_u64(m, bits))
}

/// Whether [`truncated_u64_x8`] runs the vectorized permutation on this machine.
pub fn vectorized() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        avx512::available()
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

#[cfg(target_arch = "x86_64")]
mod avx512 {
    use std::arch::x86_64::*;
    use std::sync::OnceLock;

    use super::super::{RATE, ROUND_CONSTANTS};
    use super::LANES;

    // Rotation offsets indexed by lane x + 5y.
    const ROTATIONS: [i64; 25] = [
        0, 1, 62, 28, 27, 36, 44, 6, 55, 20, 3, 10, 43, 25, 39, 41, 45, 15, 21, 8, 18, 2, 61, 56,
        14,
    ];

    pub(super) fn available() -> bool {
        static DETECTED: OnceLock<bool> = OnceLock::new();
        *DETECTED.get_or_init(|| is_x86_feature_detected!("avx512f"))
    }

    #[target_feature(enable = "avx512f")]
    unsafe fn permute(a: &mut [__m512i; 25]) {
        let rotations: [__m512i; 25] = std::array::from_fn(|i| _mm512_set1_epi64(ROTATIONS[i]));
        for rc in ROUND_CONSTANTS {
            let mut c = [_mm512_setzero_si512(); 5];
            for x in 0..5 {
                // 0x96: three-way xor
                let partial = _mm512_ternarylogic_epi64::<0x96>(a[x], a[x + 5], a[x + 10]);
                c[x] = _mm512_ternarylogic_epi64::<0x96>(partial, a[x + 15], a[x + 20]);
            }
            let mut b = [_mm512_setzero_si512(); 25];
            for x in 0..5 {
                let d = _mm512_xor_si512(c[(x + 4) % 5], _mm512_rol_epi64::<1>(c[(x + 1) % 5]));
                for y in 0..5 {
                    let lane = _mm512_xor_si512(a[x + 5 * y], d);
                    // pi: (x, y) -> (y, 2x + 3y)
                    let dest = y + 5 * ((2 * x + 3 * y) % 5);
                    b[dest] = _mm512_rolv_epi64(lane, rotations[x + 5 * y]);
                }
            }
            for y in 0..5 {
                for x in 0..5 {
                    // 0xd2: b0 ^ (!b1 & b2)
                    a[x + 5 * y] = _mm512_ternarylogic_epi64::<0xd2>(
                        b[x + 5 * y],
                        b[(x + 1) % 5 + 5 * y],
                        b[(x + 2) % 5 + 5 * y],
                    );
                }
            }
            a[0] = _mm512_xor_si512(a[0], _mm512_set1_epi64(rc as i64));
        }
    }

    /// Returns lane 3 of each final state (digest bytes 24..32, little-endian).
    ///
    /// Every message must be shorter than one rate block.
    #[target_feature(enable = "avx512f")]
    pub(super) unsafe fn single_block_low_lanes(messages: &[&[u8]; LANES]) -> [u64; LANES] {
        let mut interleaved = [[0u64; LANES]; RATE / 8];
        for (i, message) in messages.iter().enumerate() {
            let mut block = [0u8; RATE];
            block[..message.len()].copy_from_slice(message);
            block[message.len()] ^= 0x01;
            block[RATE - 1] ^= 0x80;
            for (lane, chunk) in block.chunks_exact(8).enumerate() {
                interleaved[lane][i] = u64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
        }

        let mut state = [_mm512_setzero_si512(); 25];
        for (slot, lanes) in state.iter_mut().zip(interleaved.iter()) {
            *slot = _mm512_loadu_si512(lanes.as_ptr() as *const _);
        }
        permute(&mut state);

        let mut out = [0u64; LANES];
        _mm512_storeu_si512(out.as_mut_ptr() as *mut _, state[3]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_matches_scalar_for_every_length() {
        let owned: Vec<Vec<u8>> = (0..LANES)
            .map(|i| (0..(i * 19)).map(|j| (j * 7 + i) as u8).collect())
            .collect();
        for bits in [8, 24, 40, 64] {
            let msgs: [&[u8]; LANES] = std::array::from_fn(|i| owned[i].as_slice());
            let batched = truncated_u64_x8(msgs, bits);
            for i in 0..LANES {
                assert_eq!(
                    batched[i],
                    truncated_u64(msgs[i], bits),
                    "lane {i} bits {bits}"
                );
            }
        }
    }

    #[test]
    fn batch_falls_back_for_multi_block() {
        let long = vec![0x11u8; RATE + 3];
        let edge = vec![0x22u8; RATE - 1];
        let msgs: [&[u8]; LANES] = [&long, &edge, b"", b"a", b"bb", b"ccc", &edge, b"d"];
        let batched = truncated_u64_x8(msgs, 64);
        for i in 0..LANES {
            assert_eq!(batched[i], truncated_u64(msgs[i], 64));
        }
    }
}
