//! Seeded pseudorandom source shared by the solver start vector and the
//! synthetic generator.
//!
//! The generator is PCG XSL RR 128/64 (`rand_pcg::Pcg64`, O'Neill 2014) with
//! the stream constant fixed by `rand_pcg` 0.3:
//!
//! * multiplier `0x2360ed051fc65da44385df649fccf645`
//! * increment  `0x5851f42d4c957f2d14057b7ef767814f`
//!
//! Seeding goes through `Pcg64::new(state, increment)` with
//! `state = seed as u128 ^ 0xcafef00dd15ea5e5`, so a fixture can be reproduced
//! in any language that implements PCG64. Floats take the top 53 bits of
//! each 64-bit draw: `u = (x >> 11) * 2^-53`, giving `u` in `[0, 1)`.

use rand_core::RngCore;
use rand_pcg::Pcg64;

const PCG_INCREMENT: u128 = 0x5851_f42d_4c95_7f2d_1405_7b7e_f767_814f;
const SEED_MIX: u128 = 0xcafe_f00d_d15e_a5e5;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Pcg64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            inner: Pcg64::new(seed as u128 ^ SEED_MIX, PCG_INCREMENT),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `[lo, hi]` (inclusive), by rejection on the top bits.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        let zone = u64::MAX - (u64::MAX % span);
        loop {
            let x = self.next_u64();
            if x < zone {
                return lo + (x % span) as usize;
            }
        }
    }
}
