//! Seeded random streams.
//!
//! A master seed and a family tag produce a ChaCha8 key; replica `i` uses
//! stream `i` of that key. Streams never overlap, so replicas can run on any
//! thread in any order and still produce the same numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
    family: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed, family: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A disjoint family of streams under the same master seed.
    pub fn family(&self, id: u64) -> Self {
        let mut s = self.family ^ id.wrapping_mul(0xd6e8_feb8_6659_fd93);
        Self {
            seed: self.seed,
            family: splitmix64(&mut s) ^ id,
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut state = self.seed ^ self.family.rotate_left(17);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        key
    }

    /// The generator for replica `index`.
    pub fn replica(&self, index: u64) -> SimRng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(index);
        rng
    }

    /// Runs `f` for every replica in parallel and returns the results in
    /// replica order.
    pub fn map_replicas<T, F>(&self, replicas: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &mut SimRng) -> T + Sync + Send,
    {
        (0..replicas)
            .into_par_iter()
            .map(|i| {
                let mut rng = self.replica(i as u64);
                f(i, &mut rng)
            })
            .collect()
    }
}

/// Uniform on the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard exponential variate.
#[inline]
pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -open01(rng).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn replicas_are_reproducible_and_distinct() {
        let s = RngStreams::new(7);
        let a: Vec<u64> = (0..4).map(|_| s.replica(3).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(s.replica(3).next_u64(), s.replica(4).next_u64());
        assert_ne!(s.replica(3).next_u64(), s.family(1).replica(3).next_u64());
        assert_ne!(s.family(1).replica(0).next_u64(), s.family(2).replica(0).next_u64());
        assert_ne!(RngStreams::new(8).replica(3).next_u64(), s.replica(3).next_u64());
    }

    #[test]
    fn map_replicas_is_thread_count_independent() {
        let s = RngStreams::new(11);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| s.map_replicas(64, |i, rng| (i, rng.next_u64())))
        };
        assert_eq!(run(1), run(4));
    }
}
