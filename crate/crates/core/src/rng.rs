//! Deterministic random streams (PCG32).
//!
//! Every worker owns its stream; streams are derived from a root seed plus
//! structural indices (step, pass, sample) so results do not depend on
//! thread scheduling.

const PCG_MULT: u64 = 6364136223846793005;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    state: u64,
    inc: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> RandomStream {
        RandomStream::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> RandomStream {
        let mut rng = RandomStream {
            state: 0,
            inc: (splitmix64(stream) << 1) | 1,
        };
        rng.next_u32();
        rng.state = rng.state.wrapping_add(splitmix64(seed));
        rng.next_u32();
        rng
    }

    /// Derives an independent stream from structural indices.
    pub fn derive(seed: u64, tags: &[u64]) -> RandomStream {
        let mut h = splitmix64(seed);
        for &t in tags {
            h = splitmix64(h ^ t.wrapping_mul(0x9E3779B97F4A7C15));
        }
        RandomStream::with_stream(h, splitmix64(h ^ 0xD6E8FEB86659FD93))
    }

    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.state = old.wrapping_mul(PCG_MULT).wrapping_add(self.inc);
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    pub fn next_u64(&mut self) -> u64 {
        ((self.next_u32() as u64) << 32) | self.next_u32() as u64
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, n).
    pub fn next_usize(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_f64() * n as f64) as usize % n
    }

    pub fn next_2d(&mut self) -> (f64, f64) {
        (self.next_f64(), self.next_f64())
    }
}
