//! Counter-based SplitMix64.
//!
//! Element `i` of stream `seed` is `mix(seed + (i + 1) * GOLDEN_GAMMA)`, which is
//! exactly the `i`-th output of a sequential SplitMix64 generator seeded with
//! `seed`. Any language with wrapping 64-bit arithmetic reproduces it bit for bit.
//!
//! * uniform `[0, 1)`: `(bits >> 11) * 2^-53`
//! * uniform `[lo, hi)`: `lo + (hi - lo) * u`
//! * standard normal: Box-Muller on the pair `(u_{2k}, u_{2k+1})`, cosine branch
//!   only, `sqrt(-2 ln(1 - u_{2k})) * cos(2 pi u_{2k+1})`

pub const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    seed: u64,
    counter: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Random access to element `index` of the stream.
    pub fn at(seed: u64, index: u64) -> u64 {
        mix(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = Self::at(self.seed, self.counter);
        self.counter += 1;
        v
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
