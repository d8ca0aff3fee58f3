//! Counter-based random numbers.
//!
//! Every random draw is a pure function of `(seed, sample_index, stream, counter)`, so a
//! sample can be regenerated in isolation and parallel schedules never change results.
//! The mixing function is the SplitMix64 finaliser applied to a per-stream key.

use rand::RngCore;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Named sub-streams of a sample. Different consumers never share random words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Sites = 1,
    Bonds = 2,
    Spins = 3,
    ClusterSigns = 4,
    Bootstrap = 5,
    Synthetic = 6,
}

/// Key identifying one independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64, sample_index: u64, stream: Stream) -> Self {
        Self::from_raw(seed, sample_index, stream as u64)
    }

    pub fn from_raw(seed: u64, sample_index: u64, stream: u64) -> Self {
        let k = mix64(seed ^ GOLDEN);
        let k = mix64(k ^ sample_index.wrapping_mul(GOLDEN).wrapping_add(0x632b_e59b_d9b4_e019));
        StreamKey(mix64(k ^ stream.wrapping_mul(0xd1b5_4a32_d192_ed03)))
    }

    /// Derives a child key, e.g. one per Markov chain sweep.
    pub fn child(self, index: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(index.wrapping_add(GOLDEN))))
    }

    /// The `counter`-th 64-bit word of this stream.
    #[inline]
    pub fn word(self, counter: u64) -> u64 {
        mix64(self.0.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform in [0, 1) with 53 bits of resolution.
    #[inline]
    pub fn uniform(self, counter: u64) -> f64 {
        (self.word(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli(p) draw that is exact at p = 0 and p = 1.
    #[inline]
    pub fn bernoulli(self, counter: u64, p: f64) -> bool {
        if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            self.uniform(counter) < p
        }
    }

    pub fn rng(self) -> CounterRng {
        CounterRng { key: self, counter: 0 }
    }
}

/// Sequential view of a stream, usable wherever `rand` expects an `RngCore`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: StreamKey,
    counter: u64,
}

impl CounterRng {
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        let u = self.key.uniform(self.counter);
        self.counter += 1;
        u
    }

    pub fn position(&self) -> u64 {
        self.counter
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let w = self.key.word(self.counter);
        self.counter += 1;
        w
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let w = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}
