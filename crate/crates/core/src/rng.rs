//! Deterministic, splittable random streams.
//!
//! A stream is identified by a root seed and a path of tags. Its key is a
//! SHA-256 chain over that path, and draws come from a ChaCha8 keystream, so a
//! stream's output depends only on `(seed, path)` and never on the order in
//! which sibling streams are created or consumed.

use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Clone)]
pub struct RandomStream {
    seed: u64,
    path: Vec<String>,
    key: [u8; 32],
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn root(seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"blmol/stream/v1");
        hasher.update(seed.to_le_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        Self { seed, path: Vec::new(), key, rng: ChaCha8Rng::from_seed(key) }
    }

    /// Child stream keyed by this stream's identity and `tag`. Drawing from
    /// `self` beforehand has no effect on the child.
    pub fn derive(&self, tag: impl fmt::Display) -> Self {
        let tag = tag.to_string();
        let mut hasher = Sha256::new();
        hasher.update(self.key);
        hasher.update((tag.len() as u64).to_le_bytes());
        hasher.update(tag.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        let mut path = self.path.clone();
        path.push(tag);
        Self { seed: self.seed, path, key, rng: ChaCha8Rng::from_seed(key) }
    }

    /// Shorthand for `derive(format!("{tag}/{index}"))`.
    pub fn derive_index(&self, tag: &str, index: usize) -> Self {
        self.derive(format_args!("{tag}/{index}"))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[String] {
        &self.path
    }

    /// A 64-bit seed summarizing this stream's identity, for reporting.
    pub fn fingerprint(&self) -> u64 {
        u64::from_le_bytes(self.key[..8].try_into().expect("8 bytes"))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in the inclusive range `[low, high]`.
    pub fn int_inclusive(&mut self, low: i64, high: i64) -> i64 {
        self.rng.random_range(low..=high)
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.rng.random_range(0..len)
    }

    pub fn coin(&mut self) -> bool {
        self.rng.random::<bool>()
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        use rand_distr::{Distribution, StandardNormal};
        StandardNormal.sample(&mut self.rng)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.rng);
    }
}

impl fmt::Debug for RandomStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RandomStream").field("seed", &self.seed).field("path", &self.path).finish()
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Stream for `(seed, tag)`; a pure function of its arguments.
pub fn derive_stream(seed: u64, tag: &str) -> RandomStream {
    RandomStream::root(seed).derive(tag)
}
