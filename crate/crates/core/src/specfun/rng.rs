use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// A reproducible random stream identified by `(master_seed, stream_index)`.
///
/// Splitting rule: the ChaCha20 key is derived from `master_seed` (via
/// `seed_from_u64`) and `stream_index` selects the 64-bit ChaCha stream
/// counter. Streams sharing a master seed are disjoint keystreams of the same
/// key, so distinct indices give independent sequences. Operations that
/// simulate many paths use `stream_index = path id` (plus a documented
/// per-operation offset where one operation needs several families).
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    inner: ChaCha20Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// A fresh stream under the same master seed.
    pub fn sibling(&self, stream_index: u64) -> Self {
        Self::new(self.master_seed, stream_index)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
