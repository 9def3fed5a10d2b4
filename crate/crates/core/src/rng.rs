use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"critwin/stream/v1";

/// Deterministic random stream keyed by `(seed, replicate, label)`.
///
/// The key is hashed with SHA-256 into the 256-bit key of a ChaCha12
/// generator. ChaCha is counter based, so the sequence is identical on every
/// platform and distinct keys give independent streams.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, replicate: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(seed.to_le_bytes());
        hasher.update(replicate.to_le_bytes());
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        RngStream {
            inner: ChaCha12Rng::from_seed(key),
        }
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
