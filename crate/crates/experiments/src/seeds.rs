use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// First 8 bytes of `sha256(master_seed_le || cell_id)`.
pub fn derive_seed(master: u64, cell_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(cell_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn cell_rng(master: u64, cell_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, cell_id))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_cells_get_distinct_seeds() {
        assert_eq!(derive_seed(7, "fit/fgg/2"), derive_seed(7, "fit/fgg/2"));
        assert_ne!(derive_seed(7, "fit/fgg/2"), derive_seed(7, "fit/fgg/4"));
        assert_ne!(derive_seed(7, "fit/fgg/2"), derive_seed(8, "fit/fgg/2"));
    }
}
