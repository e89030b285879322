//! Backup-locality lists for distributed replay.

use alloc::vec::Vec;

use crate::LocalityId;

/// Ordered fallback localities for work that originated on `source`.
///
/// Entry `i` is `(source + 1 + (i mod (K-1))) mod K`: every list starts at a
/// different rank, never names `source` itself, and wraps around when `m`
/// exceeds `K - 1`. A single-locality simulation falls back to itself.
pub fn make_backup_lists(source: LocalityId, localities: u32, m: usize) -> Vec<LocalityId> {
    assert!(localities >= 1, "need at least one locality");
    assert!(source < localities, "source rank {source} out of range");
    assert!(m <= localities as usize, "backup list longer than the locality count");
    if localities == 1 {
        return alloc::vec![source];
    }
    let k = u64::from(localities);
    (0..m as u64)
        .map(|i| ((u64::from(source) + 1 + i % (k - 1)) % k) as LocalityId)
        .collect()
}
