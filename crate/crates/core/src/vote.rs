//! Default consensus function for replicated tasks.

use alloc::vec::Vec;

/// Index of the modal candidate; ties go to the candidate seen first.
pub fn majority_index<T: PartialEq>(candidates: &[T]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, c) in candidates.iter().enumerate() {
        // Only the first occurrence of each value opens a tally.
        if candidates[..i].contains(c) {
            continue;
        }
        let votes = candidates[i..].iter().filter(|o| *o == c).count();
        if best.map_or(true, |(_, b)| votes > b) {
            best = Some((i, votes));
        }
    }
    best.map(|(i, _)| i)
}

/// Modal value by equality, lowest-index tie-break.
///
/// # Panics
/// If `candidates` is empty. The replicate combinators never call the vote
/// function with zero candidates.
pub fn majority_vote<T: PartialEq>(candidates: Vec<T>) -> T {
    let i = majority_index(&candidates).expect("vote needs at least one candidate");
    candidates.into_iter().nth(i).expect("index in range")
}
