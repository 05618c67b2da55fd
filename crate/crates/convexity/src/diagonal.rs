//! Finite-horizon diagonal construction of a set that is frequently inside
//! and frequently outside every member of a family.

use crate::integrands::IndexSet;
use crate::{ConvexityError, Result};

/// Round-robin picks: each round takes, for every member `A` in order, the
/// next index in `A` and then the next index outside `A`. Only complete
/// rounds are kept. An empty family yields the even indices.
pub fn diagonal_incomparable(family: &[IndexSet], n_max: u32) -> Result<IndexSet> {
    if family.is_empty() {
        return IndexSet::evens(n_max);
    }
    let mut picks = Vec::new();
    let mut cursor = 0u32;
    'rounds: loop {
        let mut round = Vec::with_capacity(2 * family.len());
        let mut next = cursor;
        for a in family {
            for inside in [true, false] {
                match (next..=n_max).find(|&j| a.contains(j) == inside) {
                    Some(j) => {
                        round.push(j);
                        next = j + 1;
                    }
                    None => break 'rounds,
                }
            }
        }
        picks.extend(round);
        cursor = next;
    }
    if picks.is_empty() {
        return Err(ConvexityError::HorizonTooSmall(n_max));
    }
    IndexSet::new(picks, n_max).map_err(|_| ConvexityError::HorizonTooSmall(n_max))
}

/// `(|S ∩ A|, |S ∩ A^c|)` below the horizon of `s`.
pub fn hits(s: &IndexSet, a: &IndexSet) -> (usize, usize) {
    let inside = s.members().iter().filter(|&&j| a.contains(j)).count();
    (inside, s.len() - inside)
}
