use rand::seq::index::sample;

use super::MaskedNetwork;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Removes `floor(alpha * active)` hidden-to-hidden connections chosen
/// uniformly without replacement. Input and output groups are untouched.
/// Returns how many connections were pruned.
pub fn prune_random(net: &mut MaskedNetwork, alpha: f64, seed: u64) -> Result<usize> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("pruning fraction {alpha} outside [0, 1]")));
    }
    let active: Vec<(usize, usize, usize)> = net
        .groups
        .iter()
        .enumerate()
        .filter(|(_, g)| g.is_hidden())
        .flat_map(|(gi, g)| {
            g.mask
                .indexed_iter()
                .filter(|(_, &m)| m)
                .map(move |((r, c), _)| (gi, r, c))
        })
        .collect();
    let count = (alpha * active.len() as f64).floor() as usize;
    if count == 0 {
        return Ok(0);
    }
    let mut rng = rng_from_seed(seed);
    net.touch();
    for i in sample(&mut rng, active.len(), count) {
        let (gi, r, c) = active[i];
        let g = &mut net.groups[gi];
        g.mask[(r, c)] = false;
        g.weights[(r, c)] = 0.0;
    }
    Ok(count)
}
