use rand::Rng as _;

use super::UndirectedGraph;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Watts-Strogatz small-world graph.
///
/// Starts from a ring lattice where every vertex is joined to its `nei`
/// nearest neighbours on each side, then visits the lattice edges
/// `(u, u + k)` for `k = 1..=nei` and, with probability `p`, moves the far
/// endpoint to a uniformly chosen vertex that is neither `u` nor already a
/// neighbour of `u`. The edge count is always `size * nei`.
pub fn generate_ws(size: usize, nei: usize, p: f64, seed: u64) -> Result<UndirectedGraph> {
    if nei == 0 {
        return Err(Error::InvalidParameter("nei must be at least 1".into()));
    }
    if size < 2 * nei + 1 {
        return Err(Error::InvalidParameter(format!(
            "size {size} too small for nei {nei}: need at least {}",
            2 * nei + 1
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("rewiring probability {p} outside [0, 1]")));
    }

    let mut g = UndirectedGraph::empty(size);
    for k in 1..=nei {
        for u in 0..size {
            g.add_edge(u, (u + k) % size);
        }
    }

    let mut rng = rng_from_seed(seed);
    for k in 1..=nei {
        for u in 0..size {
            if rng.random::<f64>() >= p {
                continue;
            }
            // u is already adjacent to everything else
            if g.degree(u) >= size - 1 {
                continue;
            }
            let v = (u + k) % size;
            let w = loop {
                let w = rng.random_range(0..size);
                if w != u && !g.has_edge(u, w) {
                    break w;
                }
            };
            g.remove_edge(u, v);
            g.add_edge(u, w);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_without_rewiring() {
        let g = generate_ws(10, 2, 0.0, 3).unwrap();
        assert_eq!(g.edge_count(), 20);
        assert!((0..10).all(|v| g.degree(v) == 4));
        assert!(g.has_edge(0, 9) && g.has_edge(0, 8) && !g.has_edge(0, 7));
    }

    #[test]
    fn full_rewiring_keeps_edge_count() {
        for seed in 0..50 {
            let g = generate_ws(10, 2, 1.0, seed).unwrap();
            assert_eq!(g.edge_count(), 20);
            assert_eq!(g.edges().len(), 20);
            assert!((0..10).all(|v| !g.has_edge(v, v)));
        }
    }

    #[test]
    fn full_grid_cell_edge_count() {
        let g = generate_ws(250, 2, 0.6, 11).unwrap();
        assert_eq!(g.edge_count(), 500);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_ws(60, 3, 0.5, 42).unwrap();
        let b = generate_ws(60, 3, 0.5, 42).unwrap();
        let c = generate_ws(60, 3, 0.5, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_ws(4, 2, 0.5, 0).is_err());
        assert!(generate_ws(10, 2, 1.5, 0).is_err());
        assert!(generate_ws(10, 2, -0.1, 0).is_err());
        assert!(generate_ws(10, 0, 0.1, 0).is_err());
        assert!(generate_ws(5, 2, 0.5, 0).is_ok());
    }
}
