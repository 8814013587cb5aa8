//! Directed random walks over out-edges.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{NodeId, TrafficGraph};

use super::features::TopoError;

/// Why a walk stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkTermination {
    ReturnedToStart,
    LengthReached,
    DeadEnd,
}

/// One sampled walk: a chain of traversed edges starting at `start`.
#[derive(Debug, Clone)]
pub struct RandomWalk {
    pub start: NodeId,
    /// Traversed edges (from, to, weight), head-to-tail.
    pub steps: Vec<(NodeId, NodeId, f64)>,
    pub terminated_by: WalkTermination,
}

impl RandomWalk {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Distinct nodes touched, including the start.
    pub fn distinct_nodes(&self) -> usize {
        let mut nodes: Vec<NodeId> = std::iter::once(self.start)
            .chain(self.steps.iter().map(|&(_, to, _)| to))
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes.len()
    }
}

/// Samples one walk from `start`: each step picks a uniformly random
/// out-neighbor, stopping on return to the start, at `max_len` edges, or
/// at a node without out-edges.
pub fn sample_walk(
    g: &TrafficGraph,
    start: NodeId,
    max_len: usize,
    rng_seed: u64,
) -> Result<RandomWalk, TopoError> {
    if start.index() >= g.n() {
        return Err(TopoError::NodeOutOfRange {
            node: start.index(),
            n: g.n(),
        });
    }
    if max_len == 0 {
        return Err(TopoError::InvalidWalkLength);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut steps = Vec::new();
    let mut current = start;
    let terminated_by = loop {
        let out = g.out_edges(current);
        if out.is_empty() {
            break WalkTermination::DeadEnd;
        }
        let (next, weight) = out[rng.gen_range(0..out.len())];
        steps.push((current, next, weight));
        current = next;
        if current == start {
            break WalkTermination::ReturnedToStart;
        }
        if steps.len() == max_len {
            break WalkTermination::LengthReached;
        }
    };
    Ok(RandomWalk {
        start,
        steps,
        terminated_by,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testgraph::graph_from;
    use super::*;

    #[test]
    fn no_out_edges_means_empty_dead_end() {
        let g = graph_from(&[("1", "2", 1.0)]);
        let two = g.node_of("2").unwrap();
        let walk = sample_walk(&g, two, 5, 7).unwrap();
        assert!(walk.is_empty());
        assert_eq!(walk.terminated_by, WalkTermination::DeadEnd);
        assert_eq!(walk.distinct_nodes(), 1);
    }

    #[test]
    fn two_cycle_returns_to_start() {
        let g = graph_from(&[("1", "2", 5.0), ("2", "1", 7.0)]);
        let one = g.node_of("1").unwrap();
        let walk = sample_walk(&g, one, 5, 11).unwrap();
        assert_eq!(walk.len(), 2);
        assert_eq!(walk.terminated_by, WalkTermination::ReturnedToStart);
        assert_eq!(walk.steps[0].2, 5.0);
        assert_eq!(walk.steps[1].2, 7.0);
        assert_eq!(walk.distinct_nodes(), 2);
    }

    #[test]
    fn chain_stops_at_length_limit() {
        let g = graph_from(&[("1", "2", 1.0), ("2", "3", 2.0), ("3", "4", 3.0)]);
        let one = g.node_of("1").unwrap();
        let walk = sample_walk(&g, one, 2, 3).unwrap();
        assert_eq!(walk.len(), 2);
        assert_eq!(walk.terminated_by, WalkTermination::LengthReached);
        let endpoints: Vec<&str> = walk.steps.iter().map(|&(_, to, _)| g.endpoint(to)).collect();
        assert_eq!(endpoints, vec!["2", "3"]);
    }

    #[test]
    fn chain_dead_ends_before_limit() {
        let g = graph_from(&[("1", "2", 1.0), ("2", "3", 2.0)]);
        let one = g.node_of("1").unwrap();
        let walk = sample_walk(&g, one, 10, 3).unwrap();
        assert_eq!(walk.len(), 2);
        assert_eq!(walk.terminated_by, WalkTermination::DeadEnd);
    }

    #[test]
    fn same_seed_same_walk() {
        let g = graph_from(&[
            ("h", "a", 1.0),
            ("h", "b", 2.0),
            ("h", "c", 3.0),
            ("a", "h", 1.0),
            ("b", "h", 1.0),
            ("c", "h", 1.0),
        ]);
        let h = g.node_of("h").unwrap();
        let w1 = sample_walk(&g, h, 8, 42).unwrap();
        let w2 = sample_walk(&g, h, 8, 42).unwrap();
        assert_eq!(w1.steps, w2.steps);
        let w3 = sample_walk(&g, h, 8, 43).unwrap();
        let w4 = sample_walk(&g, h, 8, 44).unwrap();
        // different seeds explore different branches eventually
        assert!(w1.steps != w3.steps || w1.steps != w4.steps);
    }

    #[test]
    fn chained_steps_share_endpoints() {
        let g = graph_from(&[
            ("1", "2", 1.0),
            ("2", "3", 1.0),
            ("3", "2", 1.0),
            ("2", "4", 1.0),
            ("4", "1", 1.0),
        ]);
        for seed in 0..20 {
            let walk = sample_walk(&g, g.node_of("1").unwrap(), 6, seed).unwrap();
            assert!(walk.len() <= 6);
            if let Some(&(first_from, _, _)) = walk.steps.first() {
                assert_eq!(first_from, walk.start);
            }
            for pair in walk.steps.windows(2) {
                assert_eq!(pair[0].1, pair[1].0);
            }
        }
    }

    #[test]
    fn self_loop_at_start_returns_immediately_when_chosen() {
        let g = graph_from(&[("1", "1", 9.0)]);
        let one = g.node_of("1").unwrap();
        let walk = sample_walk(&g, one, 5, 0).unwrap();
        assert_eq!(walk.len(), 1);
        assert_eq!(walk.terminated_by, WalkTermination::ReturnedToStart);
    }

    #[test]
    fn zero_length_is_rejected() {
        let g = graph_from(&[("1", "2", 1.0)]);
        assert!(sample_walk(&g, g.node_of("1").unwrap(), 0, 1).is_err());
    }
}
