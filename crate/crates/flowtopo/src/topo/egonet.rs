//! Egonet extraction: the induced subgraph around one node.

use crate::graph::{NodeId, TrafficGraph};

use super::features::TopoError;

/// Induced subgraph on a center node and all of its neighbors.
#[derive(Debug, Clone)]
pub struct Egonet {
    pub center: NodeId,
    /// Center plus its in/out neighbors, sorted by id.
    pub members: Vec<NodeId>,
    /// Every graph edge with both endpoints among the members.
    pub edges: Vec<(NodeId, NodeId, f64)>,
}

impl Egonet {
    pub fn contains(&self, node: NodeId) -> bool {
        self.members.binary_search(&node).is_ok()
    }
}

/// Extracts the egonet of `center`: directions and weights preserved.
pub fn extract_egonet(g: &TrafficGraph, center: NodeId) -> Result<Egonet, TopoError> {
    if center.index() >= g.n() {
        return Err(TopoError::NodeOutOfRange {
            node: center.index(),
            n: g.n(),
        });
    }
    let mut members = g.neighbor_set(center);
    members.push(center);
    members.sort_unstable();

    let inside = |node: NodeId| members.binary_search(&node).is_ok();
    let mut edges = Vec::new();
    for &u in &members {
        for &(v, w) in g.out_edges(u) {
            if inside(v) {
                edges.push((u, v, w));
            }
        }
    }
    Ok(Egonet {
        center,
        members,
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testgraph::graph_from;
    use super::*;

    #[test]
    fn isolated_node_egonet_is_itself() {
        let g = graph_from(&[("1", "2", 1.0), ("3", "3", 2.0)]);
        let three = g.node_of("3").unwrap();
        let ego = extract_egonet(&g, three).unwrap();
        assert_eq!(ego.members, vec![three]);
        // the self-loop stays: both endpoints are members
        assert_eq!(ego.edges.len(), 1);
    }

    #[test]
    fn star_egonet_includes_all_incident_edges() {
        let g = graph_from(&[("1", "2", 1.0), ("1", "3", 1.0), ("3", "1", 1.0)]);
        let one = g.node_of("1").unwrap();
        let ego = extract_egonet(&g, one).unwrap();
        assert_eq!(ego.members.len(), 3);
        assert_eq!(ego.edges.len(), 3);
        assert!(ego.contains(g.node_of("2").unwrap()));
    }

    #[test]
    fn triangle_with_pendant_excludes_outsider() {
        let g = graph_from(&[
            ("1", "2", 1.0),
            ("2", "3", 1.0),
            ("3", "1", 1.0),
            ("4", "2", 1.0),
        ]);
        let one = g.node_of("1").unwrap();
        let four = g.node_of("4").unwrap();
        let ego = extract_egonet(&g, one).unwrap();
        assert_eq!(ego.members.len(), 3);
        assert!(!ego.contains(four));
        let mut pairs: Vec<(&str, &str)> = ego
            .edges
            .iter()
            .map(|&(u, v, _)| (g.endpoint(u), g.endpoint(v)))
            .collect();
        pairs.sort_unstable();
        assert_eq!(pairs, vec![("1", "2"), ("2", "3"), ("3", "1")]);
    }

    #[test]
    fn out_of_range_center_is_rejected() {
        let g = graph_from(&[("1", "2", 1.0)]);
        assert!(extract_egonet(&g, NodeId(9)).is_err());
    }

    #[test]
    fn all_edges_have_member_endpoints() {
        let g = graph_from(&[
            ("a", "b", 1.0),
            ("b", "c", 2.0),
            ("c", "d", 3.0),
            ("d", "a", 4.0),
            ("b", "d", 5.0),
        ]);
        for i in 0..g.n() {
            let ego = extract_egonet(&g, NodeId(i as u32)).unwrap();
            assert!(ego.contains(ego.center));
            for &(u, v, _) in &ego.edges {
                assert!(ego.contains(u) && ego.contains(v));
            }
        }
    }
}
