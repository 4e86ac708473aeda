use std::collections::{BTreeSet, VecDeque};

use super::{Edge, Graph, NodeId};

/// Nodes within `hops` hops of either endpoint of `edge`, endpoints included.
pub fn enclosing_subgraph(graph: &Graph, edge: Edge, hops: usize) -> BTreeSet<NodeId> {
    let mask = bfs_mask(&graph.adjacency(), &[edge.0, edge.1], hops);
    mask.iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect()
}

/// Membership mask of the union of enclosing subgraphs over `edges`.
pub fn enclosing_union(graph: &Graph, edges: &[Edge], hops: usize) -> Vec<bool> {
    let sources: Vec<NodeId> = edges.iter().flat_map(|e| [e.0, e.1]).collect();
    bfs_mask(&graph.adjacency(), &sources, hops)
}

fn bfs_mask(adj: &[Vec<NodeId>], sources: &[NodeId], hops: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if !seen[s] {
            seen[s] = true;
            queue.push_back((s, 0));
        }
    }
    while let Some((node, depth)) = queue.pop_front() {
        if depth == hops {
            continue;
        }
        for &next in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                queue.push_back((next, depth + 1));
            }
        }
    }
    seen
}
