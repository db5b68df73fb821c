//! Inputs shared by the benchmarks.

use spatial_csma::ContentionGraph;

/// Ring of `n` links where each link also hears the one two hops away.
pub fn ring(n: usize) -> ContentionGraph {
    let mut edges = Vec::new();
    for i in 1..=n {
        edges.push((i, i % n + 1));
        if n > 4 {
            edges.push((i, (i + 1) % n + 1));
        }
    }
    edges.retain(|(a, b)| a != b);
    edges.sort();
    edges.dedup();
    ContentionGraph::new(n, &edges).expect("valid ring")
}
