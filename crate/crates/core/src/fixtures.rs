//! Ready-made topologies and demand sets used by the examples, the
//! benchmarks and the test suites.

use crate::graph::ContentionGraph;
use crate::stackelberg::DemandCurve;

/// Three links in a row; the middle one hears both ends.
pub fn chain3() -> ContentionGraph {
    ContentionGraph::chain(3).expect("valid")
}

/// Edges of the eight-link reference network (1-based).
pub const EIGHT_LINK_EDGES: [(usize, usize); 10] = [
    (1, 3),
    (2, 3),
    (2, 6),
    (3, 4),
    (3, 5),
    (4, 5),
    (5, 6),
    (5, 7),
    (6, 7),
    (6, 8),
];

/// Eight-link network containing the triangles {3,4,5} and {5,6,7}.
pub fn eight_link() -> ContentionGraph {
    ContentionGraph::new(8, &EIGHT_LINK_EDGES).expect("valid")
}

/// Per-link throughput targets used for the follower-game experiments on
/// [`eight_link`]. They lie inside the feasible region.
pub const EIGHT_LINK_TARGETS: [f64; 8] = [0.270, 0.297, 0.347, 0.315, 0.242, 0.176, 0.132, 0.220];

/// Demand shared by every link in the homogeneous scenario.
pub fn homogeneous_demand() -> DemandCurve {
    DemandCurve::new(0.05, 0.55, 0.0125, 50.0).expect("valid")
}

/// Per-link demand for the heterogeneous scenario on [`eight_link`]. At
/// price 30 every target equals [`EIGHT_LINK_TARGETS`].
#[allow(clippy::approx_constant)]
pub fn heterogeneous_demands() -> Vec<DemandCurve> {
    let gamma = [0.152, 0.262, 0.318, 0.298, 0.192, 0.144, 0.108, 0.171];
    let pi = [0.66, 0.6, 0.58, 0.59, 0.4, 0.51, 0.46, 0.48];
    let m = [54.0, 53.0, 56.0, 46.0, 59.0, 58.0, 44.0, 48.0];
    (0..8)
        .map(|i| {
            let b = (EIGHT_LINK_TARGETS[i] - gamma[i]) / (m[i] - 30.0);
            DemandCurve::new(gamma[i], pi[i], b, m[i]).expect("valid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heterogeneous_targets_at_thirty() {
        for (d, t) in heterogeneous_demands().iter().zip(EIGHT_LINK_TARGETS) {
            assert!((d.target_rate(30.0).unwrap() - t).abs() < 1e-12);
        }
    }

    #[test]
    fn eight_link_shape() {
        let g = eight_link();
        assert!(g.is_connected());
        assert_eq!(g.edges().len(), 10);
    }
}
