//! Geometry of the feasible throughput region: the convex hull of the
//! feasible states, and its interior (throughputs reachable by a state
//! distribution with full support).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_len, invalid, Result};
use crate::graph::{LinkId, StateSpace};
use crate::icn::{throughput_of, StationaryDistribution};
use crate::simplex::{solve, LinearProgram, LpOutcome};

/// Minimum-probability optimum above which a point is declared strictly
/// inside. Smaller margins are below the boundary resolution of the test.
pub const DEFAULT_STRICTNESS: f64 = 1e-9;

const PIVOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    StrictlyInside,
    OnBoundaryOrOutsideStrict,
    Outside,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipVerdict {
    pub verdict: Verdict,
    /// A state distribution whose throughput equals the queried point.
    /// Absent exactly when the verdict is `Outside`.
    pub witness: Option<StationaryDistribution>,
    /// Largest achievable minimum state probability, when feasible.
    pub min_probability: Option<f64>,
}

/// Classifies `target` against the feasible region with the default
/// strictness threshold.
pub fn membership(space: &StateSpace, target: &[f64]) -> Result<MembershipVerdict> {
    membership_with(space, target, DEFAULT_STRICTNESS)
}

/// Solves `max t` subject to `p_s = q_s + t`, `sum_s p_s s = target`,
/// `sum_s p_s = 1`, `q, t >= 0`. Infeasible means outside the hull; a
/// positive optimum means some full-support distribution reaches `target`.
pub fn membership_with(
    space: &StateSpace,
    target: &[f64],
    strictness: f64,
) -> Result<MembershipVerdict> {
    let n = space.link_count();
    check_len(n, target.len())?;
    if let Some(bad) = target.iter().find(|x| !x.is_finite()) {
        return Err(invalid("target", format!("entry {bad} is not finite")));
    }
    let states = space.states();
    let count = states.len();
    let cols = count + 1;

    let mut a = Vec::with_capacity(n + 1);
    for i in 0..n {
        let mut row = vec![0.0; cols];
        for (k, &s) in states.iter().enumerate() {
            if s >> i & 1 == 1 {
                row[k] = 1.0;
            }
        }
        row[count] = space.occupancy(i) as f64;
        a.push(row);
    }
    let mut total = vec![1.0; cols];
    total[count] = count as f64;
    a.push(total);

    let mut b = target.to_vec();
    b.push(1.0);
    let mut c = vec![0.0; cols];
    c[count] = 1.0;

    match solve(&LinearProgram { a, b, c }, PIVOT_TOLERANCE) {
        LpOutcome::Infeasible => Ok(MembershipVerdict {
            verdict: Verdict::Outside,
            witness: None,
            min_probability: None,
        }),
        LpOutcome::Unbounded => unreachable!("sum of probabilities bounds t"),
        LpOutcome::Optimal { x, value } => {
            let t = value;
            let mut p: Vec<f64> = x[..count].iter().map(|q| q + t).collect();
            let sum: f64 = p.iter().sum();
            for v in p.iter_mut() {
                *v /= sum;
            }
            let verdict = if t > strictness {
                Verdict::StrictlyInside
            } else {
                Verdict::OnBoundaryOrOutsideStrict
            };
            Ok(MembershipVerdict {
                verdict,
                witness: Some(StationaryDistribution::from_raw(p)),
                min_probability: Some(t),
            })
        }
    }
}

/// Moves the mass of every state in which `link` transmits onto the same
/// state with `link` silenced. Other links keep their throughput exactly.
pub fn project_zero_link(
    space: &StateSpace,
    p: &StationaryDistribution,
    link: LinkId,
) -> Result<StationaryDistribution> {
    check_len(space.len(), p.len())?;
    if link == 0 || link > space.link_count() {
        return Err(crate::error::Error::LinkOutOfRange {
            link,
            n: space.link_count(),
        });
    }
    let bit = 1u32 << (link - 1);
    let mut out = p.probabilities().to_vec();
    for (k, &s) in space.states().iter().enumerate() {
        if s & bit != 0 {
            let lower = space
                .index_of(s & !bit)
                .expect("state spaces are downward closed");
            out[lower] += out[k];
            out[k] = 0.0;
        }
    }
    Ok(StationaryDistribution::from_raw(out))
}

/// Draws a full-support state distribution from `seed` and returns its
/// throughput together with the distribution itself.
pub fn random_feasible_point(space: &StateSpace, seed: u64) -> (Vec<f64>, StationaryDistribution) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..space.len())
        .map(|_| 0.01 + rng.random::<f64>())
        .collect();
    let total: f64 = weights.iter().sum();
    let p = StationaryDistribution::from_raw(weights.iter().map(|w| w / total).collect());
    let theta = throughput_of(space, &p).expect("aligned by construction");
    (theta, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ContentionGraph;
    use crate::icn::{throughput, AccessProfile};
    use proptest::prelude::*;

    fn chain3() -> StateSpace {
        ContentionGraph::chain(3)
            .unwrap()
            .enumerate_states()
            .unwrap()
    }

    #[test]
    fn interior_point_of_chain() {
        let space = chain3();
        let v = membership(&space, &[0.4, 0.2, 0.4]).unwrap();
        assert_eq!(v.verdict, Verdict::StrictlyInside);
        let w = v.witness.unwrap();
        assert!(w.probabilities().iter().all(|&x| x > 0.0));
        let th = throughput_of(&space, &w).unwrap();
        for (a, b) in th.iter().zip([0.4, 0.2, 0.4]) {
            assert!((a - b).abs() < 1e-9);
        }
        // uniform over five states is the max-min distribution here
        assert!((v.min_probability.unwrap() - 0.2).abs() < 1e-9);
    }

    #[test]
    fn vertex_is_on_boundary() {
        let v = membership(&chain3(), &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(v.verdict, Verdict::OnBoundaryOrOutsideStrict);
        assert!(v.witness.is_some());
    }

    #[test]
    fn infeasible_point_is_outside() {
        let v = membership(&chain3(), &[0.6, 0.5, 0.0]).unwrap();
        assert_eq!(v.verdict, Verdict::Outside);
        assert!(v.witness.is_none());
        let neg = membership(&chain3(), &[-0.1, 0.2, 0.2]).unwrap();
        assert_eq!(neg.verdict, Verdict::Outside);
    }

    #[test]
    fn membership_rejects_bad_input() {
        assert!(membership(&chain3(), &[0.1, 0.1]).is_err());
        assert!(membership(&chain3(), &[0.1, f64::NAN, 0.1]).is_err());
    }

    #[test]
    fn zeroing_link_one_on_uniform_chain() {
        let space = chain3();
        let p = StationaryDistribution::new(vec![0.2; 5]).unwrap();
        let q = project_zero_link(&space, &p, 1).unwrap();
        // order: 000, 100, 010, 001, 101
        let expect = [0.4, 0.0, 0.2, 0.4, 0.0];
        for (a, b) in q.probabilities().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let th = throughput_of(&space, &q).unwrap();
        assert_eq!(th[0], 0.0);
        assert!((th[1] - 0.2).abs() < 1e-15);
        assert!((th[2] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn zeroing_is_identity_when_already_silent() {
        let space = chain3();
        let p = StationaryDistribution::new(vec![0.5, 0.0, 0.2, 0.3, 0.0]).unwrap();
        assert_eq!(project_zero_link(&space, &p, 1).unwrap(), p);
        let empty = StationaryDistribution::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        for link in 1..=3 {
            assert_eq!(project_zero_link(&space, &empty, link).unwrap(), empty);
        }
        assert!(project_zero_link(&space, &p, 4).is_err());
    }

    #[test]
    fn random_points_are_reproducible_and_strict() {
        let space = chain3();
        let (a, pa) = random_feasible_point(&space, 7);
        let (b, _) = random_feasible_point(&space, 7);
        assert_eq!(a, b);
        assert!(pa.probabilities().iter().all(|&x| x > 0.0));
        assert_eq!(
            membership(&space, &a).unwrap().verdict,
            Verdict::StrictlyInside
        );
    }

    #[test]
    fn vertices_are_downward_closed() {
        let g = ContentionGraph::new(5, &[(1, 2), (2, 3), (3, 4), (4, 5), (5, 1)]).unwrap();
        let space = g.enumerate_states().unwrap();
        for &v in space.states() {
            let mut t = v;
            loop {
                assert!(space.contains(t));
                if t == 0 {
                    break;
                }
                t = (t - 1) & v;
            }
        }
    }

    proptest! {
        #[test]
        fn product_form_throughput_is_strictly_inside(r in proptest::collection::vec(-3.0f64..3.0, 4)) {
            let g = ContentionGraph::new(4, &[(1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
            let space = g.enumerate_states().unwrap();
            let th = throughput(&space, &AccessProfile::new(r).unwrap()).unwrap();
            prop_assert_eq!(membership(&space, &th).unwrap().verdict, Verdict::StrictlyInside);
        }

        #[test]
        fn projection_preserves_other_links(seed in any::<u64>(), link in 1usize..=4) {
            let g = ContentionGraph::new(4, &[(1, 2), (2, 3), (3, 4)]).unwrap();
            let space = g.enumerate_states().unwrap();
            let (before, p) = random_feasible_point(&space, seed);
            let q = project_zero_link(&space, &p, link).unwrap();
            let after = throughput_of(&space, &q).unwrap();
            prop_assert!((q.probabilities().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for i in 0..4 {
                if i + 1 == link {
                    prop_assert_eq!(after[i], 0.0);
                } else {
                    prop_assert!((after[i] - before[i]).abs() <= 1e-12);
                }
            }
        }
    }
}
