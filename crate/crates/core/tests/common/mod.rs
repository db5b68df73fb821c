//! Brute-force references shared by the integration tests. Nothing here
//! calls into the library's model code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every independent set over all `2^n` masks, ascending.
pub fn independent_sets(n: usize, edges: &[(usize, usize)]) -> Vec<u32> {
    (0u32..1 << n)
        .filter(|&s| {
            edges
                .iter()
                .all(|&(a, b)| s >> (a - 1) & 1 == 0 || s >> (b - 1) & 1 == 0)
        })
        .collect()
}

/// Stationary probabilities `prod_{i in s} rho_i / Z` by direct products.
pub fn product_form(states: &[u32], rho: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = states
        .iter()
        .map(|&s| {
            (0..rho.len())
                .filter(|i| s >> i & 1 == 1)
                .map(|i| rho[i])
                .product()
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

pub fn link_throughput(states: &[u32], p: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            states
                .iter()
                .zip(p)
                .filter(|(s, _)| *s >> i & 1 == 1)
                .map(|(_, q)| q)
                .sum()
        })
        .collect()
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&q| q > 0.0)
        .map(|q| q * q.ln())
        .sum::<f64>()
}

/// `target . r - ln sum_s exp(s . r)`, summed directly.
pub fn log_likelihood(states: &[u32], r: &[f64], target: &[f64]) -> f64 {
    let z: f64 = states
        .iter()
        .map(|&s| {
            (0..r.len())
                .filter(|i| s >> i & 1 == 1)
                .map(|i| r[i])
                .sum::<f64>()
                .exp()
        })
        .sum();
    target.iter().zip(r).map(|(t, x)| t * x).sum::<f64>() - z.ln()
}

pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            let (a, b) = (a - 1, b - 1);
            for (x, y) in [(a, b), (b, a)] {
                if x == u && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen.iter().all(|&v| v)
}

/// Random connected graph on `lo..=hi` links.
pub fn random_connected(
    rng: &mut ChaCha8Rng,
    lo: usize,
    hi: usize,
) -> (usize, Vec<(usize, usize)>) {
    loop {
        let n = rng.random_range(lo..=hi);
        let p = rng.random_range(0.3..0.7);
        let mut edges = Vec::new();
        for a in 1..=n {
            for b in a + 1..=n {
                if rng.random::<f64>() < p {
                    edges.push((a, b));
                }
            }
        }
        if is_connected(n, &edges) {
            return (n, edges);
        }
    }
}

/// Throughput of a random full-support distribution over the states, so
/// strictly inside the feasible region.
pub fn random_interior_point(rng: &mut ChaCha8Rng, states: &[u32], n: usize) -> Vec<f64> {
    let w: Vec<f64> = states.iter().map(|_| 0.05 + rng.random::<f64>()).collect();
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / z).collect();
    link_throughput(states, &p, n)
}
