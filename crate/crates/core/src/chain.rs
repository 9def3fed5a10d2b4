//! The Reed-Frost height-profile chain `(Z(h), C(h))` simulated from its
//! binomial transition kernel, without building a graph.
//!
//! Given `Z(h) = z` and `C(h) = c`, the next generation is
//! `Bin(n - c, q(n, z))` with `q(n, z) = 1 - (1 - p)^z` while `z > 0` and
//! `c < n`, and zero otherwise.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{expm1, log1p, pow};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::graph::HeightProfile;
use crate::{edge_probability, CriticalWindow, Error, Result, RunConfig};

/// Largest `n` accepted by [`exact_profile_distribution`].
pub const EXACT_MAX_N: u64 = 12;

/// `q(n, z) = 1 - (1 - p(n))^z`, evaluated as `-expm1(z * log1p(-p))`.
pub fn q_prob(window: &CriticalWindow, n: u64, z: u64) -> Result<f64> {
    Ok(ReedFrost::new(window, n)?.q(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainState {
    pub z: u64,
    pub c: u64,
}

/// Transition kernel for a fixed population size and edge probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReedFrost {
    n: u64,
    p: f64,
    log_escape: f64,
}

impl ReedFrost {
    pub fn new(window: &CriticalWindow, n: u64) -> Result<Self> {
        let p = edge_probability(window, n)?;
        Self::with_probability(n, p)
    }

    pub fn with_probability(n: u64, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("population must be positive".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("edge probability {p} outside [0, 1]")));
        }
        Ok(ReedFrost {
            n,
            p,
            log_escape: log1p(-p),
        })
    }

    pub fn population(&self) -> u64 {
        self.n
    }

    pub fn edge_probability(&self) -> f64 {
        self.p
    }

    /// Probability that a susceptible meets at least one of `z` infectives.
    pub fn q(&self, z: u64) -> f64 {
        if z == 0 {
            0.0
        } else if self.p == 1.0 {
            1.0
        } else {
            -expm1(z as f64 * self.log_escape)
        }
    }

    /// One generation. Requires `z <= c <= n`.
    pub fn step<R: Rng + ?Sized>(&self, state: ChainState, rng: &mut R) -> ChainState {
        debug_assert!(state.z <= state.c && state.c <= self.n);
        if state.z == 0 || state.c >= self.n {
            return ChainState { z: 0, c: state.c };
        }
        let q = self.q(state.z);
        let next = Binomial::new(self.n - state.c, q)
            .expect("q lies in [0, 1]")
            .sample(rng);
        ChainState {
            z: next,
            c: state.c + next,
        }
    }

    /// Runs from `(k, k)` until absorption or `max_steps` generations.
    pub fn simulate<R: Rng + ?Sized>(&self, k: u64, max_steps: usize, rng: &mut R) -> Result<EpidemicTrace> {
        if k == 0 || k > self.n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= k <= n, got k = {k}, n = {}",
                self.n
            )));
        }
        if max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
        }
        let mut z = vec![k];
        let mut c = vec![k];
        let mut state = ChainState { z: k, c: k };
        let mut absorbed = false;
        for _ in 0..max_steps {
            state = self.step(state, rng);
            if state.z == 0 {
                absorbed = true;
                break;
            }
            z.push(state.z);
            c.push(state.c);
        }
        Ok(EpidemicTrace {
            z,
            c,
            n: self.n,
            k,
            absorbed,
        })
    }
}

/// Convenience wrapper around [`ReedFrost::step`].
pub fn step<R: Rng + ?Sized>(
    state: ChainState,
    window: &CriticalWindow,
    n: u64,
    rng: &mut R,
) -> Result<ChainState> {
    if state.z > state.c || state.c > n {
        return Err(Error::InvalidArgument(format!(
            "state (z = {}, c = {}) violates z <= c <= n = {n}",
            state.z, state.c
        )));
    }
    Ok(ReedFrost::new(window, n)?.step(state, rng))
}

/// Simulates one trace for a run configuration.
pub fn simulate_trace<R: Rng + ?Sized>(config: &RunConfig, max_steps: usize, rng: &mut R) -> Result<EpidemicTrace> {
    let k = config.k()?;
    ReedFrost::new(&config.window, config.n)?.simulate(k, max_steps, rng)
}

/// A Reed-Frost path. `z` and `c` hold `Z(h)` and `C(h)` for `h = 0..=H`
/// with every `Z(h) > 0`; an absorbed trace has `Z(H + 1) = 0` and `C`
/// constant from `H` on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpidemicTrace {
    pub z: Vec<u64>,
    pub c: Vec<u64>,
    pub n: u64,
    pub k: u64,
    pub absorbed: bool,
}

impl EpidemicTrace {
    /// First height with `Z = 0`, if the chain was absorbed.
    pub fn absorbed_at(&self) -> Option<usize> {
        self.absorbed.then_some(self.z.len())
    }

    pub fn truncated(&self) -> bool {
        !self.absorbed
    }

    /// `C` at the last recorded height; the total ever infected when absorbed.
    pub fn final_size(&self) -> u64 {
        *self.c.last().expect("trace has Z(0)")
    }

    /// `Z(h)`, zero past absorption.
    pub fn z_at(&self, h: usize) -> u64 {
        self.z.get(h).copied().unwrap_or(0)
    }

    pub fn profile(&self) -> HeightProfile {
        HeightProfile::new(self.z.clone()).expect("trace entries are positive")
    }
}

/// `Bin(trials, q)` mass function by direct evaluation.
pub fn binomial_pmf(trials: u64, q: f64) -> Vec<f64> {
    let mut coeff = 1.0f64;
    (0..=trials)
        .map(|m| {
            if m > 0 {
                coeff = coeff * (trials - m + 1) as f64 / m as f64;
            }
            coeff * pow(q, m as f64) * pow(1.0 - q, (trials - m) as f64)
        })
        .collect()
}

/// Full transition table `P[(z, c) -> z']` for small `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelExact {
    n: u64,
    rows: BTreeMap<(u64, u64), Vec<f64>>,
}

impl KernelExact {
    pub fn new(n: u64, p: f64) -> Result<Self> {
        if n > EXACT_MAX_N {
            return Err(Error::StateSpace { n, max: EXACT_MAX_N });
        }
        let kernel = ReedFrost::with_probability(n, p)?;
        let mut rows = BTreeMap::new();
        for c in 0..=n {
            for z in 0..=c {
                let row = if z == 0 || c == n {
                    vec![1.0]
                } else {
                    binomial_pmf(n - c, kernel.q(z))
                };
                rows.insert((z, c), row);
            }
        }
        Ok(KernelExact { n, rows })
    }

    pub fn population(&self) -> u64 {
        self.n
    }

    /// Mass on `z' = 0, 1, ...` from state `(z, c)`.
    pub fn row(&self, z: u64, c: u64) -> Option<&[f64]> {
        self.rows.get(&(z, c)).map(Vec::as_slice)
    }

    pub fn states(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.rows.keys().copied()
    }
}

/// Exact law of the absorbed height profile `Z(0), Z(1), ...` (terminal zero
/// included, cut to `horizon + 1` entries) by forward dynamic programming
/// over the kernel.
pub fn exact_profile_distribution(
    n: u64,
    k: u64,
    p: f64,
    horizon: usize,
) -> Result<BTreeMap<Vec<u64>, f64>> {
    if n > EXACT_MAX_N {
        return Err(Error::StateSpace { n, max: EXACT_MAX_N });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let horizon = horizon.min(n as usize);
    let kernel = KernelExact::new(n, p)?;
    let mut done = BTreeMap::new();
    // live prefixes with their chain state
    let mut live: Vec<(Vec<u64>, ChainState, f64)> = vec![(vec![k], ChainState { z: k, c: k }, 1.0)];
    while let Some((prefix, state, mass)) = live.pop() {
        if prefix.len() > horizon {
            *done.entry(prefix).or_insert(0.0) += mass;
            continue;
        }
        let row = kernel.row(state.z, state.c).expect("reachable states are tabulated");
        for (next, &prob) in row.iter().enumerate() {
            if prob == 0.0 {
                continue;
            }
            let next = next as u64;
            let mut key = prefix.clone();
            key.push(next);
            if next == 0 {
                *done.entry(key).or_insert(0.0) += mass * prob;
            } else {
                let state = ChainState {
                    z: next,
                    c: state.c + next,
                };
                live.push((key, state, mass * prob));
            }
        }
    }
    Ok(done)
}

/// Total-variation distance between two discrete laws.
pub fn total_variation(a: &BTreeMap<Vec<u64>, f64>, b: &BTreeMap<Vec<u64>, f64>) -> f64 {
    let mut sum = 0.0;
    for (key, &pa) in a {
        sum += (pa - b.get(key).copied().unwrap_or(0.0)).abs();
    }
    for (key, &pb) in b {
        if !a.contains_key(key) {
            sum += pb;
        }
    }
    0.5 * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngStream;
    use approx::assert_relative_eq;

    #[test]
    fn q_examples() {
        let w = CriticalWindow::aldous(0.0);
        assert_eq!(q_prob(&w, 100, 0).unwrap(), 0.0);
        assert_relative_eq!(q_prob(&w, 100, 1).unwrap(), 0.01, max_relative = 1e-14);
        let w = CriticalWindow::aldous(1.0);
        let p = 0.01 + libm::pow(100.0, -4.0 / 3.0);
        let expect = 1.0 - (1.0 - p) * (1.0 - p);
        assert_relative_eq!(q_prob(&w, 100, 2).unwrap(), expect, max_relative = 1e-13);
        assert!((q_prob(&w, 100, 2).unwrap() - 0.0241612).abs() < 1e-6);
    }

    #[test]
    fn absorbed_states_stay_put() {
        let w = CriticalWindow::aldous(0.0);
        let mut rng = RngStream::new(0, 0, "chain");
        for _ in 0..100 {
            assert_eq!(
                step(ChainState { z: 0, c: 5 }, &w, 100, &mut rng).unwrap(),
                ChainState { z: 0, c: 5 }
            );
            assert_eq!(
                step(ChainState { z: 1, c: 100 }, &w, 100, &mut rng).unwrap(),
                ChainState { z: 0, c: 100 }
            );
        }
        assert!(step(ChainState { z: 3, c: 2 }, &w, 100, &mut rng).is_err());
    }

    #[test]
    fn one_step_mean() {
        let kernel = ReedFrost::new(&CriticalWindow::aldous(0.0), 100).unwrap();
        let mut rng = RngStream::new(11, 0, "chain");
        let reps = 1_000_000;
        let sum: u64 = (0..reps)
            .map(|_| kernel.step(ChainState { z: 1, c: 1 }, &mut rng).z)
            .sum();
        let mean = sum as f64 / reps as f64;
        assert!((mean - 0.99).abs() < 0.004, "mean {mean}");
    }

    #[test]
    fn trace_with_everyone_infected() {
        let kernel = ReedFrost::with_probability(7, 0.5).unwrap();
        let mut rng = RngStream::new(0, 0, "chain");
        let t = kernel.simulate(7, 10, &mut rng).unwrap();
        assert_eq!(t.z, vec![7]);
        assert_eq!(t.c, vec![7]);
        assert_eq!(t.absorbed_at(), Some(1));
    }

    #[test]
    fn first_generation_mean() {
        let config = RunConfig {
            n: 100,
            x: 5.0 / libm::cbrt(100.0) + 1e-9,
            window: CriticalWindow::aldous(0.0),
            seed: 0,
            replicates: 1,
        };
        assert_eq!(config.k().unwrap(), 5);
        let mut rng = RngStream::new(12, 0, "chain");
        let reps = 1_000_000;
        let sum: u64 = (0..reps)
            .map(|_| simulate_trace(&config, 1, &mut rng).unwrap().z_at(1))
            .sum();
        let mean = sum as f64 / reps as f64;
        let expect = 95.0 * (1.0 - libm::pow(0.99, 5.0));
        assert!((mean - expect).abs() < 0.02, "mean {mean} vs {expect}");
    }

    #[test]
    fn truncation_is_flagged() {
        let kernel = ReedFrost::with_probability(1000, 0.5).unwrap();
        let mut rng = RngStream::new(0, 0, "chain");
        let t = kernel.simulate(1, 1, &mut rng).unwrap();
        assert!(t.truncated() || t.z.len() == 1);
    }

    #[test]
    fn kernel_rows_sum_to_one() {
        let k = KernelExact::new(12, 0.3).unwrap();
        for (z, c) in k.states() {
            let s: f64 = k.row(z, c).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "row ({z}, {c}) sums to {s}");
        }
        assert!(KernelExact::new(13, 0.3).is_err());
    }

    #[test]
    fn exact_distribution_examples() {
        let d = exact_profile_distribution(2, 1, 0.5, 2).unwrap();
        assert_relative_eq!(d[&vec![1, 0]], 0.5, max_relative = 1e-15);
        assert_relative_eq!(d[&vec![1, 1, 0]], 0.5, max_relative = 1e-15);

        let d = exact_profile_distribution(3, 3, 0.37, 3).unwrap();
        assert_eq!(d.len(), 1);
        assert_relative_eq!(d[&vec![3, 0]], 1.0);

        let d = exact_profile_distribution(3, 1, 0.5, 3).unwrap();
        let second_gen_two: f64 = d.iter().filter(|(k, _)| k.get(1) == Some(&2)).map(|(_, p)| p).sum();
        assert_relative_eq!(second_gen_two, 0.25, max_relative = 1e-14);

        assert!(matches!(
            exact_profile_distribution(13, 1, 0.5, 13),
            Err(Error::StateSpace { .. })
        ));
    }

    #[test]
    fn exact_distribution_sums_to_one() {
        for horizon in [1, 2, 12] {
            let d = exact_profile_distribution(12, 2, 0.15, horizon).unwrap();
            let total: f64 = d.values().sum();
            assert!((total - 1.0).abs() < 1e-10, "horizon {horizon}: {total}");
        }
    }

    #[test]
    fn total_variation_basics() {
        let mut a = BTreeMap::new();
        a.insert(vec![1], 0.5);
        a.insert(vec![2], 0.5);
        let mut b = BTreeMap::new();
        b.insert(vec![1], 1.0);
        assert_relative_eq!(total_variation(&a, &b), 0.5);
        assert_eq!(total_variation(&a, &a), 0.0);
    }
}
