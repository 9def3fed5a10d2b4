//! Erdős–Rényi sampling, multi-source breadth-first exploration and the
//! statistics read off it: heights, the height profile `Z`, the cousin
//! statistic `csn`, the cumulative cousin process `K` and the breadth-first
//! walk.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{floor, log1p, pow};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const UNREACHED: u32 = u32::MAX;

/// Above this expected degree the sampler tests every pair directly.
const SPARSE_DEGREE_LIMIT: f64 = 64.0;

/// Largest `n` accepted by [`exhaustive_profile_distribution`].
pub const EXHAUSTIVE_MAX_N: u32 = 7;

/// Simple undirected graph in compressed sparse row form.
///
/// Neighbor lists are sorted ascending, symmetric, and free of self-loops
/// and duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    n: u32,
    p: f64,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl GraphSample {
    /// Builds a graph from an edge list. Duplicate edges are merged;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn from_edges(n: u32, edges: &[(u32, u32)], p: f64) -> Result<Self> {
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) out of range for n = {n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop at vertex {u}")));
            }
        }
        let mut g = Self::build(n, p, edges);
        let mut cleaned = Vec::with_capacity(g.neighbors.len());
        let mut offsets = Vec::with_capacity(n as usize + 1);
        offsets.push(0);
        for v in 0..n as usize {
            let list = &mut g.neighbors[g.offsets[v]..g.offsets[v + 1]];
            list.sort_unstable();
            let mut last = None;
            for &w in list.iter() {
                if last != Some(w) {
                    cleaned.push(w);
                    last = Some(w);
                }
            }
            offsets.push(cleaned.len());
        }
        g.neighbors = cleaned;
        g.offsets = offsets;
        Ok(g)
    }

    // Edges must be loop-free. Lists come out in edge-insertion order.
    fn build(n: u32, p: f64, edges: &[(u32, u32)]) -> Self {
        let mut degree = vec![0usize; n as usize + 1];
        for &(u, v) in edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n as usize + 1);
        let mut acc = 0;
        offsets.push(0);
        for d in &degree[..n as usize] {
            acc += d;
            offsets.push(acc);
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0u32; acc];
        for &(u, v) in edges {
            neighbors[fill[u as usize]] = v;
            fill[u as usize] += 1;
            neighbors[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        GraphSample {
            n,
            p,
            offsets,
            neighbors,
        }
    }

    pub fn vertex_count(&self) -> u32 {
        self.n
    }

    pub fn edge_probability(&self) -> f64 {
        self.p
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.neighbors[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }
}

/// Samples `G(n, p)`.
///
/// For `n * p <= 64` the pair enumeration is traversed with geometric skips
/// (expected `O(n + edges)`); otherwise each pair is tested. Both are exact.
pub fn sample_graph<R: Rng + ?Sized>(n: u32, p: f64, rng: &mut R) -> Result<GraphSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("graph needs at least one vertex".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("edge probability {p} outside [0, 1]")));
    }
    let edges = if p == 0.0 {
        Vec::new()
    } else if p == 1.0 || n as f64 * p > SPARSE_DEGREE_LIMIT {
        dense_edges(n, p, rng)
    } else {
        sparse_edges(n, p, rng)
    };
    Ok(GraphSample::build(n, p, &edges))
}

fn dense_edges<R: Rng + ?Sized>(n: u32, p: f64, rng: &mut R) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for v in 1..n {
        for w in 0..v {
            if p == 1.0 || rng.random::<f64>() < p {
                edges.push((v, w));
            }
        }
    }
    edges
}

// Batagelj–Brandes skipping over pairs (v, w), w < v, in lexicographic order.
fn sparse_edges<R: Rng + ?Sized>(n: u32, p: f64, rng: &mut R) -> Vec<(u32, u32)> {
    let n = n as u64;
    let total = n * (n - 1) / 2;
    let log_q = log1p(-p);
    let mut edges = Vec::with_capacity((total as f64 * p * 1.1) as usize + 16);
    let mut next = 0u64;
    // pairs whose larger endpoint is `v` occupy [base, base + v)
    let (mut v, mut base) = (1u64, 0u64);
    loop {
        let u: f64 = rng.random();
        let skip = floor(log1p(-u) / log_q);
        if !(skip < (total - next) as f64) {
            break;
        }
        let idx = next + skip as u64;
        if idx >= total {
            break;
        }
        while idx >= base + v {
            base += v;
            v += 1;
        }
        edges.push((v as u32, (idx - base) as u32));
        next = idx + 1;
    }
    edges
}

/// Draws `k` distinct vertices uniformly, in draw order, by a partial
/// Fisher–Yates shuffle kept sparse so the cost is `O(k log k)`.
pub fn choose_roots<R: Rng + ?Sized>(n: u32, k: u32, rng: &mut R) -> Result<Vec<u32>> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut swapped: BTreeMap<u32, u32> = BTreeMap::new();
    let mut roots = Vec::with_capacity(k as usize);
    for i in 0..k {
        let j = rng.random_range(i..n);
        let at_j = *swapped.get(&j).unwrap_or(&j);
        let at_i = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, at_i);
        roots.push(at_j);
    }
    Ok(roots)
}

/// Multi-source breadth-first exploration from `k` roots.
#[derive(Debug, Clone, PartialEq)]
pub struct Exploration {
    roots: Vec<u32>,
    order: Vec<u32>,
    depth: Vec<u32>,
    heights: Vec<u32>,
}

impl Exploration {
    pub fn roots(&self) -> &[u32] {
        &self.roots
    }

    /// Breadth-first labeling `w(0), w(1), ...` of the vertices connected to a root.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// `hgt(w(j))` along the labeling; non-decreasing.
    pub fn order_heights(&self) -> &[u32] {
        &self.depth
    }

    /// Distance from `v` to the nearest root, `None` if unreachable.
    pub fn height(&self, v: u32) -> Option<u32> {
        match self.heights[v as usize] {
            UNREACHED => None,
            h => Some(h),
        }
    }

    /// Number of explored vertices `A`.
    pub fn explored(&self) -> usize {
        self.order.len()
    }

    pub fn profile(&self) -> HeightProfile {
        let mut z = Vec::new();
        for &h in &self.depth {
            let h = h as usize;
            if h == z.len() {
                z.push(0);
            }
            z[h] += 1;
        }
        HeightProfile { z }
    }
}

/// Explores from `k` uniformly chosen roots.
pub fn explore<R: Rng + ?Sized>(graph: &GraphSample, k: u32, rng: &mut R) -> Result<Exploration> {
    let roots = choose_roots(graph.vertex_count(), k, rng)?;
    explore_from_roots(graph, &roots)
}

/// Explores from the given roots, which become `w(0..k)` in the given order.
/// Unlabeled neighbors of `w(j)` are labeled in ascending vertex id.
pub fn explore_from_roots(graph: &GraphSample, roots: &[u32]) -> Result<Exploration> {
    let n = graph.vertex_count();
    if roots.is_empty() {
        return Err(Error::InvalidArgument("at least one root is required".into()));
    }
    let mut heights = vec![UNREACHED; n as usize];
    let mut order = Vec::with_capacity(roots.len());
    let mut depth = Vec::with_capacity(roots.len());
    for &r in roots {
        if r >= n {
            return Err(Error::InvalidArgument(format!("root {r} out of range for n = {n}")));
        }
        if heights[r as usize] != UNREACHED {
            return Err(Error::InvalidArgument(format!("root {r} repeated")));
        }
        heights[r as usize] = 0;
        order.push(r);
        depth.push(0);
    }
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        let next = depth[head] + 1;
        head += 1;
        for &w in graph.neighbors(v) {
            if heights[w as usize] == UNREACHED {
                heights[w as usize] = next;
                order.push(w);
                depth.push(next);
            }
        }
    }
    Ok(Exploration {
        roots: roots.to_vec(),
        order,
        depth,
        heights,
    })
}

/// Total number of vertices ever infected, `A = sum_h Z(h)`.
pub fn infected_total(expl: &Exploration) -> u64 {
    expl.explored() as u64
}

/// Height profile `Z(h)`, `h = 0..=H`, with `Z(H) > 0` and `Z(H + 1) = 0`.
///
/// Both graph explorations and Reed-Frost traces produce one. The cousin
/// statistic only depends on the profile, so [`HeightProfile::cousin_at`] and
/// [`HeightProfile::cumulative_cousin_at`] evaluate `csn` and `K` at any
/// label index without materializing the length-`A` series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightProfile {
    z: Vec<u64>,
}

impl HeightProfile {
    /// Trailing zeros are dropped; an all-zero profile is rejected.
    pub fn new(mut z: Vec<u64>) -> Result<Self> {
        while z.last() == Some(&0) {
            z.pop();
        }
        if z.is_empty() {
            return Err(Error::InvalidArgument("height profile has no vertices".into()));
        }
        if z.contains(&0) {
            return Err(Error::InvalidArgument(
                "height profile has an interior zero".into(),
            ));
        }
        Ok(HeightProfile { z })
    }

    pub fn z(&self) -> &[u64] {
        &self.z
    }

    /// `Z(h)`, zero beyond the maximal height.
    pub fn at(&self, h: usize) -> u64 {
        self.z.get(h).copied().unwrap_or(0)
    }

    pub fn max_height(&self) -> usize {
        self.z.len() - 1
    }

    /// `C(h) = sum_{j <= h} Z(j)`.
    pub fn cumulative(&self) -> Vec<u64> {
        self.z
            .iter()
            .scan(0u64, |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.z.iter().sum()
    }

    /// Profile as an absorbed path key: `Z(0..=H)` followed by the absorbing
    /// zero, cut to at most `horizon + 1` entries.
    pub fn absorbed_key(&self, horizon: usize) -> Vec<u64> {
        let mut key = self.z.clone();
        key.push(0);
        key.truncate(horizon + 1);
        key
    }

    // height of label index j and the first label index at that height
    fn locate(&self, j: u64) -> Option<(usize, u64)> {
        let mut start = 0u64;
        for (h, &zh) in self.z.iter().enumerate() {
            if j < start + zh {
                return Some((h, start));
            }
            start += zh;
        }
        None
    }

    /// `csn(j)`; zero for `j >= A`.
    pub fn cousin_at(&self, j: u64) -> u64 {
        self.locate(j).map_or(0, |(h, _)| self.z[h])
    }

    /// `K(j) = sum_{i < j} csn(i)`; constant for `j >= A`.
    pub fn cumulative_cousin_at(&self, j: u64) -> u64 {
        let mut acc = 0u64;
        let mut start = 0u64;
        for &zh in &self.z {
            if j < start + zh {
                return acc + (j - start) * zh;
            }
            acc += zh * zh;
            start += zh;
        }
        acc
    }

    pub fn cousin_series(&self) -> CousinSeries {
        let depth: Vec<u32> = self
            .z
            .iter()
            .enumerate()
            .flat_map(|(h, &zh)| core::iter::repeat_n(h as u32, zh as usize))
            .collect();
        CousinSeries::from_depths(&depth)
    }
}

/// Cousin statistic along the breadth-first labeling and the derived
/// cumulative sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CousinSeries {
    /// `csn(j)` for `j = 0..A`.
    pub csn: Vec<u64>,
    /// `K(j)` for `j = 0..=A`.
    pub k: Vec<u64>,
    /// Height profile `Z(h)`.
    pub z: Vec<u64>,
    /// `C(h)`.
    pub c: Vec<u64>,
}

impl CousinSeries {
    fn from_depths(depth: &[u32]) -> Self {
        let mut z: Vec<u64> = Vec::new();
        for &h in depth {
            let h = h as usize;
            while z.len() <= h {
                z.push(0);
            }
            z[h] += 1;
        }
        let csn: Vec<u64> = depth.iter().map(|&h| z[h as usize]).collect();
        let mut k = Vec::with_capacity(csn.len() + 1);
        let mut acc = 0;
        k.push(0);
        for &s in &csn {
            acc += s;
            k.push(acc);
        }
        let mut c = Vec::with_capacity(z.len());
        let mut total = 0;
        for &zh in &z {
            total += zh;
            c.push(total);
        }
        CousinSeries { csn, k, z, c }
    }
}

pub fn cousin_series(expl: &Exploration) -> CousinSeries {
    CousinSeries::from_depths(expl.order_heights())
}

/// Breadth-first walk over all components:
/// `X(0) = 0`, `X(i + 1) = X(i) + c(i) - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkPath {
    pub x: Vec<i64>,
}

impl WalkPath {
    pub fn components(&self) -> u64 {
        (-self.x.last().copied().unwrap_or(0)) as u64
    }

    /// Number of steps `i` where `X(i)` equals its running minimum and the
    /// next increment is `-1`; these are exactly the component ends.
    pub fn minimum_decrements(&self) -> u64 {
        let mut running_min = i64::MAX;
        let mut count = 0;
        for w in self.x.windows(2) {
            running_min = running_min.min(w[0]);
            if w[0] == running_min && w[1] - w[0] == -1 {
                count += 1;
            }
        }
        count
    }
}

/// Explores every vertex: breadth-first inside a component, children being
/// previously unseen neighbors in ascending id, restarting at a uniformly
/// chosen unexplored vertex whenever the queue empties.
pub fn breadth_first_walk<R: Rng + ?Sized>(graph: &GraphSample, rng: &mut R) -> WalkPath {
    let n = graph.vertex_count() as usize;
    // unseen vertices, with swap-remove positions
    let mut pool: Vec<u32> = (0..n as u32).collect();
    let mut pos: Vec<u32> = (0..n as u32).collect();
    let mut seen = vec![false; n];
    let mut queue: Vec<u32> = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n + 1);
    let mut level = 0i64;
    x.push(level);

    let take = |v: u32, pool: &mut Vec<u32>, pos: &mut Vec<u32>, seen: &mut Vec<bool>| {
        let i = pos[v as usize] as usize;
        let last = *pool.last().expect("pool holds v");
        pool[i] = last;
        pos[last as usize] = i as u32;
        pool.pop();
        seen[v as usize] = true;
    };

    for head in 0..n {
        if head == queue.len() {
            let idx = rng.random_range(0..pool.len());
            let start = pool[idx];
            take(start, &mut pool, &mut pos, &mut seen);
            queue.push(start);
        }
        let v = queue[head];
        let mut children = 0i64;
        for &w in graph.neighbors(v) {
            if !seen[w as usize] {
                take(w, &mut pool, &mut pos, &mut seen);
                queue.push(w);
                children += 1;
            }
        }
        level += children - 1;
        x.push(level);
    }
    WalkPath { x }
}

/// Exact law of the absorbed height profile (see
/// [`HeightProfile::absorbed_key`]) by enumerating every graph on `n`
/// vertices, weighted `p^e (1 - p)^(N - e)`, and every `k`-subset of roots.
pub fn exhaustive_profile_distribution(
    n: u32,
    k: u32,
    p: f64,
    horizon: usize,
) -> Result<BTreeMap<Vec<u64>, f64>> {
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::StateSpace {
            n: n as u64,
            max: EXHAUSTIVE_MAX_N as u64,
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let pairs: Vec<(u32, u32)> = (1..n).flat_map(|v| (0..v).map(move |w| (v, w))).collect();
    let subsets = k_subsets(n, k);
    let subset_weight = 1.0 / subsets.len() as f64;
    let mut dist = BTreeMap::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let edges: Vec<(u32, u32)> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let e = edges.len() as i32;
        let weight = pow(p, e as f64) * pow(1.0 - p, (pairs.len() as i32 - e) as f64);
        if weight == 0.0 {
            continue;
        }
        let graph = GraphSample::build(n, p, &edges);
        for roots in &subsets {
            let key = explore_from_roots(&graph, roots)?.profile().absorbed_key(horizon);
            *dist.entry(key).or_insert(0.0) += weight * subset_weight;
        }
    }
    Ok(dist)
}

fn k_subsets(n: u32, k: u32) -> Vec<Vec<u32>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}
