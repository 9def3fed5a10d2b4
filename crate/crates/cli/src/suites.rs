//! Verification suites. Each suite runs one acceptance criterion and returns
//! one report per gated quantity.

use std::time::Instant;

use critwin_core::analysis::{ks_two_sample, mean_se, ComparisonReport, Scaling, SeriesKind};
use critwin_core::chain::{exact_profile_distribution, total_variation, ReedFrost};
use critwin_core::continuum::{
    integrate_cumulative_rk4, lamperti_route, sample_hitting_time, sde_state_after, self_similarity_test, steps_for,
    DeterministicLimit,
};
use critwin_core::graph::{
    breadth_first_walk, cousin_series, exhaustive_profile_distribution, explore, sample_graph, HeightProfile,
};
use critwin_core::moments::{bound_sweep, Quantity, WindowFamily};
use critwin_core::{edge_probability, CriticalWindow, Error, Result, RngStream, RunConfig};
use rand::Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Kernel,
    Identities,
    Moments,
    Zlimit,
    Lamperti,
    Cousin,
    Klimit,
    Deterministic,
    Selfsim,
    Components,
    Conjecture,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Kernel,
        Suite::Identities,
        Suite::Moments,
        Suite::Zlimit,
        Suite::Lamperti,
        Suite::Cousin,
        Suite::Klimit,
        Suite::Deterministic,
        Suite::Selfsim,
        Suite::Components,
        Suite::Conjecture,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Kernel => "kernel",
            Suite::Identities => "identities",
            Suite::Moments => "moments",
            Suite::Zlimit => "zlimit",
            Suite::Lamperti => "lamperti",
            Suite::Cousin => "cousin",
            Suite::Klimit => "klimit",
            Suite::Deterministic => "deterministic",
            Suite::Selfsim => "selfsim",
            Suite::Components => "components",
            Suite::Conjecture => "conjecture",
        }
    }

    /// Exploratory suites report but never fail.
    pub fn gating(self) -> bool {
        self != Suite::Conjecture
    }
}

/// Overrides for a suite run. Unset fields take the criterion's values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SuiteParams {
    pub seed: u64,
    pub n: Option<u64>,
    pub samples: Option<usize>,
    pub dt: Option<f64>,
}

pub fn run_suite(suite: Suite, params: &SuiteParams) -> Result<Vec<ComparisonReport>> {
    let start = Instant::now();
    let mut reports = match suite {
        Suite::Kernel => kernel(),
        Suite::Identities => identities(params),
        Suite::Moments => moments(params),
        Suite::Zlimit => zlimit(params),
        Suite::Lamperti => lamperti(params),
        Suite::Cousin => cousin(params),
        Suite::Klimit => klimit(params),
        Suite::Deterministic => deterministic(params),
        Suite::Selfsim => selfsim(params),
        Suite::Components => components(params),
        Suite::Conjecture => conjecture(params),
    }?;
    let secs = start.elapsed().as_secs_f64();
    for r in &mut reports {
        r.details.insert("suite_seconds".into(), secs);
    }
    Ok(reports)
}

// KS report held to a fixed tolerance; the part not explained by the 95%
// noise floor is recorded as the discretization allowance.
fn ks_fixed(report: ComparisonReport, tolerance: f64) -> ComparisonReport {
    let floor = report.noise_floor.unwrap_or(0.0);
    let mut r = report.with_allowance(tolerance - floor);
    r.tolerance = tolerance;
    r.pass = r.statistic <= tolerance;
    r
}

fn kernel() -> Result<Vec<ComparisonReport>> {
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for n in 3..=5u32 {
        for k in 1..=2u32 {
            for p in [0.2, 0.5] {
                let graphs = exhaustive_profile_distribution(n, k, p, n as usize)?;
                let kernel = exact_profile_distribution(n as u64, k as u64, p, n as usize)?;
                let tv = total_variation(&graphs, &kernel);
                worst = worst.max(tv);
                rows.push((format!("tv_n{n}_k{k}_p{p}"), tv));
            }
        }
    }
    let mut r = ComparisonReport::upper_bound("kernel", worst, 1e-10);
    for (key, tv) in rows {
        r = r.detail(&key, tv);
    }
    Ok(vec![r])
}

// Number of positions where csn or K disagrees with counts taken directly
// from the exploration's heights.
fn identity_violations(seed: u64, i: u64) -> Result<u64> {
    let mut rng = RngStream::new(seed, i, "verify/identities");
    let n: u32 = rng.random_range(2..=200);
    let lambda = rng.random_range(-1.0..1.0);
    let window = if i.is_multiple_of(2) {
        CriticalWindow::aldous(lambda)
    } else {
        CriticalWindow::general(lambda, rng.random_range(0.05..0.5))?
    };
    let p = edge_probability(&window, n as u64).unwrap_or(1.0 / n as f64);
    let k = rng.random_range(1..=n.min(25));
    let graph = sample_graph(n, p, &mut rng)?;
    let expl = explore(&graph, k, &mut rng)?;
    let series = cousin_series(&expl);

    let mut per_height = vec![0u64; n as usize];
    for v in 0..n {
        if let Some(h) = expl.height(v) {
            per_height[h as usize] += 1;
        }
    }
    let mut bad = 0;
    for (j, &w) in expl.order().iter().enumerate() {
        let h = expl.height(w).expect("explored vertices have a height") as usize;
        if series.csn[j] != per_height[h] {
            bad += 1;
        }
    }
    let (mut squares, mut cumulative) = (0u64, 0u64);
    for &zh in per_height.iter().take_while(|&&z| z > 0) {
        squares += zh * zh;
        cumulative += zh;
        if series.k[cumulative as usize] != squares {
            bad += 1;
        }
    }
    Ok(bad)
}

fn identities(params: &SuiteParams) -> Result<Vec<ComparisonReport>> {
    let samples = params.samples.unwrap_or(1000) as u64;
    let violations = (0..samples)
        .into_par_iter()
        .map(|i| identity_violations(params.seed, i))
        .collect::<Result<Vec<_>>>()?;
    let total: u64 = violations.iter().sum();
    Ok(vec![ComparisonReport::upper_bound("identities", total as f64, 0.0)
        .with_context(None, Some(samples), Some(params.seed))
        .detail("explorations", samples as f64)])
}

fn moments(_params: &SuiteParams) -> Result<Vec<ComparisonReport>> {
    let ns = [1_000, 10_000, 100_000, 1_000_000];
    let sweep = bound_sweep(&ns, 1.0, 1.0, WindowFamily::Aldous { lambda: 1.0 }, 64)?;
    let slope = |q| sweep.fit(q).map_or(f64::NAN, |f| f.slope);
    let stderr = |q| sweep.fit(q).map_or(f64::NAN, |f| f.stderr);
    let kappa = slope(Quantity::Kappa);
    let mut reports = vec![
        ComparisonReport::upper_bound("moments/mu_deviation_slope", slope(Quantity::MuDeviation), -0.25)
            .detail("slope_stderr", stderr(Quantity::MuDeviation)),
        ComparisonReport::upper_bound("moments/sigma2_deviation_slope", slope(Quantity::Sigma2Deviation), -0.25)
            .detail("slope_stderr", stderr(Quantity::Sigma2Deviation)),
        ComparisonReport::upper_bound("moments/kappa_slope", (kappa - 2.0 / 3.0).abs(), 0.15)
            .detail("slope", kappa)
            .detail("slope_stderr", stderr(Quantity::Kappa)),
    ];
    for r in &mut reports {
        for row in &sweep.rows {
            let key = format!("sup_{}_n{}", row.quantity.name(), row.n);
            r.details.insert(key, row.sup_value);
        }
    }
    Ok(reports)
}

fn par_samples<F>(samples: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    (0..samples as u64).into_par_iter().map(f).collect()
}

fn zlimit(params: &SuiteParams) -> Result<Vec<ComparisonReport>> {
    let n = params.n.unwrap_or(1_000_000);
    let samples = params.samples.unwrap_or(2000);
    let dt = params.dt.unwrap_or(1e-4);
    let seed = params.seed;
    let window = CriticalWindow::aldous(0.0);
    let k = RunConfig::new(n, 1.0, window, seed, 1)?.k()?;
    let chain = ReedFrost::new(&window, n)?;
    let scaling = Scaling::new(SeriesKind::Profile, &window, n);
    let h = scaling.index_at(1.0) as usize;
    let discrete = par_samples(samples, |i| {
        let mut rng = RngStream::new(seed, i, "verify/zlimit/chain");
        Ok(chain.simulate(k, h.max(1), &mut rng)?.z_at(h) as f64 * scaling.space)
    })?;
    let steps = steps_for(1.0, dt);
    let limit = par_samples(samples, |i| {
        let mut rng = RngStream::new(seed, i, "verify/zlimit/sde");
        Ok(sde_state_after(1.0, 0.0, dt, steps, &mut rng).z)
    })?;
    let r = ks_two_sample(&discrete, &limit)?
        .named("zlimit")
        .with_context(Some(n), Some(samples as u64), Some(seed))
        .detail("dt", dt)
        .detail("height", h as f64);
    Ok(vec![ks_fixed(r, 0.06)])
}

fn lamperti(params: &SuiteParams) -> Result<Vec<ComparisonReport>> {
    let seed = params.seed;
    let dt = params.dt.unwrap_or(1e-4);

    // marginals at t = 1 by both constructions
    let samples = params.samples.unwrap_or(5000);
    let steps = steps_for(1.0, dt);
    let direct = par_samples(samples, |i| {
        let mut rng = RngStream::new(seed, i, "verify/lamperti/sde");
        Ok(sde_state_after(1.0, 0.0, dt, steps, &mut rng).z)
    })?;
    let routed = par_samples(samples, |i| {
        let mut rng = RngStream::new(seed, i, "verify/lamperti/route");
        Ok(lamperti_route(1.0, 0.0, dt, 1.0, &mut rng)?.path.z_at(steps))
    })?;
    let equivalence = ks_fixed(
        ks_two_sample(&direct, &routed)?
            .named("lamperti/marginals")
            .with_context(None, Some(samples as u64), Some(seed))
            .detail("dt", dt),
        0.05,
    );

    // total mass of the first component against the hitting time
    let n = params.n.unwrap_or(1_000_000);
    let samples = params.samples.unwrap_or(2000);
    let window = CriticalWindow::aldous(0.0);
    let k = RunConfig::new(n, 1.0, window, seed, 1)?.k()?;
    let chain = ReedFrost::new(&window, n)?;
    let max_steps = window.default_max_steps(n);
    let scale = Scaling::new(SeriesKind::CumulativeProfile, &window, n).space;
    let runs: Vec<(f64, bool)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i, "verify/mass/chain");
            let trace = chain.simulate(k, max_steps, &mut rng)?;
            Ok((trace.final_size() as f64 * scale, trace.truncated()))
        })
        .collect::<Result<_>>()?;
    let masses: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let truncated = runs.iter().filter(|r| r.1).count();
    let hits: Vec<(f64, bool)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i, "verify/mass/hitting");
            let h = sample_hitting_time(1.0, 0.0, dt, 100.0, true, &mut rng)?;
            Ok((h.t, h.truncated))
        })
        .collect::<Result<_>>()?;
    let times: Vec<f64> = hits.iter().map(|h| h.0).collect();
    let (m_mass, se_mass) = mean_se(&masses);
    let (m_hit, se_hit) = mean_se(&times);
    let delta = m_mass - m_hit;
    let se = (se_mass * se_mass + se_hit * se_hit).sqrt();
    let mut mass = ComparisonReport::upper_bound("lamperti/first_component_mass", delta.abs(), 3.0 * se)
        .with_context(Some(n), Some(samples as u64), Some(seed))
        .detail("mean_rescaled_size", m_mass)
        .detail("mean_hitting_time", m_hit)
        .detail("truncated_chains", truncated as f64)
        .detail("truncated_hits", hits.iter().filter(|h| h.1).count() as f64)
        .detail("dt", dt);
    mass.sample_sizes = vec![samples, samples];
    mass.mean_delta = Some(delta);
    mass.mean_delta_se = Some(se);
    Ok(vec![equivalence, mass])
}

/// The general-window ensemble shared by the cousin, K and component
/// criteria: `eps = n^(-1/5)`.
struct GeneralEnsemble {
    n: u64,
    window: CriticalWindow,
    limit: DeterministicLimit,
    profiles: Vec<HeightProfile>,
    truncated: usize,
}

fn general_ensemble(params: &SuiteParams, x: f64, lambda: f64, label: &str) -> Result<GeneralEnsemble> {
    let n = params.n.unwrap_or(10_000_000);
    let samples = params.samples.unwrap_or(200);
    let eps = (n as f64).powf(-0.2);
    let window = CriticalWindow::general(lambda, eps)?;
    let k = RunConfig::new(n, x, window, params.seed, 1)?.k()?;
    let chain = ReedFrost::new(&window, n)?;
    let max_steps = window.default_max_steps(n);
    let runs = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(params.seed, i, label);
            let trace = chain.simulate(k, max_steps, &mut rng)?;
            Ok((trace.profile(), trace.truncated()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneralEnsemble {
        n,
        window,
        limit: DeterministicLimit::new(x, lambda)?,
        truncated: runs.iter().filter(|r| r.1).count(),
        profiles: runs.into_iter().map(|r| r.0).collect(),
    })
}

impl GeneralEnsemble {
    // sup over a 50-point grid on [0, 0.9 t0] of |mean rescaled series - limit|
    fn sup_deviation<S, L>(&self, kind: SeriesKind, series: S, limit: L) -> (f64, f64)
    where
        S: Fn(&HeightProfile, u64) -> u64,
        L: Fn(f64) -> f64,
    {
        let scaling = Scaling::new(kind, &self.window, self.n);
        let t_end = 0.9 * self.limit.t0;
        let mut worst = (0.0, 0.0);
        for i in 0..50 {
            let t = t_end * i as f64 / 49.0;
            let j = scaling.index_at(t);
            let mean = self.profiles.iter().map(|p| series(p, j) as f64).sum::<f64>() / self.profiles.len() as f64;
            let d = (mean * scaling.space - limit(t)).abs();
            if d > worst.0 {
                worst = (d, t);
            }
        }
        worst
    }

    fn report(&self, name: &str, deviation: (f64, f64), params: &SuiteParams) -> ComparisonReport {
        ComparisonReport::upper_bound(name, deviation.0, 0.05)
            .with_context(Some(self.n), Some(self.profiles.len() as u64), Some(params.seed))
            .detail("argmax_t", deviation.1)
            .detail("epsilon", self.window.epsilon().unwrap_or(f64::NAN))
            .detail("t0", self.limit.t0)
            .detail("truncated", self.truncated as f64)
    }
}

fn cousin(params: &SuiteParams) -> Result<Vec<ComparisonReport>> {
    let e = general_ensemble(params, 1.0, 0.0, "verify/general")?;
    let dev = e.sup_deviation(SeriesKind::Cousin, |p, j| p.cousin_at(j), |t| e.limit.cousin(t));
    Ok(vec![e.report("cousin", dev, params)])
}

fn klimit(params: &SuiteParams) -> Result<Vec<ComparisonReport>> {
    let e = general_ensemble(params, 1.0, 0.0, "verify/general")?;
    let dev = e.sup_deviation(
        SeriesKind::CumulativeCousin,
        |p, j| p.cumulative_cousin_at(j),
        |t| e.limit.k(t),
    );
    Ok(vec![e.report("klimit", dev, params)])
}

fn deterministic(params: &SuiteParams) -> Result<Vec<ComparisonReport>> {
    let mut rng = RngStream::new(params.seed, 0, "verify/deterministic");
    let h = 1e-4;
    let steps = 100_000;
    let mut worst = 0.0f64;
    for _ in 0..params.samples.unwrap_or(100) {
        let x = rng.random_range(0.1..5.0);
        let lambda = rng.random_range(-3.0..3.0);
        let lim = DeterministicLimit::new(x, lambda)?;
        let rk4 = integrate_cumulative_rk4(x, lambda, h, steps);
        for (i, c) in rk4.iter().enumerate() {
            worst = worst.max((c - lim.c(i as f64 * h)).abs());
        }
    }
    let lim = DeterministicLimit::new(0.5, 0.0)?;
    let tanh_err = (0..=10_000)
        .map(|i| {
            let t = i as f64 * 1e-3;
            (lim.c(t) - (t / 2.0).tanh()).abs()
        })
        .fold(0.0, f64::max);
    Ok(vec![
        ComparisonReport::upper_bound("deterministic/rk4", worst, 1e-8).with_context(
            None,
            Some(params.samples.unwrap_or(100) as u64),
            Some(params.seed),
        ),
        ComparisonReport::upper_bound("deterministic/tanh", tanh_err, 1e-12),
    ])
}

fn selfsim(params: &SuiteParams) -> Result<Vec<ComparisonReport>> {
    let samples = params.samples.unwrap_or(5000);
    let dt = params.dt.unwrap_or(1e-4);
    let r = self_similarity_test(1.0, 0.0, 0.25, 0.25, samples, dt, params.seed)?;
    let ratio = match (r.mean_delta, r.mean_delta_se) {
        (Some(d), Some(se)) if se > 0.0 => d.abs() / se,
        _ => f64::NAN,
    };
    Ok(vec![ks_fixed(r.named("selfsim"), 0.05)
        .detail("mean_delta_over_se", ratio)
        .detail("dt", dt)])
}

fn components(params: &SuiteParams) -> Result<Vec<ComparisonReport>> {
    let eta = 0.2;
    let e = general_ensemble(params, 0.5, 0.0, "verify/components")?;
    let n = e.n as f64;
    let eps = e.window.epsilon().expect("general window");
    let sizes: Vec<f64> = e.profiles.iter().map(|p| p.total() as f64).collect();
    let reps = sizes.len() as f64;
    let threshold = e.limit.t0 - eta;

    let literal: Vec<f64> = sizes.iter().map(|a| n.cbrt().recip() * eps * a).collect();
    let literal_freq = literal.iter().filter(|&&v| v > threshold).count() as f64 / reps;
    let rescaled: Vec<f64> = sizes.iter().map(|a| a / (eps * n)).collect();
    let rescaled_freq = rescaled.iter().filter(|&&v| v > threshold).count() as f64 / reps;
    let ctx = |r: ComparisonReport| {
        r.with_context(Some(e.n), Some(sizes.len() as u64), Some(params.seed))
            .detail("threshold", threshold)
            .detail("epsilon", eps)
            .detail("truncated", e.truncated as f64)
    };
    Ok(vec![
        ctx(ComparisonReport::lower_bound("components", literal_freq, 0.95))
            .detail("mean_statistic", mean_se(&literal).0),
        ctx(ComparisonReport::lower_bound("components/mass_over_eps_n", rescaled_freq, 0.95))
            .detail("mean_statistic", mean_se(&rescaled).0)
            .detail("t0", e.limit.t0),
    ])
}

fn conjecture(params: &SuiteParams) -> Result<Vec<ComparisonReport>> {
    let n = params.n.unwrap_or(1_000_000);
    let samples = params.samples.unwrap_or(20);
    let lambda = 1.0;
    let window = CriticalWindow::general(lambda, (n as f64).powf(-0.2))?;
    let p = edge_probability(&window, n)?;
    let nv = u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("n = {n} does not fit a vertex id")))?;
    let scaling = Scaling::new(SeriesKind::Walk, &window, n);
    let grid: Vec<f64> = (0..50).map(|i| 2.0 * i as f64 / 49.0).collect();
    let paths = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(params.seed, i, "verify/conjecture");
            let graph = sample_graph(nv, p, &mut rng)?;
            let walk = breadth_first_walk(&graph, &mut rng);
            Ok(grid
                .iter()
                .map(|&t| {
                    let j = (scaling.index_at(t) as usize).min(walk.x.len() - 1);
                    walk.x[j] as f64 * scaling.space
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = (0.0f64, 0.0);
    for (g, &t) in grid.iter().enumerate() {
        let mean = paths.iter().map(|p| p[g]).sum::<f64>() / paths.len() as f64;
        let d = (mean - (lambda * t - t * t / 2.0)).abs();
        if d > worst.0 {
            worst = (d, t);
        }
    }
    Ok(vec![ComparisonReport::upper_bound("conjecture", worst.0, 0.1)
        .with_context(Some(n), Some(samples as u64), Some(params.seed))
        .detail("argmax_t", worst.1)])
}
