//! Limit objects of the rescaled epidemic.
//!
//! * `X(t) = B(t) + lambda t - t^2/2`, Brownian motion with parabolic drift.
//! * The absorbed pair `dZ = sqrt(Z) dW + (lambda - C) Z dt`, `dC = Z dt`,
//!   `Z(0) = x`, `C(0) = 0`, simulated directly and through the time change
//!   `Z(t) = x + X(C(t) ∧ T_{-x})`.
//! * The general-window curves `f(t) = x + lambda t - t^2/2`,
//!   `c' = f(c)`, `z = f(c)` and the cumulative limit `int_0^{t ∧ t0} f`.

use alloc::format;
use alloc::vec::Vec;

use libm::{atanh, exp, floor, round, sqrt, tanh};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::{ks_two_sample, mean_se, ComparisonReport};
use crate::{Error, Result, RngStream};

fn check_step(dt: f64, t_max: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t_max >= dt) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_max must be at least dt, got t_max = {t_max}, dt = {dt}"
        )));
    }
    Ok(steps_for(t_max, dt))
}

/// Number of grid steps covering `[0, t]`, tolerant of rounding in `t / dt`.
pub fn steps_for(t: f64, dt: f64) -> usize {
    floor(t / dt + 1e-9) as usize
}

fn check_mass(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("x must be positive, got {x}")));
    }
    Ok(())
}

fn parabola(lambda: f64, t: f64) -> f64 {
    lambda * t - 0.5 * t * t
}

/// `offset + X(i dt)` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicBMPath {
    pub dt: f64,
    pub lambda: f64,
    pub offset: f64,
    pub values: Vec<f64>,
}

impl ParabolicBMPath {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// First grid time at which the path is `<= 0`.
    pub fn first_nonpositive(&self) -> Option<f64> {
        self.values.iter().position(|&v| v <= 0.0).map(|i| self.time(i))
    }
}

/// Brownian part from exact Gaussian increments; the drift is added in
/// closed form at every grid point.
pub fn sample_parabolic_bm<R: Rng + ?Sized>(
    lambda: f64,
    x_offset: f64,
    dt: f64,
    t_max: f64,
    rng: &mut R,
) -> Result<ParabolicBMPath> {
    let steps = check_step(dt, t_max)?;
    let sd = sqrt(dt);
    let mut values = Vec::with_capacity(steps + 1);
    let mut b = 0.0;
    values.push(x_offset);
    for i in 1..=steps {
        let e: f64 = StandardNormal.sample(rng);
        b += sd * e;
        values.push(x_offset + b + parabola(lambda, i as f64 * dt));
    }
    Ok(ParabolicBMPath {
        dt,
        lambda,
        offset: x_offset,
        values,
    })
}

/// State of the absorbed diffusion under full-truncation Euler–Maruyama.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeState {
    pub z: f64,
    pub c: f64,
    pub absorbed: bool,
}

impl SdeState {
    pub fn start(x: f64) -> Self {
        SdeState {
            z: x,
            c: 0.0,
            absorbed: false,
        }
    }

    /// `Z += sqrt(Z+) sqrt(dt) N + (lambda - C) Z+ dt`, `C += Z+ dt`; absorbs
    /// at the first nonpositive `Z`.
    pub fn advance(&mut self, lambda: f64, dt: f64, sqrt_dt: f64, normal: f64) {
        if self.absorbed {
            return;
        }
        let zp = self.z.max(0.0);
        let z = self.z + sqrt(zp) * sqrt_dt * normal + (lambda - self.c) * zp * dt;
        self.c += zp * dt;
        if z <= 0.0 {
            self.z = 0.0;
            self.absorbed = true;
        } else {
            self.z = z;
        }
    }

    pub fn run<R: Rng + ?Sized>(&mut self, lambda: f64, dt: f64, steps: usize, rng: &mut R) {
        let sqrt_dt = sqrt(dt);
        for _ in 0..steps {
            if self.absorbed {
                break;
            }
            let e: f64 = StandardNormal.sample(rng);
            self.advance(lambda, dt, sqrt_dt, e);
        }
    }
}

/// A simulated `(Z, C)` path. Entries stop at absorption; later grid
/// indices read `Z = 0` and the frozen `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdePath {
    pub dt: f64,
    pub steps: usize,
    pub z: Vec<f64>,
    pub c: Vec<f64>,
    pub absorbed_at: Option<usize>,
}

impl SdePath {
    pub fn z_at(&self, i: usize) -> f64 {
        self.z.get(i).copied().unwrap_or(0.0)
    }

    pub fn c_at(&self, i: usize) -> f64 {
        self.c.get(i).copied().unwrap_or_else(|| *self.c.last().unwrap())
    }

    pub fn z_at_time(&self, t: f64) -> f64 {
        self.z_at(round(t / self.dt) as usize)
    }

    pub fn terminal_c(&self) -> f64 {
        *self.c.last().unwrap()
    }
}

/// Full-truncation Euler–Maruyama for the absorbed pair `(Z, C)`.
pub fn simulate_sde<R: Rng + ?Sized>(x: f64, lambda: f64, dt: f64, t_max: f64, rng: &mut R) -> Result<SdePath> {
    check_mass(x)?;
    let steps = check_step(dt, t_max)?;
    let sqrt_dt = sqrt(dt);
    let mut state = SdeState::start(x);
    let mut z = Vec::new();
    let mut c = Vec::new();
    z.push(state.z);
    c.push(state.c);
    let mut absorbed_at = None;
    for i in 1..=steps {
        let e: f64 = StandardNormal.sample(rng);
        state.advance(lambda, dt, sqrt_dt, e);
        z.push(state.z);
        c.push(state.c);
        if state.absorbed {
            absorbed_at = Some(i);
            break;
        }
    }
    Ok(SdePath {
        dt,
        steps,
        z,
        c,
        absorbed_at,
    })
}

/// State of the diffusion after `steps` steps, without storing the path.
pub fn sde_state_after<R: Rng + ?Sized>(x: f64, lambda: f64, dt: f64, steps: usize, rng: &mut R) -> SdeState {
    let mut state = SdeState::start(x);
    state.run(lambda, dt, steps, rng);
    state
}

// x + X on a grid of step `dx`, extended on demand and never past the
// first nonpositive point.
struct LazyLevel<'a, R: ?Sized> {
    x: f64,
    lambda: f64,
    dx: f64,
    sqrt_dx: f64,
    brownian: Vec<f64>,
    hit: Option<usize>,
    rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> LazyLevel<'a, R> {
    fn new(x: f64, lambda: f64, dx: f64, rng: &'a mut R) -> Self {
        LazyLevel {
            x,
            lambda,
            dx,
            sqrt_dx: sqrt(dx),
            brownian: alloc::vec![0.0],
            hit: None,
            rng,
        }
    }

    fn level(&self, i: usize) -> f64 {
        self.x + self.brownian[i] + parabola(self.lambda, i as f64 * self.dx)
    }

    // extend until grid point `i` exists or the level has crossed zero
    fn cover(&mut self, i: usize) {
        while self.hit.is_none() && self.brownian.len() <= i {
            let e: f64 = StandardNormal.sample(self.rng);
            let b = self.brownian.last().unwrap() + self.sqrt_dx * e;
            self.brownian.push(b);
            let j = self.brownian.len() - 1;
            if self.level(j) <= 0.0 {
                self.hit = Some(j);
            }
        }
    }

    fn interpolate(&self, s: f64) -> f64 {
        let i = floor(s / self.dx) as usize;
        let frac = s / self.dx - i as f64;
        let a = self.level(i);
        let b = self.level(i + 1);
        a + frac * (b - a)
    }
}

/// A path produced by the time-change route, with the grid hitting time of
/// the underlying `x + X` (if reached).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LampertiPath {
    pub path: SdePath,
    pub hitting_time: Option<f64>,
}

/// Builds `(Z, C)` from a Brownian motion with parabolic drift: explicit
/// Euler on `C' = x + X(C)` with `X` linearly interpolated on its own grid
/// of step `dt`, stopping once `C` enters the last grid cell before `T_{-x}`.
pub fn lamperti_route<R: Rng + ?Sized>(
    x: f64,
    lambda: f64,
    dt: f64,
    t_max: f64,
    rng: &mut R,
) -> Result<LampertiPath> {
    check_mass(x)?;
    let steps = check_step(dt, t_max)?;
    let mut level = LazyLevel::new(x, lambda, dt, rng);
    let (mut zv, mut cv) = (x, 0.0);
    let mut z = alloc::vec![zv];
    let mut c = alloc::vec![cv];
    let mut absorbed_at = None;
    for i in 1..=steps {
        let next_c = cv + zv * dt;
        level.cover(floor(next_c / dt) as usize + 1);
        let crossed = match level.hit {
            Some(h) => next_c >= (h - 1) as f64 * dt,
            None => false,
        };
        let next_z = if crossed { 0.0 } else { level.interpolate(next_c) };
        if crossed || next_z <= 0.0 {
            let cap = level.hit.map_or(next_c, |h| h as f64 * dt);
            z.push(0.0);
            c.push(next_c.min(cap));
            absorbed_at = Some(i);
            break;
        }
        zv = next_z;
        cv = next_c;
        z.push(zv);
        c.push(cv);
    }
    let hitting_time = level.hit.map(|h| h as f64 * dt);
    Ok(LampertiPath {
        path: SdePath {
            dt,
            steps,
            z,
            c,
            absorbed_at,
        },
        hitting_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingSample {
    pub t: f64,
    pub truncated: bool,
}

/// First time `x + X` reaches zero. Grid crossings are always detected; with
/// `bridge` set, a crossing between two positive grid values `a`, `b` is
/// also declared with probability `exp(-2ab/dt)`. The uniform for that test
/// is drawn either way so both settings see the same Brownian path.
pub fn sample_hitting_time<R: Rng + ?Sized>(
    x: f64,
    lambda: f64,
    dt: f64,
    t_max: f64,
    bridge: bool,
    rng: &mut R,
) -> Result<HittingSample> {
    check_mass(x)?;
    let steps = check_step(dt, t_max)?;
    let sd = sqrt(dt);
    let mut b = 0.0;
    let mut prev = x;
    for i in 1..=steps {
        let e: f64 = StandardNormal.sample(rng);
        let u: f64 = rng.random();
        b += sd * e;
        let t = i as f64 * dt;
        let level = x + b + parabola(lambda, t);
        if level <= 0.0 || (bridge && u < exp(-2.0 * prev * level / dt)) {
            return Ok(HittingSample { t, truncated: false });
        }
        prev = level;
    }
    Ok(HittingSample {
        t: steps as f64 * dt,
        truncated: true,
    })
}

/// Closed-form deterministic limits for the general window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterministicLimit {
    pub x: f64,
    pub lambda: f64,
    root_disc: f64,
    /// Largest root of `f`, `lambda + sqrt(lambda^2 + 2x)`.
    pub t0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterministicValues {
    pub t: f64,
    pub f: f64,
    pub c: f64,
    pub z: f64,
    pub k: f64,
}

impl DeterministicLimit {
    pub fn new(x: f64, lambda: f64) -> Result<Self> {
        check_mass(x)?;
        let root_disc = sqrt(lambda * lambda + 2.0 * x);
        Ok(DeterministicLimit {
            x,
            lambda,
            root_disc,
            t0: lambda + root_disc,
        })
    }

    /// `f(t) = x + lambda t - t^2/2`.
    pub fn f(&self, t: f64) -> f64 {
        self.x + parabola(self.lambda, t)
    }

    /// `c(t) = lambda + s tanh(s t / 2 + atanh(-lambda / s))`, `s = sqrt(2x + lambda^2)`.
    pub fn c(&self, t: f64) -> f64 {
        let s = self.root_disc;
        self.lambda + s * tanh(0.5 * s * t + atanh(-self.lambda / s))
    }

    /// `z(t) = f(c(t)) = c'(t)`.
    pub fn z(&self, t: f64) -> f64 {
        self.f(self.c(t))
    }

    /// `int_0^{t ∧ t0} f = x u + lambda u^2/2 - u^3/6` at `u = min(t, t0)`.
    pub fn k(&self, t: f64) -> f64 {
        let u = t.min(self.t0);
        self.x * u + 0.5 * self.lambda * u * u - u * u * u / 6.0
    }

    /// `f(t) ∨ 0`, the limit of the rescaled cousin statistic.
    pub fn cousin(&self, t: f64) -> f64 {
        self.f(t).max(0.0)
    }

    pub fn eval(&self, t: f64) -> DeterministicValues {
        DeterministicValues {
            t,
            f: self.f(t),
            c: self.c(t),
            z: self.z(t),
            k: self.k(t),
        }
    }
}

pub fn eval_deterministic(x: f64, lambda: f64, t: f64) -> Result<DeterministicValues> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t must be nonnegative, got {t}")));
    }
    Ok(DeterministicLimit::new(x, lambda)?.eval(t))
}

/// Classical RK4 for `c' = x + lambda c - c^2/2`, `c(0) = 0`; returns `c` at
/// `0, h, 2h, ..., steps * h`.
pub fn integrate_cumulative_rk4(x: f64, lambda: f64, h: f64, steps: usize) -> Vec<f64> {
    let f = |c: f64| x + parabola(lambda, c);
    let mut out = Vec::with_capacity(steps + 1);
    let mut c = 0.0;
    out.push(c);
    for _ in 0..steps {
        let k1 = f(c);
        let k2 = f(c + 0.5 * h * k1);
        let k3 = f(c + 0.5 * h * k2);
        let k4 = f(c + h * k3);
        c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(c);
    }
    out
}

/// Restart experiment for the diffusion's self-similarity.
///
/// Each of `paths` runs to `t0`; for those still alive at `(z, mu) = (Z(t0),
/// C(t0))`, the original is continued for `s` more time while an independent
/// copy with drift parameter `lambda - mu` is started from `z`. The report
/// compares the two populations of `Z` values after `s`.
pub fn self_similarity_test(
    x: f64,
    lambda: f64,
    t0: f64,
    s: f64,
    paths: usize,
    dt: f64,
    seed: u64,
) -> Result<ComparisonReport> {
    check_mass(x)?;
    if !(t0 > 0.0) || !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need t0 > 0 and s >= 0, got t0 = {t0}, s = {s}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let warmup = steps_for(t0, dt);
    let extra = steps_for(s, dt);
    let mut continued = Vec::new();
    let mut restarted = Vec::new();
    for i in 0..paths as u64 {
        let mut rng = RngStream::new(seed, i, "selfsim/original");
        let mut state = SdeState::start(x);
        state.run(lambda, dt, warmup, &mut rng);
        if state.absorbed {
            continue;
        }
        let (z, mu) = (state.z, state.c);
        state.run(lambda, dt, extra, &mut rng);
        continued.push(state.z);

        let mut rng = RngStream::new(seed, i, "selfsim/restart");
        let fresh = sde_state_after(z, lambda - mu, dt, extra, &mut rng);
        restarted.push(fresh.z);
    }
    let needed = paths.div_ceil(10).max(1);
    if continued.len() < needed {
        return Err(Error::InsufficientSample {
            got: continued.len(),
            needed,
        });
    }
    let (m_cont, _) = mean_se(&continued);
    let (m_rest, _) = mean_se(&restarted);
    Ok(ks_two_sample(&continued, &restarted)?
        .named("self_similarity")
        .with_context(None, Some(paths as u64), Some(seed))
        .detail("mean_continued", m_cont)
        .detail("mean_restarted", m_rest)
        .detail("alive_fraction", continued.len() as f64 / paths as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bad_steps_rejected() {
        let mut rng = RngStream::new(0, 0, "sde");
        assert!(simulate_sde(1.0, 0.0, 0.0, 1.0, &mut rng).is_err());
        assert!(simulate_sde(1.0, 0.0, -1e-3, 1.0, &mut rng).is_err());
        assert!(simulate_sde(0.0, 0.0, 1e-3, 1.0, &mut rng).is_err());
        assert!(sample_parabolic_bm(0.0, 0.0, 0.1, 0.01, &mut rng).is_err());
    }

    #[test]
    fn parabolic_grid_and_drift() {
        let mut rng = RngStream::new(1, 0, "bm");
        let p = sample_parabolic_bm(2.0, 0.5, 0.25, 1.0, &mut rng).unwrap();
        assert_eq!(p.values.len(), 5);
        assert_eq!(p.values[0], 0.5);
        assert_eq!(p.time(4), 1.0);
    }

    #[test]
    fn sde_starts_at_x_and_c_is_monotone() {
        for seed in 0..20 {
            let mut rng = RngStream::new(seed, 0, "sde");
            let p = simulate_sde(1.0, 0.0, 1e-3, 10.0, &mut rng).unwrap();
            assert_eq!(p.z[0], 1.0);
            assert_eq!(p.c[0], 0.0);
            assert!(p.c.windows(2).all(|w| w[1] >= w[0]));
            assert!(p.z.iter().all(|&z| z >= 0.0));
            if let Some(i) = p.absorbed_at {
                assert_eq!(p.z[i], 0.0);
                assert_eq!(p.z_at(i + 100), 0.0);
                assert_eq!(p.c_at(i + 100), p.c[i]);
            }
        }
    }

    #[test]
    fn lamperti_terminal_c_is_hitting_time() {
        for seed in 0..20 {
            let mut rng = RngStream::new(seed, 0, "lamperti");
            let dt = 1e-3;
            let lp = lamperti_route(1.0, 0.0, dt, 50.0, &mut rng).unwrap();
            assert_eq!(lp.path.z[0], 1.0);
            let t_hit = lp.hitting_time.expect("hits well before C reaches 50");
            assert!(lp.path.absorbed_at.is_some());
            assert!((lp.path.terminal_c() - t_hit).abs() <= 2.0 * dt);
        }
    }

    #[test]
    fn hitting_time_positive_and_bridge_is_earlier() {
        for seed in 0..50 {
            let mut a = RngStream::new(seed, 0, "hit");
            let mut b = RngStream::new(seed, 0, "hit");
            let with = sample_hitting_time(1.0, 0.0, 1e-3, 20.0, true, &mut a).unwrap();
            let without = sample_hitting_time(1.0, 0.0, 1e-3, 20.0, false, &mut b).unwrap();
            assert!(with.t > 0.0);
            assert!(with.t <= without.t);
        }
    }

    #[test]
    fn hitting_time_truncation_flag() {
        let mut rng = RngStream::new(0, 0, "hit");
        let h = sample_hitting_time(100.0, 0.0, 0.01, 0.1, false, &mut rng).unwrap();
        assert!(h.truncated);
    }

    #[test]
    fn deterministic_examples() {
        let d = eval_deterministic(0.5, 0.0, 0.0).unwrap();
        assert_eq!(d.c, 0.0);
        assert_eq!(d.z, 0.5);
        assert_eq!(d.k, 0.0);
        let lim = DeterministicLimit::new(0.5, 0.0).unwrap();
        assert_relative_eq!(lim.t0, 1.0);
        assert!((lim.c(2.0) - 0.761594).abs() < 1e-6);
        assert_relative_eq!(lim.k(1.0), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(lim.k(5.0), 1.0 / 3.0, max_relative = 1e-15);
        assert!(eval_deterministic(0.5, 0.0, -1.0).is_err());
        assert!(eval_deterministic(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn rk4_recovers_tanh() {
        let h = 1e-4;
        let c = integrate_cumulative_rk4(0.5, 0.0, h, 20_000);
        assert!((c[20_000] - libm::tanh(1.0)).abs() < 1e-12);
    }

    #[test]
    fn self_similarity_with_zero_lag_is_exact() {
        let r = self_similarity_test(1.0, 0.0, 0.25, 0.0, 200, 1e-3, 3).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn self_similarity_needs_survivors() {
        // almost every path from a tiny mass dies before t0
        let r = self_similarity_test(1e-4, -5.0, 5.0, 0.1, 50, 1e-3, 1);
        assert!(matches!(r, Err(Error::InsufficientSample { .. })));
    }
}
