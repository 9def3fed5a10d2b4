//! Binomial statistics of one Reed-Frost generation and sweeps of their
//! deviation from the diffusion approximation over the window's state box.
//!
//! For `beta ~ Bin(n - c, q(n, z))`:
//! `mu = E[beta]`, `sigma2 = Var[beta]`, `kappa = E[(beta - z)^4]`.

use alloc::format;
use alloc::vec::Vec;

use libm::{cbrt, exp, lgamma, log, log1p, pow, round};
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_loglog_slope, SlopeFit};
use crate::chain::ReedFrost;
use crate::{CriticalWindow, Error, Result};

/// Largest number of trials `n - c` accepted by [`kappa_oracle`].
pub const ORACLE_MAX_TRIALS: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTriple {
    pub mu: f64,
    pub sigma2: f64,
    pub kappa: f64,
}

fn check_state(n: u64, z: u64, c: u64) -> Result<()> {
    if c > n || z > n {
        return Err(Error::InvalidArgument(format!(
            "state (z = {z}, c = {c}) outside 0..={n}"
        )));
    }
    Ok(())
}

/// Closed-form moments. `kappa` is assembled from the binomial central
/// moments around `mu` plus the shift `mu - z`:
///
/// `kappa = k4 + 4 k3 + 6 k2 + k0` with
/// `k4 = sigma2 (1 + 3 (N - 2) (q - q^2))`, `k3 = sigma2 (1 - 2q) (mu - z)`,
/// `k2 = sigma2 (mu - z)^2`, `k0 = (mu - z)^4`, `N = n - c`.
/// The first central moment vanishes, so there is no `k1` term.
pub fn moment_triple(n: u64, z: u64, c: u64, window: &CriticalWindow) -> Result<MomentTriple> {
    check_state(n, z, c)?;
    let q = ReedFrost::new(window, n)?.q(z);
    Ok(moments_for(n - c, q, z))
}

pub(crate) fn moments_for(trials: u64, q: f64, z: u64) -> MomentTriple {
    let trials = trials as f64;
    let mu = trials * q;
    let sigma2 = trials * q * (1.0 - q);
    let shift = mu - z as f64;
    let k4 = sigma2 * (1.0 + 3.0 * (trials - 2.0) * (q - q * q));
    let k3 = sigma2 * (1.0 - 2.0 * q) * shift;
    let k2 = sigma2 * shift * shift;
    let k0 = shift * shift * shift * shift;
    MomentTriple {
        mu,
        sigma2,
        kappa: k4 + 4.0 * k3 + 6.0 * k2 + k0,
    }
}

/// `kappa` by direct summation of `(m - z)^4` against the binomial mass
/// function, evaluated in log space.
pub fn kappa_oracle(n: u64, z: u64, c: u64, window: &CriticalWindow) -> Result<f64> {
    check_state(n, z, c)?;
    let trials = n - c;
    if trials > ORACLE_MAX_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "oracle limited to {ORACLE_MAX_TRIALS} trials, got {trials}"
        )));
    }
    let q = ReedFrost::new(window, n)?.q(z);
    Ok(kappa_by_summation(trials, q, z))
}

fn kappa_by_summation(trials: u64, q: f64, z: u64) -> f64 {
    let point = |m: u64| {
        let d = m as f64 - z as f64;
        d * d * d * d
    };
    if q == 0.0 {
        return point(0);
    }
    if q == 1.0 {
        return point(trials);
    }
    let (ln_q, ln_1mq) = (log(q), log1p(-q));
    let ln_n_fact = lgamma(trials as f64 + 1.0);
    (0..=trials)
        .map(|m| {
            let ln_pmf = ln_n_fact - lgamma(m as f64 + 1.0) - lgamma((trials - m) as f64 + 1.0)
                + m as f64 * ln_q
                + (trials - m) as f64 * ln_1mq;
            point(m) * exp(ln_pmf)
        })
        .sum()
}

/// How the window depends on `n` across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WindowFamily {
    /// `p = 1/n + lambda n^(-4/3)` over the box
    /// `0 <= z <= n^(1/3) r`, `0 <= c <= n^(2/3) T r`.
    Aldous { lambda: f64 },
    /// `p = (1 + lambda eps)/n` with `eps = n^(-epsilon_exponent)` over
    /// `0 <= z <= n^(1/3) theta^2 r`, `0 <= c <= n^(2/3) theta r T`.
    General { lambda: f64, epsilon_exponent: f64 },
}

impl WindowFamily {
    pub fn window(&self, n: u64) -> Result<CriticalWindow> {
        match *self {
            WindowFamily::Aldous { lambda } => Ok(CriticalWindow::aldous(lambda)),
            WindowFamily::General {
                lambda,
                epsilon_exponent,
            } => CriticalWindow::general(lambda, pow(n as f64, -epsilon_exponent)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `|mu - z - n^(-1/3) z (lambda' - n^(-2/3) c)|`
    MuDeviation,
    /// `|sigma2 - z - n^(-1/3) z (lambda' - n^(-2/3) c)|`
    Sigma2Deviation,
    /// `|kappa|`
    Kappa,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::MuDeviation, Quantity::Sigma2Deviation, Quantity::Kappa];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::MuDeviation => "mu_deviation",
            Quantity::Sigma2Deviation => "sigma2_deviation",
            Quantity::Kappa => "kappa",
        }
    }
}

/// Supremum of one quantity at one `n`, with where it was attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub quantity: Quantity,
    pub sup_value: f64,
    pub argmax_z: u64,
    pub argmax_c: u64,
    /// Whether the maximizer lies on the boundary of the box.
    pub on_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityFit {
    pub quantity: Quantity,
    pub fit: Option<SlopeFit>,
    /// Set when every sup vanished, in which case there is nothing to fit.
    pub identically_zero: bool,
}

/// Grid suprema per `n` and their fitted log-log decay rates. The sup is
/// over the evaluated lattice only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSweep {
    pub family: WindowFamily,
    pub r: f64,
    pub t: f64,
    pub grid_density: usize,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<QuantityFit>,
}

impl BoundSweep {
    pub fn fit(&self, quantity: Quantity) -> Option<&SlopeFit> {
        self.fits
            .iter()
            .find(|f| f.quantity == quantity)
            .and_then(|f| f.fit.as_ref())
    }

    pub fn rows_for(&self, quantity: Quantity) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.quantity == quantity)
    }
}

// Evenly spaced integer lattice on [0, floor(max)] including both ends.
fn lattice(max: f64, density: usize) -> Vec<u64> {
    let top = libm::floor(max).max(0.0);
    let mut pts: Vec<u64> = (0..density)
        .map(|i| round(top * i as f64 / (density - 1) as f64) as u64)
        .collect();
    pts.dedup();
    pts
}

/// Suprema of the three deviation quantities for a single `n`.
pub fn sweep_one(n: u64, r: f64, t: f64, family: &WindowFamily, grid_density: usize) -> Result<[SweepRow; 3]> {
    if grid_density < 8 {
        return Err(Error::InvalidArgument(format!(
            "grid density must be at least 8 points per axis, got {grid_density}"
        )));
    }
    let window = family.window(n)?;
    let kernel = ReedFrost::new(&window, n)?;
    let nf = n as f64;
    let n13 = cbrt(nf);
    let n23 = n13 * n13;
    let (z_max, c_max, drift) = match window.theta(n) {
        None => (n13 * r, n23 * t * r, window.lambda()),
        Some(theta) => (n13 * theta * theta * r, n23 * theta * r * t, window.lambda() * theta),
    };
    let zs = lattice(z_max.min(nf), grid_density);
    let cs = lattice(c_max.min(nf), grid_density);
    let (z_last, c_last) = (*zs.last().unwrap(), *cs.last().unwrap());

    let mut best = [(f64::NEG_INFINITY, 0u64, 0u64); 3];
    for &z in &zs {
        let q = kernel.q(z);
        for &c in &cs {
            let m = moments_for(n - c, q, z);
            let center = z as f64 + z as f64 * (drift - c as f64 / n23) / n13;
            let values = [(m.mu - center).abs(), (m.sigma2 - center).abs(), m.kappa.abs()];
            for (slot, v) in best.iter_mut().zip(values) {
                if v > slot.0 {
                    *slot = (v, z, c);
                }
            }
        }
    }
    let row = |i: usize| {
        let (v, z, c) = best[i];
        SweepRow {
            n,
            quantity: Quantity::ALL[i],
            sup_value: v,
            argmax_z: z,
            argmax_c: c,
            on_boundary: z == 0 || c == 0 || z == z_last || c == c_last,
        }
    };
    Ok([row(0), row(1), row(2)])
}

/// Sweeps every `n` and fits `log(sup)` against `log(n)` per quantity.
pub fn bound_sweep(
    n_list: &[u64],
    r: f64,
    t: f64,
    family: WindowFamily,
    grid_density: usize,
) -> Result<BoundSweep> {
    let mut rows = Vec::with_capacity(3 * n_list.len());
    for &n in n_list {
        rows.extend(sweep_one(n, r, t, &family, grid_density)?);
    }
    fits_from_rows(family, r, t, grid_density, rows)
}

/// Assembles a [`BoundSweep`] from precomputed rows (e.g. computed in parallel).
pub fn fits_from_rows(
    family: WindowFamily,
    r: f64,
    t: f64,
    grid_density: usize,
    rows: Vec<SweepRow>,
) -> Result<BoundSweep> {
    let fits = Quantity::ALL
        .iter()
        .map(|&quantity| {
            let pairs: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.quantity == quantity)
                .map(|r| (r.n as f64, r.sup_value))
                .collect();
            let identically_zero = pairs.iter().all(|&(_, v)| v == 0.0);
            let fit = if identically_zero {
                None
            } else {
                Some(fit_loglog_slope(&pairs)?)
            };
            Ok(QuantityFit {
                quantity,
                fit,
                identically_zero,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundSweep {
        family,
        r,
        t,
        grid_density,
        rows,
        fits,
    })
}
