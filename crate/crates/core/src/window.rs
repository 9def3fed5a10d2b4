use alloc::format;

use libm::{cbrt, ceil, floor, pow};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Edge-probability regime around the Erdős–Rényi phase transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "window", rename_all = "snake_case")]
pub enum CriticalWindow {
    /// `p(n) = 1/n + lambda * n^(-4/3)`.
    Aldous { lambda: f64 },
    /// `p(n) = (1 + lambda * epsilon) / n`, with `theta = epsilon * n^(1/3)`.
    General { lambda: f64, epsilon: f64 },
}

impl CriticalWindow {
    pub fn aldous(lambda: f64) -> Self {
        CriticalWindow::Aldous { lambda }
    }

    pub fn general(lambda: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!(
                "general window needs epsilon > 0, got {epsilon}"
            )));
        }
        Ok(CriticalWindow::General { lambda, epsilon })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            CriticalWindow::Aldous { lambda } | CriticalWindow::General { lambda, .. } => lambda,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            CriticalWindow::Aldous { .. } => None,
            CriticalWindow::General { epsilon, .. } => Some(epsilon),
        }
    }

    /// `theta_n = epsilon * n^(1/3)`; `None` for the Aldous window.
    pub fn theta(&self, n: u64) -> Option<f64> {
        self.epsilon().map(|eps| eps * cbrt(n as f64))
    }

    /// Whether `epsilon^3 * n` exceeds `threshold`. Always `true` for the
    /// Aldous window. Runs violating the condition are still allowed.
    pub fn regime_condition(&self, n: u64, threshold: f64) -> bool {
        match self.epsilon() {
            None => true,
            Some(eps) => eps * eps * eps * n as f64 > threshold,
        }
    }

    /// Default step cap for the Reed-Frost chain: `50 * ceil(n^(1/3))` or
    /// `50 * ceil(1/epsilon)`.
    pub fn default_max_steps(&self, n: u64) -> usize {
        let scale = match self.epsilon() {
            None => ceil(cbrt(n as f64)),
            Some(eps) => ceil(1.0 / eps),
        };
        50 * scale as usize
    }
}

/// Edge probability of the window at population size `n`.
pub fn edge_probability(window: &CriticalWindow, n: u64) -> Result<f64> {
    let nf = n as f64;
    let p = match *window {
        CriticalWindow::Aldous { lambda } => 1.0 / nf + lambda * pow(nf, -4.0 / 3.0),
        CriticalWindow::General { lambda, epsilon } => (1.0 + lambda * epsilon) / nf,
    };
    if n < 2 || !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidWindow {
            n,
            lambda: window.lambda(),
            epsilon: window.epsilon(),
            p,
        });
    }
    Ok(p)
}

/// A fully resolved simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: u64,
    pub x: f64,
    #[serde(flatten)]
    pub window: CriticalWindow,
    pub seed: u64,
    pub replicates: u32,
}

impl RunConfig {
    /// Validates the configuration, including `1 <= k <= n` for the derived
    /// number of initial infectives.
    pub fn new(n: u64, x: f64, window: CriticalWindow, seed: u64, replicates: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Config(format!("x must be a positive real, got {x}")));
        }
        if replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if let CriticalWindow::General { epsilon, .. } = window {
            if !(epsilon > 0.0) {
                return Err(Error::Config(format!(
                    "general window needs epsilon > 0, got {epsilon}"
                )));
            }
        }
        let config = RunConfig {
            n,
            x,
            window,
            seed,
            replicates,
        };
        derive_k(&config)?;
        Ok(config)
    }

    pub fn k(&self) -> Result<u64> {
        derive_k(self)
    }
}

/// Number of initial infectives: `floor(n^(1/3) x)` (Aldous) or
/// `floor(epsilon^2 n x)` (general window).
pub fn derive_k(config: &RunConfig) -> Result<u64> {
    let n = config.n as f64;
    let raw = match config.window {
        CriticalWindow::Aldous { .. } => cbrt(n) * config.x,
        CriticalWindow::General { epsilon, .. } => epsilon * epsilon * n * config.x,
    };
    let k = floor(raw);
    if k < 1.0 {
        return Err(Error::Config(format!(
            "derived k = floor({raw}) is 0 for n = {}, x = {}; increase x or n",
            config.n, config.x
        )));
    }
    if k > n {
        return Err(Error::Config(format!(
            "derived k = {k} exceeds n = {}; decrease x",
            config.n
        )));
    }
    Ok(k as u64)
}
