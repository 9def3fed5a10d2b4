//! `key = value` run configuration files and flag overrides.

use std::path::Path;

use critwin_core::{CriticalWindow, RunConfig};

use crate::CliError;

const KEYS: [&str; 7] = ["n", "x", "lambda", "window", "epsilon", "seed", "replicates"];

pub const DEFAULT_N: u64 = 1000;
pub const DEFAULT_X: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Aldous,
    General,
}

/// Every setting that may come from a file, flags or the environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub n: Option<u64>,
    pub x: Option<f64>,
    pub lambda: Option<f64>,
    pub window: Option<WindowKind>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub replicates: Option<u32>,
}

impl Settings {
    /// Fields set in `other` win.
    pub fn overlay(&self, other: &Settings) -> Settings {
        Settings {
            n: other.n.or(self.n),
            x: other.x.or(self.x),
            lambda: other.lambda.or(self.lambda),
            window: other.window.or(self.window),
            epsilon: other.epsilon.or(self.epsilon),
            seed: other.seed.or(self.seed),
            replicates: other.replicates.or(self.replicates),
        }
    }

    pub fn seed_or_env(&self) -> Result<u64, CliError> {
        if let Some(seed) = self.seed {
            return Ok(seed);
        }
        match std::env::var("CW_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("CW_SEED is not an unsigned integer: {v:?}"))),
            Err(_) => Ok(0),
        }
    }

    pub fn window(&self) -> Result<CriticalWindow, CliError> {
        let lambda = self.lambda.unwrap_or(0.0);
        let kind = self.window.unwrap_or(if self.epsilon.is_some() {
            WindowKind::General
        } else {
            WindowKind::Aldous
        });
        match kind {
            WindowKind::Aldous => Ok(CriticalWindow::aldous(lambda)),
            WindowKind::General => {
                let eps = self
                    .epsilon
                    .ok_or_else(|| CliError::Config("the general window needs epsilon".into()))?;
                Ok(CriticalWindow::general(lambda, eps)?)
            }
        }
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let window = self.window()?;
        let n = self.n.unwrap_or(DEFAULT_N);
        critwin_core::edge_probability(&window, n)?;
        Ok(RunConfig::new(
            n,
            self.x.unwrap_or(DEFAULT_X),
            window,
            self.seed_or_env()?,
            self.replicates.unwrap_or(1),
        )?)
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("line {line}: cannot parse {key} = {value:?}")))
}

pub fn parse_settings(text: &str) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {line_no}: expected `key = value`")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "n" => s.n = Some(parse_value(key, value, line_no)?),
            "x" => s.x = Some(parse_value(key, value, line_no)?),
            "lambda" => s.lambda = Some(parse_value(key, value, line_no)?),
            "epsilon" => s.epsilon = Some(parse_value(key, value, line_no)?),
            "seed" => s.seed = Some(parse_value(key, value, line_no)?),
            "replicates" => s.replicates = Some(parse_value(key, value, line_no)?),
            "window" => {
                s.window = Some(match value {
                    "aldous" => WindowKind::Aldous,
                    "general" => WindowKind::General,
                    _ => {
                        return Err(CliError::Config(format!(
                            "line {line_no}: window must be aldous or general, got {value:?}"
                        )))
                    }
                })
            }
            _ => {
                return Err(CliError::Config(format!(
                    "line {line_no}: unknown key {key:?} (expected one of {})",
                    KEYS.join(", ")
                )))
            }
        }
    }
    Ok(s)
}

pub fn load_settings(path: &Path) -> Result<Settings, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_settings(&text)
}
