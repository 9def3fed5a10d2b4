use std::time::Instant;

use critwin_core::analysis::ComparisonReport;
use critwin_core::chain::ReedFrost;
use critwin_core::continuum::{
    lamperti_route, sample_hitting_time, sample_parabolic_bm, simulate_sde, steps_for, DeterministicLimit, SdePath,
};
use critwin_core::graph::{breadth_first_walk, cousin_series, explore, sample_graph};
use critwin_core::{edge_probability, Error, RngStream, RunConfig};
use rayon::prelude::*;
use serde_json::json;

use crate::output::{cousin_csv, real, trace_csv, walk_csv, Csv, OutputDir};
use crate::suites::{run_suite, Suite, SuiteParams};
use crate::{CliError, Command, CommonArgs};

const DEFAULT_DT: f64 = 1e-4;
const DEFAULT_T_MAX: f64 = 1.0;

pub fn dispatch(command: Command) -> Result<(), CliError> {
    let common = match &command {
        Command::SimulateGraph { common, .. }
        | Command::SimulateChain { common, .. }
        | Command::Continuum { common, .. }
        | Command::Verify { common, .. } => common.clone(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match command {
        Command::SimulateGraph { common, walk } => simulate_graph(&common, walk),
        Command::SimulateChain { common, max_steps } => simulate_chain(&common, max_steps),
        Command::Continuum {
            kind,
            common,
            grid_only,
        } => continuum(&kind, &common, !grid_only),
        Command::Verify { suite, common } => verify(suite, &common),
    })
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn replicate_name(stem: &str, r: usize) -> String {
    format!("{stem}_{r:04}.csv")
}

// profile rows plus the absorbing zero row when the run was absorbed
fn profile_rows(z: &[u64], absorbed: bool) -> (Vec<u64>, Vec<u64>) {
    let mut z = z.to_vec();
    let mut c: Vec<u64> = z
        .iter()
        .scan(0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    if absorbed {
        let last = *c.last().unwrap();
        z.push(0);
        c.push(last);
    }
    (z, c)
}

struct ReplicateFiles {
    trace: String,
    cousin: String,
    walk: Option<String>,
}

fn simulate_graph(common: &CommonArgs, with_walk: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = common.settings()?.run_config()?;
    let k = cfg.k()?;
    let p = edge_probability(&cfg.window, cfg.n)?;
    let n = u32::try_from(cfg.n).map_err(|_| CliError::Config(format!("n = {} is too large for a graph", cfg.n)))?;
    let k = k as u32;
    let mut out = OutputDir::create(&common.out_dir())?;
    let files = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(cfg.seed, r, "graph");
            let graph = sample_graph(n, p, &mut rng)?;
            let expl = explore(&graph, k, &mut rng)?;
            let series = cousin_series(&expl);
            let (z, c) = profile_rows(&series.z, true);
            let walk = with_walk.then(|| {
                let mut rng = RngStream::new(cfg.seed, r, "walk");
                walk_csv(&breadth_first_walk(&graph, &mut rng).x)
            });
            Ok(ReplicateFiles {
                trace: trace_csv(&z, &c),
                cousin: cousin_csv(&series.csn, &series.k),
                walk,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    for (r, f) in files.iter().enumerate() {
        out.write(&replicate_name("trace", r), &f.trace)?;
        out.write(&replicate_name("cousin", r), &f.cousin)?;
        if let Some(w) = &f.walk {
            out.write(&replicate_name("walk", r), w)?;
        }
    }
    let config = json!({ "run": cfg, "k": k, "p": p, "walk": with_walk });
    let manifest = out.finish("simulate-graph", config, start.elapsed().as_secs_f64())?;
    print_json(&manifest);
    Ok(())
}

fn simulate_chain(common: &CommonArgs, max_steps: Option<usize>) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg: RunConfig = common.settings()?.run_config()?;
    let k = cfg.k()?;
    let chain = ReedFrost::new(&cfg.window, cfg.n)?;
    let max_steps = max_steps.unwrap_or_else(|| cfg.window.default_max_steps(cfg.n));
    let mut out = OutputDir::create(&common.out_dir())?;
    let runs = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(cfg.seed, r, "chain");
            let trace = chain.simulate(k, max_steps, &mut rng)?;
            let (z, c) = profile_rows(&trace.z, !trace.truncated());
            let series = trace.profile().cousin_series();
            Ok((trace_csv(&z, &c), cousin_csv(&series.csn, &series.k), trace.truncated()))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    for (r, (trace, cousin, _)) in runs.iter().enumerate() {
        out.write(&replicate_name("trace", r), trace)?;
        out.write(&replicate_name("cousin", r), cousin)?;
    }
    let truncated: Vec<usize> = runs.iter().enumerate().filter(|(_, r)| r.2).map(|(i, _)| i).collect();
    if !truncated.is_empty() {
        eprintln!("critwin: {} replicate(s) hit max_steps = {max_steps}", truncated.len());
    }
    let config = json!({ "run": cfg, "k": k, "max_steps": max_steps, "truncated_replicates": truncated });
    let manifest = out.finish("simulate-chain", config, start.elapsed().as_secs_f64())?;
    print_json(&manifest);
    Ok(())
}

fn path_csv(path: &SdePath) -> String {
    let mut csv = Csv::new("t,Z,C");
    for i in 0..=path.steps {
        csv.row(&[real(i as f64 * path.dt), real(path.z_at(i)), real(path.c_at(i))]);
    }
    csv.into_string()
}

fn continuum(kind: &str, common: &CommonArgs, bridge: bool) -> Result<(), CliError> {
    const KINDS: [&str; 5] = ["sde", "parabolic", "lamperti", "hitting", "deterministic"];
    if !KINDS.contains(&kind) {
        return Err(CliError::Usage(format!(
            "unknown continuum kind {kind:?} (expected one of {})",
            KINDS.join(", ")
        )));
    }
    let start = Instant::now();
    let settings = common.settings()?;
    let x = settings.x.unwrap_or(crate::config::DEFAULT_X);
    let lambda = settings.lambda.unwrap_or(0.0);
    let seed = settings.seed_or_env()?;
    let replicates = settings.replicates.unwrap_or(1);
    if replicates == 0 {
        return Err(CliError::Config("replicates must be at least 1".into()));
    }
    let dt = common.dt.unwrap_or(DEFAULT_DT);
    let t_max = common.t_max.unwrap_or(DEFAULT_T_MAX);
    if !(dt > 0.0 && t_max >= dt) {
        return Err(CliError::Config(format!("need dt > 0 and t_max >= dt, got dt = {dt}, t_max = {t_max}")));
    }
    let reps = 0..replicates as u64;
    let mut files: Vec<(String, String)> = Vec::new();
    match kind {
        "sde" | "lamperti" => {
            let paths = reps
                .into_par_iter()
                .map(|r| {
                    let mut rng = RngStream::new(seed, r, kind);
                    let path = if kind == "sde" {
                        simulate_sde(x, lambda, dt, t_max, &mut rng)?
                    } else {
                        lamperti_route(x, lambda, dt, t_max, &mut rng)?.path
                    };
                    Ok(path_csv(&path))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            files.extend(paths.into_iter().enumerate().map(|(r, p)| (replicate_name("path", r), p)));
        }
        "parabolic" => {
            let paths = reps
                .into_par_iter()
                .map(|r| {
                    let mut rng = RngStream::new(seed, r, kind);
                    let path = sample_parabolic_bm(lambda, 0.0, dt, t_max, &mut rng)?;
                    let mut csv = Csv::new("t,X");
                    for (i, v) in path.values.iter().enumerate() {
                        csv.row(&[real(path.time(i)), real(*v)]);
                    }
                    Ok(csv.into_string())
                })
                .collect::<Result<Vec<_>, Error>>()?;
            files.extend(paths.into_iter().enumerate().map(|(r, p)| (replicate_name("path", r), p)));
        }
        "hitting" => {
            let samples = reps
                .into_par_iter()
                .map(|r| {
                    let mut rng = RngStream::new(seed, r, kind);
                    sample_hitting_time(x, lambda, dt, t_max, bridge, &mut rng)
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let mut csv = Csv::new("replicate,T,truncated");
            for (r, s) in samples.iter().enumerate() {
                csv.row(&[r.to_string(), real(s.t), s.truncated.to_string()]);
            }
            files.push(("hitting.csv".into(), csv.into_string()));
        }
        _ => {
            let lim = DeterministicLimit::new(x, lambda)?;
            let mut csv = Csv::new("t,f,c,z,K");
            for i in 0..=steps_for(t_max, dt) {
                let v = lim.eval(i as f64 * dt);
                csv.row(&[real(v.t), real(v.f), real(v.c), real(v.z), real(v.k)]);
            }
            files.push(("deterministic.csv".into(), csv.into_string()));
        }
    }
    let mut out = OutputDir::create(&common.out_dir())?;
    for (name, text) in &files {
        out.write(name, text)?;
    }
    let config = json!({
        "kind": kind, "x": x, "lambda": lambda, "seed": seed, "replicates": replicates,
        "dt": dt, "t_max": t_max, "bridge": bridge,
    });
    let manifest = out.finish(&format!("continuum {kind}"), config, start.elapsed().as_secs_f64())?;
    print_json(&manifest);
    Ok(())
}

fn verify(suite: Suite, common: &CommonArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let settings = common.settings()?;
    let params = SuiteParams {
        seed: settings.seed_or_env()?,
        n: settings.n,
        samples: settings.replicates.map(|r| r as usize),
        dt: common.dt,
    };
    if let Some(dt) = params.dt.filter(|dt| dt.is_nan() || *dt <= 0.0) {
        return Err(CliError::Config(format!("dt must be positive, got {dt}")));
    }
    let reports: Vec<ComparisonReport> = match run_suite(suite, &params) {
        Ok(r) => r,
        Err(e @ Error::InsufficientSample { .. }) => return Err(CliError::Verification(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    print_json(&reports);
    if let Some(dir) = &common.out {
        let mut out = OutputDir::create(dir)?;
        out.write("reports.json", &serde_json::to_string_pretty(&reports).expect("reports serialize"))?;
        let config = json!({
            "suite": suite.name(), "seed": params.seed, "n": params.n,
            "samples": params.samples, "dt": params.dt,
        });
        out.finish(&format!("verify {}", suite.name()), config, start.elapsed().as_secs_f64())?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.test_name.as_str()).collect();
    if failed.is_empty() || !suite.gating() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}
