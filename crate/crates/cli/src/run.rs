use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use dupnet::critical::{ensemble_moments, NoiseMode};
use dupnet::ctmc::{simulate_ensemble, Recording};
use dupnet::decay::psi_curve;
use dupnet::fluid::{fluid_gsp, FluidCurve};
use dupnet::stats::{write_reports_csv, write_reports_text, TestReport};
use dupnet::verify::Suite;
use dupnet::NetworkState;

use crate::config::{ConfigError, ExperimentConfig, Kind};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Model(#[from] dupnet::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<PathBuf, RunError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

const FLUID_STEP: f64 = 0.01;
const CRITICAL_STEP: f64 = 1e-3;
const CRITICAL_PATHS: usize = 1000;
const DECAY_TOL: f64 = 1e-10;

/// Runs one experiment. Returns whether every verification report passed
/// (always true for the other kinds).
pub fn run(c: &ExperimentConfig, kind: Kind) -> Result<bool, RunError> {
    c.validate(kind)?;
    let out = &c.out;
    fs::create_dir_all(out).map_err(io_err(out))?;
    match kind {
        Kind::Simulate => simulate(c, out).map(|_| true),
        Kind::Fluid => {
            let (beta, lambda, mu) = c.fluid_params()?;
            let horizon = c.horizon()?;
            let h = c.h.unwrap_or(FLUID_STEP);
            let exact = FluidCurve::closed_form(beta, lambda / mu, mu, horizon, h)?;
            write_file(out, "fluid.csv", |w| exact.write_csv(w))?;
            let gsp = fluid_gsp(beta, lambda, mu, horizon, h)?;
            write_file(out, "fluid_gsp.csv", |w| gsp.write_csv(w))?;
            Ok(true)
        }
        Kind::Critical => {
            let p = c.critical_params()?;
            let h = c.h.unwrap_or(CRITICAL_STEP);
            let paths = c.replicas.unwrap_or(CRITICAL_PATHS);
            let m = ensemble_moments(&p, c.horizon()?, h, paths, c.seed, NoiseMode::Normal)?;
            write_file(out, "critical.csv", |w| m.write_csv(w))?;
            Ok(true)
        }
        Kind::Decay => {
            let (beta, lambda, mu) = c.fluid_params()?;
            let h = c.h.unwrap_or(FLUID_STEP);
            let curve = psi_curve(beta, lambda / mu, mu, c.horizon()?, h, DECAY_TOL)?;
            write_file(out, "decay.csv", |w| curve.write_csv(w))?;
            Ok(true)
        }
        Kind::Verify(suite) => verify(c, suite, out),
    }
}

fn simulate(c: &ExperimentConfig, out: &Path) -> Result<(), RunError> {
    let p = c.model_params()?;
    let horizon = c.horizon()?;
    let recording = match c.h {
        Some(h) => {
            let k = (horizon / h + 1e-9).floor() as usize;
            Recording::Grid((0..=k).map(|i| i as f64 * h).collect())
        }
        None => Recording::Full,
    };
    let replicas = c.replicas.unwrap_or(1);
    let runs = simulate_ensemble(&p, NetworkState::new(c.x0, c.x1), horizon, &recording, c.seed, replicas)?;
    write_file(out, "trajectories.csv", |w| {
        writeln!(w, "replica,time,kind,x0,x1")?;
        for (i, tr) in runs.iter().enumerate() {
            tr.write_csv(&mut *w, Some(i), false)?;
        }
        Ok(())
    })?;
    write_file(out, "summary.csv", |w| {
        writeln!(w, "replica,seed,absorbed,absorption_time,events,x0,x1")?;
        for (i, tr) in runs.iter().enumerate() {
            let ta = tr.absorption_time.map(|t| t.to_string()).unwrap_or_default();
            let s = tr.final_state;
            writeln!(w, "{i},{},{},{ta},{},{},{}", tr.seed, tr.absorbed, tr.events, s.x0, s.x1)?;
        }
        Ok(())
    })?;
    Ok(())
}

fn verify(c: &ExperimentConfig, suite: Option<Suite>, out: &Path) -> Result<bool, RunError> {
    let suites: Vec<Suite> = suite.map_or_else(|| Suite::ALL.to_vec(), |s| vec![s]);
    let mut all: Vec<TestReport> = Vec::new();
    for s in suites {
        let reports = s.run(c.seed)?;
        let ok = reports.iter().all(|r| r.pass);
        println!("{s}: {}", if ok { "PASS" } else { "FAIL" });
        for r in &reports {
            println!("    {r}");
        }
        write_file(out, &format!("verify_{s}.txt"), |w| write_reports_text(&reports, w))?;
        write_file(out, &format!("verify_{s}.csv"), |w| write_reports_csv(&reports, w))?;
        all.extend(reports);
    }
    Ok(all.iter().all(|r| r.pass))
}
