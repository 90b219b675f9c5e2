//! Named verification suites: each runs a desk-scale experiment and compares
//! it with the corresponding limit result at a fixed tolerance.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::critical::{ensemble_moments, simulate_reflected_sde, CriticalParams, NoiseMode};
use crate::ctmc::{
    first_loss_fraction_time, simulate, simulate_coupled_domination, simulate_ensemble, JumpKind, Recording,
};
use crate::decay::{poisson_loss_rate, psi_curve, psi_ode, t_of_delta};
use crate::fluid::{fluid_closed_form, fluid_gsp, FluidCurve};
use crate::model::{ModelParams, NetworkState};
use crate::rng::{replica_seed, rng_from_seed};
use crate::skorokhod::{complementarity_defect, gsp_solve, reflect, ConstantFunctional, GridPath, GspOptions};
use crate::stats::{chi_square_geometric, empirical_marginal, mean_stderr, poisson_loss_check, PoissonCheckOptions, TestReport};
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 0x5EED_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Fluid,
    Gsp,
    Critical,
    Normal,
    Decay,
    FirstLoss,
    Domination,
    Invariants,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Fluid,
        Suite::Gsp,
        Suite::Critical,
        Suite::Normal,
        Suite::Decay,
        Suite::FirstLoss,
        Suite::Domination,
        Suite::Invariants,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Fluid => "fluid",
            Suite::Gsp => "gsp",
            Suite::Critical => "critical",
            Suite::Normal => "normal",
            Suite::Decay => "decay",
            Suite::FirstLoss => "first-loss",
            Suite::Domination => "domination",
            Suite::Invariants => "invariants",
        }
    }

    pub fn run(self, seed: u64) -> Result<Vec<TestReport>> {
        match self {
            Suite::Fluid => fluid_suite(seed),
            Suite::Gsp => gsp_suite(),
            Suite::Critical => critical_suite(seed),
            Suite::Normal => normal_suite(seed),
            Suite::Decay => decay_suite(seed),
            Suite::FirstLoss => first_loss_suite(seed),
            Suite::Domination => domination_suite(seed),
            Suite::Invariants => invariants_suite(seed, 100),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::param("suite", format!("unknown suite `{s}`")))
    }
}

fn grid(step: f64, points: usize, scale: f64) -> Vec<f64> {
    (0..points).map(|k| k as f64 * step * scale).collect()
}

/// Fluid scaling of an overloaded network against the closed form.
pub fn fluid_suite(seed: u64) -> Result<Vec<TestReport>> {
    let n = 5000;
    let p = ModelParams::new(1.0, 1.0, n, n)?;
    let (step, points) = (0.05, 121);
    let times = grid(step, points, 1.0);
    let runs = simulate_ensemble(&p, NetworkState::default(), 6.0, &Recording::Grid(times.clone()), seed, 20)?;
    let (mut d0, mut d1) = (0.0f64, 0.0f64);
    for (k, &t) in times.iter().enumerate() {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for tr in &runs {
            let s = tr.snapshots.as_ref().expect("grid recording").states[k];
            s0 += s.x0 as f64;
            s1 += s.x1 as f64;
        }
        let scale = (runs.len() as u64 * n) as f64;
        let (x0, x1) = fluid_closed_form(p.beta(), p.rho(), p.mu(), t);
        d0 = d0.max((s0 / scale - x0).abs());
        d1 = d1.max((s1 / scale - x1).abs());
    }
    Ok(vec![
        TestReport::new("fluid_x0_sup", d0, 0.02, "sup_t |mean X0/N - x0(t)|, N = 5000, 20 replicas"),
        TestReport::new("fluid_x1_sup", d1, 0.02, "sup_t |mean X1/N - x1(t)|, N = 5000, 20 replicas"),
    ])
}

/// Picard solver and reflection map checks.
pub fn gsp_suite() -> Result<Vec<TestReport>> {
    let h = 1e-3;
    let gsp = fluid_gsp(1.0, 1.0, 1.0, 5.0, h)?;
    let exact = FluidCurve::closed_form(1.0, 1.0, 1.0, 5.0, h)?;
    let fluid_gap = gsp.sup_distance(&exact)?;

    let z = GridPath::from_fn(h, 5.0, |t| 0.3 + (3.0 * t).sin() - 0.5 * t)?;
    let direct = reflect(&z)?;
    let sol = gsp_solve(&ConstantFunctional(z), 5.0, h, GspOptions::default())?;
    let constant_gap = sol.x.sup_distance(&direct.x)?.max(sol.r.sup_distance(&direct.r)?);

    let mut rng = rng_from_seed(11);
    let mut walk = vec![0.5];
    for _ in 0..5000 {
        let last = *walk.last().expect("nonempty");
        walk.push(last + rng.random_range(-0.05..0.05));
    }
    let walk = reflect(&GridPath::new(h, walk)?)?;
    let defect = complementarity_defect(&direct.x, &direct.r)?.max(complementarity_defect(&walk.x, &walk.r)?);

    Ok(vec![
        TestReport::new("gsp_fluid_vs_closed_form", fluid_gap, 1e-4, "fluid GSP solution vs closed form, h = 1e-3, T = 5"),
        TestReport::new("gsp_constant_functional", constant_gap, 1e-12, "GSP with constant functional vs reflection"),
        TestReport::new("reflect_complementarity", defect, 1e-9, "sum x dr for reflection outputs"),
    ])
}

/// RK4 integration of the noiseless reflected equation `y' = drift(y, S)`,
/// `S' = y`, sampled every `h_out`. A step that would cross below 0 is cut
/// at the crossing (found by bisection on the step length); from there `y`
/// stays at 0 as long as the drift at 0 is nonpositive.
pub fn reflected_ode_oracle(p: &CriticalParams, horizon: f64, h_out: f64, substeps: usize) -> Result<GridPath> {
    let outputs = (horizon / h_out).round() as usize;
    let h = h_out / substeps as f64;
    let f = |y: f64, s: f64| (p.drift(y, s), y);
    let rk4 = |y: f64, s: f64, dt: f64| {
        let (a1, b1) = f(y, s);
        let (a2, b2) = f(y + 0.5 * dt * a1, s + 0.5 * dt * b1);
        let (a3, b3) = f(y + 0.5 * dt * a2, s + 0.5 * dt * b2);
        let (a4, b4) = f(y + dt * a3, s + dt * b3);
        (
            y + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            s + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        )
    };
    let (mut y, mut s) = (p.y(), 0.0);
    let mut out = vec![y];
    for _ in 0..outputs {
        for _ in 0..substeps {
            if y == 0.0 && p.drift(0.0, s) <= 0.0 {
                continue;
            }
            let (ny, ns) = rk4(y, s, h);
            if ny >= 0.0 {
                (y, s) = (ny, ns);
                continue;
            }
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if rk4(y, s, mid).0 >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            s = rk4(y, s, lo).1;
            y = 0.0;
        }
        out.push(y);
    }
    GridPath::new(h_out, out)
}

/// Critical scaling against the reflected SDE.
pub fn critical_suite(seed: u64) -> Result<Vec<TestReport>> {
    let n: u64 = 10_000;
    let mu = 1.0;
    let p = ModelParams::critical(mu, n, n)?;
    let root_n = (n as f64).sqrt();
    let gamma = (p.f_n() as f64 - n as f64 * p.rho() / 2.0) / root_n;
    let cp = CriticalParams::new(p.lambda(), mu, gamma, 0.0)?;

    let runs = simulate_ensemble(&p, NetworkState::default(), 1.0, &Recording::Grid(vec![1.0]), replica_seed(seed, 1), 500)?;
    let x1: Vec<f64> = runs.iter().map(|tr| tr.sample_at(1.0).map(|s| s.x1 as f64 / root_n)).collect::<Result<_>>()?;
    let x0: Vec<f64> = runs.iter().map(|tr| tr.sample_at(1.0).map(|s| s.x0 as f64 / root_n)).collect::<Result<_>>()?;
    let (m1, se1) = mean_stderr(&x1)?;
    let (m0, se0) = mean_stderr(&x0)?;

    let moments = ensemble_moments(&cp, 1.0, 1e-3, 5000, replica_seed(seed, 2), NoiseMode::Normal)?;
    let k = moments.index_of(1.0).expect("t = 1 is on the grid");
    let (my, sey) = (moments.mean_y[k], moments.stderr_y(k));
    let (ms, ses) = (moments.mean_x0_scaled[k], moments.stderr_x0_scaled(k));

    let zero = CriticalParams::new(p.lambda(), mu, 0.0, 1.0)?;
    let h = 1e-4;
    let euler = simulate_reflected_sde(&zero, 5.0, h, 0, NoiseMode::Zero)?;
    let oracle = reflected_ode_oracle(&zero, 5.0, h, 4)?;
    let ode_gap = euler.y.sup_distance(&oracle)?;

    let combined1 = (se1 * se1 + sey * sey).sqrt();
    let combined0 = (se0 * se0 + ses * ses).sqrt();
    Ok(vec![
        TestReport::new(
            "critical_x1_vs_y",
            (m1 - my).abs(),
            3.0 * combined1,
            format!("mean X1(1)/sqrt(N) = {m1:.4} (500 runs) vs mean Y(1) = {my:.4} (5000 paths), 3 combined SE"),
        ),
        TestReport::new(
            "critical_x0_vs_integral",
            (m0 - ms).abs(),
            3.0 * combined0,
            format!("mean X0(1)/sqrt(N) = {m0:.4} vs mu mean S(1) = {ms:.4}, 3 combined SE"),
        ),
        TestReport::new("critical_zero_noise_ode", ode_gap, 1e-4, "noiseless Euler (h = 1e-4) vs RK4 oracle on [0, 5]"),
    ])
}

/// Stable network on the normal time scale.
pub fn normal_suite(seed: u64) -> Result<Vec<TestReport>> {
    let n = 2000;
    let p = ModelParams::new(4.0, 1.0, n, n)?;
    let r = 2.0 * p.beta() / p.rho();
    let alpha = poisson_loss_rate(p.beta(), p.rho(), p.mu())?;

    let runs = simulate_ensemble(&p, NetworkState::default(), 5.0, &Recording::Grid(vec![5.0]), replica_seed(seed, 1), 2000)?;
    let marginal = empirical_marginal(&runs, 5.0)?;
    let mut chi = chi_square_geometric(&marginal, r, 0.01)?;
    chi.name = "normal_x1_geometric".into();
    drop(runs);

    let long = simulate(&p, NetworkState::default(), 50.0, replica_seed(seed, 2))?;
    let check = poisson_loss_check(&long, (2.0, 50.0), PoissonCheckOptions::default())?;
    let rate = TestReport::new(
        "normal_loss_rate",
        (check.rate / alpha - 1.0).abs(),
        0.1,
        format!("{} losses in (2, 50], rate {:.4} vs {alpha}", check.count, check.rate),
    );

    let finals = simulate_ensemble(&p, NetworkState::default(), 10.0, &Recording::Final, replica_seed(seed, 3), 500)?;
    let x0: Vec<f64> = finals.iter().map(|tr| tr.final_state.x0 as f64).collect();
    let (mean, _) = mean_stderr(&x0)?;

    Ok(vec![
        chi,
        check.dispersion,
        check.ks,
        rate,
        TestReport::new("normal_mean_losses", (mean - 10.0).abs(), 1.0, format!("mean X0(10) = {mean:.3} over 500 runs, target [9, 11]")),
    ])
}

/// Stable network on the slow time scale against the decay curve.
pub fn decay_suite(seed: u64) -> Result<Vec<TestReport>> {
    let n = 500;
    let p = ModelParams::new(4.0, 1.0, n, n)?;
    let (beta, rho, mu) = (p.beta(), p.rho(), p.mu());
    let curve = psi_curve(beta, rho, mu, 3.0, 0.1, 1e-10)?;
    let times = grid(0.1, curve.psi.len(), n as f64);
    let horizon = *times.last().expect("nonempty grid");
    let runs = simulate_ensemble(&p, NetworkState::default(), horizon, &Recording::Grid(times), seed, 10)?;
    let mut gap = 0.0f64;
    for (k, &target) in curve.psi.iter().enumerate() {
        let total: f64 = runs
            .iter()
            .map(|tr| tr.snapshots.as_ref().expect("grid recording").states[k].x0 as f64)
            .sum();
        gap = gap.max((total / (runs.len() as f64 * n as f64) - target).abs());
    }

    let fine = psi_curve(beta, rho, mu, 10.0 / mu, 1e-3, 1e-10)?;
    let ode = psi_ode(beta, rho, mu, 10.0 / mu, 1e-3)?;
    Ok(vec![
        TestReport::new("decay_sup", gap, 0.05, "sup_t |mean X0(Nt)/N - Psi(t)|, N = 500, 10 replicas, t in [0, 3]"),
        TestReport::new(
            "decay_residual",
            curve.max_residual().max(fine.max_residual()),
            1e-10,
            "fixed-point residual of Psi",
        ),
        TestReport::new("decay_ode", fine.sup_distance(&ode)?, 1e-5, "bisection vs RK4 curve, h = 1e-3, [0, 10]"),
    ])
}

/// Time to lose half of the files.
pub fn first_loss_suite(seed: u64) -> Result<Vec<TestReport>> {
    let n = 500;
    let p = ModelParams::new(4.0, 1.0, n, n)?;
    let delta = 0.5;
    let target = t_of_delta(p.beta(), p.rho(), p.mu(), delta)?;
    let samples: Vec<f64> = (0..20)
        .map(|k| first_loss_fraction_time(&p, delta, replica_seed(seed, k)).map(|t| t / n as f64))
        .collect::<Result<_>>()?;
    let (mean, _) = mean_stderr(&samples)?;
    Ok(vec![TestReport::new(
        "first_loss_half",
        (mean / target - 1.0).abs(),
        0.1,
        format!("mean T_N(0.5)/N = {mean:.4} vs {target:.4}, 20 seeds"),
    )])
}

/// Coupling of the single-copy count with a dominating M/M/1 queue.
pub fn domination_suite(seed: u64) -> Result<Vec<TestReport>> {
    let n = 1000;
    let p = ModelParams::new(4.0, 1.0, n, n)?;
    let beta0 = 1.1 * p.beta();
    let mut violations = 0usize;
    for k in 0..100 {
        let run = simulate_coupled_domination(&p, beta0, NetworkState::default(), 10.0, replica_seed(seed, k))?;
        violations += run.violations();
    }
    Ok(vec![TestReport::new(
        "domination_violations",
        violations as f64,
        0.0,
        "events with X1 > L over 100 coupled runs",
    )])
}

/// Exact-law checks on one trajectory; returns the names of the violated
/// invariants.
pub fn trajectory_violations(tr: &crate::ctmc::Trajectory) -> Vec<&'static str> {
    let p = &tr.params;
    let mut bad = Vec::new();
    let mut prev = tr.initial;
    let mut prev_t = 0.0;
    let (mut monotone, mut conserved, mut replay, mut increasing) = (true, true, true, true);
    for r in &tr.records {
        monotone &= r.state_after.x0 >= prev.x0;
        conserved &= p.contains(r.state_after);
        let kind_ok = match r.kind {
            JumpKind::Up => prev.x0 + prev.x1 < p.f_n(),
            JumpKind::Dup | JumpKind::Loss => prev.x1 > 0,
        };
        replay &= kind_ok && r.kind.apply(prev) == r.state_after;
        increasing &= r.time > prev_t && r.time <= tr.horizon;
        prev = r.state_after;
        prev_t = r.time;
    }
    let terminal = if tr.absorbed {
        let ta = tr.absorption_time.unwrap_or(f64::NAN);
        prev == p.absorbing_state()
            && tr.records.iter().all(|r| r.time <= ta)
            && tr.records.iter().filter(|r| p.is_absorbing(r.state_after)).count() <= 1
    } else {
        !p.is_absorbing(prev)
    };
    for (ok, name) in [
        (monotone, "monotone_losses"),
        (conserved, "conservation"),
        (replay, "replay"),
        (increasing, "increasing_times"),
        (terminal, "terminal_absorption"),
        (prev == tr.final_state, "final_state"),
    ] {
        if !ok {
            bad.push(name);
        }
    }
    bad
}

/// Exact invariants over `configs` random parameter sets.
pub fn invariants_suite(seed: u64, configs: usize) -> Result<Vec<TestReport>> {
    let mut rng = rng_from_seed(seed);
    let mut violations = 0usize;
    let mut mismatched_reruns = 0usize;
    for k in 0..configs {
        let n = rng.random_range(1..=60);
        let f_n = rng.random_range(1..=3 * n);
        let p = ModelParams::new(rng.random_range(0.1..5.0), rng.random_range(0.1..3.0), n, f_n)?;
        let x0 = rng.random_range(0..=f_n);
        let x1 = rng.random_range(0..=f_n - x0);
        let horizon = rng.random_range(0.1..30.0);
        let run_seed = replica_seed(seed, k as u64);
        let tr = simulate(&p, NetworkState::new(x0, x1), horizon, run_seed)?;
        violations += trajectory_violations(&tr).len();
        let again = simulate(&p, NetworkState::new(x0, x1), horizon, run_seed)?;
        if again.to_csv() != tr.to_csv() {
            mismatched_reruns += 1;
        }
    }
    Ok(vec![
        TestReport::new("invariant_violations", violations as f64, 0.0, format!("exact-law violations over {configs} configurations")),
        TestReport::new("rerun_mismatches", mismatched_reruns as f64, 0.0, "byte-level CSV differences between seeded reruns"),
    ])
}
