//! Exact event-driven simulation of the network process and of the auxiliary
//! M/M/1 queues.
//!
//! Each event costs one exponential draw for the holding time and one uniform
//! draw to pick the jump type in proportion to its rate.

use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::model::{transition_rates, ModelParams, NetworkState};
use crate::rng::{replica_seed, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JumpKind {
    /// A two-copy file loses a copy.
    Up,
    /// A single-copy file is duplicated.
    Dup,
    /// A single-copy file loses its last copy.
    Loss,
}

impl JumpKind {
    pub fn apply(self, s: NetworkState) -> NetworkState {
        match self {
            JumpKind::Up => NetworkState::new(s.x0, s.x1 + 1),
            JumpKind::Dup => NetworkState::new(s.x0, s.x1 - 1),
            JumpKind::Loss => NetworkState::new(s.x0 + 1, s.x1 - 1),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JumpKind::Up => "up",
            JumpKind::Dup => "dup",
            JumpKind::Loss => "loss",
        }
    }
}

impl fmt::Display for JumpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub kind: JumpKind,
    pub state_after: NetworkState,
}

/// Outcome of a single transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub holding: f64,
    pub next: NetworkState,
    pub kind: JumpKind,
}

/// Draws the next transition out of `s`.
pub fn step<R: Rng + ?Sized>(p: &ModelParams, s: NetworkState, rng: &mut R) -> Result<Step> {
    p.check_state(s)?;
    let rates = transition_rates(p, s);
    let total = rates.total();
    if total <= 0.0 {
        return Err(Error::Absorbing);
    }
    let e: f64 = rng.sample(Exp1);
    let holding = e / total;
    let u = rng.random::<f64>() * total;
    let kind = if u < rates.up {
        JumpKind::Up
    } else if u < rates.up + rates.dup {
        JumpKind::Dup
    } else {
        JumpKind::Loss
    };
    Ok(Step {
        holding,
        next: kind.apply(s),
        kind,
    })
}

/// What a simulation keeps besides the final state.
#[derive(Debug, Clone, PartialEq)]
pub enum Recording {
    /// Every jump.
    Full,
    /// States at the given ascending times only.
    Grid(Vec<f64>),
    /// Final state only.
    Final,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub times: Vec<f64>,
    pub states: Vec<NetworkState>,
}

/// One simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ModelParams,
    pub seed: u64,
    pub initial: NetworkState,
    pub horizon: f64,
    pub absorbed: bool,
    /// Time at which `(f_n, 0)` was reached, if it was.
    pub absorption_time: Option<f64>,
    /// Every jump, in [`Recording::Full`] mode. Empty otherwise.
    pub records: Vec<JumpRecord>,
    /// Grid states, in [`Recording::Grid`] mode.
    pub snapshots: Option<Snapshots>,
    /// False in [`Recording::Final`] mode.
    pub jumps_recorded: bool,
    pub final_state: NetworkState,
    /// Number of jumps simulated, whatever the recording mode.
    pub events: u64,
}

struct RunSummary {
    final_state: NetworkState,
    absorbed: bool,
    absorption_time: Option<f64>,
    events: u64,
}

/// Runs the chain from `initial` until the next jump would land after
/// `horizon`, absorption, or `stop` returns true on a jump.
fn run_chain<R: Rng + ?Sized>(
    p: &ModelParams,
    initial: NetworkState,
    horizon: f64,
    rng: &mut R,
    mut on_jump: impl FnMut(f64, JumpKind, NetworkState, NetworkState) -> bool,
) -> RunSummary {
    let mut state = initial;
    let mut t = 0.0;
    let mut events = 0u64;
    if p.is_absorbing(state) {
        return RunSummary {
            final_state: state,
            absorbed: true,
            absorption_time: Some(0.0),
            events,
        };
    }
    loop {
        let s = match step(p, state, rng) {
            Ok(s) => s,
            Err(_) => unreachable!("non-absorbing state has positive total rate"),
        };
        let next_t = t + s.holding;
        if next_t > horizon {
            break;
        }
        t = next_t;
        events += 1;
        let before = state;
        state = s.next;
        let stop = on_jump(t, s.kind, before, state);
        if p.is_absorbing(state) {
            return RunSummary {
                final_state: state,
                absorbed: true,
                absorption_time: Some(t),
                events,
            };
        }
        if stop {
            break;
        }
    }
    RunSummary {
        final_state: state,
        absorbed: false,
        absorption_time: None,
        events,
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_nan() || horizon < 0.0 {
        return Err(Error::param("horizon", format!("must be >= 0, got {horizon}")));
    }
    Ok(())
}

fn check_grid(times: &[f64], horizon: f64) -> Result<()> {
    let ascending = times.windows(2).all(|w| w[0] < w[1]);
    let in_range = times.iter().all(|&t| (0.0..=horizon).contains(&t));
    if !ascending || !in_range {
        return Err(Error::GridMismatch(format!(
            "recording grid must be strictly ascending within [0, {horizon}]"
        )));
    }
    Ok(())
}

/// Simulates until `horizon` or absorption, recording every jump.
pub fn simulate(p: &ModelParams, initial: NetworkState, horizon: f64, seed: u64) -> Result<Trajectory> {
    simulate_with(p, initial, horizon, seed, &Recording::Full)
}

/// Same as [`simulate`] with a choice of what to keep.
pub fn simulate_with(
    p: &ModelParams,
    initial: NetworkState,
    horizon: f64,
    seed: u64,
    recording: &Recording,
) -> Result<Trajectory> {
    p.check_state(initial)?;
    check_horizon(horizon)?;
    let mut rng = rng_from_seed(seed);
    let mut records = Vec::new();
    let mut snapshots = None;
    let summary = match recording {
        Recording::Full => run_chain(p, initial, horizon, &mut rng, |time, kind, _, state_after| {
            records.push(JumpRecord { time, kind, state_after });
            false
        }),
        Recording::Final => run_chain(p, initial, horizon, &mut rng, |_, _, _, _| false),
        Recording::Grid(times) => {
            check_grid(times, horizon)?;
            let mut states = Vec::with_capacity(times.len());
            let summary = run_chain(p, initial, horizon, &mut rng, |time, _, before, _| {
                while states.len() < times.len() && times[states.len()] < time {
                    states.push(before);
                }
                false
            });
            states.resize(times.len(), summary.final_state);
            snapshots = Some(Snapshots {
                times: times.clone(),
                states,
            });
            summary
        }
    };
    Ok(Trajectory {
        params: *p,
        seed,
        initial,
        horizon,
        absorbed: summary.absorbed,
        absorption_time: summary.absorption_time,
        records,
        jumps_recorded: !matches!(recording, Recording::Final),
        snapshots,
        final_state: summary.final_state,
        events: summary.events,
    })
}

/// Runs `replicas` independent copies; replica `k` uses
/// [`replica_seed`]`(base_seed, k)`. Output order follows the replica index.
pub fn simulate_ensemble(
    p: &ModelParams,
    initial: NetworkState,
    horizon: f64,
    recording: &Recording,
    base_seed: u64,
    replicas: usize,
) -> Result<Vec<Trajectory>> {
    (0..replicas)
        .into_par_iter()
        .map(|k| simulate_with(p, initial, horizon, replica_seed(base_seed, k as u64), recording))
        .collect()
}

impl Trajectory {
    /// State at time `t`: the state after the last jump at or before `t`.
    pub fn sample_at(&self, t: f64) -> Result<NetworkState> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        if let Some(ta) = self.absorption_time {
            if t >= ta {
                return Ok(self.params.absorbing_state());
            }
        }
        if t > self.horizon {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        if let Some(snap) = &self.snapshots {
            let tol = 1e-9 * t.abs().max(1.0);
            let idx = snap.times.partition_point(|&g| g < t - tol);
            return match snap.times.get(idx) {
                Some(&g) if (g - t).abs() <= tol => Ok(snap.states[idx]),
                _ => Err(Error::NotOnGrid { t }),
            };
        }
        if !self.jumps_recorded && self.events > 0 {
            return if t == self.horizon {
                Ok(self.final_state)
            } else {
                Err(Error::NotOnGrid { t })
            };
        }
        let idx = self.records.partition_point(|r| r.time <= t);
        Ok(if idx == 0 {
            self.initial
        } else {
            self.records[idx - 1].state_after
        })
    }

    /// Times of the `Loss` jumps (needs full recording).
    pub fn loss_times(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.kind == JumpKind::Loss)
            .map(|r| r.time)
            .collect()
    }

    /// Writes `time,kind,x0,x1` rows, prefixed by a `replica` column when
    /// given. Grid snapshots are written with kind `grid`.
    pub fn write_csv<W: Write>(&self, mut w: W, replica: Option<usize>, header: bool) -> io::Result<()> {
        if header {
            if replica.is_some() {
                writeln!(w, "replica,time,kind,x0,x1")?;
            } else {
                writeln!(w, "time,kind,x0,x1")?;
            }
        }
        let prefix = replica.map(|r| format!("{r},")).unwrap_or_default();
        if let Some(snap) = &self.snapshots {
            for (t, s) in snap.times.iter().zip(&snap.states) {
                writeln!(w, "{prefix}{t},grid,{},{}", s.x0, s.x1)?;
            }
        } else {
            for r in &self.records {
                writeln!(w, "{prefix}{},{},{},{}", r.time, r.kind, r.state_after.x0, r.state_after.x1)?;
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, None, true).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// First time at which at least `ceil(delta * f_n)` files are lost, starting
/// from `(0, 0)`.
pub fn first_loss_fraction_time(p: &ModelParams, delta: f64, seed: u64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
    }
    let threshold = (delta * p.f_n() as f64).ceil() as u64;
    let mut rng = rng_from_seed(seed);
    let mut hit = None;
    run_chain(p, NetworkState::default(), f64::INFINITY, &mut rng, |time, _, _, after| {
        if after.x0 >= threshold {
            hit = Some(time);
            true
        } else {
            false
        }
    });
    Ok(hit.expect("the chain reaches x0 = f_n at absorption"))
}

/// Birth-death queue with arrival rate `arrival` and service rate `service`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mm1Params {
    arrival: f64,
    service: f64,
}

impl Mm1Params {
    pub fn new(arrival: f64, service: f64) -> Result<Self> {
        if !(arrival.is_finite() && arrival >= 0.0) {
            return Err(Error::param("arrival", format!("must be finite and >= 0, got {arrival}")));
        }
        if !(service.is_finite() && service > 0.0) {
            return Err(Error::param("service", format!("must be finite and > 0, got {service}")));
        }
        Ok(Self { arrival, service })
    }

    pub fn arrival(&self) -> f64 {
        self.arrival
    }

    pub fn service(&self) -> f64 {
        self.service
    }

    pub fn is_ergodic(&self) -> bool {
        self.arrival < self.service
    }

    /// `arrival / service`, the ratio of the stationary geometric law.
    pub fn load(&self) -> f64 {
        self.arrival / self.service
    }
}

/// Piecewise-constant integer path: `values[i]` holds from `times[i]` on.
#[derive(Debug, Clone, PartialEq)]
pub struct Mm1Path {
    pub initial: u64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub values: Vec<u64>,
}

impl Mm1Path {
    pub fn value_at(&self, t: f64) -> Result<u64> {
        if t.is_nan() || t < 0.0 || t > self.horizon {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        let idx = self.times.partition_point(|&s| s <= t);
        Ok(if idx == 0 { self.initial } else { self.values[idx - 1] })
    }

    /// Fraction of `[0, horizon]` spent at each level.
    pub fn occupancy(&self) -> std::collections::BTreeMap<u64, f64> {
        let mut occ = std::collections::BTreeMap::new();
        let mut last_t = 0.0;
        let mut last_v = self.initial;
        for (&t, &v) in self.times.iter().zip(&self.values) {
            *occ.entry(last_v).or_insert(0.0) += t - last_t;
            last_t = t;
            last_v = v;
        }
        *occ.entry(last_v).or_insert(0.0) += self.horizon - last_t;
        if self.horizon > 0.0 {
            for w in occ.values_mut() {
                *w /= self.horizon;
            }
        }
        occ
    }
}

pub fn simulate_mm1(q: &Mm1Params, initial: u64, horizon: f64, seed: u64) -> Result<Mm1Path> {
    check_horizon(horizon)?;
    let mut rng = rng_from_seed(seed);
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut x = initial;
    let mut t = 0.0;
    loop {
        let service = if x > 0 { q.service } else { 0.0 };
        let total = q.arrival + service;
        if total <= 0.0 {
            break;
        }
        let e: f64 = rng.sample(Exp1);
        t += e / total;
        if t > horizon {
            break;
        }
        let u = rng.random::<f64>() * total;
        if u < q.arrival || service == 0.0 {
            x += 1;
        } else {
            x -= 1;
        }
        times.push(t);
        values.push(x);
    }
    Ok(Mm1Path {
        initial,
        horizon,
        times,
        values,
    })
}

/// Network trajectory and a dominating M/M/1 path built on shared events.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub trajectory: Trajectory,
    /// Queue with arrival `2 mu beta0 n` and service `lambda n`.
    pub queue: Mm1Path,
    pub beta0: f64,
}

impl CoupledRun {
    /// `(time, x1, queue)` after every event that moved either process,
    /// starting with time 0.
    pub fn joint_path(&self) -> Vec<(f64, u64, u64)> {
        let recs = &self.trajectory.records;
        let q = &self.queue;
        let mut out = Vec::with_capacity(recs.len() + q.times.len() + 1);
        let (mut x1, mut l) = (self.trajectory.initial.x1, q.initial);
        out.push((0.0, x1, l));
        let (mut i, mut j) = (0, 0);
        while i < recs.len() || j < q.times.len() {
            let ti = recs.get(i).map_or(f64::INFINITY, |r| r.time);
            let tj = q.times.get(j).copied().unwrap_or(f64::INFINITY);
            let t = ti.min(tj);
            if ti == t {
                x1 = recs[i].state_after.x1;
                i += 1;
            }
            if tj == t {
                l = q.values[j];
                j += 1;
            }
            out.push((t, x1, l));
        }
        out
    }

    /// Largest value of `x1 - queue` over all event times.
    pub fn max_excess(&self) -> i64 {
        self.joint_path()
            .iter()
            .map(|&(_, x1, l)| x1 as i64 - l as i64)
            .max()
            .unwrap_or(0)
    }

    /// Number of event times with `x1 > queue`.
    pub fn violations(&self) -> usize {
        self.joint_path().iter().filter(|&&(_, x1, l)| x1 > l).count()
    }
}

/// Probability that a proposed queue arrival is also an `Up` jump of the
/// network at state `s`.
pub fn acceptance_probability(p: &ModelParams, beta0: f64, s: NetworkState) -> f64 {
    (p.f_n() - s.x0 - s.x1) as f64 / (beta0 * p.n() as f64)
}

/// Simulates the network together with an M/M/1 queue that dominates its
/// single-copy count. Both start from `initial.x1`.
///
/// Arrivals are proposed at rate `2 mu beta0 n` and always enter the queue;
/// the network accepts one as an `Up` jump with probability
/// [`acceptance_probability`]. Departures at rate `lambda n` hit both
/// processes when positive. Losses at rate `mu x1` move the network only.
pub fn simulate_coupled_domination(
    p: &ModelParams,
    beta0: f64,
    initial: NetworkState,
    horizon: f64,
    seed: u64,
) -> Result<CoupledRun> {
    p.check_state(initial)?;
    check_horizon(horizon)?;
    let arrival = 2.0 * p.mu() * beta0 * p.n() as f64;
    let service = p.capacity();
    if !(beta0.is_finite() && arrival < service) {
        return Err(Error::param("beta0", format!("need 2 mu beta0 < lambda, got beta0 = {beta0}")));
    }
    if (p.f_n() as f64) > beta0 * p.n() as f64 {
        return Err(Error::param("beta0", format!("need f_n <= beta0 n, got beta0 = {beta0}")));
    }
    let queue_params = Mm1Params::new(arrival, service)?;
    let mut rng = rng_from_seed(seed);
    let mut state = initial;
    let mut l = initial.x1;
    let mut t = 0.0;
    let mut records = Vec::new();
    let (mut q_times, mut q_values) = (Vec::new(), Vec::new());
    let mut absorption_time = p.is_absorbing(state).then_some(0.0);
    let mut events = 0u64;
    loop {
        let loss_rate = p.mu() * state.x1 as f64;
        let total = arrival + service + loss_rate;
        let e: f64 = rng.sample(Exp1);
        t += e / total;
        if t > horizon {
            break;
        }
        let u = rng.random::<f64>() * total;
        let mut kind = None;
        let mut queue_moved = false;
        if u < arrival {
            l += 1;
            queue_moved = true;
            let accept = rng.random::<f64>() < acceptance_probability(p, beta0, state);
            if accept && state.x0 + state.x1 < p.f_n() {
                kind = Some(JumpKind::Up);
            }
        } else if u < arrival + service || loss_rate == 0.0 {
            if l > 0 {
                l -= 1;
                queue_moved = true;
            }
            if state.x1 > 0 {
                kind = Some(JumpKind::Dup);
            }
        } else {
            kind = Some(JumpKind::Loss);
        }
        if queue_moved {
            q_times.push(t);
            q_values.push(l);
        }
        if let Some(kind) = kind {
            state = kind.apply(state);
            events += 1;
            records.push(JumpRecord {
                time: t,
                kind,
                state_after: state,
            });
            if absorption_time.is_none() && p.is_absorbing(state) {
                absorption_time = Some(t);
            }
        }
    }
    debug_assert!(queue_params.is_ergodic());
    let trajectory = Trajectory {
        params: *p,
        seed,
        initial,
        horizon,
        absorbed: absorption_time.is_some(),
        absorption_time,
        records,
        snapshots: None,
        jumps_recorded: true,
        final_state: state,
        events,
    };
    Ok(CoupledRun {
        trajectory,
        queue: Mm1Path {
            initial: initial.x1,
            horizon,
            times: q_times,
            values: q_values,
        },
        beta0,
    })
}
