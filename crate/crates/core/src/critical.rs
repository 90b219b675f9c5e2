//! The critical regime: Euler integration of
//!
//! `dY = sqrt(2 lambda) dB + mu (2 gamma - 3 Y - 2 mu int_0^t Y) dt`
//!
//! reflected at 0, and ensemble statistics for comparison with
//! `sqrt(N)`-scaled simulations.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::rng::{replica_seed, rng_from_seed};
use crate::skorokhod::{intervals, GridPath};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalParams {
    lambda: f64,
    mu: f64,
    gamma: f64,
    y: f64,
}

impl CriticalParams {
    /// `gamma` is the limit of `(F_N - N rho / 2) / sqrt(N)` and `y` the
    /// limit of `X1(0) / sqrt(N)`.
    pub fn new(lambda: f64, mu: f64, gamma: f64, y: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::param("lambda", format!("must be finite and > 0, got {lambda}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::param("mu", format!("must be finite and > 0, got {mu}")));
        }
        if !gamma.is_finite() {
            return Err(Error::param("gamma", "must be finite"));
        }
        if !(y.is_finite() && y >= 0.0) {
            return Err(Error::param("y", format!("must be finite and >= 0, got {y}")));
        }
        Ok(Self { lambda, mu, gamma, y })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Drift at state `y` with running integral `s`.
    pub fn drift(&self, y: f64, s: f64) -> f64 {
        self.mu * (2.0 * self.gamma - 3.0 * y - 2.0 * self.mu * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Normal,
    /// Drops the Brownian term.
    Zero,
}

/// `Y` on the grid and its running integral `S(t) = int_0^t Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectedPath {
    pub y: GridPath,
    pub integral: GridPath,
}

/// Projected Euler scheme:
/// `Y_{k+1} = max(0, Y_k + drift(Y_k, S_k) h + sqrt(2 lambda h) xi_k)`, with
/// `S` advanced by the trapezoidal rule.
pub fn simulate_reflected_sde(p: &CriticalParams, horizon: f64, h: f64, seed: u64, noise: NoiseMode) -> Result<ReflectedPath> {
    let k = intervals(horizon, h)?;
    let mut rng = rng_from_seed(seed);
    let sigma = (2.0 * p.lambda * h).sqrt();
    let mut ys = Vec::with_capacity(k + 1);
    let mut ss = Vec::with_capacity(k + 1);
    let (mut y, mut s) = (p.y, 0.0);
    ys.push(y);
    ss.push(s);
    for _ in 0..k {
        let xi: f64 = match noise {
            NoiseMode::Normal => rng.sample(StandardNormal),
            NoiseMode::Zero => 0.0,
        };
        let next = (y + p.drift(y, s) * h + sigma * xi).max(0.0);
        s += 0.5 * h * (y + next);
        y = next;
        ys.push(y);
        ss.push(s);
    }
    Ok(ReflectedPath {
        y: GridPath::new(h, ys)?,
        integral: GridPath::new(h, ss)?,
    })
}

/// Pointwise ensemble statistics of `Y` and of `mu S`, the limit of
/// `X0 / sqrt(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMoments {
    pub step: f64,
    pub n_paths: usize,
    pub mean_y: Vec<f64>,
    pub var_y: Vec<f64>,
    pub mean_x0_scaled: Vec<f64>,
    pub var_x0_scaled: Vec<f64>,
}

impl EnsembleMoments {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.step).round();
        (k >= 0.0 && (k as usize) < self.mean_y.len() && (k * self.step - t).abs() <= 1e-9 * t.abs().max(1.0))
            .then_some(k as usize)
    }

    pub fn stderr_y(&self, k: usize) -> f64 {
        (self.var_y[k] / self.n_paths as f64).sqrt()
    }

    pub fn stderr_x0_scaled(&self, k: usize) -> f64 {
        (self.var_x0_scaled[k] / self.n_paths as f64).sqrt()
    }

    /// `t,mean_y,var_y,mean_x0_scaled,se_mean_y,se_x0_scaled`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,mean_y,var_y,mean_x0_scaled,se_mean_y,se_x0_scaled")?;
        for k in 0..self.mean_y.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.time(k),
                self.mean_y[k],
                self.var_y[k],
                self.mean_x0_scaled[k],
                self.stderr_y(k),
                self.stderr_x0_scaled(k)
            )?;
        }
        Ok(())
    }
}

/// Running mean and sum of squared deviations, one slot per grid point.
#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, values: &[f64]) {
        self.n += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let d = v - *m;
            *m += d / self.n;
            *s += d * (v - *m);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0.0 {
            return;
        }
        let n = self.n + other.n;
        for k in 0..self.mean.len() {
            let d = other.mean[k] - self.mean[k];
            self.mean[k] += d * other.n / n;
            self.m2[k] += other.m2[k] + d * d * self.n * other.n / n;
        }
        self.n = n;
    }

    fn variance(&self) -> Vec<f64> {
        self.m2.iter().map(|s| s / (self.n - 1.0)).collect()
    }
}

const CHUNK: usize = 64;

/// Runs `n_paths` independent paths (path `i` seeded with
/// [`replica_seed`]`(seed, i)`) and reduces them in a fixed order, so the
/// result does not depend on the thread count.
pub fn ensemble_moments(
    p: &CriticalParams,
    horizon: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
    noise: NoiseMode,
) -> Result<EnsembleMoments> {
    if n_paths < 2 {
        return Err(Error::InsufficientData(format!("ensemble needs at least 2 paths, got {n_paths}")));
    }
    let len = intervals(horizon, h)? + 1;
    let chunks: Vec<(Moments, Moments)> = (0..n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut my = Moments::new(len);
            let mut mx = Moments::new(len);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let path = simulate_reflected_sde(p, horizon, h, replica_seed(seed, i as u64), noise)?;
                my.push(path.y.values());
                let scaled: Vec<f64> = path.integral.values().iter().map(|s| p.mu * s).collect();
                mx.push(&scaled);
            }
            Ok((my, mx))
        })
        .collect::<Result<_>>()?;
    let mut my = Moments::new(len);
    let mut mx = Moments::new(len);
    for (a, b) in &chunks {
        my.merge(a);
        mx.merge(b);
    }
    Ok(EnsembleMoments {
        step: h,
        n_paths,
        var_y: my.variance(),
        mean_y: my.mean,
        var_x0_scaled: mx.variance(),
        mean_x0_scaled: mx.mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_at_origin_stays_put() {
        let p = CriticalParams::new(2.0, 1.0, 0.0, 0.0).unwrap();
        let path = simulate_reflected_sde(&p, 3.0, 1e-3, 1, NoiseMode::Zero).unwrap();
        assert!(path.y.values().iter().all(|&v| v == 0.0));
        assert!(path.integral.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_noise_initial_slope() {
        let (mu, gamma) = (1.5, 0.4);
        let p = CriticalParams::new(2.0, mu, gamma, 0.0).unwrap();
        assert_eq!(p.drift(0.0, 0.0), 2.0 * mu * gamma);
        let h = 1e-4;
        let path = simulate_reflected_sde(&p, 0.01, h, 1, NoiseMode::Zero).unwrap();
        let slope = path.y.values()[1] / h;
        assert!((slope - 2.0 * mu * gamma).abs() < 1e-12);
        assert!(path.y.values().windows(2).take(50).all(|w| w[1] > w[0]));
        let neg = CriticalParams::new(2.0, mu, -gamma, 0.0).unwrap();
        let path = simulate_reflected_sde(&neg, 0.01, h, 1, NoiseMode::Zero).unwrap();
        assert!(path.y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noisy_paths_stay_nonnegative() {
        let p = CriticalParams::new(2.0, 1.0, -0.5, 0.2).unwrap();
        for seed in 0..20 {
            let path = simulate_reflected_sde(&p, 2.0, 1e-3, seed, NoiseMode::Normal).unwrap();
            assert!(path.y.values().iter().all(|&v| v >= 0.0));
            assert!(path.integral.values().windows(2).all(|w| w[1] >= w[0]));
            assert_eq!(path.integral.values()[0], 0.0);
        }
    }

    #[test]
    fn paths_are_reproducible() {
        let p = CriticalParams::new(2.0, 1.0, 0.0, 0.0).unwrap();
        let a = simulate_reflected_sde(&p, 1.0, 1e-2, 5, NoiseMode::Normal).unwrap();
        let b = simulate_reflected_sde(&p, 1.0, 1e-2, 5, NoiseMode::Normal).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(CriticalParams::new(2.0, 1.0, 0.0, -1.0).is_err());
        assert!(CriticalParams::new(0.0, 1.0, 0.0, 0.0).is_err());
        let p = CriticalParams::new(2.0, 1.0, 0.0, 0.0).unwrap();
        assert!(simulate_reflected_sde(&p, 1.0, 0.0, 1, NoiseMode::Zero).is_err());
        assert!(simulate_reflected_sde(&p, 1.0, -1e-3, 1, NoiseMode::Zero).is_err());
    }

    #[test]
    fn ensemble_needs_two_paths() {
        let p = CriticalParams::new(2.0, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(ensemble_moments(&p, 1.0, 1e-2, 1, 0, NoiseMode::Normal), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn zero_noise_ensemble_has_no_variance() {
        let p = CriticalParams::new(2.0, 1.0, 0.3, 0.5).unwrap();
        let m = ensemble_moments(&p, 1.0, 1e-2, 10, 0, NoiseMode::Zero).unwrap();
        assert!(m.var_y.iter().all(|&v| v.abs() < 1e-24));
        assert!(m.var_x0_scaled.iter().all(|&v| v.abs() < 1e-24));
    }

    #[test]
    fn ensemble_matches_direct_average() {
        let p = CriticalParams::new(2.0, 1.0, 0.0, 0.0).unwrap();
        let n = 150;
        let m = ensemble_moments(&p, 1.0, 1e-2, n, 9, NoiseMode::Normal).unwrap();
        let finals: Vec<f64> = (0..n)
            .map(|i| *simulate_reflected_sde(&p, 1.0, 1e-2, replica_seed(9, i as u64), NoiseMode::Normal).unwrap().y.values().last().unwrap())
            .collect();
        let mean = finals.iter().sum::<f64>() / n as f64;
        let var = finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let k = m.index_of(1.0).unwrap();
        assert!((m.mean_y[k] - mean).abs() < 1e-12);
        assert!((m.var_y[k] - var).abs() < 1e-12);
    }
}
