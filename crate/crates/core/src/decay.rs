//! Stable regime (`rho > 2 beta`) on the slow time scale `t -> N t`.
//!
//! The fraction of lost files at time `N t` tends to `Psi(t)`, the root in
//! `[0, beta)` of `(1 - y / beta)^(rho / 2) exp(y + mu t) = 1`. Around that
//! time the single-copy count is in the stationary regime of an M/M/1 queue
//! with arrival rate `2 mu (beta - Psi(t))` and service rate `lambda`.

use std::io::{self, Write};

use rand::Rng;

use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

fn check_stable(beta: f64, rho: f64, mu: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::param("beta", format!("must be finite and > 0, got {beta}")));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::param("mu", format!("must be finite and > 0, got {mu}")));
    }
    if !(rho.is_finite() && rho > 2.0 * beta) {
        return Err(Error::param("rho", format!("stable regime needs rho > 2 beta, got rho = {rho}, beta = {beta}")));
    }
    Ok(())
}

/// Log form of the decay equation; strictly decreasing in `y` on `[0, beta)`.
fn log_equation(beta: f64, rho: f64, mu: f64, t: f64, y: f64) -> f64 {
    0.5 * rho * (-y / beta).ln_1p() + y + mu * t
}

/// `|(1 - y / beta)^(rho / 2) exp(y + mu t) - 1|`.
pub fn fixed_point_residual(beta: f64, rho: f64, mu: f64, t: f64, y: f64) -> f64 {
    ((1.0 - y / beta).powf(0.5 * rho) * (y + mu * t).exp() - 1.0).abs()
}

/// Rate of the limiting Poisson loss process on the normal time scale,
/// `2 mu beta / (rho - 2 beta)`.
pub fn poisson_loss_rate(beta: f64, rho: f64, mu: f64) -> Result<f64> {
    check_stable(beta, rho, mu)?;
    Ok(2.0 * mu * beta / (rho - 2.0 * beta))
}

/// Decay curve value `Psi(t)` by bisection.
pub fn psi(beta: f64, rho: f64, mu: f64, t: f64, tol: f64) -> Result<f64> {
    check_stable(beta, rho, mu)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", format!("must be finite and >= 0, got {t}")));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be > 0, got {tol}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let g = |y: f64| log_equation(beta, rho, mu, t, y);
    let mut lo = 0.0;
    let mut hi = beta * (1.0 - f64::EPSILON);
    if g(hi) >= 0.0 {
        // root is closer to beta than the last representable bracket point
        return Err(Error::RootNotResolved { residual: g(hi), tol });
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    let residual = g(y).abs();
    if residual > tol {
        return Err(Error::RootNotResolved { residual, tol });
    }
    Ok(y)
}

/// `Psi` on a uniform grid, with per-point fixed-point residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub step: f64,
    pub psi: Vec<f64>,
    pub residuals: Vec<f64>,
    pub beta: f64,
    pub rho: f64,
    pub mu: f64,
}

impl DecayCurve {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &DecayCurve) -> Result<f64> {
        if self.step != other.step || self.psi.len() != other.psi.len() {
            return Err(Error::GridMismatch("decay curves on different grids".into()));
        }
        Ok(self.psi.iter().zip(&other.psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,psi,residual")?;
        for (k, (p, r)) in self.psi.iter().zip(&self.residuals).enumerate() {
            writeln!(w, "{},{},{}", self.time(k), p, r)?;
        }
        Ok(())
    }
}

fn grid_points(horizon: f64, h: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", format!("must be finite and > 0, got {h}")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::param("horizon", format!("must be finite and >= 0, got {horizon}")));
    }
    Ok((horizon / h).round() as usize + 1)
}

pub fn psi_curve(beta: f64, rho: f64, mu: f64, horizon: f64, h: f64, tol: f64) -> Result<DecayCurve> {
    check_stable(beta, rho, mu)?;
    let len = grid_points(horizon, h)?;
    let mut values = Vec::with_capacity(len);
    let mut residuals = Vec::with_capacity(len);
    for k in 0..len {
        let t = k as f64 * h;
        let y = psi(beta, rho, mu, t, tol)?;
        values.push(y);
        residuals.push(fixed_point_residual(beta, rho, mu, t, y));
    }
    Ok(DecayCurve {
        step: h,
        psi: values,
        residuals,
        beta,
        rho,
        mu,
    })
}

/// `Psi` by classical RK4 on `Psi' = 2 mu^2 (beta - Psi) / (lambda - 2 mu (beta - Psi))`,
/// `Psi(0) = 0`, with `lambda = rho mu`.
pub fn psi_ode(beta: f64, rho: f64, mu: f64, horizon: f64, h: f64) -> Result<DecayCurve> {
    check_stable(beta, rho, mu)?;
    let len = grid_points(horizon, h)?;
    let lambda = rho * mu;
    let rhs = |y: f64| -> Result<f64> {
        let arrival = 2.0 * mu * (beta - y);
        let denom = lambda - arrival;
        if denom <= 0.0 {
            return Err(Error::param("rho", "local queue is not ergodic along the curve"));
        }
        Ok(mu * arrival / denom)
    };
    let mut values = Vec::with_capacity(len);
    let mut y = 0.0;
    values.push(y);
    for _ in 1..len {
        let k1 = rhs(y)?;
        let k2 = rhs(y + 0.5 * h * k1)?;
        let k3 = rhs(y + 0.5 * h * k2)?;
        let k4 = rhs(y + h * k3)?;
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        values.push(y);
    }
    let residuals = values
        .iter()
        .enumerate()
        .map(|(k, &y)| fixed_point_residual(beta, rho, mu, k as f64 * h, y))
        .collect();
    Ok(DecayCurve {
        step: h,
        psi: values,
        residuals,
        beta,
        rho,
        mu,
    })
}

/// Limit of `T_N(delta) / N`, the time needed to lose a fraction `delta` of
/// the files: `(-(rho / 2) ln(1 - delta) - delta beta) / mu`.
pub fn t_of_delta(beta: f64, rho: f64, mu: f64, delta: f64) -> Result<f64> {
    check_stable(beta, rho, mu)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok((-0.5 * rho * (-delta).ln_1p() - delta * beta) / mu)
}

/// Large-time approximation `beta - beta exp(-2 (beta + mu t) / rho)`.
pub fn psi_asymptotic(beta: f64, rho: f64, mu: f64, t: f64) -> f64 {
    beta - beta * (-2.0 * (beta + mu * t) / rho).exp()
}

/// Law `P(k) = (1 - r) r^k` on `{0, 1, 2, ...}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricLaw {
    ratio: f64,
}

impl GeometricLaw {
    pub fn new(ratio: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::param("ratio", format!("must lie in [0, 1), got {ratio}")));
        }
        Ok(Self { ratio })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn pmf(&self, k: u64) -> f64 {
        (1.0 - self.ratio) * self.ratio.powf(k as f64)
    }

    /// `P(X >= k) = r^k`.
    pub fn tail(&self, k: u64) -> f64 {
        self.ratio.powf(k as f64)
    }

    pub fn mean(&self) -> f64 {
        self.ratio / (1.0 - self.ratio)
    }

    /// Inverse-transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.ratio == 0.0 {
            return 0;
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        (u.ln() / self.ratio.ln()).floor() as u64
    }
}

/// Stationary law of the single-copy count around time `N t`: ratio
/// `2 (beta - Psi(t)) / rho`.
pub fn local_equilibrium(beta: f64, rho: f64, mu: f64, t: f64) -> Result<GeometricLaw> {
    let y = psi(beta, rho, mu, t, DEFAULT_TOL)?;
    GeometricLaw::new(2.0 * (beta - y) / rho)
}
