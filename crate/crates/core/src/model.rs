//! Model parameters, state space and transition rates.

use std::fmt;

use crate::{Error, Result};

/// Rates and scale of one network instance.
///
/// `lambda * n` is the total duplication capacity, `mu` the failure rate of
/// a single copy and `f_n` the number of files (all initially duplicated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    lambda: f64,
    mu: f64,
    n: u64,
    f_n: u64,
}

impl ModelParams {
    pub fn new(lambda: f64, mu: f64, n: u64, f_n: u64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::param("lambda", format!("must be finite and > 0, got {lambda}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::param("mu", format!("must be finite and > 0, got {mu}")));
        }
        if n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        if f_n == 0 {
            return Err(Error::param("f_n", "must be >= 1"));
        }
        Ok(Self { lambda, mu, n, f_n })
    }

    /// Builds parameters from a file density `beta`, with `f_n = floor(beta * n)`.
    pub fn from_beta(lambda: f64, mu: f64, n: u64, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::param("beta", format!("must be finite and > 0, got {beta}")));
        }
        let f_n = (beta * n as f64).floor();
        if f_n < 1.0 || f_n > u64::MAX as f64 {
            return Err(Error::param("beta", format!("floor(beta * n) = {f_n} is not a valid file count")));
        }
        Self::new(lambda, mu, n, f_n as u64)
    }

    /// Critical preset: `lambda = 2 mu f_n / n`, so that `rho = 2 beta` exactly.
    pub fn critical(mu: f64, n: u64, f_n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        Self::new(2.0 * mu * f_n as f64 / n as f64, mu, n, f_n)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn f_n(&self) -> u64 {
        self.f_n
    }

    /// File density `f_n / n`.
    pub fn beta(&self) -> f64 {
        self.f_n as f64 / self.n as f64
    }

    /// Load ratio `lambda / mu`.
    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    /// Total duplication capacity `lambda * n`.
    pub fn capacity(&self) -> f64 {
        self.lambda * self.n as f64
    }

    pub fn regime(&self, tol: f64) -> Regime {
        classify_regime(self, tol)
    }

    /// The all-lost absorbing state `(f_n, 0)`.
    pub fn absorbing_state(&self) -> NetworkState {
        NetworkState { x0: self.f_n, x1: 0 }
    }

    pub fn contains(&self, s: NetworkState) -> bool {
        s.x0.checked_add(s.x1).is_some_and(|total| total <= self.f_n)
    }

    pub fn check_state(&self, s: NetworkState) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::StateOutOfRange {
                x0: s.x0,
                x1: s.x1,
                f_n: self.f_n,
            })
        }
    }

    pub fn is_absorbing(&self, s: NetworkState) -> bool {
        s == self.absorbing_state()
    }
}

/// Counts of lost files (`x0`) and single-copy files (`x1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct NetworkState {
    pub x0: u64,
    pub x1: u64,
}

impl NetworkState {
    pub const fn new(x0: u64, x1: u64) -> Self {
        Self { x0, x1 }
    }

    /// Number of files that still have two copies.
    ///
    /// Only meaningful for states inside the state space of `p`.
    pub fn x2(&self, p: &ModelParams) -> u64 {
        p.f_n() - self.x0 - self.x1
    }
}

impl fmt::Display for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x0, self.x1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeTag {
    /// `rho < 2 beta`: a macroscopic fraction of files is lost quickly.
    Overloaded,
    /// `rho = 2 beta` up to the classification tolerance.
    Critical,
    /// `rho > 2 beta`: losses are rare on the normal time scale.
    Stable,
}

impl fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegimeTag::Overloaded => "overloaded",
            RegimeTag::Critical => "critical",
            RegimeTag::Stable => "stable",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub tag: RegimeTag,
    pub tol: f64,
}

/// Compares `rho` against `2 beta`. Inside `[2 beta - tol, 2 beta + tol]` the
/// regime is critical.
pub fn classify_regime(p: &ModelParams, tol: f64) -> Regime {
    let tol = tol.max(0.0);
    let threshold = 2.0 * p.beta();
    let rho = p.rho();
    let tag = if rho < threshold - tol {
        RegimeTag::Overloaded
    } else if rho > threshold + tol {
        RegimeTag::Stable
    } else {
        RegimeTag::Critical
    };
    Regime { tag, tol }
}

/// Jump rates out of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    /// A two-copy file loses a copy: `x1 + 1`.
    pub up: f64,
    /// A single-copy file is duplicated: `x1 - 1`.
    pub dup: f64,
    /// A single-copy file loses its last copy: `x0 + 1, x1 - 1`.
    pub loss: f64,
}

impl Rates {
    pub fn total(&self) -> f64 {
        self.up + self.dup + self.loss
    }
}

/// Rates of the Q-matrix at state `s`. The caller guarantees `s` lies in the
/// state space of `p`.
pub fn transition_rates(p: &ModelParams, s: NetworkState) -> Rates {
    debug_assert!(p.contains(s));
    let two_copies = (p.f_n() - s.x0 - s.x1) as f64;
    Rates {
        up: 2.0 * p.mu() * two_copies,
        dup: if s.x1 > 0 { p.capacity() } else { 0.0 },
        loss: p.mu() * s.x1 as f64,
    }
}
