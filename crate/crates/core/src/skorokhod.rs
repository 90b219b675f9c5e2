//! One-dimensional Skorokhod reflection on a uniform grid and a Picard
//! solver for the generalized problem `x = G(x) + r`.

use std::io::{self, Write};

use crate::{Error, Result};

/// Real function sampled at `0, step, 2 step, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    step: f64,
    values: Vec<f64>,
}

impl GridPath {
    pub fn new(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::param("step", format!("must be finite and > 0, got {step}")));
        }
        if values.len() < 2 {
            return Err(Error::param("values", "a grid path needs at least 2 points"));
        }
        Ok(Self { step, values })
    }

    /// Samples `f` on `[0, horizon]`; the number of intervals is
    /// `round(horizon / step)`.
    pub fn from_fn(step: f64, horizon: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let k = intervals(horizon, step)?;
        Self::new(step, (0..=k).map(|i| f(i as f64 * step)).collect())
    }

    pub fn zeros(step: f64, len: usize) -> Result<Self> {
        Self::new(step, vec![0.0; len])
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    pub fn same_grid(&self, other: &GridPath) -> bool {
        self.step == other.step && self.values.len() == other.values.len()
    }

    pub(crate) fn check_same_grid(&self, other: &GridPath) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "step {} with {} points vs step {} with {} points",
                self.step,
                self.values.len(),
                other.step,
                other.values.len()
            )))
        }
    }

    /// Running trapezoidal integral, starting at 0.
    pub fn cumulative_integral(&self) -> GridPath {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * self.step * (w[0] + w[1]);
            out.push(acc);
        }
        GridPath {
            step: self.step,
            values: out,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridPath {
        GridPath {
            step: self.step,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `sup_k |self_k - other_k|`.
    pub fn sup_distance(&self, other: &GridPath) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Two-column `t,value` CSV with a header.
    pub fn write_csv<W: Write>(&self, mut w: W, column: &str) -> io::Result<()> {
        writeln!(w, "t,{column}")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.time(k), v)?;
        }
        Ok(())
    }
}

pub(crate) fn intervals(horizon: f64, step: f64) -> Result<usize> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::param("h", format!("must be finite and > 0, got {step}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::param("horizon", format!("must be finite and > 0, got {horizon}")));
    }
    let k = (horizon / step).round();
    if !(1.0..=1e9).contains(&k) {
        return Err(Error::param("h", format!("horizon / h = {} intervals is out of range", horizon / step)));
    }
    Ok(k as usize)
}

/// Non-anticipating map between grid paths: the output at index `k` may
/// only use inputs up to index `k`.
pub trait PathFunctional {
    fn apply(&self, x: &GridPath) -> GridPath;

    /// Constant `C_T` with `sup_{s<=t} |G(x)(s) - G(y)(s)| <= C_T * int_0^t |x - y|`
    /// for `t <= horizon`.
    fn lipschitz_bound(&self, horizon: f64) -> f64;
}

/// `G(x) = z` for every `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantFunctional(pub GridPath);

impl PathFunctional for ConstantFunctional {
    fn apply(&self, _x: &GridPath) -> GridPath {
        self.0.clone()
    }

    fn lipschitz_bound(&self, _horizon: f64) -> f64 {
        0.0
    }
}

/// Wraps a closure together with its declared Lipschitz bound.
pub struct FnFunctional<F> {
    f: F,
    lipschitz: f64,
}

impl<F: Fn(&GridPath) -> GridPath> FnFunctional<F> {
    pub fn new(lipschitz: f64, f: F) -> Self {
        Self { f, lipschitz }
    }
}

impl<F: Fn(&GridPath) -> GridPath> PathFunctional for FnFunctional<F> {
    fn apply(&self, x: &GridPath) -> GridPath {
        (self.f)(x)
    }

    fn lipschitz_bound(&self, _horizon: f64) -> f64 {
        self.lipschitz
    }
}

/// Solution `(x, r)` of the one-dimensional Skorokhod problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflection {
    pub x: GridPath,
    pub r: GridPath,
}

/// Reflects `z` at 0: `r_k = max_{j<=k} max(-z_j, 0)` and `x = z + r`.
pub fn reflect(z: &GridPath) -> Result<Reflection> {
    let z0 = z.values[0];
    if !(z0 >= 0.0) {
        return Err(Error::param("z", format!("initial value must be >= 0, got {z0}")));
    }
    let mut push = 0.0f64;
    let mut r = Vec::with_capacity(z.len());
    let mut x = Vec::with_capacity(z.len());
    for &v in &z.values {
        push = push.max(-v);
        r.push(push);
        x.push(v + push);
    }
    Ok(Reflection {
        x: GridPath { step: z.step, values: x },
        r: GridPath { step: z.step, values: r },
    })
}

/// `sum_k |x_{k+1} (r_{k+1} - r_k)|`: the discrete form of `int x dr` with
/// the post-push value multiplying each increment of `r`.
pub fn complementarity_defect(x: &GridPath, r: &GridPath) -> Result<f64> {
    x.check_same_grid(r)?;
    Ok(x.values[1..]
        .iter()
        .zip(r.values.windows(2))
        .map(|(xv, w)| (xv * (w[1] - w[0])).abs())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GspOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GspOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GspSolution {
    pub x: GridPath,
    pub r: GridPath,
    /// Number of reflections computed.
    pub iterations: usize,
    /// Sup-norm distance between successive iterates, one per iteration.
    pub residuals: Vec<f64>,
}

impl GspSolution {
    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

/// Picard iteration `x^{m+1} = reflect(G(x^m))` from `x^0 = 0` on the grid
/// `0, h, ..., round(horizon / h) h`.
///
/// Returns once two successive iterates are within `opts.tol` in sup-norm.
pub fn gsp_solve<G: PathFunctional + ?Sized>(g: &G, horizon: f64, h: f64, opts: GspOptions) -> Result<GspSolution> {
    let k = intervals(horizon, h)?;
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::param("tol", "tolerance and max_iter must be positive"));
    }
    let mut x = GridPath::zeros(h, k + 1)?;
    let mut residuals = Vec::new();
    for iteration in 1..=opts.max_iter {
        let z = g.apply(&x);
        x.check_same_grid(&z)?;
        let next = reflect(&z)?;
        let d = next.x.sup_distance(&x)?;
        residuals.push(d);
        if !d.is_finite() {
            break;
        }
        x = next.x;
        if d <= opts.tol {
            return Ok(GspSolution {
                x,
                r: next.r,
                iterations: iteration,
                residuals,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: residuals.len(),
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}
