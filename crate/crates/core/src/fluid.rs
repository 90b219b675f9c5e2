//! Fluid limit of `(X0(t)/N, X1(t)/N)` started from a vanishing initial state.

use std::io::{self, Write};

use crate::skorokhod::{gsp_solve, intervals, GridPath, GspOptions, PathFunctional};
use crate::{Error, Result};

/// Closed-form fluid state `(x0(t), x1(t))`.
///
/// Nontrivial only when `rho <= 2 beta`; otherwise the fluid state stays at
/// the origin.
pub fn fluid_closed_form(beta: f64, rho: f64, mu: f64, t: f64) -> (f64, f64) {
    if rho > 2.0 * beta {
        return (0.0, 0.0);
    }
    let e1 = (-mu * t).exp();
    let e2 = (-2.0 * mu * t).exp();
    let x0 = (beta - rho / 2.0) * (1.0 - 2.0 * e1 + e2);
    let x1 = (2.0 * beta - rho) * (e1 - e2);
    (x0, x1)
}

/// The driving functional of the single-copy fluid component:
///
/// `F(x)(t) = (2 mu beta - lambda) t - mu int_0^t (3 x(u) + 2 mu int_0^u x(v) dv) du`
///
/// Both integrals use the trapezoidal rule; the inner one is carried along
/// as a running sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidFunctional {
    pub beta: f64,
    pub lambda: f64,
    pub mu: f64,
}

pub fn fluid_functional(beta: f64, lambda: f64, mu: f64) -> Result<FluidFunctional> {
    for (name, v) in [("beta", beta), ("lambda", lambda), ("mu", mu)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
        }
    }
    Ok(FluidFunctional { beta, lambda, mu })
}

// Neumaier summation. Rounding noise in the running integrals is amplified
// by the Picard iteration near its fixed point, so plain sums stall well
// above the default tolerance on long horizons.
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

impl PathFunctional for FluidFunctional {
    fn apply(&self, x: &GridPath) -> GridPath {
        let h = x.step();
        let mu = self.mu;
        let drift = 2.0 * mu * self.beta - self.lambda;
        let xs = x.values();
        let mut out = Vec::with_capacity(xs.len());
        let mut inner = Compensated::default();
        let mut outer = Compensated::default();
        let mut prev_g = 3.0 * xs[0];
        out.push(0.0);
        for k in 1..xs.len() {
            inner.add(0.5 * h * (xs[k - 1] + xs[k]));
            let g = 3.0 * xs[k] + 2.0 * mu * inner.value();
            outer.add(0.5 * h * (prev_g + g));
            prev_g = g;
            out.push(drift * x.time(k) - mu * outer.value());
        }
        GridPath::new(h, out).expect("same grid as the input")
    }

    fn lipschitz_bound(&self, horizon: f64) -> f64 {
        self.mu * (3.0 + 2.0 * self.mu * horizon)
    }
}

/// Fluid curves on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidCurve {
    pub step: f64,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub beta: f64,
    pub rho: f64,
    pub mu: f64,
}

impl FluidCurve {
    /// Closed-form curve sampled on `0, h, ..., horizon`.
    pub fn closed_form(beta: f64, rho: f64, mu: f64, horizon: f64, h: f64) -> Result<Self> {
        let k = intervals(horizon, h)?;
        let (x0, x1) = (0..=k).map(|i| fluid_closed_form(beta, rho, mu, i as f64 * h)).unzip();
        Ok(Self {
            step: h,
            x0,
            x1,
            beta,
            rho,
            mu,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn x0_path(&self) -> GridPath {
        GridPath::new(self.step, self.x0.clone()).expect("fluid curves have at least 2 points")
    }

    pub fn x1_path(&self) -> GridPath {
        GridPath::new(self.step, self.x1.clone()).expect("fluid curves have at least 2 points")
    }

    /// Largest pointwise gap over both components.
    pub fn sup_distance(&self, other: &FluidCurve) -> Result<f64> {
        let d0 = self.x0_path().sup_distance(&other.x0_path())?;
        let d1 = self.x1_path().sup_distance(&other.x1_path())?;
        Ok(d0.max(d1))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x0,x1")?;
        for (k, (a, b)) in self.x0.iter().zip(&self.x1).enumerate() {
            writeln!(w, "{},{},{}", self.time(k), a, b)?;
        }
        Ok(())
    }
}

/// Fluid curve obtained by solving the generalized Skorokhod problem for
/// [`FluidFunctional`]; `x0 = mu int x1`.
pub fn fluid_gsp(beta: f64, lambda: f64, mu: f64, horizon: f64, h: f64) -> Result<FluidCurve> {
    fluid_gsp_with(beta, lambda, mu, horizon, h, GspOptions::default())
}

pub fn fluid_gsp_with(beta: f64, lambda: f64, mu: f64, horizon: f64, h: f64, opts: GspOptions) -> Result<FluidCurve> {
    let f = fluid_functional(beta, lambda, mu)?;
    let sol = gsp_solve(&f, horizon, h, opts)?;
    let x0 = sol.x.cumulative_integral().map(|s| mu * s).into_values();
    Ok(FluidCurve {
        step: h,
        x0,
        x1: sol.x.into_values(),
        beta,
        rho: lambda / mu,
        mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        assert_eq!(fluid_closed_form(1.0, 1.0, 1.0, 0.0), (0.0, 0.0));
        let (x0, x1) = fluid_closed_form(1.0, 1.0, 1.0, 2f64.ln());
        assert!((x0 - 0.125).abs() < 1e-15);
        assert!((x1 - 0.25).abs() < 1e-15);
        assert_eq!(fluid_closed_form(1.0, 2.5, 1.0, 3.0), (0.0, 0.0));
    }

    #[test]
    fn closed_form_long_time_limit() {
        let (beta, rho, mu) = (1.3, 0.8, 0.7);
        let (x0, x1) = fluid_closed_form(beta, rho, mu, 30.0 / mu);
        assert!((x0 - (beta - rho / 2.0)).abs() < 1e-10);
        assert!(x1.abs() < 1e-10);
    }

    #[test]
    fn closed_form_x0_is_integral_of_x1() {
        // Simpson quadrature of mu * x1 against the closed-form x0
        let (beta, rho, mu) = (1.0, 0.6, 1.4);
        let n = 20_000;
        let t_end = 4.0;
        let h = t_end / n as f64;
        let f = |t: f64| mu * fluid_closed_form(beta, rho, mu, t).1;
        let mut s = f(0.0) + f(t_end);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        let integral = s * h / 3.0;
        assert!((integral - fluid_closed_form(beta, rho, mu, t_end).0).abs() < 1e-8);
    }

    #[test]
    fn closed_form_continuous_at_critical_boundary() {
        for eps in [1e-2, 1e-4, 1e-8] {
            let (x0, x1) = fluid_closed_form(1.0, 2.0 - eps, 1.0, 1.5);
            assert!(x0.abs() <= eps && x1.abs() <= eps);
        }
    }

    #[test]
    fn functional_on_zero_and_constant_paths() {
        let f = fluid_functional(1.0, 1.5, 0.8).unwrap();
        let zero = GridPath::zeros(0.01, 301).unwrap();
        let out = f.apply(&zero);
        for (k, v) in out.values().iter().enumerate() {
            assert!((v - (2.0 * 0.8 - 1.5) * k as f64 * 0.01).abs() < 1e-12);
        }
        let c = 0.3;
        let constant = GridPath::new(0.01, vec![c; 301]).unwrap();
        let out = f.apply(&constant);
        assert_eq!(out.values()[0], 0.0);
        for (k, v) in out.values().iter().enumerate() {
            let t = k as f64 * 0.01;
            let exact = (2.0 * 0.8 - 1.5) * t - 3.0 * 0.8 * c * t - 0.8 * 0.8 * c * t * t;
            assert!((v - exact).abs() < 1e-10, "t = {t}: {v} vs {exact}");
        }
        assert_eq!(f.lipschitz_bound(2.0), 0.8 * (3.0 + 2.0 * 0.8 * 2.0));
    }

    #[test]
    fn functional_rejects_bad_params() {
        assert!(fluid_functional(0.0, 1.0, 1.0).is_err());
        assert!(fluid_functional(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn gsp_matches_closed_form() {
        let (beta, lambda, mu) = (1.0, 1.0, 1.0);
        let gsp = fluid_gsp(beta, lambda, mu, 5.0, 1e-3).unwrap();
        let exact = FluidCurve::closed_form(beta, lambda / mu, mu, 5.0, 1e-3).unwrap();
        assert!(gsp.sup_distance(&exact).unwrap() <= 1e-4);
    }

    #[test]
    fn gsp_stays_at_zero_when_stable() {
        let gsp = fluid_gsp(1.0, 3.0, 1.0, 5.0, 1e-2).unwrap();
        assert!(gsp.x1.iter().all(|v| v.abs() < 1e-12));
        assert!(gsp.x0.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gsp_peak_near_ln2() {
        let h = 1e-3;
        let gsp = fluid_gsp(1.0, 1.0, 1.0, 3.0, h).unwrap();
        let (k_max, _) = gsp.x1.iter().enumerate().fold((0, f64::MIN), |a, (k, &v)| if v > a.1 { (k, v) } else { a });
        assert!((k_max as f64 * h - 2f64.ln()).abs() < 0.01);
    }

    #[test]
    fn csv_columns() {
        let c = FluidCurve::closed_form(1.0, 1.0, 1.0, 1.0, 0.5).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x0,x1\n0,0,0\n0.5,"));
        assert_eq!(text.lines().count(), 4);
    }
}
