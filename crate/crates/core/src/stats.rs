//! Estimators and goodness-of-fit checks used to compare simulations with
//! their limit laws.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use crate::ctmc::Trajectory;
use crate::decay::GeometricLaw;
use crate::skorokhod::GridPath;
use crate::{Error, Result};

/// Histogram over the nonnegative integers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmpiricalDist {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl EmpiricalDist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: u64) {
        *self.counts.entry(value).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn count(&self, value: u64) -> u64 {
        self.counts.get(&value).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn frequency(&self, value: u64) -> f64 {
        self.count(value) as f64 / self.total as f64
    }

    pub fn mean(&self) -> f64 {
        let s: f64 = self.counts.iter().map(|(&k, &c)| k as f64 * c as f64).sum();
        s / self.total as f64
    }
}

impl FromIterator<u64> for EmpiricalDist {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        let mut d = Self::new();
        for v in iter {
            d.add(v);
        }
        d
    }
}

/// Histogram of the single-copy count at time `t` across replicas.
pub fn empirical_marginal(trajectories: &[Trajectory], t: f64) -> Result<EmpiricalDist> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::InsufficientData("no trajectories".into()))?;
    let mut d = EmpiricalDist::new();
    for tr in trajectories {
        if tr.params != first.params {
            return Err(Error::param("trajectories", "replicas must share their parameters"));
        }
        d.add(tr.sample_at(t)?.x1);
    }
    Ok(d)
}

/// Outcome of one check: passes when `statistic <= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub description: String,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
            description: description.into(),
        }
    }

    /// Combines several reports; passes when all do. The statistic is the
    /// number of failing parts.
    pub fn all(name: impl Into<String>, parts: &[TestReport]) -> Self {
        let failed = parts.iter().filter(|r| !r.pass).count();
        let names: Vec<&str> = parts.iter().map(|r| r.name.as_str()).collect();
        Self::new(name, failed as f64, 0.0, format!("all of: {}", names.join(", ")))
    }

    pub fn csv_header() -> &'static str {
        "name,statistic,threshold,pass"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.name, self.statistic, self.threshold, self.pass)
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: statistic {:.6e} vs threshold {:.6e} ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.threshold,
            self.description
        )
    }
}

pub fn write_reports_csv<W: Write>(reports: &[TestReport], mut w: W) -> io::Result<()> {
    writeln!(w, "{}", TestReport::csv_header())?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn write_reports_text<W: Write>(reports: &[TestReport], mut w: W) -> io::Result<()> {
    for r in reports {
        writeln!(w, "{r}")?;
    }
    Ok(())
}

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

pub fn chi_square_cdf(x: f64, dof: f64) -> f64 {
    gamma_p(0.5 * dof, 0.5 * x)
}

/// Quantile of the chi-square law: the `x` with `cdf(x) = p`, by bisection.
pub fn chi_square_quantile(p: f64, dof: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0 && dof > 0.0, "quantile needs p in (0, 1) and dof > 0");
    let mut lo = 0.0;
    let mut hi = dof.max(1.0);
    while chi_square_cdf(hi, dof) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi_square_cdf(mid, dof) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pearson test of `d` against the geometric law with ratio `r`.
///
/// Cells `0, 1, ..., m - 1` are kept while both the cell and the remaining
/// tail expect at least 5 observations; everything from `m` on forms the
/// tail cell. The ratio is taken as known, so the test has `cells - 1`
/// degrees of freedom.
pub fn chi_square_geometric(d: &EmpiricalDist, r: f64, alpha_level: f64) -> Result<TestReport> {
    let law = GeometricLaw::new(r)?;
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(Error::param("alpha_level", format!("must lie in (0, 1), got {alpha_level}")));
    }
    if d.total() == 0 {
        return Err(Error::InsufficientData("empty distribution".into()));
    }
    let n = d.total() as f64;
    if r == 0.0 {
        // point mass at 0: exact fit or impossible observation
        let off = (d.total() - d.count(0)) as f64;
        return Ok(TestReport::new(
            "chi_square_geometric",
            off,
            0.0,
            "degenerate law at 0: counts away from 0",
        ));
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut k = 0u64;
    loop {
        let cell = n * law.pmf(k);
        let rest = n * law.tail(k + 1);
        if cell >= 5.0 && rest >= 5.0 {
            cells.push((d.count(k) as f64, cell));
            k += 1;
        } else {
            break;
        }
    }
    let observed_tail: u64 = d.counts().range(k..).map(|(_, &c)| c).sum();
    cells.push((observed_tail as f64, n * law.tail(k)));
    if cells.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} cell(s) with expected count >= 5 for n = {}",
            cells.len(),
            d.total()
        )));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (cells.len() - 1) as f64;
    let threshold = chi_square_quantile(1.0 - alpha_level, dof);
    Ok(TestReport::new(
        "chi_square_geometric",
        statistic,
        threshold,
        format!("Pearson vs geometric(r = {r}), {} cells, alpha {alpha_level}", cells.len()),
    ))
}

/// Kolmogorov distance between the empirical law of `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic critical value `sqrt(-ln(alpha / 2) / 2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha_level: f64) -> f64 {
    (-0.5 * (0.5 * alpha_level).ln()).sqrt() / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonCheckOptions {
    pub alpha_level: f64,
    /// Number of equal subwindows for the dispersion index.
    pub subwindows: usize,
    /// Allowed `|dispersion - 1|`.
    pub dispersion_band: f64,
}

impl Default for PoissonCheckOptions {
    fn default() -> Self {
        Self {
            alpha_level: 0.01,
            subwindows: 100,
            dispersion_band: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonCheck {
    pub count: usize,
    /// `count / (t2 - t1)`.
    pub rate: f64,
    pub dispersion_index: f64,
    pub dispersion: TestReport,
    pub ks: TestReport,
}

impl PoissonCheck {
    pub fn pass(&self) -> bool {
        self.dispersion.pass && self.ks.pass
    }

    pub fn report(&self) -> TestReport {
        TestReport::all("poisson_loss", &[self.dispersion.clone(), self.ks.clone()])
    }
}

/// Checks that event times in `window` look like a homogeneous Poisson
/// stream: dispersion index of subwindow counts near 1 and exponential gaps
/// (KS against the fitted rate).
pub fn poisson_check_times(times: &[f64], window: (f64, f64), opts: PoissonCheckOptions) -> Result<PoissonCheck> {
    let (t1, t2) = window;
    if !(t1 >= 0.0 && t2 > t1 && t2.is_finite()) {
        return Err(Error::param("window", format!("need 0 <= t1 < t2, got ({t1}, {t2})")));
    }
    if opts.subwindows < 2 {
        return Err(Error::param("subwindows", "need at least 2 subwindows"));
    }
    let mut inside: Vec<f64> = times.iter().copied().filter(|&t| t > t1 && t <= t2).collect();
    inside.sort_by(f64::total_cmp);
    let n = inside.len();
    if n < 20 {
        return Err(Error::InsufficientData(format!("{n} events in window, need at least 20")));
    }
    let length = t2 - t1;
    let rate = n as f64 / length;

    let k = opts.subwindows;
    let mut counts = vec![0f64; k];
    for &t in &inside {
        let idx = (((t - t1) / length) * k as f64).ceil() as usize;
        counts[idx.clamp(1, k) - 1] += 1.0;
    }
    let mean = n as f64 / k as f64;
    let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (k as f64 - 1.0);
    let dispersion_index = var / mean;
    let dispersion = TestReport::new(
        "poisson_dispersion",
        (dispersion_index - 1.0).abs(),
        opts.dispersion_band,
        format!("|var/mean - 1| over {k} subwindows, index {dispersion_index:.4}"),
    );

    let mut gaps = Vec::with_capacity(n);
    let mut prev = t1;
    for &t in &inside {
        gaps.push(t - prev);
        prev = t;
    }
    let d = ks_statistic(&gaps, |x| 1.0 - (-rate * x).exp());
    let ks = TestReport::new(
        "poisson_gaps_ks",
        d,
        ks_critical_value(n, opts.alpha_level),
        format!("KS of {n} gaps vs Exponential({rate:.4}), alpha {}", opts.alpha_level),
    );
    Ok(PoissonCheck {
        count: n,
        rate,
        dispersion_index,
        dispersion,
        ks,
    })
}

/// [`poisson_check_times`] applied to the loss jumps of a fully recorded
/// trajectory.
pub fn poisson_loss_check(tr: &Trajectory, window: (f64, f64), opts: PoissonCheckOptions) -> Result<PoissonCheck> {
    if window.1 > tr.horizon && !tr.absorbed {
        return Err(Error::TimeOutOfRange {
            t: window.1,
            horizon: tr.horizon,
        });
    }
    poisson_check_times(&tr.loss_times(), window, opts)
}

/// `max_k |a_k - b_k|`.
pub fn sup_deviation(a: &GridPath, b: &GridPath) -> Result<f64> {
    a.sup_distance(b)
}

/// Sample mean and standard error `s / sqrt(n)`.
pub fn mean_stderr(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 samples, got {n}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    Ok((mean, (var / n as f64).sqrt()))
}

/// Sample mean and normal-approximation 95% half-width `1.96 s / sqrt(n)`.
pub fn mean_ci(samples: &[f64]) -> Result<(f64, f64)> {
    let (mean, se) = mean_stderr(samples)?;
    Ok((mean, 1.96 * se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::{Exp1, StandardNormal};

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(11.0) - 3_628_800f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn chi_square_closed_forms() {
        // dof 2: cdf = 1 - exp(-x/2)
        for x in [0.1, 1.0, 5.0, 20.0] {
            assert!((chi_square_cdf(x, 2.0) - (1.0 - (-x / 2.0f64).exp())).abs() < 1e-14);
        }
        assert!((chi_square_quantile(0.95, 2.0) - (-2.0 * 0.05f64.ln())).abs() < 1e-9);
        assert!((chi_square_quantile(0.95, 1.0) - 3.841_458_820_694_124).abs() < 1e-8);
        assert!((chi_square_quantile(0.99, 10.0) - 23.209_251_158_954_36).abs() < 1e-8);
    }

    #[test]
    fn point_mass_against_degenerate_law() {
        let d: EmpiricalDist = std::iter::repeat_n(0, 50).collect();
        assert!(chi_square_geometric(&d, 0.0, 0.01).unwrap().pass);
        let mut d2 = d.clone();
        d2.add(1);
        assert!(!chi_square_geometric(&d2, 0.0, 0.01).unwrap().pass);
    }

    #[test]
    fn chi_square_needs_two_cells() {
        let d: EmpiricalDist = [0, 1, 0].into_iter().collect();
        assert!(matches!(chi_square_geometric(&d, 0.5, 0.01), Err(Error::InsufficientData(_))));
        assert!(chi_square_geometric(&EmpiricalDist::new(), 0.5, 0.01).is_err());
    }

    #[test]
    fn chi_square_power() {
        let mut rng = rng_from_seed(12);
        let law = GeometricLaw::new(0.5).unwrap();
        let d: EmpiricalDist = (0..10_000).map(|_| law.sample(&mut rng)).collect();
        assert!(chi_square_geometric(&d, 0.5, 0.01).unwrap().pass);
        assert!(!chi_square_geometric(&d, 0.8, 0.01).unwrap().pass);
    }

    #[test]
    fn chi_square_null_pass_rate() {
        let alpha = 0.05;
        let law = GeometricLaw::new(0.4).unwrap();
        let trials = 200;
        let passes = (0..trials)
            .filter(|&s| {
                let mut rng = rng_from_seed(1000 + s);
                let d: EmpiricalDist = (0..2_000).map(|_| law.sample(&mut rng)).collect();
                chi_square_geometric(&d, 0.4, alpha).unwrap().pass
            })
            .count();
        assert!(passes as f64 >= (1.0 - 2.0 * alpha) * trials as f64, "passes {passes}");
    }

    #[test]
    fn poisson_check_on_synthetic_streams() {
        let mut rng = rng_from_seed(5);
        let mut t = 0.0;
        let mut times = Vec::new();
        while t < 2_000.0 {
            let e: f64 = rng.sample(Exp1);
            t += e;
            times.push(t);
        }
        let c = poisson_check_times(&times, (0.0, 2_000.0), PoissonCheckOptions::default()).unwrap();
        assert!(c.pass(), "{:?}", c);
        assert!((c.rate - 1.0).abs() < 0.1);

        let regular: Vec<f64> = (1..=200).map(|k| k as f64 * 0.25).collect();
        let c = poisson_check_times(&regular, (0.0, 50.0), PoissonCheckOptions::default()).unwrap();
        assert!(c.dispersion_index < 0.05);
        assert!(!c.pass());
    }

    #[test]
    fn poisson_check_needs_twenty_events() {
        let times: Vec<f64> = (1..=19).map(f64::from).collect();
        assert!(matches!(
            poisson_check_times(&times, (0.0, 20.0), PoissonCheckOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn sup_deviation_examples() {
        let a = GridPath::from_fn(0.1, 1.0, |t| t * t).unwrap();
        assert_eq!(sup_deviation(&a, &a).unwrap(), 0.0);
        let b = a.map(|v| v - 0.3);
        assert!((sup_deviation(&a, &b).unwrap() - 0.3).abs() < 1e-15);
        let c = GridPath::from_fn(0.1, 2.0, |t| t).unwrap();
        assert!(sup_deviation(&a, &c).is_err());
    }

    #[test]
    fn mean_ci_examples() {
        assert_eq!(mean_ci(&[2.0, 2.0, 2.0]).unwrap(), (2.0, 0.0));
        let (m, hw) = mean_ci(&[0.0, 1.0]).unwrap();
        assert_eq!(m, 0.5);
        assert!((hw - 1.96 * 0.5f64.sqrt() / 2f64.sqrt()).abs() < 1e-15);
        assert!(mean_ci(&[1.0]).is_err());
        let mut rng = rng_from_seed(8);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let (m, hw) = mean_ci(&xs).unwrap();
        assert!(m.abs() < 0.03);
        assert!((hw - 1.96 / 100.0).abs() < 0.002);
    }

    #[test]
    fn report_formats() {
        let r = TestReport::new("x", 0.5, 1.0, "demo");
        assert!(r.pass);
        assert_eq!(r.csv_row(), "x,0.5,1,true");
        assert!(r.to_string().starts_with("[PASS] x:"));
        let all = TestReport::all("both", &[r.clone(), TestReport::new("y", 2.0, 1.0, "")]);
        assert!(!all.pass);
    }
}
