use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma;

use dupnet::stats::{chi_square_cdf, chi_square_quantile, gamma_p, gamma_q, ks_critical_value, ln_gamma};

#[test]
fn ln_gamma_against_statrs() {
    for x in [0.1, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 55.5, 170.0] {
        let want = gamma::ln_gamma(x);
        assert!((ln_gamma(x) - want).abs() <= 1e-10 * want.abs().max(1.0), "x = {x}");
    }
}

#[test]
fn incomplete_gamma_against_statrs() {
    for a in [0.5, 1.0, 2.5, 7.0, 30.0] {
        for x in [0.01, 0.3, 1.0, 2.5, 7.0, 20.0, 60.0] {
            let p = gamma::gamma_lr(a, x);
            assert!((gamma_p(a, x) - p).abs() < 1e-12, "P({a}, {x})");
            assert!((gamma_q(a, x) - (1.0 - p)).abs() < 1e-12, "Q({a}, {x})");
        }
    }
}

#[test]
fn chi_square_against_statrs() {
    for dof in [1.0, 2.0, 5.0, 8.0, 20.0, 75.0] {
        let law = ChiSquared::new(dof).unwrap();
        for p in [0.01, 0.5, 0.95, 0.99] {
            let q = chi_square_quantile(p, dof);
            let want = law.inverse_cdf(p);
            assert!((q - want).abs() <= 1e-8 * want.max(1.0), "dof {dof}, p {p}: {q} vs {want}");
        }
        for x in [0.5, 3.0, 10.0, 40.0] {
            assert!((chi_square_cdf(x, dof) - law.cdf(x)).abs() < 1e-12);
        }
    }
}

#[test]
fn tabulated_quantiles() {
    // 0.99 quantiles, standard tables
    for (dof, q) in [(1.0, 6.635), (4.0, 13.277), (8.0, 20.090), (10.0, 23.209)] {
        assert!((chi_square_quantile(0.99, dof) - q).abs() < 1e-3);
    }
}

#[test]
fn ks_critical_values() {
    // asymptotic 1% value is 1.628 / sqrt(n)
    assert!((ks_critical_value(100, 0.01) - 0.1628).abs() < 1e-3);
    assert!((ks_critical_value(400, 0.05) - 1.358 / 20.0).abs() < 1e-3);
}
