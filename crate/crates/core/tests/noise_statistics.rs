use iongate::noise::{ou_from_t2, ou_step, sample_path, OUParams, OUTrajectoryState};
use statrs::distribution::{ContinuousCDF, Normal};

const SAMPLES: usize = 100_000;
/// Kolmogorov-Smirnov critical value at significance 1e-3.
const KS_CRIT: f64 = 1.95;

fn params() -> OUParams {
    ou_from_t2(5e-3, 0.1, 11).unwrap()
}

fn ks_statistic(mut xs: Vec<f64>) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn stationary_draws_are_normal_with_the_stationary_variance() {
    let p = params();
    let sd = p.stationary_variance().sqrt();
    let xs: Vec<f64> = (0..SAMPLES as u64)
        .map(|s| OUTrajectoryState::stationary(&p, s).value / sd)
        .collect();
    let d = ks_statistic(xs);
    assert!(d * (SAMPLES as f64).sqrt() < KS_CRIT, "KS statistic {d}");
}

#[test]
fn lagged_pairs_follow_the_exponential_autocorrelation() {
    let p = params();
    let var = p.stationary_variance();
    for lag in [0.25 * p.tau, p.tau, 2.0 * p.tau] {
        let rho_true = p.autocorrelation(lag) / var;
        let sum: f64 = (0..SAMPLES as u64)
            .map(|s| {
                let path = sample_path(&p, s, lag, 2).unwrap();
                path[0] * path[1]
            })
            .sum();
        let rho = sum / SAMPLES as f64 / var;
        let se = ((1.0 + rho_true * rho_true) / SAMPLES as f64).sqrt();
        assert!((rho - rho_true).abs() < 5.0 * se, "lag {lag}: {rho} vs {rho_true}");
    }
}

#[test]
fn two_half_steps_have_the_law_of_one_full_step() {
    let p = params();
    let dt = 0.7 * p.tau;
    let start = 2.0 * p.stationary_variance().sqrt();
    let mean = start * (-dt / p.tau).exp();
    let sd = (p.stationary_variance() * (1.0 - (-2.0 * dt / p.tau).exp())).sqrt();
    let residuals = |halves: bool| -> Vec<f64> {
        (0..SAMPLES as u64)
            .map(|s| {
                let mut st = OUTrajectoryState::from_value(&p, s, start);
                if halves {
                    ou_step(&mut st, &p, 0.5 * dt).unwrap();
                    ou_step(&mut st, &p, 0.5 * dt).unwrap();
                } else {
                    ou_step(&mut st, &p, dt).unwrap();
                }
                (st.value - mean) / sd
            })
            .collect()
    };
    for halves in [false, true] {
        let d = ks_statistic(residuals(halves));
        assert!(d * (SAMPLES as f64).sqrt() < KS_CRIT, "halves={halves}: KS statistic {d}");
    }
}

#[test]
fn paths_are_bit_identical_for_equal_seeds() {
    let p = params();
    let a = sample_path(&p, 3, 1e-6, 1000).unwrap();
    let b = sample_path(&p, 3, 1e-6, 1000).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let other = OUParams { seed: 12, ..p };
    assert_ne!(a, sample_path(&other, 3, 1e-6, 1000).unwrap());
}
