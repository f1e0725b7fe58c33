use dpfdr::pvalue::{
    binomial_pvalue, ln_binomial_tail, sensitivity_scan_binomial, sensitivity_scan_truncexp, truncexp_pvalue,
    truncexp_tail,
};
use dpfdr::rng::open_unit;
use dpfdr::{Dataset, Domain, StreamSeed};
use rand::Rng;

/// `P(Bin(n, 1/2) ≥ t)` by exact integer counting, `n ≤ 60`.
fn exact_binomial_tail(n: u32, t: u32) -> f64 {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![1u128; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    let hits: u128 = row[t as usize..].iter().sum();
    hits as f64 / 2f64.powi(n as i32)
}

#[test]
fn binomial_tail_matches_exact_counts() {
    for n in 1..=60u32 {
        for t in 0..=n {
            let exact = exact_binomial_tail(n, t);
            let got = ln_binomial_tail(n as u64, t as u64).exp();
            assert!((got / exact - 1.0).abs() < 1e-12, "n={n} t={t}: {got} vs {exact}");
        }
    }
}

#[test]
fn binomial_sensitivity_covers_every_adjacent_pair() {
    // Enumerate all binary columns for small n and every single-row flip;
    // for larger n, every column sum and its neighbours (a flip moves the
    // sum by one).
    for nu in [1e-3, 1e-6] {
        for n in 1..=20u32 {
            let prof = sensitivity_scan_binomial(n as u64, nu).unwrap();
            let mut worst = 0.0f64;
            for t in 0..n {
                let (a, b) = (exact_binomial_tail(n, t), exact_binomial_tail(n, t + 1));
                assert!(prof.admits(a, b) && prof.admits(b, a), "n={n} t={t} nu={nu}");
                if !(a <= nu && b <= nu) {
                    worst = worst.max((a / b).ln());
                }
            }
            // The scan is tight: no smaller η would do.
            assert!((prof.eta - worst).abs() <= 1e-12 * worst.max(1.0), "n={n} nu={nu}");
        }
        for n in 1..=12usize {
            let prof = sensitivity_scan_binomial(n as u64, nu).unwrap();
            for bits in 0u32..(1 << n) {
                let col: Vec<f64> = (0..n).map(|i| f64::from(bits >> i & 1)).collect();
                let d = Dataset::new(n, 1, col.clone(), Domain::Binary).unwrap();
                let p = binomial_pvalue(&d, 0).unwrap();
                for (flip, &bit) in col.iter().enumerate() {
                    let row = [1.0 - bit];
                    let d2 = d.with_row(flip, &row).unwrap();
                    assert!(d.is_adjacent(&d2));
                    assert!(prof.admits(p, binomial_pvalue(&d2, 0).unwrap()));
                }
            }
        }
    }
}

/// Inverse-CDF draw from `e^{-x}/(1 − e^{-A})` on `[0, A]`.
fn truncexp_draw<R: Rng>(upper: f64, rng: &mut R) -> f64 {
    -(-open_unit(rng) * -(-upper).exp_m1()).ln_1p()
}

/// `t` with `truncexp_tail(n, A, t) ≈ target`, by bisection.
fn tail_point(n: u64, upper: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, n as f64 * upper);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if truncexp_tail(n, upper, mid).unwrap() > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn truncexp_tail_against_plain_monte_carlo() {
    let (n, upper) = (50u64, 3.0);
    let t = tail_point(n, upper, 0.05);
    let draws = 10_000_000u64;
    let mut rng = StreamSeed::new(0x7a11).rng();
    let mut hits = 0u64;
    for _ in 0..draws {
        let s: f64 = (0..n).map(|_| truncexp_draw(upper, &mut rng)).sum();
        if s >= t {
            hits += 1;
        }
    }
    let mc = hits as f64 / draws as f64;
    let approx = truncexp_tail(n, upper, t).unwrap();
    assert!((approx / mc - 1.0).abs() < 0.01, "saddlepoint {approx} vs Monte Carlo {mc}");
}

/// One-observation cumulant generating function of the truncated
/// exponential, `ln E e^{θX}`, written directly from the integral.
fn cgf(theta: f64, upper: f64) -> f64 {
    let s = theta - 1.0;
    let num = if s.abs() < 1e-12 { upper } else { (s * upper).exp_m1() / s };
    num.ln() - (-(-upper).exp_m1()).ln()
}

/// Mean of the tilted law, by central differences on `cgf`.
fn tilted_mean(theta: f64, upper: f64) -> f64 {
    let h = 1e-6;
    (cgf(theta + h, upper) - cgf(theta - h, upper)) / (2.0 * h)
}

#[test]
fn truncexp_tail_against_importance_sampling() {
    // Tilt each observation to density ∝ e^{(θ−1)x} so that the sum is
    // centred at t, then reweight by exp(−θS + nK(θ)).
    let (n, upper) = (50u64, 3.0);
    let seed = StreamSeed::new(0x15);
    for (g, target) in [1e-2, 1e-3, 1e-4, 1e-6, 1e-8].into_iter().enumerate() {
        let t = tail_point(n, upper, target);
        let (mut lo, mut hi) = (-50.0, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if tilted_mean(mid, upper) < t / n as f64 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        let s_rate = theta - 1.0;
        let k = cgf(theta, upper);
        let mut rng = seed.child(g as u64).rng();
        let draws = 200_000;
        let mut weights = Vec::with_capacity(draws);
        for _ in 0..draws {
            let mut sum = 0.0;
            for _ in 0..n {
                // inverse CDF of density ∝ e^{s x} on [0, A]
                let u = open_unit(&mut rng);
                let x = if s_rate.abs() < 1e-12 {
                    u * upper
                } else {
                    (u * (s_rate * upper).exp_m1()).ln_1p() / s_rate
                };
                sum += x;
            }
            weights.push(if sum >= t { (-theta * sum + n as f64 * k).exp() } else { 0.0 });
        }
        let mean = weights.iter().sum::<f64>() / draws as f64;
        let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        let approx = truncexp_tail(n, upper, t).unwrap();
        assert!(
            (approx - mean).abs() <= 0.01 * mean + 4.0 * se,
            "target {target}: saddlepoint {approx} vs importance sampling {mean} ± {se}"
        );
    }
}

#[test]
fn truncexp_pvalue_reads_the_column_sum() {
    let d = Dataset::new(3, 2, vec![0.5, 2.0, 1.0, 2.5, 0.25, 3.0], Domain::BoundedReal { upper: 3.0 }).unwrap();
    assert_eq!(truncexp_pvalue(&d, 0).unwrap(), truncexp_tail(3, 3.0, 1.75).unwrap());
    assert_eq!(truncexp_pvalue(&d, 1).unwrap(), truncexp_tail(3, 3.0, 7.5).unwrap());
}

#[test]
fn truncexp_sensitivity_admits_grid_neighbours() {
    let (n, upper, nu) = (30u64, 2.0, 1e-4);
    let prof = sensitivity_scan_truncexp(n, upper, nu).unwrap();
    assert!(prof.eta > 0.0 && prof.eta.is_finite());
    // Moving one observation across its whole range shifts the sum by A.
    let steps = 37;
    for i in 0..steps {
        let t = (n as f64 - 1.0) * upper * i as f64 / (steps - 1) as f64;
        let a = truncexp_tail(n, upper, t).unwrap();
        let b = truncexp_tail(n, upper, t + upper).unwrap();
        assert!(prof.admits(a, b), "t={t}: {a} vs {b}, eta={}", prof.eta);
    }
}
