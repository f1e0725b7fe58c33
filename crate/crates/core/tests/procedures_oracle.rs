mod common;

use common::{all_vectors, compliant_oracle, step_down_oracle, step_up_oracle};
use dpfdr::dp::{peel, private_min, Noise};
use dpfdr::procedures::{bhq_critical_values, private_bhq_on_logs};
use dpfdr::pvalue::{binomial_pvalue, log_truncate, TestFamily};
use dpfdr::{
    bhq_step_down, bhq_step_up, calibrate, is_compliant, private_bhq, CutoffSchedule, Dataset, Domain,
    NoiseMode, SensitivityKind, SensitivityProfile, StreamSeed,
};
use proptest::prelude::*;

fn pvalues(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    // Mixes continuous values with a few repeated atoms so ties occur.
    let atom = prop_oneof![
        3 => 0.0f64..=1.0,
        1 => prop::sample::select(vec![0.0, 0.001, 0.01, 0.02, 0.05, 1.0]),
    ];
    prop::collection::vec(atom, 0..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn step_up_matches_definition(p in pvalues(40), q in 0.001f64..0.999) {
        let got = bhq_step_up(&p, q).unwrap();
        prop_assert_eq!(got.indices().to_vec(), step_up_oracle(&p, q));
        prop_assert!(compliant_oracle(&got, &p, q));
        prop_assert!(is_compliant(&got, &p, &bhq_critical_values(q, p.len())));
    }

    #[test]
    fn step_down_matches_definition(p in pvalues(40), q in 0.001f64..0.999) {
        let got = bhq_step_down(&p, q).unwrap();
        prop_assert_eq!(got.indices().to_vec(), step_down_oracle(&p, q));
        prop_assert!(compliant_oracle(&got, &p, q));
    }

    #[test]
    fn step_down_is_a_subset_of_step_up(p in pvalues(60), q in 0.001f64..0.999) {
        let up = bhq_step_up(&p, q).unwrap();
        let down = bhq_step_down(&p, q).unwrap();
        prop_assert!(down.count() <= up.count());
        prop_assert!(down.indices().iter().all(|&i| up.contains(i)));
    }

    #[test]
    fn permutation_relabels_rejections(
        p in pvalues(30),
        q in 0.01f64..0.5,
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..p.len()).collect();
        perm.shuffle(&mut StreamSeed::new(seed).rng());
        // permuted[k] = p[perm[k]]
        let permuted: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        for step in [bhq_step_up, bhq_step_down] {
            let base = step(&p, q).unwrap();
            let moved = step(&permuted, q).unwrap();
            let mut mapped: Vec<usize> = moved.indices().iter().map(|&k| perm[k]).collect();
            mapped.sort_unstable();
            prop_assert_eq!(mapped.as_slice(), base.indices());
        }
    }

    #[test]
    fn noise_free_private_bhq_is_step_up(p in prop::collection::vec(1e-12f64..=1.0, 1..40), q in 0.01f64..0.5) {
        let m = p.len();
        let logs: Vec<f64> = p.iter().map(|&x| log_truncate(x, 0.0)).collect();
        let cutoffs = CutoffSchedule::log_bhq(q, m, m).unwrap();
        let mut rng = StreamSeed::new(1).rng();
        let out = private_bhq_on_logs(&logs, m, Noise::Disabled, &cutoffs, &mut rng).unwrap();
        prop_assert_eq!(out.rejections.indices().to_vec(), bhq_step_up(&p, q).unwrap().indices().to_vec());
    }

    #[test]
    fn private_bhq_rejections_come_from_the_peel(
        p in prop::collection::vec(1e-9f64..=1.0, 12..40),
        seed in any::<u64>(),
    ) {
        let m = p.len();
        let logs: Vec<f64> = p.iter().map(|&x| log_truncate(x, 1e-6)).collect();
        let budget = calibrate(0.5, 0.1, 10, 0.05).unwrap();
        let cutoffs = dpfdr::gamma_cutoffs(0.1, m, &budget).unwrap();
        let mut rng = StreamSeed::new(seed).rng();
        let out = private_bhq_on_logs(&logs, 10, budget.noise(), &cutoffs, &mut rng).unwrap();
        prop_assert_eq!(out.candidates.len(), 10);
        prop_assert!(out.rejections.count() <= 10);
        for &i in out.rejections.indices() {
            let c = out.candidates.iter().find(|c| c.index == i).unwrap();
            prop_assert!(c.noisy_value <= out.threshold);
        }
    }
}

#[test]
fn exhaustive_quantized_instances() {
    let grid = [0.0, 0.005, 0.01, 0.02, 0.025, 0.05, 0.1, 0.3, 1.0];
    let mut checked = 0;
    for m in 1..=6 {
        for p in all_vectors(&grid, m) {
            for q in [0.05, 0.1, 0.3] {
                let up = bhq_step_up(&p, q).unwrap();
                let down = bhq_step_down(&p, q).unwrap();
                assert_eq!(up.indices(), step_up_oracle(&p, q).as_slice(), "{p:?} q={q}");
                assert_eq!(down.indices(), step_down_oracle(&p, q).as_slice(), "{p:?} q={q}");
                assert!(compliant_oracle(&up, &p, q) && compliant_oracle(&down, &p, q));
                checked += 1;
            }
        }
    }
    assert!(checked > 1_000_000);
}

#[test]
fn noise_free_private_min_is_first_live_argmin() {
    let grid = [-1.0, 0.0, 0.5, 2.0];
    let mut rng = StreamSeed::new(0).rng();
    for len in 1..=6 {
        for values in all_vectors(&grid, len) {
            for mask_bits in 0u32..(1 << len) {
                let removed: Vec<bool> = (0..len).map(|i| mask_bits >> i & 1 == 1).collect();
                let got = private_min(&values, &removed, 1.0, None, &mut rng);
                let live: Vec<usize> = (0..len).filter(|&i| !removed[i]).collect();
                if live.is_empty() {
                    assert!(got.is_err());
                    continue;
                }
                let min = live.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
                let want = *live.iter().find(|&&i| values[i] == min).unwrap();
                let got = got.unwrap();
                assert_eq!(got.index, want);
                assert_eq!(got.noisy_value, values[want]);
            }
        }
    }
}

#[test]
fn noisy_peel_never_repeats_an_index() {
    let values: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).cos()).collect();
    let seed = StreamSeed::new(12);
    for run in 0..10_000u64 {
        let mut rng = seed.child(run).rng();
        let out = peel(&values, 15, Noise::Laplace { scale: 3.0 }, &mut rng).unwrap();
        let mut idx: Vec<usize> = out.iter().map(|c| c.index).collect();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 15);
    }
}

#[test]
fn private_bhq_without_noise_matches_truncated_step_up() {
    // 40 rows, 12 columns with a range of column sums.
    let (n, m) = (40usize, 12usize);
    let sums = [40, 38, 35, 33, 31, 30, 28, 25, 22, 20, 15, 5];
    let mut values = vec![0.0; n * m];
    for (j, &s) in sums.iter().enumerate() {
        for i in 0..s {
            values[i * m + j] = 1.0;
        }
    }
    let data = Dataset::new(n, m, values, Domain::Binary).unwrap();
    let p: Vec<f64> = (0..m).map(|j| binomial_pvalue(&data, j).unwrap()).collect();
    let budget = calibrate(0.5, 0.1, m, 0.01).unwrap();
    let profile = SensitivityProfile { eta: 0.01, nu: 0.0, kind: SensitivityKind::Exact };
    let mut rng = StreamSeed::new(0).rng();
    let out = private_bhq(&data, TestFamily::Binomial, &profile, 0.1, &budget, NoiseMode::DisabledForTesting, &mut rng)
        .unwrap();
    // Without noise PrivateBHq is step-up against q_j · (6m'/q)^{-λ}.
    let shrink = (6.0 * m as f64 / 0.1f64).powf(-budget.lambda);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let r = (1..=m).rev().find(|&j| p[order[j - 1]] <= 0.1 * j as f64 / m as f64 * shrink).unwrap_or(0);
    let mut want = order[..r].to_vec();
    want.sort_unstable();
    assert_eq!(out.rejections.indices(), want.as_slice());
    assert!(r > 0);
}
