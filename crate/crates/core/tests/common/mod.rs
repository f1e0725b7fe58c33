#![allow(dead_code)]

use dpfdr::RejectionSet;

/// `#{i : p_i ≤ c}`.
fn count_at_most(p: &[f64], c: f64) -> usize {
    p.iter().filter(|&&x| x <= c).count()
}

fn crit(q: f64, r: usize, m: usize) -> f64 {
    q * r as f64 / m as f64
}

/// Step-up straight from the definition, without sorting:
/// `R = max{r : #{p_i ≤ q r/m} ≥ r}`, rejecting every `p_i ≤ q R/m`.
pub fn step_up_oracle(p: &[f64], q: f64) -> Vec<usize> {
    let m = p.len();
    let r = (1..=m).rev().find(|&r| count_at_most(p, crit(q, r, m)) >= r).unwrap_or(0);
    if r == 0 {
        return vec![];
    }
    (0..m).filter(|&i| p[i] <= crit(q, r, m)).collect()
}

/// Step-down from the definition: the largest `R` such that every
/// `s ≤ R` has `#{p_i ≤ q s/m} ≥ s`.
pub fn step_down_oracle(p: &[f64], q: f64) -> Vec<usize> {
    let m = p.len();
    let mut r = 0;
    while r < m && count_at_most(p, crit(q, r + 1, m)) > r {
        r += 1;
    }
    if r == 0 {
        return vec![];
    }
    (0..m).filter(|&i| p[i] <= crit(q, r, m)).collect()
}

/// Compliance from scratch: `max_{i ∈ R} p_i ≤ q R / m`.
pub fn compliant_oracle(rej: &RejectionSet, p: &[f64], q: f64) -> bool {
    let r = rej.count();
    r == 0 || rej.indices().iter().all(|&i| p[i] <= crit(q, r, p.len()))
}

/// Every vector of length `m` over `grid`, in lexicographic order.
pub fn all_vectors(grid: &[f64], m: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|v| {
                grid.iter().map(move |&g| {
                    let mut w = v.clone();
                    w.push(g);
                    w
                })
            })
            .collect();
    }
    out
}
