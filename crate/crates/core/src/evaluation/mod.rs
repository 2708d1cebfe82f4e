//! Exact and Monte Carlo evaluation of group error notions.

pub mod covering;
pub mod lower_bound;
pub mod metrics;
pub mod task;
pub mod transductive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use covering::{greedy_l1_cover, mg_covering_number, CoverReport, CoveringReport};
pub use lower_bound::{
    build_lower_bound_instance, lemma24_tail, lower_bound_failure_prob, LowerBoundInstance,
    LowerBoundReport, TailReport,
};
pub use metrics::{
    pac_audit, pac_bound, pac_from_trials, prediction_error, trial_errors, sup_group_error, Bound, ErrorEntry, ErrorReport, EvalMode,
    EXACT_BUDGET,
};
pub use task::{DiscreteTask, Target};
pub use transductive::{
    agnostic_transductive_error_exact, transductive_error_exact, AgnosticTransductiveReport,
    TransductiveReport,
};

/// Independent stream `trial` of the master seed.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// 99% two-sided normal quantile.
pub const Z99: f64 = 2.5758293035489;

/// Mean and 99% normal half-width of a sample of values.
pub fn mean_and_half_width(values: &[f64]) -> (f64, f64) {
    let t = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / t;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
    (mean, Z99 * (var / t).sqrt())
}

/// All permutations of 0..n in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(permutations(3)[1], vec![0, 2, 1]);
    }

    #[test]
    fn streams_differ_and_replay() {
        let a = trial_rng(5, 0).next_u64();
        let b = trial_rng(5, 1).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, trial_rng(5, 0).next_u64());
    }

    #[test]
    fn half_width_of_constant_is_zero() {
        let (m, h) = mean_and_half_width(&[0.5; 10]);
        assert_eq!(m, 0.5);
        assert_eq!(h, 0.0);
    }
}
