//! The hard instance family for the sup-group lower bound and the geometric tail check.

use num_traits::{ToPrimitive, Zero};
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::task::DiscreteTask;
use super::{mean_and_half_width, trial_rng};
use crate::concept::{vc_restricted_sup, Behavior, ConceptClass, GroupFamily, LabeledSample};
use crate::error::{Error, Result};
use crate::learner::Predictor;
use crate::rational::{self, Rational};

/// Largest I for which every labelling b is tried.
pub const EXHAUSTIVE_LABELLINGS: usize = 10;

/// Pilot trials used to pick an adversarial labelling on larger instances.
const PILOT_TRIALS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundInstance {
    pub points: usize,
    pub epsilon: Rational,
    pub masses: Vec<Rational>,
    pub class: ConceptClass,
    pub groups: GroupFamily,
    pub d: usize,
    /// ln(I/2)/(2ε).
    pub n2: f64,
    /// (d-1)/(4ε).
    pub n1: f64,
}

impl LowerBoundInstance {
    /// The task labelled by `b`.
    pub fn task(&self, b: &Behavior) -> Result<DiscreteTask> {
        DiscreteTask::realizable(self.masses.clone(), *b, &self.class, &self.groups)
    }

    pub fn max_rate(&self) -> f64 {
        self.n1.max(self.n2)
    }
}

/// I points, singleton groups, the full cube as class; mass 1-2ε(I-1) on the
/// first point and 2ε on each other.
pub fn build_lower_bound_instance(points: usize, epsilon: Rational) -> Result<LowerBoundInstance> {
    if !(2..=20).contains(&points) {
        return Err(Error::InvalidParameter(format!("instance needs 2..=20 points, got {points}")));
    }
    let eps0 = &epsilon * rational::int(2);
    let rest = &eps0 * rational::int(points as i64 - 1);
    if epsilon <= Rational::zero() || rest >= rational::int(1) || epsilon >= rational::ratio(1, 2) {
        return Err(Error::EpsilonOutOfRange(format!(
            "need 0 < epsilon < 1/2 and 2*epsilon*(I-1) < 1, got epsilon = {}",
            rational::format(&epsilon)
        )));
    }
    let mut masses = vec![rational::int(1) - rest];
    masses.extend(std::iter::repeat_n(eps0, points - 1));
    let class = ConceptClass::full_cube(points)?;
    let groups = GroupFamily::singletons(points)?;
    let d = vc_restricted_sup(&class, &groups);
    let ef = rational::to_f64(&epsilon);
    Ok(LowerBoundInstance {
        points,
        epsilon,
        masses,
        class,
        groups,
        d,
        n2: (points as f64 / 2.0).ln() / (2.0 * ef),
        n1: (d as f64 - 1.0) / (4.0 * ef),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub n: usize,
    pub trials: usize,
    /// The labelling with the largest failure frequency.
    pub worst: Behavior,
    /// Fraction of trials with sup_g err_g >= ε under `worst`.
    pub probability: f64,
    pub half_width: f64,
    pub labellings: usize,
}

/// Estimates max over b of P(sup_g err_g(A(S)) >= ε) for samples of size n.
/// Point sequences are shared across labellings so the comparison is paired.
pub fn lower_bound_failure_prob(
    instance: &LowerBoundInstance,
    predictor: &dyn Predictor,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<LowerBoundReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let i = instance.points;
    let labellings: Vec<Behavior> = if i <= EXHAUSTIVE_LABELLINGS {
        (0..1u64 << i).map(|b| Behavior::new(b, i)).collect()
    } else {
        let adv = adversarial_labelling(instance, predictor, n, trials.min(PILOT_TRIALS), seed)?;
        let mut v = vec![adv, Behavior::zeros(i), Behavior::ones(i)];
        v.sort();
        v.dedup();
        v
    };
    let tasks: Vec<DiscreteTask> = labellings.iter().map(|b| instance.task(b)).collect::<Result<_>>()?;
    let eps = &instance.epsilon;
    // fails[t][b]
    let fails: Vec<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<bool>> {
            let mut rng = trial_rng(seed, t as u64);
            let pts: Vec<usize> = (0..n).map(|_| tasks[0].draw_point(&mut rng)).collect();
            labellings
                .iter()
                .zip(&tasks)
                .map(|(b, task)| {
                    let s = LabeledSample::labeled_by(b, &pts)?;
                    for g in instance.groups.groups() {
                        if task.group_error(predictor, &s, g)? >= *eps {
                            return Ok(true);
                        }
                    }
                    Ok(false)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let (best, _) = (0..labellings.len())
        .map(|k| (k, fails.iter().filter(|row| row[k]).count()))
        .max_by_key(|&(k, c)| (c, std::cmp::Reverse(k)))
        .unwrap();
    let xs: Vec<f64> = fails.iter().map(|row| if row[best] { 1.0 } else { 0.0 }).collect();
    let (p, hw) = mean_and_half_width(&xs);
    Ok(LowerBoundReport { n, trials, worst: labellings[best], probability: p, half_width: hw, labellings: labellings.len() })
}

/// b_i opposite the learner's average answer at x_i over pilot samples that miss x_i.
fn adversarial_labelling(
    instance: &LowerBoundInstance,
    predictor: &dyn Predictor,
    n: usize,
    pilot: usize,
    seed: u64,
) -> Result<Behavior> {
    let i = instance.points;
    let zeros = Behavior::zeros(i);
    let task = instance.task(&zeros)?;
    let mut sum = vec![0.0f64; i];
    let mut seen = vec![0usize; i];
    for t in 0..pilot {
        let mut rng = trial_rng(seed ^ 0x5eed, t as u64);
        let pts: Vec<usize> = (0..n).map(|_| task.draw_point(&mut rng)).collect();
        let s = LabeledSample::labeled_by(&zeros, &pts)?;
        for x in 0..i {
            if !pts.contains(&x) {
                sum[x] += rational::to_f64(&predictor.prob_one(&s, x)?);
                seen[x] += 1;
            }
        }
    }
    Ok(Behavior::from_points((0..i).filter(|&x| seen[x] > 0 && sum[x] / (seen[x] as f64) < 0.5), i))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub k: usize,
    pub delta: f64,
    pub t: f64,
    pub threshold: f64,
    pub estimate: f64,
    pub half_width: f64,
    /// e^{-t}.
    pub bound: f64,
}

/// Monte Carlo estimate of P(sum_i G_i <= (k ln(k+1) - k t)/δ) with
/// G_i ~ Geometric(δ(1 - (i-1)/k)) counted in trials.
pub fn lemma24_tail(k: usize, delta: f64, t: f64, trials: usize, seed: u64) -> Result<TailReport> {
    if k == 0 || !(delta > 0.0 && delta <= 1.0) || t < 0.0 || trials == 0 {
        return Err(Error::InvalidParameter("need k >= 1, delta in (0,1], t >= 0, trials >= 1".into()));
    }
    let kf = k as f64;
    let threshold = (kf * (kf + 1.0).ln() - kf * t) / delta;
    let dists: Vec<Geometric> = (1..=k)
        .map(|i| Geometric::new(delta * (1.0 - (i as f64 - 1.0) / kf)))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let hits: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|tr| {
            let mut rng = trial_rng(seed, tr as u64);
            let s: f64 = dists.iter().map(|g| (g.sample(&mut rng) + 1).to_f64().unwrap()).sum();
            if s <= threshold { 1.0 } else { 0.0 }
        })
        .collect();
    let (estimate, half_width) = mean_and_half_width(&hits);
    Ok(TailReport { k, delta, t, threshold, estimate, half_width, bound: (-t).exp() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{ErmLearner, MgOigLearner};
    use crate::matching::CapacityMode;

    #[test]
    fn instance_shape() {
        let inst = build_lower_bound_instance(4, rational::ratio(1, 10)).unwrap();
        assert_eq!(inst.masses[0], rational::ratio(2, 5));
        assert_eq!(inst.masses[3], rational::ratio(1, 5));
        assert_eq!(inst.d, 1);
        assert_eq!(inst.n1, 0.0);
        assert!((inst.n2 - 2f64.ln() / 0.2).abs() < 1e-12);
        let two = build_lower_bound_instance(2, rational::ratio(1, 10)).unwrap();
        assert_eq!(two.n2, 0.0);
        assert!(matches!(build_lower_bound_instance(4, rational::ratio(1, 5)), Err(Error::EpsilonOutOfRange(_))));
        assert!(build_lower_bound_instance(4, rational::int(0)).is_err());
    }

    #[test]
    fn small_samples_fail_often() {
        let inst = build_lower_bound_instance(4, rational::ratio(1, 10)).unwrap();
        let learner = MgOigLearner::new(inst.class.clone(), inst.groups.clone(), CapacityMode::Exact).unwrap();
        let r = lower_bound_failure_prob(&inst, &learner, 2, 400, 1).unwrap();
        assert_eq!(r.labellings, 16);
        assert!(r.probability > 0.5, "{r:?}");
        let erm = ErmLearner::new(inst.class.clone(), inst.groups.clone()).unwrap();
        let r2 = lower_bound_failure_prob(&inst, &erm, 2, 400, 1).unwrap();
        assert!(r2.probability > 0.5);
    }

    #[test]
    fn large_instances_use_the_adversarial_labelling() {
        let inst = build_lower_bound_instance(11, rational::ratio(1, 25)).unwrap();
        let erm = ErmLearner::new(inst.class.clone(), inst.groups.clone()).unwrap();
        let r = lower_bound_failure_prob(&inst, &erm, 5, 100, 2).unwrap();
        assert!(r.labellings <= 3);
        assert_eq!(r.worst, Behavior::ones(11));
        assert_eq!(r.probability, 1.0);
        let none = lower_bound_failure_prob(&inst, &erm, 0, 10, 2).unwrap();
        assert_eq!(none.probability, 1.0);
    }

    #[test]
    fn tail_edge_cases() {
        let r = lemma24_tail(1, 0.5, 2f64.ln(), 1000, 3).unwrap();
        assert_eq!(r.threshold, 0.0);
        assert_eq!(r.estimate, 0.0);
        let r = lemma24_tail(5, 0.3, 0.5, 5000, 3).unwrap();
        assert!(r.estimate <= r.bound + r.half_width);
        assert!(lemma24_tail(0, 0.5, 1.0, 10, 0).is_err());
    }
}
