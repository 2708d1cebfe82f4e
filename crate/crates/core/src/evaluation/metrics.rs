//! Expected group errors, sup-group errors and high-probability audits.

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::task::DiscreteTask;
use super::{mean_and_half_width, trial_rng};
use crate::concept::{vc_restricted, ConceptClass, GroupFamily, LabeledSample};
use crate::error::{Error, Result};
use crate::learner::Predictor;
use crate::rational::{self, Rational};

/// Largest number of sample sequences enumerated in exact mode.
pub const EXACT_BUDGET: u128 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EvalMode {
    Exact,
    MonteCarlo { trials: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "BoundRepr", try_from = "BoundRepr")]
pub enum Bound {
    Exact(Rational),
    Approx(f64),
}

#[derive(Serialize, Deserialize)]
struct BoundRepr {
    value: String,
    exact: bool,
}

impl From<Bound> for BoundRepr {
    fn from(b: Bound) -> Self {
        match b {
            Bound::Exact(r) => BoundRepr { value: rational::format(&r), exact: true },
            Bound::Approx(x) => BoundRepr { value: x.to_string(), exact: false },
        }
    }
}

impl TryFrom<BoundRepr> for Bound {
    type Error = String;

    fn try_from(r: BoundRepr) -> std::result::Result<Self, String> {
        if r.exact {
            rational::parse(&r.value).map(Bound::Exact).map_err(|e| e.to_string())
        } else {
            r.value.parse().map(Bound::Approx).map_err(|e: std::num::ParseFloatError| e.to_string())
        }
    }
}

impl Bound {
    pub fn to_f64(&self) -> f64 {
        match self {
            Bound::Exact(r) => rational::to_f64(r),
            Bound::Approx(x) => *x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Bound::Exact(_))
    }

    pub fn holds(&self, value: &Rational) -> bool {
        match self {
            Bound::Exact(b) => value <= b,
            Bound::Approx(b) => rational::to_f64(value) <= *b + 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    /// Group index, or None for a sup over groups.
    pub group_id: Option<usize>,
    #[serde(with = "rational::serde_str")]
    pub value: Rational,
    /// True when `value` is the exact expectation.
    pub value_exact: bool,
    /// err(. | g) when P(g) > 0.
    #[serde(with = "opt_rational")]
    pub conditional: Option<Rational>,
    pub half_width: Option<f64>,
    pub bound: Option<Bound>,
    pub satisfied: Option<bool>,
}

impl ErrorEntry {
    fn new(group_id: Option<usize>, value: Rational, value_exact: bool) -> Self {
        ErrorEntry { group_id, value, value_exact, conditional: None, half_width: None, bound: None, satisfied: None }
    }

    fn with_bound(mut self, bound: Bound) -> Self {
        self.satisfied = Some(bound.holds(&self.value));
        self.bound = Some(bound);
        self
    }
}

mod opt_rational {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&rational::format(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Rational>, D::Error> {
        let v: Option<String> = Option::deserialize(d)?;
        v.map(|s| rational::parse(&s).map_err(serde::de::Error::custom)).transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub metric: String,
    pub predictor: String,
    pub n: usize,
    pub trials: Option<usize>,
    pub entries: Vec<ErrorEntry>,
}

impl ErrorReport {
    /// False when any attached exact bound fails.
    pub fn exact_bounds_hold(&self) -> bool {
        self.entries
            .iter()
            .all(|e| !(e.value_exact && e.bound.as_ref().is_some_and(|b| b.is_exact()) && e.satisfied == Some(false)))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size n must be at least 1".into()));
    }
    Ok(())
}

/// Exact err_g of A(S) per group, for each of `trials` seeded samples, in trial order.
pub fn trial_errors(
    predictor: &dyn Predictor,
    task: &DiscreteTask,
    groups: &GroupFamily,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<Rational>>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let sample = task.draw_sample(n, &mut rng);
            task.group_errors(predictor, &sample, groups)
        })
        .collect()
}

fn count_sequences(outcomes: usize, len: usize) -> Option<u128> {
    (outcomes as u128).checked_pow(len as u32)
}

/// Exact E_S[err_g(A(S))] over samples of size `len` by full enumeration.
fn exact_expectation(
    predictor: &dyn Predictor,
    task: &DiscreteTask,
    groups: &GroupFamily,
    len: usize,
) -> Result<Vec<Rational>> {
    let outcomes = task.outcomes();
    let k = outcomes.len();
    let count = count_sequences(k, len).filter(|&c| c <= EXACT_BUDGET).ok_or(Error::BudgetExceeded {
        required: count_sequences(k, len).unwrap_or(u128::MAX),
        budget: EXACT_BUDGET,
    })?;
    let zero = || vec![Rational::zero(); groups.len()];
    (0..count as u64)
        .into_par_iter()
        .map(|mut idx| -> Result<Vec<Rational>> {
            let mut entries = Vec::with_capacity(len);
            let mut weight = Rational::from_integer(BigInt::from(1));
            for _ in 0..len {
                let (o, p) = &outcomes[(idx % k as u64) as usize];
                idx /= k as u64;
                entries.push(*o);
                weight *= p;
            }
            let sample = LabeledSample::noisy(task.m(), entries)?;
            let errs = task.group_errors(predictor, &sample, groups)?;
            Ok(errs.into_iter().map(|e| e * &weight).collect())
        })
        .try_reduce(zero, |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x + y).collect()))
}

/// Expected err_g of the predictor trained on n i.i.d. points, per group.
/// When `bound_class` is given each entry carries the d_{H|g}/(n+1) bound.
pub fn prediction_error(
    predictor: &dyn Predictor,
    task: &DiscreteTask,
    groups: &GroupFamily,
    n: usize,
    mode: EvalMode,
    bound_class: Option<&ConceptClass>,
) -> Result<ErrorReport> {
    check_n(n)?;
    let (values, widths, exact, trials) = match mode {
        EvalMode::Exact => (exact_expectation(predictor, task, groups, n)?, None, true, None),
        EvalMode::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::InvalidParameter("trials must be positive".into()));
            }
            let per = trial_errors(predictor, task, groups, n, trials, seed)?;
            let denom = rational::int(trials as i64);
            let mut values = Vec::new();
            let mut widths = Vec::new();
            for gi in 0..groups.len() {
                let sum: Rational = per.iter().map(|row| &row[gi]).sum();
                values.push(sum / &denom);
                let xs: Vec<f64> = per.iter().map(|row| rational::to_f64(&row[gi])).collect();
                widths.push(mean_and_half_width(&xs).1);
            }
            (values, Some(widths), false, Some(trials))
        }
    };
    let entries = values
        .into_iter()
        .enumerate()
        .map(|(gi, v)| {
            let g = &groups.groups()[gi];
            let pg = task.mass(g);
            let mut e = ErrorEntry::new(Some(gi), v, exact);
            if !pg.is_zero() {
                e.conditional = Some(&e.value / &pg);
            }
            e.half_width = widths.as_ref().map(|w| w[gi]);
            if let Some(h) = bound_class {
                let d = vc_restricted(h, g) as i64;
                e = e.with_bound(Bound::Exact(rational::ratio(d, n as i64 + 1)));
            }
            e
        })
        .collect();
    Ok(ErrorReport { metric: "prediction".into(), predictor: predictor.name(), n, trials, entries })
}

/// Monte Carlo estimate of E_S[sup_g err_g(A(S))].
pub fn sup_group_error(
    predictor: &dyn Predictor,
    task: &DiscreteTask,
    groups: &GroupFamily,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<ErrorReport> {
    check_n(n)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let per = trial_errors(predictor, task, groups, n, trials, seed)?;
    let maxima: Vec<Rational> = per
        .iter()
        .map(|row| row.iter().max().cloned().unwrap_or_else(Rational::zero))
        .collect();
    let sum: Rational = maxima.iter().sum();
    let xs: Vec<f64> = maxima.iter().map(rational::to_f64).collect();
    let mut e = ErrorEntry::new(None, sum / rational::int(trials as i64), false);
    e.half_width = Some(mean_and_half_width(&xs).1);
    Ok(ErrorReport { metric: "sup-group".into(), predictor: predictor.name(), n, trials: Some(trials), entries: vec![e] })
}

/// Index of the ceil((1-δ)T)-th order statistic (0-based).
pub fn quantile_index(trials: usize, delta: f64) -> usize {
    let k = ((1.0 - delta) * trials as f64 - 1e-9).ceil() as usize;
    k.clamp(1, trials) - 1
}

/// High-probability rate: 9.64 (d/(n+1) + ln(2/δ)/n) realizable,
/// 16 sqrt((4d + ln(2/δ))/n) agnostic.
pub fn pac_bound(realizable: bool, d: usize, n: usize, delta: f64) -> f64 {
    let (d, nf, log_term) = (d as f64, n as f64, (2.0 / delta).ln());
    if realizable {
        9.64 * (d / (nf + 1.0) + log_term / nf)
    } else {
        16.0 * ((4.0 * d + log_term) / nf).sqrt()
    }
}

/// Empirical (1-δ)-quantile of err_g (realizable) or excess err_g over the
/// best in class (agnostic), against the high-probability rate.
#[allow(clippy::too_many_arguments)]
pub fn pac_audit(
    predictor: &dyn Predictor,
    task: &DiscreteTask,
    groups: &GroupFamily,
    h: &ConceptClass,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<ErrorReport> {
    check_n(n)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must be in (0,1), got {delta}")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let per = trial_errors(predictor, task, groups, n, trials, seed)?;
    let mut report = pac_from_trials(task, groups, h, n, delta, &per)?;
    report.predictor = predictor.name();
    Ok(report)
}

/// The audit of `pac_audit` on precomputed per-trial errors.
pub fn pac_from_trials(
    task: &DiscreteTask,
    groups: &GroupFamily,
    h: &ConceptClass,
    n: usize,
    delta: f64,
    per: &[Vec<Rational>],
) -> Result<ErrorReport> {
    check_n(n)?;
    if !(delta > 0.0 && delta < 1.0) || per.is_empty() {
        return Err(Error::InvalidParameter(format!("delta must be in (0,1) with trials > 0, got {delta}")));
    }
    let trials = per.len();
    let q = quantile_index(trials, delta);
    let entries = groups
        .groups()
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let offset = if task.is_realizable() { Rational::zero() } else { task.best_in_class(h, g) };
            let mut vals: Vec<Rational> = per.iter().map(|row| &row[gi] - &offset).collect();
            vals.sort();
            let bound = pac_bound(task.is_realizable(), vc_restricted(h, g), n, delta);
            ErrorEntry::new(Some(gi), vals[q].clone(), false).with_bound(Bound::Approx(bound))
        })
        .collect();
    Ok(ErrorReport { metric: "pac".into(), predictor: String::new(), n, trials: Some(trials), entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::Behavior;
    use crate::learner::{ConstantPredictor, ErmLearner, MgOigLearner};
    use crate::matching::CapacityMode;

    fn thresholds3() -> (ConceptClass, GroupFamily, DiscreteTask) {
        let h = ConceptClass::thresholds(3).unwrap();
        let g = GroupFamily::full(3).unwrap();
        let t: Behavior = "011".parse().unwrap();
        let task = DiscreteTask::realizable(DiscreteTask::uniform(3), t, &h, &g).unwrap();
        (h, g, task)
    }

    #[test]
    fn quantile_indices() {
        assert_eq!(quantile_index(10, 0.1), 8);
        assert_eq!(quantile_index(100, 0.05), 94);
        assert_eq!(quantile_index(1, 0.5), 0);
    }

    #[test]
    fn exact_prediction_error_thresholds() {
        let (h, g, task) = thresholds3();
        let learner = MgOigLearner::new(h.clone(), g.clone(), CapacityMode::Ceil).unwrap();
        let r = prediction_error(&learner, &task, &g, 2, EvalMode::Exact, Some(&h)).unwrap();
        let e = &r.entries[0];
        assert!(e.value_exact);
        assert_eq!(e.bound, Some(Bound::Exact(rational::ratio(1, 3))));
        assert_eq!(e.satisfied, Some(true));
        assert!(r.exact_bounds_hold());
        // Frozen value: 9 equally likely sequences on three points.
        assert_eq!(e.value, rational::ratio(4, 27));
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let (h, g, task) = thresholds3();
        let learner = MgOigLearner::new(h, g.clone(), CapacityMode::Ceil).unwrap();
        let exact = prediction_error(&learner, &task, &g, 2, EvalMode::Exact, None).unwrap();
        let mc = prediction_error(&learner, &task, &g, 2, EvalMode::MonteCarlo { trials: 4000, seed: 9 }, None).unwrap();
        let (x, y) = (rational::to_f64(&exact.entries[0].value), rational::to_f64(&mc.entries[0].value));
        assert!((x - y).abs() <= mc.entries[0].half_width.unwrap() + 1e-3, "{x} {y}");
        let again = prediction_error(&learner, &task, &g, 2, EvalMode::MonteCarlo { trials: 4000, seed: 9 }, None).unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn budget_is_enforced() {
        let (_, g, task) = thresholds3();
        let p = ConstantPredictor("011".parse().unwrap());
        let err = prediction_error(&p, &task, &g, 20, EvalMode::Exact, None).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn sup_and_pac() {
        let h = ConceptClass::thresholds(4).unwrap();
        let g = GroupFamily::from_strs(&["1111", "1100", "0011"]).unwrap();
        let t: Behavior = "0011".parse().unwrap();
        let task = DiscreteTask::realizable(DiscreteTask::uniform(4), t, &h, &g).unwrap();
        let erm = ErmLearner::new(h.clone(), g.clone()).unwrap();
        let sup = sup_group_error(&erm, &task, &g, 6, 500, 3).unwrap();
        let exact = prediction_error(&erm, &task, &g, 6, EvalMode::Exact, None).unwrap();
        let fullv = rational::to_f64(&exact.entries[0].value);
        assert!(rational::to_f64(&sup.entries[0].value) + sup.entries[0].half_width.unwrap() >= fullv - 1e-3);
        let pac = pac_audit(&erm, &task, &g, &h, 6, 0.1, 500, 3).unwrap();
        assert!(pac.entries.iter().all(|e| e.satisfied == Some(true)));
    }
}
