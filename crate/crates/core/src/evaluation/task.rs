//! Discrete distributions over points with a realizable or noisy target.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, RngCore};

use crate::concept::{is_group_realizable_target, Behavior, ConceptClass, GroupFamily, LabeledSample};
use crate::error::{Error, Result};
use crate::learner::{bernoulli, Predictor};
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Concept(Behavior),
    /// P(y = 1 | x) per point.
    Noisy(Vec<Rational>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteTask {
    masses: Vec<Rational>,
    target: Target,
    scale: u64,
}

fn validate_masses(masses: &[Rational]) -> Result<u64> {
    if masses.is_empty() {
        return Err(Error::InvalidTask("no points".into()));
    }
    if masses.iter().any(|m| m.is_negative()) {
        return Err(Error::InvalidTask("negative mass".into()));
    }
    let total: Rational = masses.iter().sum();
    if !total.is_one() {
        return Err(Error::InvalidTask(format!(
            "masses sum to {}, not 1",
            rational::format(&total)
        )));
    }
    rational::lcm_denominators(masses)
        .to_u64()
        .ok_or_else(|| Error::InvalidTask("mass denominators too large".into()))
}

impl DiscreteTask {
    /// Realizable-mode task; the target must be group-realizable on the support.
    pub fn realizable(
        masses: Vec<Rational>,
        target: Behavior,
        h: &ConceptClass,
        groups: &GroupFamily,
    ) -> Result<Self> {
        let scale = validate_masses(&masses)?;
        if target.len() != masses.len() || h.points() != masses.len() {
            return Err(Error::InvalidTask("target, class and masses disagree on domain size".into()));
        }
        let task = DiscreteTask { masses, target: Target::Concept(target), scale };
        if !is_group_realizable_target(&target, task.support_mask(), h, groups) {
            return Err(Error::InvalidTask(format!(
                "target {target} is not group-realizable for the configured class and groups"
            )));
        }
        Ok(task)
    }

    pub fn agnostic(masses: Vec<Rational>, p_one: Vec<Rational>) -> Result<Self> {
        let scale = validate_masses(&masses)?;
        if p_one.len() != masses.len() || !p_one.iter().all(rational::is_probability) {
            return Err(Error::InvalidTask("label probabilities must be in [0,1] per point".into()));
        }
        Ok(DiscreteTask { masses, target: Target::Noisy(p_one), scale })
    }

    pub fn uniform(m: usize) -> Vec<Rational> {
        vec![rational::ratio(1, m as i64); m]
    }

    pub fn m(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[Rational] {
        &self.masses
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn is_realizable(&self) -> bool {
        matches!(self.target, Target::Concept(_))
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.m()).filter(|&i| !self.masses[i].is_zero()).collect()
    }

    pub fn support_mask(&self) -> u64 {
        self.support().iter().fold(0, |a, &i| a | 1 << i)
    }

    /// P(g).
    pub fn mass(&self, g: &Behavior) -> Rational {
        (0..self.m()).filter(|&i| g.get(i)).map(|i| &self.masses[i]).sum()
    }

    /// P(y = 1 | x).
    pub fn label_prob(&self, x: usize) -> Rational {
        match &self.target {
            Target::Concept(c) => {
                if c.get(x) {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }
            Target::Noisy(p) => p[x].clone(),
        }
    }

    fn mistake(&self, p1: &Rational, x: usize) -> Rational {
        let q = self.label_prob(x);
        let one = Rational::one();
        p1 * (&one - &q) + (&one - p1) * q
    }

    /// err_g of the trained predictor: P(x ∈ g, prediction ≠ y).
    pub fn group_error(&self, predictor: &dyn Predictor, sample: &LabeledSample, g: &Behavior) -> Result<Rational> {
        let mut total = Rational::zero();
        for x in self.support() {
            if g.get(x) {
                let p1 = predictor.prob_one(sample, x)?;
                total += &self.masses[x] * self.mistake(&p1, x);
            }
        }
        Ok(total)
    }

    /// err_g for every group, sharing predictor calls across groups.
    pub fn group_errors(&self, predictor: &dyn Predictor, sample: &LabeledSample, groups: &GroupFamily) -> Result<Vec<Rational>> {
        let mut per_point = vec![None; self.m()];
        let union = groups.groups().iter().fold(0u64, |a, g| a | g.bits());
        for x in self.support() {
            if union >> x & 1 == 1 {
                let p1 = predictor.prob_one(sample, x)?;
                per_point[x] = Some(&self.masses[x] * self.mistake(&p1, x));
            }
        }
        Ok(groups
            .groups()
            .iter()
            .map(|g| {
                (0..self.m())
                    .filter(|&x| g.get(x))
                    .filter_map(|x| per_point[x].as_ref())
                    .sum()
            })
            .collect())
    }

    /// err_g of a fixed hypothesis.
    pub fn hypothesis_error(&self, h: &Behavior, g: &Behavior) -> Rational {
        let p1 = |x: usize| if h.get(x) { Rational::one() } else { Rational::zero() };
        (0..self.m())
            .filter(|&x| g.get(x))
            .map(|x| &self.masses[x] * self.mistake(&p1(x), x))
            .sum()
    }

    /// min over the class of err_g.
    pub fn best_in_class(&self, h: &ConceptClass, g: &Behavior) -> Rational {
        h.members()
            .iter()
            .map(|c| self.hypothesis_error(c, g))
            .min()
            .unwrap_or_else(Rational::zero)
    }

    /// Draws one point exactly from the marginal.
    pub fn draw_point(&self, rng: &mut dyn RngCore) -> usize {
        let u = rng.random_range(0..self.scale);
        let scale = BigInt::from(self.scale);
        let mut acc = 0u64;
        for (i, m) in self.masses.iter().enumerate() {
            acc += (m * Rational::from_integer(scale.clone())).to_integer().to_u64().unwrap();
            if u < acc {
                return i;
            }
        }
        unreachable!("masses sum to one")
    }

    /// Draws an i.i.d. sample of size n.
    pub fn draw_sample(&self, n: usize, rng: &mut dyn RngCore) -> LabeledSample {
        let entries = (0..n)
            .map(|_| {
                let x = self.draw_point(rng);
                let y = bernoulli(&self.label_prob(x), rng);
                (x, y)
            })
            .collect();
        LabeledSample::noisy(self.m(), entries).expect("points in range")
    }

    /// Outcomes (x, y) with positive probability.
    pub fn outcomes(&self) -> Vec<((usize, bool), Rational)> {
        let mut out = Vec::new();
        for x in self.support() {
            let q = self.label_prob(x);
            let m = &self.masses[x];
            if !q.is_one() {
                out.push(((x, false), m * (Rational::one() - &q)));
            }
            if !q.is_zero() {
                out.push(((x, true), m * &q));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::ConstantPredictor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn validation() {
        let h = ConceptClass::from_strs(&["00", "11"]).unwrap();
        let singles = GroupFamily::singletons(2).unwrap();
        let full = GroupFamily::full(2).unwrap();
        let t: Behavior = "01".parse().unwrap();
        assert!(DiscreteTask::realizable(DiscreteTask::uniform(2), t, &h, &singles).is_ok());
        assert!(DiscreteTask::realizable(DiscreteTask::uniform(2), t, &h, &full).is_err());
        assert!(DiscreteTask::realizable(vec![rational::ratio(1, 2); 3], "011".parse().unwrap(), &ConceptClass::full_cube(3).unwrap(), &GroupFamily::full(3).unwrap()).is_err());
        assert!(DiscreteTask::agnostic(DiscreteTask::uniform(2), vec![rational::int(2), rational::int(0)]).is_err());
    }

    #[test]
    fn constant_target_has_zero_error() {
        let h = ConceptClass::thresholds(3).unwrap();
        let g = GroupFamily::full(3).unwrap();
        let t: Behavior = "011".parse().unwrap();
        let task = DiscreteTask::realizable(DiscreteTask::uniform(3), t, &h, &g).unwrap();
        let s = LabeledSample::new(3, vec![]).unwrap();
        assert!(task.group_error(&ConstantPredictor(t), &s, &g.groups()[0]).unwrap().is_zero());
        let wrong: Behavior = "111".parse().unwrap();
        assert_eq!(task.group_error(&ConstantPredictor(wrong), &s, &g.groups()[0]).unwrap(), rational::ratio(1, 3));
    }

    #[test]
    fn normalization_identity() {
        let task = DiscreteTask::agnostic(
            vec![rational::ratio(1, 2), rational::ratio(1, 3), rational::ratio(1, 6)],
            vec![rational::ratio(1, 4), rational::int(1), rational::int(0)],
        )
        .unwrap();
        let g: Behavior = "011".parse().unwrap();
        let h: Behavior = "100".parse().unwrap();
        let err = task.hypothesis_error(&h, &g);
        assert_eq!(err, rational::ratio(1, 3));
        let cond = &err / task.mass(&g);
        assert_eq!(cond * task.mass(&g), err);
    }

    #[test]
    fn sampling_follows_masses() {
        let task = DiscreteTask::agnostic(vec![rational::ratio(1, 4), rational::ratio(3, 4)], vec![rational::int(0); 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hits = (0..4000).filter(|_| task.draw_point(&mut rng) == 1).count();
        assert!((2800..3200).contains(&hits), "{hits}");
        assert_eq!(task.outcomes().len(), 2);
    }
}
