//! Behaviors, concept classes, group families and VC computations on a finite domain.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest domain a `Behavior` can label.
pub const MAX_POINTS: usize = 64;
/// Largest domain for exhaustive 2^m enumeration.
pub const ENUMERATION_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Domain {
    pub m: usize,
}

impl Domain {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m > MAX_POINTS {
            return Err(Error::InvalidDescriptor(format!(
                "domain size must be in 1..={MAX_POINTS}, got {m}"
            )));
        }
        Ok(Domain { m })
    }

    pub fn size(&self) -> usize {
        self.m
    }
}

/// A labeling of `len` ordered points; point `i` lives at bit `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Behavior {
    bits: u64,
    len: u8,
}

fn low_mask(len: usize) -> u64 {
    if len == 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl Behavior {
    pub fn new(bits: u64, len: usize) -> Self {
        assert!(len <= MAX_POINTS, "behavior length {len} exceeds {MAX_POINTS}");
        Behavior {
            bits: bits & low_mask(len),
            len: len as u8,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Behavior::new(0, len)
    }

    pub fn ones(len: usize) -> Self {
        Behavior::new(u64::MAX, len)
    }

    pub fn from_points(points: impl IntoIterator<Item = usize>, len: usize) -> Self {
        let mut bits = 0u64;
        for p in points {
            assert!(p < len, "point {p} out of range for length {len}");
            bits |= 1 << p;
        }
        Behavior::new(bits, len)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        (self.bits >> i) & 1 == 1
    }

    pub fn with(&self, i: usize, value: bool) -> Self {
        let bits = if value {
            self.bits | (1 << i)
        } else {
            self.bits & !(1 << i)
        };
        Behavior::new(bits, self.len())
    }

    pub fn flip(&self, i: usize) -> Self {
        Behavior::new(self.bits ^ (1 << i), self.len())
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    /// Indices of set bits, ascending.
    pub fn points(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.get(i)).collect()
    }

    pub fn and(&self, other: &Behavior) -> Behavior {
        Behavior::new(self.bits & other.bits, self.len())
    }

    pub fn is_subset_of(&self, other: &Behavior) -> bool {
        self.bits & !other.bits == 0
    }

    /// Restriction to the listed points, in the listed order.
    pub fn restrict(&self, points: &[usize]) -> Behavior {
        let mut bits = 0u64;
        for (j, &p) in points.iter().enumerate() {
            if self.get(p) {
                bits |= 1 << j;
            }
        }
        Behavior::new(bits, points.len())
    }

    fn lex_key(&self) -> u64 {
        if self.len == 0 {
            0
        } else {
            self.bits.reverse_bits() >> (64 - self.len as u32)
        }
    }
}

impl Ord for Behavior {
    /// Lexicographic on the string b0 b1 ... b_{m-1}.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.len, self.lex_key()).cmp(&(other.len, other.lex_key()))
    }
}

impl PartialOrd for Behavior {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() > MAX_POINTS {
            return Err(Error::InvalidDescriptor(format!("bitstring too long: {s}")));
        }
        let mut bits = 0u64;
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << i,
                _ => return Err(Error::InvalidDescriptor(format!("bad bitstring {s:?}"))),
            }
        }
        Ok(Behavior::new(bits, s.len()))
    }
}

impl Serialize for Behavior {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Behavior {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn canonical(mut v: Vec<Behavior>) -> Vec<Behavior> {
    v.sort();
    v.dedup();
    v
}

/// Nonempty, duplicate-free, canonically ordered set of behaviors on `len` points.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConceptClass {
    len: usize,
    members: Vec<Behavior>,
}

impl ConceptClass {
    pub fn new(len: usize, members: impl IntoIterator<Item = Behavior>) -> Result<Self> {
        let members: Vec<Behavior> = members.into_iter().collect();
        if let Some(b) = members.iter().find(|b| b.len() != len) {
            return Err(Error::InvalidDescriptor(format!(
                "behavior {b} has length {} but the domain has {len} points",
                b.len()
            )));
        }
        let members = canonical(members);
        if members.is_empty() {
            return Err(Error::InvalidDescriptor("concept class is empty".into()));
        }
        Ok(ConceptClass { len, members })
    }

    pub fn from_strs(bits: &[&str]) -> Result<Self> {
        let members = bits
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Behavior>>>()?;
        let len = members.first().map(|b| b.len()).unwrap_or(0);
        ConceptClass::new(len, members)
    }

    /// Suffix thresholds: c(x_i) = 1 iff i >= t, for t in 0..=m.
    pub fn thresholds(m: usize) -> Result<Self> {
        Domain::new(m)?;
        ConceptClass::new(
            m,
            (0..=m).map(|t| Behavior::new(!low_mask(t), m)),
        )
    }

    /// All contiguous runs of ones, plus the all-zero labeling.
    pub fn intervals(m: usize) -> Result<Self> {
        Domain::new(m)?;
        let mut v = vec![Behavior::zeros(m)];
        for a in 0..m {
            for b in a..m {
                v.push(Behavior::new(low_mask(b + 1) & !low_mask(a), m));
            }
        }
        ConceptClass::new(m, v)
    }

    /// Point indicators.
    pub fn singletons(m: usize) -> Result<Self> {
        Domain::new(m)?;
        ConceptClass::new(m, (0..m).map(|i| Behavior::new(1 << i, m)))
    }

    pub fn full_cube(m: usize) -> Result<Self> {
        Domain::new(m)?;
        if m > ENUMERATION_CAP {
            return Err(Error::DomainTooLarge { m, cap: ENUMERATION_CAP });
        }
        Ok(ConceptClass {
            len: m,
            members: canonical((0..1u64 << m).map(|b| Behavior::new(b, m)).collect()),
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn points(&self) -> usize {
        self.len
    }

    pub fn members(&self) -> &[Behavior] {
        &self.members
    }

    pub fn index_of(&self, b: &Behavior) -> Option<usize> {
        self.members.binary_search(b).ok()
    }

    pub fn contains(&self, b: &Behavior) -> bool {
        self.index_of(b).is_some()
    }

    pub fn is_subset_of(&self, other: &ConceptClass) -> bool {
        self.members.iter().all(|b| other.contains(b))
    }
}

/// Duplicate-free, canonically ordered family of nonempty point masks.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupFamily {
    len: usize,
    groups: Vec<Behavior>,
}

impl GroupFamily {
    pub fn new(len: usize, groups: impl IntoIterator<Item = Behavior>) -> Result<Self> {
        let groups: Vec<Behavior> = groups.into_iter().collect();
        for g in &groups {
            if g.len() != len {
                return Err(Error::InvalidDescriptor(format!(
                    "group {g} has length {} but the domain has {len} points",
                    g.len()
                )));
            }
            if g.is_zero() {
                return Err(Error::InvalidDescriptor("empty group".into()));
            }
        }
        Ok(GroupFamily { len, groups: canonical(groups) })
    }

    pub fn from_strs(bits: &[&str]) -> Result<Self> {
        let groups = bits
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Behavior>>>()?;
        let len = groups.first().map(|b| b.len()).unwrap_or(0);
        GroupFamily::new(len, groups)
    }

    pub fn full(m: usize) -> Result<Self> {
        Domain::new(m)?;
        GroupFamily::new(m, [Behavior::ones(m)])
    }

    pub fn singletons(m: usize) -> Result<Self> {
        Domain::new(m)?;
        GroupFamily::new(m, (0..m).map(|i| Behavior::new(1 << i, m)))
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn points(&self) -> usize {
        self.len
    }

    pub fn groups(&self) -> &[Behavior] {
        &self.groups
    }

    pub fn contains_full(&self) -> bool {
        self.groups.iter().any(|g| g.count_ones() == self.len)
    }

    /// Restriction to the listed points; empty projections are dropped and duplicates merged.
    pub fn project(&self, points: &[usize]) -> GroupFamily {
        let groups = self
            .groups
            .iter()
            .map(|g| g.restrict(points))
            .filter(|g| !g.is_zero())
            .collect();
        GroupFamily {
            len: points.len(),
            groups: canonical(groups),
        }
    }

    /// Projection that keeps, for each original group id, the id of its projected mask.
    pub fn project_with_ids(&self, points: &[usize]) -> (GroupFamily, Vec<Option<usize>>) {
        let projected = self.project(points);
        let ids = self
            .groups
            .iter()
            .map(|g| {
                let r = g.restrict(points);
                projected.groups.binary_search(&r).ok()
            })
            .collect();
        (projected, ids)
    }
}

/// Labeled sample over a finite domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledSample {
    domain: usize,
    entries: Vec<(usize, bool)>,
}

impl LabeledSample {
    /// Realizable-setting sample: duplicates must carry identical labels.
    pub fn new(domain: usize, entries: Vec<(usize, bool)>) -> Result<Self> {
        let s = LabeledSample::noisy(domain, entries)?;
        let mut seen = [None::<bool>; MAX_POINTS];
        for &(p, y) in &s.entries {
            match seen[p] {
                Some(prev) if prev != y => {
                    return Err(Error::InvalidSample(format!(
                        "point {p} appears with both labels"
                    )))
                }
                _ => seen[p] = Some(y),
            }
        }
        Ok(s)
    }

    /// Agnostic-setting sample: duplicates may disagree.
    pub fn noisy(domain: usize, entries: Vec<(usize, bool)>) -> Result<Self> {
        Domain::new(domain)?;
        if let Some(&(p, _)) = entries.iter().find(|(p, _)| *p >= domain) {
            return Err(Error::InvalidSample(format!(
                "point {p} outside a domain of {domain} points"
            )));
        }
        Ok(LabeledSample { domain, entries })
    }

    /// Labels read off a concept.
    pub fn labeled_by(concept: &Behavior, points: &[usize]) -> Result<Self> {
        LabeledSample::new(
            concept.len(),
            points.iter().map(|&p| (p, concept.get(p))).collect(),
        )
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn entries(&self) -> &[(usize, bool)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prefix(&self, t: usize) -> LabeledSample {
        LabeledSample {
            domain: self.domain,
            entries: self.entries[..t.min(self.entries.len())].to_vec(),
        }
    }

    pub fn without(&self, i: usize) -> LabeledSample {
        let mut entries = self.entries.clone();
        entries.remove(i);
        LabeledSample { domain: self.domain, entries }
    }

    pub fn permuted(&self, order: &[usize]) -> LabeledSample {
        LabeledSample {
            domain: self.domain,
            entries: order.iter().map(|&i| self.entries[i]).collect(),
        }
    }

    /// Distinct sample points as a mask.
    pub fn point_mask(&self) -> u64 {
        self.entries.iter().fold(0, |m, &(p, _)| m | (1 << p))
    }

    /// Label of point `p` if present (first occurrence).
    pub fn label_of(&self, p: usize) -> Option<bool> {
        self.entries.iter().find(|(q, _)| *q == p).map(|&(_, y)| y)
    }

    /// Occurrences of each point.
    pub fn multiplicity(&self, p: usize) -> usize {
        self.entries.iter().filter(|(q, _)| *q == p).count()
    }
}

fn mask_points(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| (mask >> i) & 1 == 1).collect()
}

/// Calls `f` on every `k`-subset of `points` as a mask; stops at the first `true`.
fn any_subset_of_size(points: &[usize], k: usize, f: &mut impl FnMut(u64) -> bool) -> bool {
    fn rec(points: &[usize], k: usize, start: usize, acc: u64, f: &mut impl FnMut(u64) -> bool) -> bool {
        if k == 0 {
            return f(acc);
        }
        for i in start..=points.len() - k {
            if rec(points, k - 1, i + 1, acc | (1 << points[i]), f) {
                return true;
            }
        }
        false
    }
    if k > points.len() {
        return false;
    }
    rec(points, k, 0, 0, f)
}

fn shatters(members: &[Behavior], mask: u64) -> bool {
    let k = mask.count_ones();
    if (members.len() as u128) < (1u128 << k) {
        return false;
    }
    let patterns: HashSet<u64> = members.iter().map(|h| h.bits() & mask).collect();
    patterns.len() as u128 == 1u128 << k
}

fn vc_over(class: &ConceptClass, candidates: &[usize]) -> usize {
    let mut d = 0;
    for k in 1..=candidates.len() {
        if (class.len() as u128) < (1u128 << k) {
            break;
        }
        if any_subset_of_size(candidates, k, &mut |mask| shatters(class.members(), mask)) {
            d = k;
        } else {
            break;
        }
    }
    d
}

/// Largest size of a shattered point set.
pub fn vc_dimension(class: &ConceptClass) -> usize {
    let all: Vec<usize> = (0..class.points()).collect();
    vc_over(class, &all)
}

/// VC dimension with shattered sets drawn from `g` only; this is d_{H|g}.
pub fn vc_restricted(class: &ConceptClass, g: &Behavior) -> usize {
    let points: Vec<usize> = mask_points(g.bits())
        .into_iter()
        .filter(|&p| p < class.points())
        .collect();
    vc_over(class, &points)
}

/// Largest d_{H|g} over the family.
pub fn vc_restricted_sup(class: &ConceptClass, groups: &GroupFamily) -> usize {
    groups
        .groups()
        .iter()
        .map(|g| vc_restricted(class, g))
        .max()
        .unwrap_or(0)
}

/// Restriction of each member to `points`.
pub fn project_class(class: &ConceptClass, points: &[usize]) -> ConceptClass {
    ConceptClass {
        len: points.len(),
        members: canonical(class.members().iter().map(|h| h.restrict(points)).collect()),
    }
}

/// All labelings agreeing, inside every group, with some member of `h`.
pub fn enumerate_group_realizable(h: &ConceptClass, groups: &GroupFamily) -> Result<ConceptClass> {
    let m = h.points();
    if groups.points() != m {
        return Err(Error::InvalidDescriptor(format!(
            "class on {m} points but groups on {} points",
            groups.points()
        )));
    }
    if m > ENUMERATION_CAP {
        return Err(Error::DomainTooLarge { m, cap: ENUMERATION_CAP });
    }
    let patterns: Vec<(u64, HashSet<u64>)> = groups
        .groups()
        .iter()
        .map(|g| {
            let set = h.members().iter().map(|c| c.bits() & g.bits()).collect();
            (g.bits(), set)
        })
        .collect();
    let members: Vec<Behavior> = (0..1u64 << m)
        .filter(|c| patterns.iter().all(|(g, set)| set.contains(&(c & g))))
        .map(|c| Behavior::new(c, m))
        .collect();
    ConceptClass::new(m, members)
}

/// Group-realizability of a target restricted to a support mask.
pub fn is_group_realizable_target(
    target: &Behavior,
    support: u64,
    h: &ConceptClass,
    groups: &GroupFamily,
) -> bool {
    groups.groups().iter().all(|g| {
        let mask = g.bits() & support;
        h.members()
            .iter()
            .any(|c| (c.bits() ^ target.bits()) & mask == 0)
    })
}

/// Sum of binomial coefficients C(n, i) for i <= d.
pub fn sauer_bound(n: usize, d: usize) -> u128 {
    let mut total = 0u128;
    let mut c = 1u128;
    for i in 0..=d.min(n) {
        if i > 0 {
            c = c * (n - i + 1) as u128 / i as u128;
        }
        total += c;
    }
    total
}

/// JSON descriptor for classes and group families.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetDescriptor {
    Explicit { bits: Vec<String> },
    Thresholds,
    Intervals,
    Singletons,
    FullCube,
    /// The single full-domain mask (group families only).
    Full,
}

impl SetDescriptor {
    fn explicit(bits: &[String], m: usize) -> Result<Vec<Behavior>> {
        bits.iter()
            .map(|s| {
                let b: Behavior = s.parse()?;
                if b.len() != m {
                    return Err(Error::InvalidDescriptor(format!(
                        "bitstring {s} does not have length {m}"
                    )));
                }
                Ok(b)
            })
            .collect()
    }

    pub fn to_class(&self, m: usize) -> Result<ConceptClass> {
        match self {
            SetDescriptor::Explicit { bits } => ConceptClass::new(m, Self::explicit(bits, m)?),
            SetDescriptor::Thresholds => ConceptClass::thresholds(m),
            SetDescriptor::Intervals => ConceptClass::intervals(m),
            SetDescriptor::Singletons => ConceptClass::singletons(m),
            SetDescriptor::FullCube => ConceptClass::full_cube(m),
            SetDescriptor::Full => ConceptClass::new(m, [Behavior::ones(m)]),
        }
    }

    pub fn to_groups(&self, m: usize) -> Result<GroupFamily> {
        let nonempty = |c: ConceptClass| {
            GroupFamily::new(m, c.members().iter().copied().filter(|g| !g.is_zero()))
        };
        match self {
            SetDescriptor::Explicit { bits } => GroupFamily::new(m, Self::explicit(bits, m)?),
            SetDescriptor::Full => GroupFamily::full(m),
            SetDescriptor::Singletons => GroupFamily::singletons(m),
            other => nonempty(other.to_class(m)?),
        }
    }
}
