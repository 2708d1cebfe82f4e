//! Multi-group bipartite matching: network, augmenting solver, duality and a grid oracle.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::concept::{Behavior, GroupFamily};
use crate::density::{group_density, DensityReport};
use crate::error::{Error, Result};
use crate::oig::Oig;
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityMode {
    Exact,
    #[default]
    Ceil,
}

impl std::str::FromStr for CapacityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CapacityMode::Exact),
            "ceil" => Ok(CapacityMode::Ceil),
            _ => Err(Error::InvalidParameter(format!("unknown capacity mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacitySource {
    Exact,
    Ceil,
    Explicit,
}

#[derive(Clone, Debug)]
pub struct MgNetwork {
    oig: Oig,
    groups: Vec<Behavior>,
    source: CapacitySource,
    /// capacity[g][v]
    capacity: Vec<Vec<Rational>>,
    densities: Vec<Option<DensityReport>>,
    coord_groups: Vec<Vec<usize>>,
    warnings: Vec<String>,
}

fn index_coords(points: usize, groups: &[Behavior]) -> Vec<Vec<usize>> {
    (0..points)
        .map(|c| (0..groups.len()).filter(|&g| groups[g].get(c)).collect())
        .collect()
}

fn check_groups(oig: &Oig, groups: &GroupFamily) -> Result<()> {
    if groups.points() != oig.points() {
        return Err(Error::InvalidParameter(format!(
            "OIG on {} points but groups on {} points",
            oig.points(),
            groups.points()
        )));
    }
    Ok(())
}

/// Signed change keyed by `(edge, side)` or `(group, vertex)`.
type Deltas = HashMap<(usize, usize), i64>;

/// Uniform per-group capacities from the group densities.
pub fn build_network(oig: &Oig, groups: &GroupFamily, mode: CapacityMode) -> Result<MgNetwork> {
    check_groups(oig, groups)?;
    let mut oig = oig.clone();
    oig.index_groups(groups);
    let gs = groups.groups().to_vec();
    let densities: Vec<DensityReport> = gs.iter().map(|g| group_density(&oig, g)).collect();
    let capacity = densities
        .iter()
        .map(|d| {
            let c = match mode {
                CapacityMode::Exact => d.density.clone(),
                CapacityMode::Ceil => rational::ceil(&d.density),
            };
            vec![c; oig.vertex_count()]
        })
        .collect();
    Ok(MgNetwork {
        coord_groups: index_coords(oig.points(), &gs),
        oig,
        groups: gs,
        source: match mode {
            CapacityMode::Exact => CapacitySource::Exact,
            CapacityMode::Ceil => CapacitySource::Ceil,
        },
        capacity,
        densities: densities.into_iter().map(Some).collect(),
        warnings: Vec::new(),
    })
}

/// Caller-supplied capacity table, indexed `[group][vertex]`.
pub fn build_network_explicit(
    oig: &Oig,
    groups: &GroupFamily,
    capacity: Vec<Vec<Rational>>,
) -> Result<MgNetwork> {
    check_groups(oig, groups)?;
    let mut oig = oig.clone();
    oig.index_groups(groups);
    let gs = groups.groups().to_vec();
    if capacity.len() != gs.len() || capacity.iter().any(|row| row.len() != oig.vertex_count()) {
        return Err(Error::InvalidParameter(
            "capacity table must be groups x vertices".into(),
        ));
    }
    if capacity.iter().flatten().any(|c| c.is_negative()) {
        return Err(Error::InvalidParameter("negative capacity".into()));
    }
    let mut warnings = Vec::new();
    let mut densities = Vec::new();
    for (g, row) in gs.iter().zip(&capacity) {
        if row.iter().all(|c| *c == row[0]) {
            let d = group_density(&oig, g);
            if row[0] < d.density {
                warnings.push(format!(
                    "capacity {} for group {g} is below its density {}; completeness is not guaranteed",
                    rational::format(&row[0]),
                    rational::format(&d.density)
                ));
            }
            densities.push(Some(d));
        } else {
            densities.push(None);
        }
    }
    Ok(MgNetwork {
        coord_groups: index_coords(oig.points(), &gs),
        oig,
        groups: gs,
        source: CapacitySource::Explicit,
        capacity,
        densities,
        warnings,
    })
}

impl MgNetwork {
    pub fn oig(&self) -> &Oig {
        &self.oig
    }

    pub fn groups(&self) -> &[Behavior] {
        &self.groups
    }

    pub fn source(&self) -> CapacitySource {
        self.source
    }

    pub fn capacity(&self, g: usize, v: usize) -> &Rational {
        &self.capacity[g][v]
    }

    pub fn capacities(&self) -> &[Vec<Rational>] {
        &self.capacity
    }

    pub fn densities(&self) -> &[Option<DensityReport>] {
        &self.densities
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn edge_count(&self) -> usize {
        self.oig.edge_count()
    }

    /// Groups an edge is relevant to.
    pub fn edge_groups(&self, e: usize) -> &[usize] {
        &self.coord_groups[self.oig.edges()[e].coord]
    }

    /// Groups containing a coordinate.
    pub fn coord_groups(&self, c: usize) -> &[usize] {
        &self.coord_groups[c]
    }

    pub fn dump(&self) -> NetworkDump {
        NetworkDump {
            vertices: self.oig.vertices().members().iter().map(|b| b.to_string()).collect(),
            edges: self
                .oig
                .edges()
                .iter()
                .enumerate()
                .map(|(i, e)| NetworkEdge {
                    u: e.u,
                    v: e.v,
                    coord: e.coord,
                    groups: self.edge_groups(i).to_vec(),
                })
                .collect(),
            groups: self.groups.iter().map(|g| g.to_string()).collect(),
            capacities: self
                .capacity
                .iter()
                .map(|row| row.iter().map(rational::format).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NetworkEdge {
    pub u: usize,
    pub v: usize,
    pub coord: usize,
    pub groups: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NetworkDump {
    pub vertices: Vec<String>,
    pub edges: Vec<NetworkEdge>,
    pub groups: Vec<String>,
    /// `[group][vertex]` as "p/q".
    pub capacities: Vec<Vec<String>>,
}

/// Rational weights on the two arcs of each edge node.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    to_u: Vec<Rational>,
    to_v: Vec<Rational>,
}

impl Matching {
    pub fn zeros(edges: usize) -> Self {
        Matching {
            to_u: vec![Rational::zero(); edges],
            to_v: vec![Rational::zero(); edges],
        }
    }

    pub fn from_arcs(to_u: Vec<Rational>, to_v: Vec<Rational>) -> Self {
        assert_eq!(to_u.len(), to_v.len());
        Matching { to_u, to_v }
    }

    pub fn edge_count(&self) -> usize {
        self.to_u.len()
    }

    pub fn to_u(&self, e: usize) -> &Rational {
        &self.to_u[e]
    }

    pub fn to_v(&self, e: usize) -> &Rational {
        &self.to_v[e]
    }

    /// Weight on the arc from edge `e` into its endpoint `w`.
    pub fn toward(&self, oig: &Oig, e: usize, w: usize) -> &Rational {
        if oig.edges()[e].u == w {
            &self.to_u[e]
        } else {
            &self.to_v[e]
        }
    }

    pub fn value(&self) -> Rational {
        self.to_u.iter().chain(&self.to_v).sum()
    }

    pub fn is_prediction_sufficient(&self) -> bool {
        self.to_u
            .iter()
            .zip(&self.to_v)
            .all(|(a, b)| a + b == Rational::one())
    }

    pub fn is_integral(&self) -> bool {
        self.to_u.iter().chain(&self.to_v).all(|r| r.is_integer())
    }

    /// Arc bounds, edge supply and every (vertex, group) capacity.
    pub fn is_feasible(&self, net: &MgNetwork) -> bool {
        let oig = net.oig();
        if self.edge_count() != oig.edge_count() {
            return false;
        }
        let one = Rational::one();
        for (a, b) in self.to_u.iter().zip(&self.to_v) {
            if a.is_negative() || b.is_negative() || a > &one || b > &one || a + b > one {
                return false;
            }
        }
        let mut load = vec![vec![Rational::zero(); oig.vertex_count()]; net.groups().len()];
        for (i, e) in oig.edges().iter().enumerate() {
            for &g in net.edge_groups(i) {
                load[g][e.u] += &self.to_u[i];
                load[g][e.v] += &self.to_v[i];
            }
        }
        load.iter()
            .zip(net.capacities())
            .all(|(l, c)| l.iter().zip(c).all(|(x, y)| x <= y))
    }

    pub fn dump(&self, oig: &Oig) -> MatchingDump {
        let mut arcs = Vec::new();
        for (i, e) in oig.edges().iter().enumerate() {
            arcs.push(ArcValue { edge: i, vertex: e.u, value: rational::format(&self.to_u[i]) });
            arcs.push(ArcValue { edge: i, vertex: e.v, value: rational::format(&self.to_v[i]) });
        }
        MatchingDump {
            value: rational::format(&self.value()),
            integral: self.is_integral(),
            arcs,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ArcValue {
    pub edge: usize,
    pub vertex: usize,
    pub value: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchingDump {
    pub value: String,
    pub integral: bool,
    pub arcs: Vec<ArcValue>,
}

/// One arc of an augmenting matching in the residual network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualArc {
    Source { edge: usize },
    Forward { edge: usize, vertex: usize },
    Backward { vertex: usize, edge: usize },
    Sink { vertex: usize },
}

/// An s-t path: spare supply on the first edge, then alternating
/// backward/forward moves, ending at a vertex with sink slack.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AugmentingMatching {
    /// Group whose residual network contains every edge of the path; `None`
    /// when the path was found by the unrestricted search.
    pub group: Option<usize>,
    /// `(edge, vertex)` pairs: flow moves into `vertex` along `edge`.
    pub hops: Vec<(usize, usize)>,
}

impl AugmentingMatching {
    pub fn arcs(&self) -> Vec<ResidualArc> {
        let mut arcs = vec![ResidualArc::Source { edge: self.hops[0].0 }];
        for (k, &(e, w)) in self.hops.iter().enumerate() {
            if k > 0 {
                arcs.push(ResidualArc::Backward { vertex: self.hops[k - 1].1, edge: e });
            }
            arcs.push(ResidualArc::Forward { edge: e, vertex: w });
        }
        arcs.push(ResidualArc::Sink { vertex: self.hops.last().unwrap().1 });
        arcs
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.hops.iter().map(|&(_, w)| w)
    }
}

/// Expansion budget for each exhaustive path search.
const DFS_BUDGET: u64 = 2_000_000;
/// Largest common denominator accepted for scaling.
const MAX_SCALE: i64 = 1 << 30;

/// Scaled integer flow shared by all groups: f^g is f restricted to E_g,
/// and `load[g][v]` is the flow on v's sink arc in the g-specific network.
#[derive(Clone, Debug)]
pub struct GroupFlowState<'a> {
    net: &'a MgNetwork,
    scale: i64,
    flow: Vec<[i64; 2]>,
    load: Vec<Vec<i64>>,
    cap: Vec<Vec<i64>>,
    units: u64,
    exhausted: bool,
}

impl<'a> GroupFlowState<'a> {
    pub fn new(net: &'a MgNetwork) -> Result<Self> {
        GroupFlowState::with_refinement(net, 1)
    }

    /// Scale D·k, where D is the least common denominator of the capacities.
    pub fn with_refinement(net: &'a MgNetwork, k: i64) -> Result<Self> {
        let d = rational::lcm_denominators(net.capacities().iter().flatten()) * BigInt::from(k);
        let scale = d
            .to_i64()
            .filter(|&s| s <= MAX_SCALE)
            .ok_or_else(|| Error::InstanceTooLarge(format!("capacity denominators need scale {d}")))?;
        let big = BigInt::from(scale);
        let limit = BigInt::from(scale) * BigInt::from(net.edge_count() as i64 + 1);
        let cap = net
            .capacities()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| {
                        let s = (c * Rational::from_integer(big.clone())).to_integer();
                        s.min(limit.clone()).to_i64().unwrap()
                    })
                    .collect()
            })
            .collect();
        Ok(GroupFlowState {
            net,
            scale,
            flow: vec![[0, 0]; net.edge_count()],
            load: vec![vec![0; net.oig().vertex_count()]; net.groups().len()],
            cap,
            units: 0,
            exhausted: true,
        })
    }

    pub fn network(&self) -> &MgNetwork {
        self.net
    }

    /// Common denominator D; edge supply in scaled units.
    pub fn scale(&self) -> i64 {
        self.scale
    }

    /// Scaled total value.
    pub fn units(&self) -> u64 {
        self.units
    }

    pub fn target_units(&self) -> u64 {
        self.scale as u64 * self.net.edge_count() as u64
    }

    pub fn is_complete(&self) -> bool {
        self.units == self.target_units()
    }

    /// Scaled flow on the two arcs of edge `e`.
    pub fn edge_flow(&self, e: usize) -> [i64; 2] {
        self.flow[e]
    }

    /// Scaled residual capacity of v's sink arc in the g-specific network.
    pub fn sink_residual(&self, g: usize, v: usize) -> i64 {
        self.cap[g][v] - self.load[g][v]
    }

    /// The g-specific flow: scaled arc values on every g-relevant edge.
    pub fn group_flow(&self, g: usize) -> Vec<(usize, [i64; 2])> {
        self.net.oig().group_index()[g]
            .iter()
            .map(|&e| (e, self.flow[e]))
            .collect()
    }

    /// All source arcs at most D, arcs nonnegative, sink arcs within capacity.
    pub fn is_feasible(&self) -> bool {
        let supply_ok = self
            .flow
            .iter()
            .all(|f| f[0] >= 0 && f[1] >= 0 && f[0] + f[1] <= self.scale);
        let sinks_ok = self
            .load
            .iter()
            .zip(&self.cap)
            .all(|(l, c)| l.iter().zip(c).all(|(x, y)| x <= y));
        let mut recomputed = vec![vec![0i64; self.net.oig().vertex_count()]; self.net.groups().len()];
        for (i, e) in self.net.oig().edges().iter().enumerate() {
            for &g in self.net.edge_groups(i) {
                recomputed[g][e.u] += self.flow[i][0];
                recomputed[g][e.v] += self.flow[i][1];
            }
        }
        supply_ok && sinks_ok && recomputed == self.load
    }

    pub fn matching(&self) -> Matching {
        let d = BigInt::from(self.scale);
        let r = |x: i64| Rational::new(BigInt::from(x), d.clone());
        Matching {
            to_u: self.flow.iter().map(|f| r(f[0])).collect(),
            to_v: self.flow.iter().map(|f| r(f[1])).collect(),
        }
    }

    fn side(&self, e: usize, w: usize) -> usize {
        usize::from(self.net.oig().edges()[e].u != w)
    }

    fn slack(&self, g: usize, w: usize) -> i64 {
        self.cap[g][w] - self.load[g][w]
    }

    /// Slack for passing through `w`, entering on coordinate `i` and leaving on `j`.
    fn transit_slack(&self, w: usize, i: usize, j: usize) -> i64 {
        let leave = self.net.coord_groups(j);
        self.net
            .coord_groups(i)
            .iter()
            .filter(|g| !leave.contains(g))
            .map(|&g| self.slack(g, w))
            .min()
            .unwrap_or(i64::MAX)
    }

    fn terminal_slack(&self, w: usize, i: usize) -> i64 {
        self.net
            .coord_groups(i)
            .iter()
            .map(|&g| self.slack(g, w))
            .min()
            .unwrap_or(i64::MAX)
    }

    fn spare(&self, e: usize) -> i64 {
        self.scale - self.flow[e][0] - self.flow[e][1]
    }

    /// Net change of every touched arc and sink load for one unit along `path`,
    /// or `None` if the hops do not chain.
    fn net_changes(&self, path: &AugmentingMatching) -> Option<(Deltas, Deltas)> {
        let oig = self.net.oig();
        let hops = &path.hops;
        let mut arcs = HashMap::new();
        let mut loads = HashMap::new();
        let mut touch = |e: usize, w: usize, d: i64, arcs: &mut HashMap<(usize, usize), i64>| {
            *arcs.entry((e, self.side(e, w))).or_insert(0) += d;
            for &g in self.net.edge_groups(e) {
                *loads.entry((g, w)).or_insert(0) += d;
            }
        };
        for (k, &(e, w)) in hops.iter().enumerate() {
            let edge = *oig.edges().get(e)?;
            if edge.u != w && edge.v != w {
                return None;
            }
            if let Some(g) = path.group {
                if !oig.groups()[g].get(edge.coord) {
                    return None;
                }
            }
            if k > 0 {
                let prev = hops[k - 1];
                if e == prev.0 || edge.other(w) != prev.1 {
                    return None;
                }
                touch(e, prev.1, -1, &mut arcs);
            }
            touch(e, w, 1, &mut arcs);
        }
        Some((arcs, loads))
    }

    /// Largest number of unit augmentations the path supports (0 if invalid).
    /// Repeated vertices are allowed; validity is judged on the net change.
    pub fn bottleneck(&self, path: &AugmentingMatching) -> i64 {
        if path.hops.is_empty() {
            return 0;
        }
        let Some((arcs, loads)) = self.net_changes(path) else {
            return 0;
        };
        let mut delta = self.spare(path.hops[0].0);
        delta = delta.min((self.target_units() - self.units) as i64);
        for (&(e, side), &c) in &arcs {
            if c < 0 {
                delta = delta.min(self.flow[e][side] / -c);
            }
        }
        for (&(g, w), &c) in &loads {
            if c > 0 {
                delta = delta.min(self.slack(g, w) / c);
            }
        }
        delta.max(0)
    }

    /// Applies `times` unit augmentations along `path`.
    pub fn apply(&mut self, path: &AugmentingMatching, times: i64) -> Result<()> {
        if times < 1 || self.bottleneck(path) < times {
            return Err(Error::InvalidParameter("augmenting matching is not valid here".into()));
        }
        let (arcs, loads) = self.net_changes(path).expect("checked by bottleneck");
        for ((e, side), c) in arcs {
            self.flow[e][side] += c * times;
        }
        for ((g, w), c) in loads {
            self.load[g][w] += c * times;
        }
        self.units += times as u64;
        Ok(())
    }

    /// One search plus one unit augmentation. Returns false when no valid
    /// augmenting matching is found.
    pub fn step(&mut self) -> bool {
        match find_valid_augmenting_matching(self) {
            Some(p) => {
                self.apply(&p, 1).expect("search returns valid paths");
                true
            }
            None => false,
        }
    }

    fn bfs(&self, restrict: Option<usize>) -> Search {
        let oig = self.net.oig();
        let nc = oig.points();
        let allowed = |e: usize| match restrict {
            Some(g) => oig.groups()[g].get(oig.edges()[e].coord),
            None => true,
        };
        let states = oig.vertex_count() * nc;
        const NONE: usize = usize::MAX;
        let mut entry = vec![NONE; states];
        let mut prev = vec![NONE; states];
        let mut queue = VecDeque::new();
        for e in 0..oig.edge_count() {
            if !allowed(e) || self.spare(e) == 0 {
                continue;
            }
            let edge = oig.edges()[e];
            for w in [edge.u, edge.v] {
                let s = w * nc + edge.coord;
                if entry[s] == NONE {
                    entry[s] = e;
                    queue.push_back(s);
                }
            }
        }
        while let Some(s) = queue.pop_front() {
            let (w, i) = (s / nc, s % nc);
            if self.terminal_slack(w, i) >= 1 {
                let mut hops = Vec::new();
                let mut cur = s;
                while cur != NONE {
                    hops.push((entry[cur], cur / nc));
                    cur = prev[cur];
                }
                hops.reverse();
                let path = AugmentingMatching { group: restrict, hops };
                if self.bottleneck(&path) >= 1 {
                    return Search::Found(path);
                }
                continue;
            }
            for &e in oig.incident(w) {
                let j = oig.edges()[e].coord;
                if j == i || !allowed(e) || self.flow[e][self.side(e, w)] < 1 {
                    continue;
                }
                if self.transit_slack(w, i, j) < 1 {
                    continue;
                }
                let next = oig.edges()[e].other(w) * nc + j;
                if entry[next] == NONE {
                    entry[next] = e;
                    prev[next] = s;
                    queue.push_back(next);
                }
            }
        }
        Search::NotFound
    }

    /// Exhaustive search over walks that use each arc at most once, tracking
    /// cumulative loads; only the head of the walk may be over capacity.
    fn dfs(&self, budget: &mut u64) -> Option<AugmentingMatching> {
        struct Walk<'s, 'a> {
            st: &'s GroupFlowState<'a>,
            flow: Vec<[i64; 2]>,
            load: Vec<Vec<i64>>,
            used: Vec<[bool; 2]>,
            hops: Vec<(usize, usize)>,
        }
        impl Walk<'_, '_> {
            fn shift(&mut self, e: usize, w: usize, d: i64) {
                let side = self.st.side(e, w);
                self.flow[e][side] += d;
                for &g in self.st.net.edge_groups(e) {
                    self.load[g][w] += d;
                }
            }
            fn fits(&self, w: usize, groups: &[usize]) -> bool {
                groups.iter().all(|&g| self.load[g][w] <= self.st.cap[g][w])
            }
            fn rec(&mut self, budget: &mut u64) -> bool {
                if *budget == 0 {
                    return false;
                }
                *budget -= 1;
                let oig = self.st.net.oig();
                let (e_in, w) = *self.hops.last().unwrap();
                if self.fits(w, self.st.net.edge_groups(e_in)) {
                    return true;
                }
                for &e in oig.incident(w) {
                    let side = self.st.side(e, w);
                    let nxt = oig.edges()[e].other(w);
                    if e == e_in || self.flow[e][side] < 1 || self.used[e][1 - side] {
                        continue;
                    }
                    self.shift(e, w, -1);
                    if self.fits(w, self.st.net.edge_groups(e_in)) {
                        self.shift(e, nxt, 1);
                        self.used[e][1 - side] = true;
                        self.hops.push((e, nxt));
                        if self.rec(budget) {
                            return true;
                        }
                        self.hops.pop();
                        self.used[e][1 - side] = false;
                        self.shift(e, nxt, -1);
                    }
                    self.shift(e, w, 1);
                }
                false
            }
        }
        let oig = self.net.oig();
        let mut walk = Walk {
            st: self,
            flow: self.flow.clone(),
            load: self.load.clone(),
            used: vec![[false; 2]; oig.edge_count()],
            hops: Vec::new(),
        };
        for e in 0..oig.edge_count() {
            if self.spare(e) == 0 {
                continue;
            }
            let edge = oig.edges()[e];
            for w in [edge.u, edge.v] {
                let side = self.side(e, w);
                walk.shift(e, w, 1);
                walk.used[e][side] = true;
                walk.hops.push((e, w));
                if walk.rec(budget) {
                    return Some(AugmentingMatching { group: None, hops: walk.hops });
                }
                walk.hops.pop();
                walk.used[e][side] = false;
                walk.shift(e, w, -1);
            }
        }
        None
    }

    fn fallback(&mut self) -> Option<AugmentingMatching> {
        let mut budget = DFS_BUDGET;
        let found = self.dfs(&mut budget);
        if found.is_none() && budget == 0 {
            self.exhausted = false;
        }
        found
    }
}

enum Search {
    Found(AugmentingMatching),
    NotFound,
}

/// Breadth-first search in each group's residual network in id order, then
/// over all edges at once, then an exhaustive walk search with cumulative
/// load tracking. `None` once the value is |E| or nothing is found.
pub fn find_valid_augmenting_matching(state: &mut GroupFlowState) -> Option<AugmentingMatching> {
    if state.is_complete() {
        return None;
    }
    state.exhausted = true;
    for g in 0..state.net.groups().len() {
        if let Search::Found(p) = state.bfs(Some(g)) {
            return Some(p);
        }
    }
    if let Search::Found(p) = state.bfs(None) {
        return Some(p);
    }
    state.fallback()
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub matching: Matching,
    /// Unit augmentations on the scaled instance.
    pub iterations: u64,
    /// Path searches that returned an augmenting matching.
    pub searches: u64,
    pub scale: i64,
    pub complete: bool,
    /// False if an exhaustive search ran out of budget before finishing.
    pub search_exhausted: bool,
}

/// Scale multipliers tried in turn when a solve stalls below |E|.
pub const REFINEMENTS: [i64; 4] = [1, 2, 3, 4];

fn run(net: &MgNetwork, k: i64) -> Result<SolveOutcome> {
    let mut state = GroupFlowState::with_refinement(net, k)?;
    let mut searches = 0;
    while let Some(path) = find_valid_augmenting_matching(&mut state) {
        let delta = state.bottleneck(&path);
        state.apply(&path, delta)?;
        searches += 1;
    }
    Ok(SolveOutcome {
        matching: state.matching(),
        iterations: state.units(),
        searches,
        scale: state.scale(),
        complete: state.is_complete(),
        search_exhausted: state.exhausted,
    })
}

/// Runs the augmenting algorithm at scale D; if it stalls below |E|, reruns
/// at the finer scales in `REFINEMENTS` and keeps the best result.
pub fn solve_best_effort(net: &MgNetwork) -> Result<SolveOutcome> {
    let mut best: Option<SolveOutcome> = None;
    for k in REFINEMENTS {
        let out = run(net, k)?;
        if out.complete {
            return Ok(out);
        }
        if best.as_ref().is_none_or(|b| out.matching.value() > b.matching.value()) {
            best = Some(out);
        }
    }
    Ok(best.unwrap())
}

/// Only the base scale, no refinement.
pub fn solve_unrefined(net: &MgNetwork) -> Result<SolveOutcome> {
    run(net, 1)
}

/// A prediction-sufficient matching, or an error if the search stalls.
pub fn solve_matching(net: &MgNetwork) -> Result<SolveOutcome> {
    let out = solve_best_effort(net)?;
    if !out.complete {
        return Err(Error::NoAugmentingMatching {
            value: out.matching.value(),
            target: net.edge_count(),
        });
    }
    Ok(out)
}

/// Dual variables: `y` per edge node and `z[g][v]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    #[serde(with = "rational::serde_vec")]
    pub y: Vec<Rational>,
    pub z: Vec<DualRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualRow(#[serde(with = "rational::serde_vec")] pub Vec<Rational>);

impl DualCertificate {
    pub fn value(&self, net: &MgNetwork) -> Rational {
        let mut total: Rational = self.y.iter().sum();
        for (row, cap) in self.z.iter().zip(net.capacities()) {
            for (z, c) in row.0.iter().zip(cap) {
                total += z * c;
            }
        }
        total
    }

    pub fn is_feasible(&self, net: &MgNetwork) -> bool {
        let oig = net.oig();
        let nv = oig.vertex_count();
        if self.y.len() != oig.edge_count()
            || self.z.len() != net.groups().len()
            || self.z.iter().any(|r| r.0.len() != nv)
        {
            return false;
        }
        if self.y.iter().chain(self.z.iter().flat_map(|r| &r.0)).any(|x| x.is_negative()) {
            return false;
        }
        oig.edges().iter().enumerate().all(|(i, e)| {
            [e.u, e.v].iter().all(|&w| {
                let s: Rational = &self.y[i]
                    + net.edge_groups(i).iter().map(|&g| &self.z[g].0[w]).sum::<Rational>();
                s >= Rational::one()
            })
        })
    }
}

/// y = 1 on every edge, z = 0; value |E|.
pub fn trivial_dual(net: &MgNetwork) -> DualCertificate {
    DualCertificate {
        y: vec![Rational::one(); net.edge_count()],
        z: vec![DualRow(vec![Rational::zero(); net.oig().vertex_count()]); net.groups().len()],
    }
}

/// Primal and dual feasible with equal objective values.
pub fn verify_optimality(net: &MgNetwork, m: &Matching, cert: &DualCertificate) -> bool {
    m.is_feasible(net) && cert.is_feasible(net) && m.value() == cert.value(net)
}

/// LP optimum over the grid of step 1/(2L), L the lcm of capacity denominators.
pub fn brute_force_optimum(net: &MgNetwork) -> Result<Rational> {
    let ne = net.edge_count();
    if ne > 8 {
        return Err(Error::InstanceTooLarge(format!("{ne} edges, oracle limit is 8")));
    }
    if net.capacities().iter().flatten().any(|c| c.denom() > &BigInt::from(4)) {
        return Err(Error::InstanceTooLarge("capacity denominator above 4".into()));
    }
    let l = rational::lcm_denominators(net.capacities().iter().flatten())
        .to_i64()
        .unwrap();
    let step = 2 * l;
    let cap: Vec<Vec<i64>> = net
        .capacities()
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| (c * Rational::from_integer(step.into())).to_integer().min(BigInt::from(step * 9)).to_i64().unwrap())
                .collect()
        })
        .collect();
    let mut load = vec![vec![0i64; net.oig().vertex_count()]; net.groups().len()];
    let mut best = -1i64;
    fn rec(
        net: &MgNetwork,
        k: usize,
        step: i64,
        cap: &[Vec<i64>],
        load: &mut [Vec<i64>],
        acc: i64,
        best: &mut i64,
    ) {
        let ne = net.edge_count();
        if acc + step * (ne - k) as i64 <= *best {
            return;
        }
        if k == ne {
            *best = acc;
            return;
        }
        let e = net.oig().edges()[k];
        let gs = net.edge_groups(k);
        for total in (0..=step).rev() {
            for a in (0..=total).rev() {
                let b = total - a;
                let fits = gs
                    .iter()
                    .all(|&g| load[g][e.u] + a <= cap[g][e.u] && load[g][e.v] + b <= cap[g][e.v]);
                if !fits {
                    continue;
                }
                for &g in gs {
                    load[g][e.u] += a;
                    load[g][e.v] += b;
                }
                rec(net, k + 1, step, cap, load, acc + total, best);
                for &g in gs {
                    load[g][e.u] -= a;
                    load[g][e.v] -= b;
                }
                if *best == step * ne as i64 {
                    return;
                }
            }
        }
    }
    rec(net, 0, step, &cap, &mut load, 0, &mut best);
    Ok(rational::ratio(best, step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::ConceptClass;
    use crate::oig::build_oig;

    fn path_net(mode: CapacityMode) -> MgNetwork {
        let o = build_oig(&ConceptClass::thresholds(3).unwrap());
        build_network(&o, &GroupFamily::full(3).unwrap(), mode).unwrap()
    }

    fn square_net(mode: CapacityMode) -> MgNetwork {
        let o = build_oig(&ConceptClass::full_cube(2).unwrap());
        build_network(&o, &GroupFamily::singletons(2).unwrap(), mode).unwrap()
    }

    #[test]
    fn capacities_by_mode() {
        let n = path_net(CapacityMode::Exact);
        assert!(n.capacities()[0].iter().all(|c| *c == rational::ratio(3, 4)));
        let n = path_net(CapacityMode::Ceil);
        assert!(n.capacities()[0].iter().all(|c| *c == rational::int(1)));
        let n = square_net(CapacityMode::Exact);
        assert!(n.capacities().iter().flatten().all(|c| *c == rational::ratio(1, 2)));
    }

    #[test]
    fn path_ceil_solve() {
        let net = path_net(CapacityMode::Ceil);
        let out = solve_matching(&net).unwrap();
        assert_eq!(out.matching.value(), rational::int(3));
        assert!(out.matching.is_integral());
        assert!(out.matching.is_prediction_sufficient());
        assert_eq!(out.iterations, 3);
        // Each endpoint receives at most one edge.
        let oig = net.oig();
        for w in 0..oig.vertex_count() {
            let got: Rational = oig.incident(w).iter().map(|&e| out.matching.toward(oig, e, w).clone()).sum();
            assert!(got <= rational::int(1));
        }
        assert_eq!(brute_force_optimum(&net).unwrap(), rational::int(3));
    }

    #[test]
    fn square_exact_solve_is_half_everywhere() {
        let net = square_net(CapacityMode::Exact);
        let out = solve_matching(&net).unwrap();
        assert_eq!(out.scale, 2);
        assert_eq!(out.iterations, 8);
        for e in 0..4 {
            assert_eq!(*out.matching.to_u(e), rational::ratio(1, 2));
            assert_eq!(*out.matching.to_v(e), rational::ratio(1, 2));
        }
        assert!(!out.matching.is_integral());
        assert!(verify_optimality(&net, &out.matching, &trivial_dual(&net)));
        assert_eq!(brute_force_optimum(&net).unwrap(), rational::int(4));
    }

    #[test]
    fn empty_edge_set() {
        let o = build_oig(&ConceptClass::from_strs(&["01"]).unwrap());
        let net = build_network(&o, &GroupFamily::full(2).unwrap(), CapacityMode::Exact).unwrap();
        let out = solve_matching(&net).unwrap();
        assert_eq!(out.matching.value(), rational::int(0));
        assert_eq!(trivial_dual(&net).value(&net), rational::int(0));
        assert!(out.matching.is_prediction_sufficient());
    }

    #[test]
    fn sufficiency_and_duality_negatives() {
        let net = square_net(CapacityMode::Exact);
        let z = Matching::zeros(4);
        assert!(!z.is_prediction_sufficient());
        assert!(!verify_optimality(&net, &z, &trivial_dual(&net)));
        assert_eq!(trivial_dual(&net).value(&net), rational::int(4));
        let mut half = Matching::zeros(4);
        half.to_u[0] = rational::ratio(1, 2);
        assert!(!half.is_prediction_sufficient());
        let mut over = Matching::zeros(4);
        over.to_u[0] = rational::int(1);
        assert!(!over.is_feasible(&net));
    }

    #[test]
    fn first_bfs_hit_on_fresh_path() {
        let net = path_net(CapacityMode::Ceil);
        let mut st = GroupFlowState::new(&net).unwrap();
        let p = find_valid_augmenting_matching(&mut st).unwrap();
        assert_eq!(p.arcs().len(), 3);
        assert_eq!(p.arcs()[0], ResidualArc::Source { edge: 0 });
    }

    #[test]
    fn single_edge_unique_path() {
        let o = build_oig(&ConceptClass::from_strs(&["0", "1"]).unwrap());
        let net = build_network(&o, &GroupFamily::full(1).unwrap(), CapacityMode::Ceil).unwrap();
        let mut st = GroupFlowState::new(&net).unwrap();
        let p = find_valid_augmenting_matching(&mut st).unwrap();
        assert_eq!(
            p.arcs(),
            vec![
                ResidualArc::Source { edge: 0 },
                ResidualArc::Forward { edge: 0, vertex: 0 },
                ResidualArc::Sink { vertex: 0 }
            ]
        );
        assert!(st.step());
        assert!(find_valid_augmenting_matching(&mut st).is_none());
    }

    #[test]
    fn zero_capacity_oracle() {
        let o = build_oig(&ConceptClass::thresholds(2).unwrap());
        let groups = GroupFamily::full(2).unwrap();
        let caps = vec![vec![Rational::zero(); 3]];
        let net = build_network_explicit(&o, &groups, caps).unwrap();
        assert_eq!(brute_force_optimum(&net).unwrap(), rational::int(0));
        assert_eq!(net.warnings().len(), 1);
        let out = solve_best_effort(&net).unwrap();
        assert!(!out.complete);
        assert!(matches!(solve_matching(&net), Err(Error::NoAugmentingMatching { .. })));
    }

    #[test]
    fn backward_moves_are_needed() {
        // Star: center 000 with three leaves, caps 1 each; every path ends at a leaf.
        let c = ConceptClass::from_strs(&["000", "100", "010", "001"]).unwrap();
        let o = build_oig(&c);
        let net = build_network(&o, &GroupFamily::full(3).unwrap(), CapacityMode::Ceil).unwrap();
        let out = solve_matching(&net).unwrap();
        assert_eq!(out.matching.value(), rational::int(3));
        assert!(verify_optimality(&net, &out.matching, &trivial_dual(&net)));
    }

    #[test]
    fn state_invariants_each_step() {
        let o = build_oig(&ConceptClass::full_cube(3).unwrap());
        let net = build_network(&o, &GroupFamily::singletons(3).unwrap(), CapacityMode::Exact).unwrap();
        let mut st = GroupFlowState::new(&net).unwrap();
        let mut prev = 0;
        while st.step() {
            assert!(st.is_feasible());
            assert_eq!(st.units(), prev + 1);
            prev = st.units();
        }
        assert_eq!(st.units(), st.target_units());
        assert!(st.matching().is_prediction_sufficient());
    }
}
