//! One runner per experiment kind; each returns CSV rows plus free-form notes.

use std::sync::Arc;

use anyhow::{bail, Result};
use mgoig::agnostic::AgnosticOigLearner;
use mgoig::density::group_density;
use mgoig::evaluation::{
    agnostic_transductive_error_exact, build_lower_bound_instance, greedy_l1_cover, lemma24_tail,
    lower_bound_failure_prob, mean_and_half_width, mg_covering_number, pac_bound, pac_from_trials,
    prediction_error, sup_group_error, transductive_error_exact, trial_errors, trial_rng, DiscreteTask, EvalMode,
    Z99,
};
use mgoig::learner::{MgOigLearner, Predictor};
use mgoig::matching::solve_best_effort;
use mgoig::*;
use num_traits::Zero;
use serde_json::json;

use crate::config::{make_learner, EvalChoice, Experiment, ExperimentConfig, LearnerChoice};
use crate::output::Row;

pub struct RunOutput {
    pub rows: Vec<Row>,
    pub notes: Vec<String>,
    /// Extra artifacts as (file suffix, contents).
    pub artifacts: Vec<(String, String)>,
}

impl RunOutput {
    fn new() -> Self {
        RunOutput { rows: Vec::new(), notes: Vec::new(), artifacts: Vec::new() }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::OigAudit => oig_audit(cfg),
        Experiment::MatchSolve => match_solve(cfg),
        Experiment::Transductive => transductive(cfg),
        Experiment::Prediction => prediction(cfg),
        Experiment::Pac => pac(cfg),
        Experiment::Agnostic => agnostic(cfg),
        Experiment::Covering => covering(cfg),
        Experiment::Lowerbound => lowerbound(cfg),
        Experiment::ErmVsMgoig => erm_vs_mgoig(cfg),
    }
}

fn int(k: usize) -> Rational {
    rational::int(k as i64)
}

fn label(cfg: &ExperimentConfig) -> String {
    match cfg.learner {
        LearnerChoice::Mgoig => format!("mgoig-{}", mode_name(cfg.mode)),
        LearnerChoice::Majority => format!("majority(mgoig-{})", mode_name(cfg.mode)),
        other => format!("{other:?}").to_lowercase(),
    }
}

pub fn mode_name(mode: CapacityMode) -> &'static str {
    match mode {
        CapacityMode::Exact => "exact",
        CapacityMode::Ceil => "ceil",
    }
}

fn oig_audit(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (h, g) = (cfg.class()?, cfg.group_family()?);
    let c = enumerate_group_realizable(&h, &g)?;
    let oig = Oig::build(&c, Some(&g));
    let mut out = RunOutput::new();
    out.rows.push(Row::new(cfg, "", None, None, "vertices").value_exact(&int(oig.vertex_count())));
    out.rows.push(Row::new(cfg, "", None, None, "edges").value_exact(&int(oig.edge_count())));
    for (gi, grp) in g.groups().iter().enumerate() {
        let r = group_density(&oig, grp);
        let d = int(vc_restricted(&h, grp));
        let ok = r.density <= d && r.verify(&oig)?;
        out.rows.push(Row::new(cfg, "", Some(gi), None, "density").value_exact(&r.density).bound_exact(&d).checked(ok));
    }
    out.artifacts.push(("oig.json".into(), serde_json::to_string_pretty(&oig.dump())? + "\n"));
    out.artifacts.push(("oig.dot".into(), oig.to_dot()));
    Ok(out)
}

fn match_solve(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (h, g) = (cfg.class()?, cfg.group_family()?);
    let c = enumerate_group_realizable(&h, &g)?;
    let oig = Oig::build(&c, Some(&g));
    let net = build_network(&oig, &g, cfg.mode)?;
    let solved = solve_best_effort(&net)?;
    let m = &solved.matching;
    let who = format!("matching-{}", mode_name(cfg.mode));
    let edges = int(net.edge_count());
    let mut out = RunOutput::new();
    out.notes.extend(net.warnings().iter().cloned());
    if !solved.complete && !solved.search_exhausted {
        out.notes.push("augmenting search hit its budget before finishing".into());
    }
    out.rows.push(Row::new(cfg, &who, None, None, "value").value_exact(&m.value()).bound_exact(&edges).checked(solved.complete));
    out.rows.push(Row::new(cfg, &who, None, None, "integral").value_exact(&int(m.is_integral() as usize)));
    out.rows.push(Row::new(cfg, &who, None, None, "iterations").value_exact(&int(solved.iterations as usize)));
    let gap = trivial_dual(&net).value(&net) - m.value();
    let optimal = verify_optimality(&net, m, &trivial_dual(&net));
    out.rows.push(Row::new(cfg, &who, None, None, "duality_gap").value_exact(&gap).bound_exact(&Rational::zero()).checked(optimal));
    let dump = json!({ "network": net.dump(), "matching": m.dump(&oig), "complete": solved.complete, "scale": solved.scale });
    out.artifacts.push(("matching.json".into(), serde_json::to_string_pretty(&dump)? + "\n"));
    Ok(out)
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    (0u64..1 << m)
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| (0..m).filter(|&i| s >> i & 1 == 1).collect())
        .collect()
}

fn transductive(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (h, g) = (cfg.class()?, cfg.group_family()?);
    let m = h.points();
    let learner = MgOigLearner::new(h.clone(), g.clone(), cfg.mode)?;
    let c = enumerate_group_realizable(&h, &g)?;
    let who = format!("mgoig-{}", mode_name(cfg.mode));
    let mut out = RunOutput::new();
    for &n in &cfg.n_grid {
        if n == 0 || n > m {
            bail!("config-invalid: transductive n must be in 1..={m}, got {n}");
        }
        let tuples = combinations(m, n);
        for (gi, grp) in g.groups().iter().enumerate() {
            let mut worst = Rational::zero();
            let mut worst_cap = Rational::zero();
            let mut ok = true;
            for t in &tuples {
                for target in c.members() {
                    let r = transductive_error_exact(&learner, t, target, grp)?;
                    ok &= r.consistent();
                    worst = worst.max(r.closed_form.clone());
                    worst_cap = worst_cap.max(r.capacity_bound.clone());
                }
            }
            let d = rational::ratio(vc_restricted(&h, grp) as i64, n as i64);
            out.rows.push(Row::new(cfg, &who, Some(gi), Some(n), "transductive").value_exact(&worst).bound_exact(&d).checked(ok));
            out.rows.push(
                Row::new(cfg, &who, Some(gi), Some(n), "transductive_capacity")
                    .value_exact(&worst_cap)
                    .bound_exact(&d)
                    .checked(worst_cap <= d),
            );
        }
    }
    Ok(out)
}

fn prediction(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (h, g) = (cfg.class()?, cfg.group_family()?);
    let task = cfg.task(&h, &g)?;
    let learner = cfg.learner(&h, &g)?;
    let who = label(cfg);
    // The d/(n+1) bound is a claim about the base learner only.
    let bound = (cfg.learner == LearnerChoice::Mgoig && task.is_realizable()).then_some(&h);
    let mut out = RunOutput::new();
    for &n in &cfg.n_grid {
        let mode = match cfg.eval {
            EvalChoice::Exact => EvalMode::Exact,
            EvalChoice::Mc => EvalMode::MonteCarlo { trials: cfg.trials, seed: cfg.seed },
        };
        let r = prediction_error(learner.as_ref(), &task, &g, n, mode, bound)?;
        for e in &r.entries {
            out.rows.push(Row::from_entry(cfg, &who, n, "prediction", e));
            if let Some(cond) = &e.conditional {
                let row = Row::new(cfg, &who, e.group_id, Some(n), "prediction_conditional");
                out.rows.push(if e.value_exact { row.value_exact(cond) } else { row.value_mean(cond) });
            }
        }
    }
    Ok(out)
}

fn pac(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (h, g) = (cfg.class()?, cfg.group_family()?);
    let task = cfg.task(&h, &g)?;
    let learner = cfg.learner(&h, &g)?;
    let who = label(cfg);
    let d_sup = g.groups().iter().map(|x| vc_restricted(&h, x)).max().unwrap_or(0);
    let mut out = RunOutput::new();
    out.notes.push(format!("sup-d rows use d = {d_sup} for every group"));
    for &n in &cfg.n_grid {
        let per = trial_errors(learner.as_ref(), &task, &g, n, cfg.trials, cfg.seed)?;
        let r = pac_from_trials(&task, &g, &h, n, cfg.delta, &per)?;
        for e in &r.entries {
            out.rows.push(Row::from_entry(cfg, &who, n, "pac_quantile", e));
            let b = pac_bound(task.is_realizable(), d_sup, n, cfg.delta);
            out.rows.push(
                Row::new(cfg, &who, e.group_id, Some(n), "pac_quantile_sup_d")
                    .value_mean(&e.value)
                    .bound_f64(b)
                    .satisfied(rational::to_f64(&e.value) <= b),
            );
        }
        let maxima: Vec<f64> = per
            .iter()
            .map(|row| row.iter().map(rational::to_f64).fold(0.0, f64::max))
            .collect();
        let (mean, hw) = mean_and_half_width(&maxima);
        out.rows.push(Row::new(cfg, &who, None, Some(n), "sup_group").sup_group().value_f64(mean).half_width(Some(hw)));
    }
    Ok(out)
}

fn agnostic(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (h, g) = (cfg.class()?, cfg.group_family()?);
    let learner = AgnosticOigLearner::new(h.clone(), g.clone())?;
    let m = h.points();
    // Without a task: uniform points with fair coin labels.
    let task = match &cfg.task {
        Some(_) => cfg.task(&h, &g)?,
        None => DiscreteTask::agnostic(DiscreteTask::uniform(m), vec![rational::ratio(1, 2); m])?,
    };
    let mut out = RunOutput::new();
    for &n in &cfg.n_grid {
        if n == 0 || n > mgoig::agnostic::MAX_COORDS {
            bail!("config-invalid: agnostic n must be in 1..={}, got {n}", mgoig::agnostic::MAX_COORDS);
        }
        let samples: Vec<LabeledSample> = (0..cfg.trials)
            .map(|t| {
                let mut rng = trial_rng(cfg.seed, t as u64);
                task.draw_sample(n, &mut rng)
            })
            .collect();
        for (gi, grp) in g.groups().iter().enumerate() {
            let (mut sum, mut sum_phi, mut max_phi) = (Rational::zero(), Rational::zero(), Rational::zero());
            let mut ok = true;
            for s in &samples {
                let r = agnostic_transductive_error_exact(&learner, s, grp)?;
                ok &= r.closed_form <= r.phi_bound;
                ok &= r.permutation_average.as_ref().is_none_or(|p| *p == r.closed_form);
                sum += &r.closed_form;
                sum_phi += &r.phi_bound;
                max_phi = max_phi.max(r.phi_bound);
            }
            let t = int(samples.len());
            let rate = 16.0 * (vc_restricted(&h, grp) as f64 / n as f64).sqrt();
            out.rows.push(
                Row::new(cfg, "mgoig-agnostic", Some(gi), Some(n), "agnostic_transductive")
                    .value_exact(&(sum / &t))
                    .bound_exact(&(sum_phi / &t))
                    .checked(ok),
            );
            out.rows.push(
                Row::new(cfg, "mgoig-agnostic", Some(gi), Some(n), "agnostic_phi_rate")
                    .value_exact(&max_phi)
                    .bound_f64(rate)
                    .satisfied(rational::to_f64(&max_phi) <= rate),
            );
        }
    }
    Ok(out)
}

fn covering(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (h, g) = (cfg.class()?, cfg.group_family()?);
    let task = cfg.task(&h, &g)?;
    let eps = cfg.epsilon()?;
    let cover = greedy_l1_cover(&g, &task, &eps)?;
    let r = mg_covering_number(&g, &task, &eps)?;
    let mut out = RunOutput::new();
    let size = int(cover.members.len());
    out.rows.push(
        Row::new(cfg, "", None, None, "l1_cover_size")
            .value_exact(&size)
            .bound_f64(cover.size_bound)
            .satisfied(cover.within_bound),
    );
    let chain = r.number <= cover.members.len() && cover.members.len() <= g.len();
    out.rows.push(Row::new(cfg, "", None, None, "mg_covering_number").value_exact(&int(r.number)).bound_exact(&size).checked(chain));
    out.rows.push(Row::new(cfg, "", None, None, "group_count").value_exact(&int(g.len())));
    out.notes.push(format!(
        "cover {:?}, witness {:?}, {}",
        cover.members,
        r.witness,
        if r.exact { "exact minimum" } else { "greedy upper bound" }
    ));
    Ok(out)
}

fn lowerbound(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let inst = build_lower_bound_instance(cfg.points.unwrap(), cfg.epsilon()?)?;
    let learner = make_learner(cfg.learner, cfg.mode, cfg.delta, &inst.class, &inst.groups)?;
    let who = label(cfg);
    let mut out = RunOutput::new();
    out.rows.push(Row::new(cfg, "", None, None, "n2").value_f64(inst.n2));
    out.rows.push(Row::new(cfg, "", None, None, "n1").value_f64(inst.n1));
    for &n in &cfg.n_grid {
        let r = lower_bound_failure_prob(&inst, learner.as_ref(), n, cfg.trials, cfg.seed)?;
        let mut row = Row::new(cfg, &who, None, Some(n), "failure_prob")
            .sup_group()
            .value_f64(r.probability)
            .bound_f64(0.5)
            .half_width(Some(r.half_width));
        if (n as f64) < inst.n2 {
            row = row.satisfied(r.probability >= 0.5 - 3.0 * r.half_width / Z99);
        }
        out.rows.push(row);
        out.notes.push(format!("n = {n}: worst labelling {} of {} tried", r.worst, r.labellings));
    }
    if let Some(tail) = &cfg.tail {
        for &k in &tail.k {
            for &delta in &tail.delta {
                for &t in &tail.t {
                    let r = lemma24_tail(k, delta, t, cfg.trials, cfg.seed)?;
                    out.rows.push(
                        Row::new(cfg, "", None, None, &format!("lemma24_tail[k={k};delta={delta};t={t}]"))
                            .value_f64(r.estimate)
                            .bound_f64(r.bound)
                            .half_width(Some(r.half_width))
                            .satisfied(r.estimate <= r.bound + 3.0 * r.half_width / Z99),
                    );
                }
            }
        }
    }
    Ok(out)
}

fn erm_vs_mgoig(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (h, g) = (cfg.class()?, cfg.group_family()?);
    let task = cfg.task(&h, &g)?;
    let choice = if cfg.learner == LearnerChoice::Erm { LearnerChoice::Mgoig } else { cfg.learner };
    let mut view = cfg.clone();
    view.learner = choice;
    let mg: Arc<dyn Predictor> = make_learner(choice, cfg.mode, cfg.delta, &h, &g)?;
    let erm = make_learner(LearnerChoice::Erm, cfg.mode, cfg.delta, &h, &g)?;
    let mut out = RunOutput::new();
    for &n in &cfg.n_grid {
        let a = sup_group_error(mg.as_ref(), &task, &g, n, cfg.trials, cfg.seed)?;
        let e = sup_group_error(erm.as_ref(), &task, &g, n, cfg.trials, cfg.seed)?;
        let (ea, ee) = (&a.entries[0], &e.entries[0]);
        out.rows.push(Row::from_entry(cfg, &label(&view), n, "sup_group", ea));
        out.rows.push(Row::from_entry(cfg, "erm", n, "sup_group", ee));
        out.rows.push(
            Row::new(cfg, &label(&view), None, Some(n), "separation")
                .sup_group()
                .value_f64(rational::to_f64(&ea.value) - rational::to_f64(&ee.value))
                .bound_f64(0.0)
                .satisfied(ea.value <= ee.value),
        );
    }
    Ok(out)
}
