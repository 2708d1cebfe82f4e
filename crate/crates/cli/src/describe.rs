//! Human-readable plan for a config: sizes, densities and budgets.

use std::fmt::Write;

use anyhow::Result;
use mgoig::agnostic::MAX_COORDS;
use mgoig::concept::ENUMERATION_CAP;
use mgoig::density::group_density;
use mgoig::evaluation::{build_lower_bound_instance, EXACT_BUDGET};
use mgoig::{enumerate_group_realizable, rational, vc_restricted, CapacityMode, Oig};

use crate::config::{EvalChoice, Experiment, ExperimentConfig};
use crate::experiments::mode_name;

pub fn describe(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let mut s = String::new();
    writeln!(s, "experiment {} (id {}), seed {}", cfg.experiment.name(), cfg.id(), cfg.seed)?;
    if cfg.experiment == Experiment::Lowerbound {
        let inst = build_lower_bound_instance(cfg.points.unwrap(), cfg.epsilon()?)?;
        writeln!(s, "lower-bound instance: {} points, singleton groups, full cube", inst.points)?;
        writeln!(s, "n2 = {:.4}, n1 = {:.4}, d = {}", inst.n2, inst.n1, inst.d)?;
        writeln!(s, "labellings tried per n: {}", if inst.points <= 10 { 1usize << inst.points } else { 3 })?;
        return Ok(s);
    }
    let m = cfg.domain()?;
    let (h, g) = (cfg.class()?, cfg.group_family()?);
    writeln!(s, "domain {m} points, |H| = {}, |G| = {}", h.len(), g.len())?;
    let max_n = cfg.n_grid.iter().copied().max().unwrap_or(0);
    if cfg.experiment == Experiment::Agnostic && max_n > MAX_COORDS {
        writeln!(s, "warning: agnostic graph at n = {max_n} exceeds the {MAX_COORDS}-coordinate budget")?;
    }
    if cfg.experiment == Experiment::Agnostic && max_n > 7 {
        writeln!(s, "note: permutation cross-check skipped above n = 7")?;
    }
    if m > ENUMERATION_CAP {
        writeln!(s, "warning: full-domain enumeration capped at {ENUMERATION_CAP} points; only sample-sized graphs are built")?;
    } else {
        let c = enumerate_group_realizable(&h, &g)?;
        let oig = Oig::build(&c, Some(&g));
        let dens: Vec<String> = g.groups().iter().map(|x| rational::format(&group_density(&oig, x).density)).collect();
        let groups = if g.len() == 1 { "1 group".to_string() } else { format!("{} groups", g.len()) };
        let d_g = if dens.len() == 1 { dens[0].clone() } else { format!("[{}]", dens.join(", ")) };
        writeln!(s, "{} vertices, {} edges, {groups}, d_g={d_g}", oig.vertex_count(), oig.edge_count())?;
        let caps: Vec<String> = g
            .groups()
            .iter()
            .map(|x| {
                let d = group_density(&oig, x).density;
                match cfg.mode {
                    CapacityMode::Exact => rational::format(&d),
                    CapacityMode::Ceil => rational::format(&rational::ceil(&d)),
                }
            })
            .collect();
        let vcs: Vec<String> = g.groups().iter().map(|x| vc_restricted(&h, x).to_string()).collect();
        writeln!(s, "capacities ({}): [{}], d_H|g: [{}]", mode_name(cfg.mode), caps.join(", "), vcs.join(", "))?;
    }
    if let (Some(task), true) = (&cfg.task, cfg.experiment == Experiment::Prediction && cfg.eval == EvalChoice::Exact) {
        let t = crate::config::build_task(task, m, &h, &g)?;
        let k = t.outcomes().len() as u128;
        for &n in &cfg.n_grid {
            let count = k.checked_pow(n as u32);
            let fits = count.is_some_and(|c| c <= EXACT_BUDGET);
            let shown = count.map(|c| c.to_string()).unwrap_or_else(|| "overflow".into());
            writeln!(
                s,
                "exact enumeration at n = {n}: {shown} sequences ({})",
                if fits { "within budget" } else { "exceeds budget" }
            )?;
        }
    }
    if !cfg.n_grid.is_empty() {
        writeln!(s, "n grid {:?}, trials {}", cfg.n_grid, cfg.trials)?;
    }
    Ok(s)
}
