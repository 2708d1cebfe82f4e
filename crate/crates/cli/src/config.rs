//! Experiment configuration: parsing, validation and resolution into library objects.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use mgoig::agnostic::AgnosticOigLearner;
use mgoig::evaluation::DiscreteTask;
use mgoig::learner::{AgnosticMixture, ErmLearner, MgOigLearner, Predictor, PrefixMajority};
use mgoig::{rational, vc_restricted, Behavior, CapacityMode, ConceptClass, GroupFamily, Rational, SetDescriptor};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    OigAudit,
    MatchSolve,
    Transductive,
    Prediction,
    Pac,
    Agnostic,
    Covering,
    Lowerbound,
    ErmVsMgoig,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::OigAudit => "oig-audit",
            Experiment::MatchSolve => "match-solve",
            Experiment::Transductive => "transductive",
            Experiment::Prediction => "prediction",
            Experiment::Pac => "pac",
            Experiment::Agnostic => "agnostic",
            Experiment::Covering => "covering",
            Experiment::Lowerbound => "lowerbound",
            Experiment::ErmVsMgoig => "erm-vs-mgoig",
        }
    }

    fn needs_n_grid(self) -> bool {
        !matches!(self, Experiment::OigAudit | Experiment::MatchSolve | Experiment::Covering)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerChoice {
    Mgoig,
    Majority,
    Agnostic,
    Mixture,
    Erm,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalChoice {
    #[default]
    Exact,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Masses {
    Named(String),
    List(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub masses: Masses,
    /// Target concept as a bit string (realizable mode).
    #[serde(default)]
    pub target: Option<String>,
    /// P(y = 1 | x) per point as "p/q" strings (agnostic mode).
    #[serde(default)]
    pub p_one: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailGrid {
    pub k: Vec<usize>,
    pub delta: Vec<f64>,
    pub t: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub domain: Option<usize>,
    #[serde(default)]
    pub hypotheses: Option<SetDescriptor>,
    #[serde(default)]
    pub groups: Option<SetDescriptor>,
    #[serde(default)]
    pub task: Option<TaskSpec>,
    #[serde(default = "default_learner")]
    pub learner: LearnerChoice,
    #[serde(default)]
    pub mode: CapacityMode,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub epsilon: Option<String>,
    #[serde(default)]
    pub eval: EvalChoice,
    /// Number of points I of the lower-bound instance.
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub tail: Option<TailGrid>,
    /// Output directory; falls back to MGOIG_OUT_DIR, then the working directory.
    #[serde(default)]
    pub output: Option<String>,
}

fn default_learner() -> LearnerChoice {
    LearnerChoice::Mgoig
}

fn default_trials() -> usize {
    1000
}

fn default_delta() -> f64 {
    0.1
}

pub const OUT_DIR_ENV: &str = "MGOIG_OUT_DIR";

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("config-invalid: {}", path.display()))?;
        Ok(cfg)
    }

    pub fn id(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.experiment.name().to_string())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var(OUT_DIR_ENV).ok())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Schema checks that need no computation.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(anyhow!("config-invalid: {msg}"));
        if self.experiment.needs_n_grid() && self.n_grid.is_empty() {
            return fail("n_grid must not be empty".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta must be in (0,1), got {}", self.delta));
        }
        if self.trials == 0 {
            return fail("trials must be positive".into());
        }
        match self.experiment {
            Experiment::Lowerbound => {
                if self.points.is_none() || self.epsilon.is_none() {
                    return fail("lowerbound needs points and epsilon".into());
                }
            }
            _ => {
                if self.domain.is_none() || self.hypotheses.is_none() || self.groups.is_none() {
                    return fail("domain, hypotheses and groups are required".into());
                }
            }
        }
        if matches!(self.experiment, Experiment::Prediction | Experiment::Pac | Experiment::ErmVsMgoig | Experiment::Covering)
            && self.task.is_none()
        {
            return fail(format!("{} needs a task", self.experiment.name()));
        }
        if self.experiment == Experiment::Covering && self.epsilon.is_none() {
            return fail("covering needs epsilon".into());
        }
        if let Some(eps) = &self.epsilon {
            rational::parse(eps).map_err(|e| anyhow!("config-invalid: epsilon: {e}"))?;
        }
        Ok(())
    }

    pub fn epsilon(&self) -> Result<Rational> {
        let s = self.epsilon.as_ref().ok_or_else(|| anyhow!("config-invalid: epsilon missing"))?;
        Ok(rational::parse(s)?)
    }

    pub fn domain(&self) -> Result<usize> {
        self.domain.ok_or_else(|| anyhow!("config-invalid: domain missing"))
    }

    pub fn class(&self) -> Result<ConceptClass> {
        let d = self.hypotheses.as_ref().ok_or_else(|| anyhow!("config-invalid: hypotheses missing"))?;
        Ok(d.to_class(self.domain()?)?)
    }

    pub fn group_family(&self) -> Result<GroupFamily> {
        let d = self.groups.as_ref().ok_or_else(|| anyhow!("config-invalid: groups missing"))?;
        Ok(d.to_groups(self.domain()?)?)
    }

    pub fn task(&self, h: &ConceptClass, g: &GroupFamily) -> Result<DiscreteTask> {
        let spec = self.task.as_ref().ok_or_else(|| anyhow!("config-invalid: task missing"))?;
        build_task(spec, self.domain()?, h, g)
    }

    pub fn learner(&self, h: &ConceptClass, g: &GroupFamily) -> Result<Arc<dyn Predictor>> {
        make_learner(self.learner, self.mode, self.delta, h, g)
    }
}

pub fn build_task(spec: &TaskSpec, m: usize, h: &ConceptClass, g: &GroupFamily) -> Result<DiscreteTask> {
    let masses = match &spec.masses {
        Masses::Named(s) if s == "uniform" => DiscreteTask::uniform(m),
        Masses::Named(s) => bail!("config-invalid: unknown mass preset {s:?}"),
        Masses::List(v) => v.iter().map(|s| rational::parse(s)).collect::<mgoig::Result<_>>()?,
    };
    if masses.len() != m {
        bail!("config-invalid: {} masses for a domain of {m} points", masses.len());
    }
    match (&spec.target, &spec.p_one) {
        (Some(t), None) => {
            let t: Behavior = t.parse()?;
            Ok(DiscreteTask::realizable(masses, t, h, g)?)
        }
        (None, Some(p)) => {
            let p = p.iter().map(|s| rational::parse(s)).collect::<mgoig::Result<_>>()?;
            Ok(DiscreteTask::agnostic(masses, p)?)
        }
        _ => bail!("config-invalid: task needs exactly one of target or p_one"),
    }
}

pub fn make_learner(
    choice: LearnerChoice,
    mode: CapacityMode,
    delta: f64,
    h: &ConceptClass,
    g: &GroupFamily,
) -> Result<Arc<dyn Predictor>> {
    let base = || -> Result<Arc<dyn Predictor>> { Ok(Arc::new(MgOigLearner::new(h.clone(), g.clone(), mode)?)) };
    Ok(match choice {
        LearnerChoice::Mgoig => base()?,
        LearnerChoice::Majority => Arc::new(PrefixMajority::new(base()?)),
        LearnerChoice::Agnostic => Arc::new(AgnosticOigLearner::new(h.clone(), g.clone())?),
        LearnerChoice::Mixture => {
            let d = g.groups().iter().map(|x| vc_restricted(h, x)).max().unwrap_or(0);
            let agn: Arc<dyn Predictor> = Arc::new(AgnosticOigLearner::new(h.clone(), g.clone())?);
            Arc::new(AgnosticMixture::new(agn, delta, d)?)
        }
        LearnerChoice::Erm => Arc::new(ErmLearner::new(h.clone(), g.clone())?),
    })
}
