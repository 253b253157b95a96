use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_json, read_model, CliError};
use crate::dispatch::DispatchPolicy;
use crate::mcs::McsConfig;
use crate::planner::{
    CandidateGrid, CostModel, PlanInputs, ProtectionConfig, ReliabilityTargets, ScarcityConfig,
    SearchConfig,
};
use crate::scenario::{assemble, load_scenario_file};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Path(PathBuf),
    Weighted {
        path: PathBuf,
        #[serde(default = "unit")]
        weight: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl ScenarioRef {
    fn parts(&self) -> (&Path, f64) {
        match self {
            ScenarioRef::Path(p) => (p, 1.0),
            ScenarioRef::Weighted { path, weight } => (path, *weight),
        }
    }
}

/// On-disk planning request. Relative paths resolve against the plan file's
/// directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub system: PathBuf,
    pub scenarios: Vec<ScenarioRef>,
    #[serde(default)]
    pub candidate_grid: CandidateGrid,
    #[serde(default)]
    pub targets: ReliabilityTargets,
    #[serde(default)]
    pub cost_model: CostModel,
    #[serde(default)]
    pub policy: DispatchPolicy,
    #[serde(default)]
    pub mcs: Option<McsConfig>,
    #[serde(default)]
    pub verification: Option<McsConfig>,
    #[serde(default)]
    pub protection: ProtectionConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub scarcity: ScarcityConfig,
}

pub struct LoadedPlan {
    pub file: PlanFile,
    pub inputs: PlanInputs,
    /// Every file read, plan first.
    pub paths: Vec<PathBuf>,
}

impl PlanFile {
    pub fn load(path: &Path) -> Result<LoadedPlan, CliError> {
        let file: PlanFile = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let system_path = resolve(&file.system);
        let template = read_model(&system_path)?;
        if file.scenarios.is_empty() {
            return Err(CliError::Input(format!(
                "{}: `scenarios` must list at least one file",
                path.display()
            )));
        }
        let mut paths = vec![path.to_path_buf(), system_path];
        let mut all = Vec::new();
        let mut weights = Vec::new();
        for r in &file.scenarios {
            let (p, w) = r.parts();
            let p = resolve(p);
            let set = load_scenario_file(&p)?;
            for s in set.scenarios {
                weights.push(w * s.probability);
                all.push(s);
            }
            paths.push(p);
        }
        let scenarios = assemble(all, &weights)?;
        let inputs = PlanInputs {
            template,
            scenarios,
            policy: file.policy.clone(),
            grid: file.candidate_grid.clone(),
            targets: file.targets,
            cost_model: file.cost_model.clone(),
            mcs: file.mcs.clone(),
            verification: file.verification.clone(),
            protection: file.protection.clone(),
            search: file.search.clone(),
            scarcity: file.scarcity.clone(),
        };
        Ok(LoadedPlan {
            file,
            inputs,
            paths,
        })
    }
}
