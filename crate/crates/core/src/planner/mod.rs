//! Reliability-constrained sizing of distributed energy resources.
//!
//! Candidates are instantiated from a template system, dispatched over the
//! scenario set, stressed with sequential Monte Carlo, priced over the
//! planning horizon and filtered against reliability targets.

mod economics;
mod search;

pub use economics::{lcoe, lcoe_from_streams, AnnualFlows, CostBreakdown, CostModel};
pub use search::{
    frontier, search, storage_duration_recommendation, CandidateGrid, FrontierPoint, PlanInputs,
    PlanResult, PlanStatus, ScarcityConfig, SearchConfig, StageEntry,
};

use serde::{Deserialize, Serialize};

use crate::dispatch::{self, AvailabilityMask, DispatchError, DispatchPolicy};
use crate::indices::{
    adequacy_probabilistic, customer_indices, AdequacyIndices, CustomerIndices, IndexError,
};
use crate::mcs::{self, McsConfig, McsError};
use crate::model::{
    GeneratorKind, GeneratorUnit, ModelError, Priority, StorageUnit, SystemModel, TierValues,
    HOURS_PER_YEAR,
};
use crate::scenario::{ScenarioError, ScenarioSet};

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("invalid plan: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Mcs(#[from] McsError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignCandidate {
    pub pv_kw: f64,
    pub wind_kw: f64,
    pub dispatchable_kw: f64,
    pub storage_kwh: f64,
    pub storage_kw: f64,
    pub grid_connected: bool,
}

/// Per-tier annual shed limits, kWh/yr. Absent tiers are unconstrained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TierLimits {
    pub critical: Option<f64>,
    pub essential: Option<f64>,
    pub non_critical: Option<f64>,
}

impl TierLimits {
    pub fn get(&self, tier: Priority) -> Option<f64> {
        match tier {
            Priority::Critical => self.critical,
            Priority::Essential => self.essential,
            Priority::NonCritical => self.non_critical,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReliabilityTargets {
    /// Hours per year.
    pub lole_max: Option<f64>,
    /// kWh per year.
    pub eens_max: Option<f64>,
    pub tier_shed_max: TierLimits,
}

impl ReliabilityTargets {
    pub fn check(&self) -> Result<(), PlanError> {
        let values = [
            self.lole_max,
            self.eens_max,
            self.tier_shed_max.critical,
            self.tier_shed_max.essential,
            self.tier_shed_max.non_critical,
        ];
        if values
            .iter()
            .flatten()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(PlanError::Invalid(
                "reliability targets must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

fn default_multiple() -> f64 {
    1.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtectionConfig {
    /// Fault current delivered by inverters as a multiple of their rating.
    #[serde(default = "default_multiple")]
    pub fault_current_multiple: f64,
    /// Minimum ratio of inverter fault current to peak load; 0 disables the rule.
    #[serde(default)]
    pub min_fault_current_ratio: f64,
    /// Grid-tie component id; defaults to the template's grid reference.
    #[serde(default)]
    pub grid_tie_component: Option<String>,
}

impl Default for ProtectionConfig {
    fn default() -> Self {
        ProtectionConfig {
            fault_current_multiple: default_multiple(),
            min_fault_current_ratio: 0.0,
            grid_tie_component: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtectionCheck {
    pub pass: bool,
    pub fault_current_ratio: Option<f64>,
    pub reasons: Vec<String>,
}

pub const RULE_FAULT_CURRENT: &str = "fault-current ratio";
pub const RULE_GRID_TIE: &str = "grid-tie component";

/// Rule checks standing in for protection coordination: inverter fault
/// current against peak load, and a grid-tie component for grid-connected
/// designs.
pub fn protection_feasibility(
    design: &DesignCandidate,
    model: &SystemModel,
    cfg: &ProtectionConfig,
) -> ProtectionCheck {
    let mut reasons = Vec::new();
    let peak: f64 = model.load_points.iter().map(|lp| lp.peak_load_kw).sum();
    let inverter_kw = design.pv_kw + design.wind_kw + design.storage_kw;
    let ratio = (peak > 0.0).then(|| inverter_kw * cfg.fault_current_multiple / peak);
    if cfg.min_fault_current_ratio > 0.0 {
        if let Some(r) = ratio {
            if r < cfg.min_fault_current_ratio {
                reasons.push(RULE_FAULT_CURRENT.to_string());
            }
        }
    }
    if design.grid_connected {
        let tie = cfg
            .grid_tie_component
            .as_ref()
            .or(model.grid.component_ref.as_ref());
        if !tie.is_some_and(|id| model.component(id).is_some()) {
            reasons.push(RULE_GRID_TIE.to_string());
        }
    }
    ProtectionCheck {
        pass: reasons.is_empty(),
        fault_current_ratio: ratio,
        reasons,
    }
}

fn scale_generators(
    units: &mut Vec<GeneratorUnit>,
    kind: GeneratorKind,
    target: f64,
    default_id: &str,
) {
    let total: f64 = units
        .iter()
        .filter(|g| g.kind == kind)
        .map(|g| g.rated_kw)
        .sum();
    if target <= 0.0 {
        units.retain(|g| g.kind != kind);
    } else if total > 0.0 {
        let k = target / total;
        units
            .iter_mut()
            .filter(|g| g.kind == kind)
            .for_each(|g| g.rated_kw *= k);
    } else {
        units.push(GeneratorUnit {
            id: default_id.into(),
            kind,
            rated_kw: target,
            marginal_cost: None,
            component_ref: None,
        });
    }
}

/// Template model resized to the candidate. Existing units of a kind are
/// scaled in proportion; a missing kind gets one new unit; a zero size
/// removes the kind.
pub fn instantiate(template: &SystemModel, design: &DesignCandidate) -> SystemModel {
    let mut m = template.clone();
    scale_generators(&mut m.generators, GeneratorKind::Pv, design.pv_kw, "pv");
    scale_generators(
        &mut m.generators,
        GeneratorKind::Wind,
        design.wind_kw,
        "wind",
    );
    scale_generators(
        &mut m.generators,
        GeneratorKind::Dispatchable,
        design.dispatchable_kw,
        "dispatchable",
    );
    if design.storage_kwh <= 0.0 || design.storage_kw <= 0.0 {
        m.storage_units.clear();
    } else if m.storage_units.is_empty() {
        m.storage_units.push(StorageUnit {
            id: "storage".into(),
            energy_kwh: design.storage_kwh,
            power_kw: design.storage_kw,
            charge_efficiency: 0.95,
            discharge_efficiency: 0.95,
            soc_min: 0.1,
            soc_max: 1.0,
            initial_soc: 0.5,
            component_ref: None,
        });
    } else {
        let e: f64 = m.storage_units.iter().map(|s| s.energy_kwh).sum();
        let p: f64 = m.storage_units.iter().map(|s| s.power_kw).sum();
        for s in &mut m.storage_units {
            s.energy_kwh *= design.storage_kwh / e;
            s.power_kw *= design.storage_kw / p;
        }
    }
    m.grid.connected = design.grid_connected;
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub design: DesignCandidate,
    pub cost: CostBreakdown,
    /// All-available adequacy plus outage-driven loss of load, h/yr.
    pub lole_hours_per_year: f64,
    /// All-available shortfall plus outage-driven unserved energy, kWh/yr.
    pub eens_kwh_per_year: f64,
    pub shed_by_tier_per_year: TierValues,
    pub adequacy: AdequacyIndices,
    pub mcs_eens_kwh_per_year: Option<f64>,
    pub mcs_lole_hours_per_year: Option<f64>,
    pub customer: Option<CustomerIndices>,
    pub protection: ProtectionCheck,
    pub flows: AnnualFlows,
}

impl Evaluation {
    pub fn lifecycle_cost(&self) -> f64 {
        self.cost.lifecycle_cost
    }

    /// Targets this evaluation misses, as (metric, observed, limit).
    pub fn violations(&self, targets: &ReliabilityTargets) -> Vec<(String, f64, f64)> {
        let mut out = Vec::new();
        if let Some(max) = targets.lole_max {
            if self.lole_hours_per_year > max {
                out.push(("lole".to_string(), self.lole_hours_per_year, max));
            }
        }
        if let Some(max) = targets.eens_max {
            if self.eens_kwh_per_year > max {
                out.push(("eens".to_string(), self.eens_kwh_per_year, max));
            }
        }
        for tier in Priority::ALL {
            if let Some(max) = targets.tier_shed_max.get(tier) {
                let v = self.shed_by_tier_per_year.get(tier);
                if v > max {
                    out.push((format!("shed_{}", tier.as_str()), v, max));
                }
            }
        }
        out
    }
}

/// Dispatches the instantiated design over every scenario, runs sequential
/// MCS when configured, and prices the result.
pub fn evaluate(
    design: &DesignCandidate,
    template: &SystemModel,
    scenarios: &ScenarioSet,
    policy: &DispatchPolicy,
    mcs_config: Option<&McsConfig>,
    cost_model: &CostModel,
    protection: &ProtectionConfig,
) -> Result<Evaluation, PlanError> {
    let model = instantiate(template, design);
    let mut traces = Vec::with_capacity(scenarios.scenarios.len());
    for s in &scenarios.scenarios {
        traces.push(dispatch::run(
            &model,
            s,
            policy,
            &AvailabilityMask::AllAvailable,
        )?);
    }
    let adequacy = adequacy_probabilistic(scenarios, &traces)?;
    let year = HOURS_PER_YEAR / scenarios.horizon_hours();
    let mut flows = AnnualFlows::default();
    for (s, tr) in scenarios.scenarios.iter().zip(&traces) {
        let k = s.probability * tr.step_hours * year;
        for st in &tr.steps {
            flows.dispatchable_kwh += k * st.dispatchable_output;
            flows.import_kwh += k * st.grid_import;
            flows.export_kwh += k * st.grid_export;
            flows.served_kwh += k * st.served_load();
        }
    }
    let (mut lole, mut eens) = adequacy.per_year();
    let mut by_tier = adequacy.eens_by_tier.scaled(year);
    let mut mcs_eens = None;
    let mut mcs_lole = None;
    let mut customer = None;
    if let Some(cfg) = mcs_config {
        let run = mcs::run_sequential(&model, scenarios, policy, cfg)?;
        let est = &run.estimate;
        lole += est.lole_hours_per_year;
        eens += est.eens_kwh_per_year;
        by_tier.add_assign(&est.eens_by_tier);
        mcs_eens = Some(est.eens_kwh_per_year);
        mcs_lole = Some(est.lole_hours_per_year);
        customer = Some(customer_indices(
            &run.logs,
            &model,
            cfg.horizon_years,
            cfg.momentary_threshold_hours(),
            1,
        )?);
    }
    flows.unserved_by_tier = by_tier;
    Ok(Evaluation {
        design: *design,
        cost: cost_model.breakdown(design, &flows),
        lole_hours_per_year: lole,
        eens_kwh_per_year: eens,
        shed_by_tier_per_year: by_tier,
        adequacy,
        mcs_eens_kwh_per_year: mcs_eens,
        mcs_lole_hours_per_year: mcs_lole,
        customer,
        protection: protection_feasibility(design, &model, protection),
        flows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        Component, ComponentKind, FailureRate, GridConnection, LoadPoint, SCHEMA_VERSION,
    };
    use crate::scenario::Scenario;

    fn template() -> SystemModel {
        SystemModel {
            schema_version: SCHEMA_VERSION,
            components: vec![
                Component {
                    id: "feeder".into(),
                    kind: ComponentKind::Line,
                    failure_rate: FailureRate::Constant(0.0),
                    repair_rate: 0.0,
                },
                Component {
                    id: "tie".into(),
                    kind: ComponentKind::GridTie,
                    failure_rate: FailureRate::Constant(0.0),
                    repair_rate: 0.0,
                },
            ],
            load_points: vec![LoadPoint {
                id: "lp".into(),
                customer_count: 10,
                peak_load_kw: 100.0,
                hourly_weights: vec![1.0; 24],
                monthly_weights: vec![1.0; 12],
                priority: Priority::NonCritical,
                supply_paths: vec![vec!["feeder".into()]],
            }],
            generators: vec![],
            storage_units: vec![],
            grid: GridConnection {
                connected: false,
                import_limit_kw: None,
                export_limit_kw: None,
                component_ref: Some("tie".into()),
            },
        }
    }

    #[test]
    fn protection_examples() {
        let m = template();
        let d = DesignCandidate {
            pv_kw: 100.0,
            ..DesignCandidate::default()
        };
        let cfg = ProtectionConfig {
            fault_current_multiple: 1.2,
            min_fault_current_ratio: 1.5,
            grid_tie_component: None,
        };
        let c = protection_feasibility(&d, &m, &cfg);
        assert!(!c.pass);
        assert_eq!(c.reasons, vec![RULE_FAULT_CURRENT.to_string()]);
        assert!((c.fault_current_ratio.unwrap() - 1.2).abs() < 1e-12);
        let off = ProtectionConfig {
            min_fault_current_ratio: 0.0,
            ..cfg.clone()
        };
        assert!(protection_feasibility(&d, &m, &off).pass);
        let mut no_tie = m.clone();
        no_tie.grid.component_ref = None;
        assert!(protection_feasibility(&d, &no_tie, &off).pass);
        let gd = DesignCandidate {
            grid_connected: true,
            ..d
        };
        assert_eq!(
            protection_feasibility(&gd, &no_tie, &off).reasons,
            vec![RULE_GRID_TIE.to_string()]
        );
        assert!(protection_feasibility(&gd, &m, &off).pass);
    }

    #[test]
    fn instantiate_scales_and_removes() {
        let mut t = template();
        t.generators.push(GeneratorUnit {
            id: "pv1".into(),
            kind: GeneratorKind::Pv,
            rated_kw: 10.0,
            marginal_cost: None,
            component_ref: None,
        });
        t.generators.push(GeneratorUnit {
            id: "pv2".into(),
            kind: GeneratorKind::Pv,
            rated_kw: 30.0,
            marginal_cost: None,
            component_ref: None,
        });
        let d = DesignCandidate {
            pv_kw: 80.0,
            dispatchable_kw: 50.0,
            storage_kwh: 200.0,
            storage_kw: 50.0,
            ..DesignCandidate::default()
        };
        let m = instantiate(&t, &d);
        assert_eq!(m.rated_kw(GeneratorKind::Pv), 80.0);
        assert_eq!(
            m.generators
                .iter()
                .find(|g| g.id == "pv1")
                .unwrap()
                .rated_kw,
            20.0
        );
        assert_eq!(m.rated_kw(GeneratorKind::Dispatchable), 50.0);
        assert_eq!(m.storage_units[0].energy_kwh, 200.0);
        let empty = instantiate(&m, &DesignCandidate::default());
        assert!(empty.generators.is_empty() && empty.storage_units.is_empty());
    }

    #[test]
    fn empty_design_costs_only_unserved_energy() {
        let set = ScenarioSet::single(Scenario::flat("s", 24, 1.0, 0.5, 0.5).unwrap()).unwrap();
        let cm = CostModel {
            voll_per_kwh: 2.0,
            horizon_years: 1,
            ..CostModel::default()
        };
        let e = evaluate(
            &DesignCandidate::default(),
            &template(),
            &set,
            &DispatchPolicy::default(),
            None,
            &cm,
            &ProtectionConfig::default(),
        )
        .unwrap();
        assert_eq!(e.adequacy.lpsp, 1.0);
        assert!((e.eens_kwh_per_year - 100.0 * 8760.0).abs() < 1e-6);
        assert!((e.lifecycle_cost() - 2.0 * 100.0 * 8760.0).abs() < 1e-6);
        assert_eq!(e.cost.capex, 0.0);
    }

    #[test]
    fn unlimited_grid_backstop() {
        let set = ScenarioSet::single(Scenario::flat("s", 48, 1.0, 0.0, 0.0).unwrap()).unwrap();
        let d = DesignCandidate {
            grid_connected: true,
            ..DesignCandidate::default()
        };
        let e = evaluate(
            &d,
            &template(),
            &set,
            &DispatchPolicy::default(),
            Some(&McsConfig::new(50, 1.0, 1)),
            &CostModel::default(),
            &ProtectionConfig::default(),
        )
        .unwrap();
        assert_eq!(e.lole_hours_per_year, 0.0);
        assert_eq!(e.eens_kwh_per_year, 0.0);
    }
}
