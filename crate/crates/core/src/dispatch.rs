//! Single-bus chronological dispatch: merit-order supply, storage state of
//! charge, grid exchange and priority-ordered load shedding.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::model::{
    connected_fraction, path_indices, GeneratorKind, ModelError, Priority, SystemModel, TierValues,
};
use crate::scenario::Scenario;

/// Shed below this level is treated as numerical noise when counting
/// loss-of-load steps.
pub const SHED_EPSILON_KW: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum DispatchError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid dispatch policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResourceClass {
    Renewables,
    StorageDischarge,
    Dispatchable,
    GridImport,
}

impl ResourceClass {
    pub const ALL: [ResourceClass; 4] = [
        ResourceClass::Renewables,
        ResourceClass::StorageDischarge,
        ResourceClass::Dispatchable,
        ResourceClass::GridImport,
    ];
}

fn default_merit_order() -> Vec<ResourceClass> {
    ResourceClass::ALL.to_vec()
}

fn default_shedding_order() -> Vec<Priority> {
    vec![
        Priority::NonCritical,
        Priority::Essential,
        Priority::Critical,
    ]
}

fn default_lookahead() -> f64 {
    24.0
}

fn default_threshold() -> f64 {
    0.15
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchPolicy {
    #[serde(default = "default_merit_order")]
    pub merit_order: Vec<ResourceClass>,
    /// SoC below which non-critical tiers may not discharge while scarcity is
    /// anticipated. `None` disables the rule.
    #[serde(default)]
    pub reserve_soc_target: Option<f64>,
    #[serde(default = "default_lookahead")]
    pub reserve_lookahead_hours: f64,
    /// Combined capacity factor below which the lookahead window counts as
    /// scarce.
    #[serde(default = "default_threshold")]
    pub scarcity_threshold: f64,
    #[serde(default = "default_shedding_order")]
    pub shedding_order: Vec<Priority>,
    /// Allow storage to charge from grid import when connected.
    #[serde(default)]
    pub grid_charging: bool,
    /// Half-open step ranges `[start, end)` during which the microgrid islands
    /// deliberately even with the grid tie available.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub planned_islanding: Vec<[usize; 2]>,
}

impl Default for DispatchPolicy {
    fn default() -> Self {
        DispatchPolicy {
            merit_order: default_merit_order(),
            reserve_soc_target: None,
            reserve_lookahead_hours: default_lookahead(),
            scarcity_threshold: default_threshold(),
            shedding_order: default_shedding_order(),
            grid_charging: false,
            planned_islanding: Vec::new(),
        }
    }
}

impl DispatchPolicy {
    pub fn planned_island(&self, t: usize) -> bool {
        self.planned_islanding
            .iter()
            .any(|[a, b]| (*a..*b).contains(&t))
    }

    pub fn check(&self, model: &SystemModel) -> Result<(), DispatchError> {
        let bad = |m: String| Err(DispatchError::InvalidPolicy(m));
        if self.merit_order.len() != ResourceClass::ALL.len()
            || !ResourceClass::ALL
                .iter()
                .all(|c| self.merit_order.contains(c))
        {
            return bad("merit_order must list each resource class exactly once".into());
        }
        if self.shedding_order.len() != Priority::ALL.len()
            || !Priority::ALL
                .iter()
                .all(|p| self.shedding_order.contains(p))
        {
            return bad("shedding_order must list each priority tier exactly once".into());
        }
        if !(self.reserve_lookahead_hours.is_finite() && self.reserve_lookahead_hours > 0.0) {
            return bad(format!(
                "reserve_lookahead_hours must be > 0, got {}",
                self.reserve_lookahead_hours
            ));
        }
        if !(self.scarcity_threshold > 0.0 && self.scarcity_threshold < 1.0) {
            return bad(format!(
                "scarcity_threshold {} outside (0, 1)",
                self.scarcity_threshold
            ));
        }
        if let Some([a, b]) = self.planned_islanding.iter().find(|[a, b]| a >= b) {
            return bad(format!("planned_islanding window [{a}, {b}) is empty"));
        }
        if let Some(target) = self.reserve_soc_target {
            for s in &model.storage_units {
                if !(s.soc_min..=s.soc_max).contains(&target) {
                    return bad(format!(
                        "reserve_soc_target {target} outside SoC band [{}, {}] of storage `{}`",
                        s.soc_min, s.soc_max, s.id
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Discharge floor for non-critical tiers given the capacity factors of the
/// lookahead window: the reserve target when the window mean falls below the
/// scarcity threshold, otherwise `soc_min`.
pub fn apply_reserve_target(policy: &DispatchPolicy, upcoming_cf: &[f64], soc_min: f64) -> f64 {
    match policy.reserve_soc_target {
        Some(target) if reserve_fires(policy, upcoming_cf) => target.max(soc_min),
        _ => soc_min,
    }
}

fn reserve_fires(policy: &DispatchPolicy, upcoming_cf: &[f64]) -> bool {
    if upcoming_cf.is_empty() {
        return false;
    }
    let mean = upcoming_cf.iter().sum::<f64>() / upcoming_cf.len() as f64;
    mean < policy.scarcity_threshold
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    GridConnected,
    Islanded,
}

impl GridMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GridMode::GridConnected => "grid-connected",
            GridMode::Islanded => "islanded",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchStep {
    pub t: usize,
    pub mode: GridMode,
    /// Demand per tier, including load cut off by network outages.
    pub load: TierValues,
    /// Unserved demand per tier. Includes `disconnected`.
    pub shed_by_tier: TierValues,
    /// Demand cut off from supply by the network.
    pub disconnected: TierValues,
    pub renewable_available: f64,
    pub renewable_used: f64,
    pub renewable_curtailed: f64,
    pub dispatchable_output: f64,
    pub storage_charge: f64,
    pub storage_discharge: f64,
    /// State of charge per storage unit at the end of the step.
    pub soc: Vec<f64>,
    pub grid_import: f64,
    pub grid_export: f64,
    pub reserve_active: bool,
}

impl DispatchStep {
    pub fn load_total(&self) -> f64 {
        self.load.total()
    }

    pub fn shed_total(&self) -> f64 {
        self.shed_by_tier.total()
    }

    pub fn served_load(&self) -> f64 {
        self.load_total() - self.shed_total()
    }

    /// Supply minus uses; zero up to rounding.
    pub fn balance_residual(&self) -> f64 {
        self.renewable_used
            + self.dispatchable_output
            + self.storage_discharge
            + self.grid_import
            + self.shed_total()
            - self.load_total()
            - self.storage_charge
            - self.grid_export
    }

    pub fn loss_of_load(&self) -> bool {
        self.shed_total() > SHED_EPSILON_KW
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    AllAvailable,
    Masked,
}

/// Zero-duration marker for a change of grid mode at the start of step `t`.
/// `planned` is set when the islanded side of the change falls in a planned
/// islanding window with the grid tie itself available.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeTransition {
    pub t: usize,
    pub to: GridMode,
    pub planned: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchTrace {
    pub scenario_id: String,
    pub step_hours: f64,
    pub availability: MaskKind,
    pub storage_ids: Vec<String>,
    pub steps: Vec<DispatchStep>,
    #[serde(default)]
    pub transitions: Vec<ModeTransition>,
}

impl DispatchTrace {
    pub fn shed_energy_kwh(&self) -> f64 {
        self.steps.iter().map(DispatchStep::shed_total).sum::<f64>() * self.step_hours
    }

    pub fn demand_energy_kwh(&self) -> f64 {
        self.steps.iter().map(DispatchStep::load_total).sum::<f64>() * self.step_hours
    }

    pub fn loss_of_load_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.loss_of_load()).count()
    }

    pub fn max_balance_residual(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.balance_residual().abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = [
            "t",
            "mode",
            "load_kw",
            "served_kw",
            "shed_kw",
            "shed_critical_kw",
            "shed_essential_kw",
            "shed_non_critical_kw",
            "disconnected_kw",
            "renewable_available_kw",
            "renewable_used_kw",
            "renewable_curtailed_kw",
            "dispatchable_kw",
            "storage_charge_kw",
            "storage_discharge_kw",
            "grid_import_kw",
            "grid_export_kw",
            "reserve_active",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(self.storage_ids.iter().map(|id| format!("soc_{id}")));
        w.write_record(&header)?;
        for s in &self.steps {
            let mut row = vec![
                s.t.to_string(),
                s.mode.as_str().to_string(),
                s.load_total().to_string(),
                s.served_load().to_string(),
                s.shed_total().to_string(),
                s.shed_by_tier.critical.to_string(),
                s.shed_by_tier.essential.to_string(),
                s.shed_by_tier.non_critical.to_string(),
                s.disconnected.total().to_string(),
                s.renewable_available.to_string(),
                s.renewable_used.to_string(),
                s.renewable_curtailed.to_string(),
                s.dispatchable_output.to_string(),
                s.storage_charge.to_string(),
                s.storage_discharge.to_string(),
                s.grid_import.to_string(),
                s.grid_export.to_string(),
                s.reserve_active.to_string(),
            ];
            row.extend(s.soc.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-component availability over a horizon, indexed like
/// `SystemModel::components`. Values are fractions in [0, 1]; 0/1 masks give
/// the usual up/down semantics.
#[derive(Clone, Debug, PartialEq)]
pub enum AvailabilityMask {
    AllAvailable,
    /// `values[component][step]`
    Series(Vec<Vec<f64>>),
}

impl AvailabilityMask {
    pub fn from_bools(series: &[Vec<bool>]) -> Self {
        AvailabilityMask::Series(
            series
                .iter()
                .map(|s| s.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }
}

#[derive(Clone, Debug)]
struct Source {
    rated_kw: f64,
    component: Option<usize>,
}

#[derive(Clone, Debug)]
struct Storage {
    energy_kwh: f64,
    power_kw: f64,
    eta_c: f64,
    eta_d: f64,
    soc_min: f64,
    soc_max: f64,
    component: Option<usize>,
}

/// Precomputed per-scenario dispatch context. `step` advances one time step
/// from a given SoC vector, so callers can dispatch arbitrary windows.
#[derive(Clone, Debug)]
pub struct Dispatcher {
    policy: DispatchPolicy,
    step_hours: f64,
    /// `loads[t][lp]` in kW.
    loads: Vec<Vec<f64>>,
    tiers: Vec<Priority>,
    paths: Vec<Vec<Vec<usize>>>,
    pv: Vec<Source>,
    wind: Vec<Source>,
    dispatchable: Vec<Source>,
    storage: Vec<Storage>,
    storage_ids: Vec<String>,
    initial_soc: Vec<f64>,
    grid_connected: bool,
    grid_component: Option<usize>,
    import_limit: Option<f64>,
    export_limit: Option<f64>,
    pv_cf: Vec<f64>,
    wind_cf: Vec<f64>,
    reserve_active: Vec<bool>,
    scenario_id: String,
    component_count: usize,
}

impl Dispatcher {
    pub fn new(
        model: &SystemModel,
        scenario: &Scenario,
        policy: &DispatchPolicy,
    ) -> Result<Self, DispatchError> {
        policy.check(model)?;
        let idx = |r: &Option<String>| -> Result<Option<usize>, DispatchError> {
            match r {
                None => Ok(None),
                Some(id) => model.component_index(id).map(Some).ok_or_else(|| {
                    DispatchError::Model(ModelError::UnresolvedComponent(id.clone()))
                }),
            }
        };
        let mut pv = Vec::new();
        let mut wind = Vec::new();
        let mut dispatchable: Vec<(f64, &str, Source)> = Vec::new();
        for g in &model.generators {
            let src = Source {
                rated_kw: g.rated_kw,
                component: idx(&g.component_ref)?,
            };
            match g.kind {
                GeneratorKind::Pv => pv.push(src),
                GeneratorKind::Wind => wind.push(src),
                GeneratorKind::Dispatchable => {
                    dispatchable.push((g.marginal_cost.unwrap_or(0.0), &g.id, src))
                }
            }
        }
        dispatchable.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
        let mut storage = Vec::new();
        for s in &model.storage_units {
            storage.push(Storage {
                energy_kwh: s.energy_kwh,
                power_kw: s.power_kw,
                eta_c: s.charge_efficiency,
                eta_d: s.discharge_efficiency,
                soc_min: s.soc_min,
                soc_max: s.soc_max,
                component: idx(&s.component_ref)?,
            });
        }

        let n = scenario.len();
        let loads = (0..n)
            .map(|t| {
                let (hour, month) = scenario.calendar(t);
                let mult = scenario.load.values[t];
                model
                    .load_points
                    .iter()
                    .map(|lp| lp.load_kw(hour, month) * mult)
                    .collect()
            })
            .collect();

        let pv_kw = model.rated_kw(GeneratorKind::Pv);
        let wind_kw = model.rated_kw(GeneratorKind::Wind);
        let (wp, ww) = if pv_kw + wind_kw > 0.0 {
            (pv_kw / (pv_kw + wind_kw), wind_kw / (pv_kw + wind_kw))
        } else {
            (0.5, 0.5)
        };
        let combined: Vec<f64> = scenario
            .pv_cf
            .values
            .iter()
            .zip(&scenario.wind_cf.values)
            .map(|(p, w)| wp * p + ww * w)
            .collect();
        let window =
            ((policy.reserve_lookahead_hours / scenario.step_hours()).ceil() as usize).max(1);
        let reserve_active = if policy.reserve_soc_target.is_some() {
            // Sliding-window sums over the upcoming steps, truncated at the horizon end.
            let mut prefix = vec![0.0; n + 1];
            for (t, v) in combined.iter().enumerate() {
                prefix[t + 1] = prefix[t] + v;
            }
            (0..n)
                .map(|t| {
                    let end = (t + window).min(n);
                    let mean = (prefix[end] - prefix[t]) / (end - t) as f64;
                    mean < policy.scarcity_threshold
                })
                .collect()
        } else {
            vec![false; n]
        };

        Ok(Dispatcher {
            policy: policy.clone(),
            step_hours: scenario.step_hours(),
            loads,
            tiers: model.load_points.iter().map(|lp| lp.priority).collect(),
            paths: path_indices(model)?,
            pv,
            wind,
            dispatchable: dispatchable.into_iter().map(|(_, _, s)| s).collect(),
            storage,
            storage_ids: model.storage_units.iter().map(|s| s.id.clone()).collect(),
            initial_soc: model.storage_units.iter().map(|s| s.initial_soc).collect(),
            grid_connected: model.grid.connected,
            grid_component: idx(&model.grid.component_ref)?,
            import_limit: model.grid.import_limit_kw,
            export_limit: model.grid.export_limit_kw,
            pv_cf: scenario.pv_cf.values.clone(),
            wind_cf: scenario.wind_cf.values.clone(),
            reserve_active,
            scenario_id: scenario.id.clone(),
            component_count: model.components.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }

    pub fn step_hours(&self) -> f64 {
        self.step_hours
    }

    pub fn initial_soc(&self) -> &[f64] {
        &self.initial_soc
    }

    pub fn component_count(&self) -> usize {
        self.component_count
    }

    /// Demand per load point at step `t`.
    pub fn load_at(&self, t: usize) -> &[f64] {
        &self.loads[t]
    }

    /// Dispatches step `t` from state `soc`, updating it in place. `available`
    /// holds per-component availability; `None` means all available.
    pub fn step(&self, t: usize, available: Option<&[f64]>, soc: &mut [f64]) -> DispatchStep {
        let dt = self.step_hours;
        let avail = |c: Option<usize>| match (c, available) {
            (Some(i), Some(a)) => a[i],
            _ => 1.0,
        };

        let mut load = TierValues::default();
        let mut disconnected = TierValues::default();
        let mut connected = TierValues::default();
        for (lp, &kw) in self.loads[t].iter().enumerate() {
            let tier = self.tiers[lp];
            let frac = match available {
                Some(a) => connected_fraction(&self.paths[lp], a),
                None => 1.0,
            };
            *load.get_mut(tier) += kw;
            *connected.get_mut(tier) += kw * frac;
            *disconnected.get_mut(tier) += kw * (1.0 - frac);
        }

        let renewable_available: f64 = self
            .pv
            .iter()
            .map(|s| s.rated_kw * self.pv_cf[t] * avail(s.component))
            .sum::<f64>()
            + self
                .wind
                .iter()
                .map(|s| s.rated_kw * self.wind_cf[t] * avail(s.component))
                .sum::<f64>();
        let grid_avail = if self.grid_connected && !self.policy.planned_island(t) {
            avail(self.grid_component)
        } else {
            0.0
        };
        let mode = if grid_avail > 0.0 {
            GridMode::GridConnected
        } else {
            GridMode::Islanded
        };
        let (mut import_cap, export_cap) = match mode {
            GridMode::GridConnected => (
                self.import_limit.map_or(f64::INFINITY, |l| l * grid_avail),
                self.export_limit.map_or(f64::INFINITY, |l| l * grid_avail),
            ),
            GridMode::Islanded => (0.0, 0.0),
        };

        let reserve_active = self.reserve_active[t];
        let floor = |s: &Storage| -> f64 {
            match self.policy.reserve_soc_target {
                Some(target) if reserve_active => target.max(s.soc_min),
                _ => s.soc_min,
            }
        };
        let mut power_left: Vec<f64> = self
            .storage
            .iter()
            .map(|s| s.power_kw * avail(s.component))
            .collect();
        let mut discharged = vec![false; self.storage.len()];

        let demand = connected.total();
        let mut rem = demand;
        let mut renewable_served = 0.0;
        let mut dispatchable_output = 0.0;
        let mut storage_discharge = 0.0;
        let mut grid_import = 0.0;

        let mut discharge = |rem: &mut f64,
                             soc: &mut [f64],
                             power_left: &mut [f64],
                             floor_of: &dyn Fn(&Storage) -> f64| {
            let mut total = 0.0;
            for (i, s) in self.storage.iter().enumerate() {
                if *rem <= 0.0 {
                    break;
                }
                let f = floor_of(s);
                let energy_cap = (soc[i] - f).max(0.0) * s.energy_kwh * s.eta_d / dt;
                let d = power_left[i].min(energy_cap).min(*rem);
                if d > 0.0 {
                    soc[i] = (soc[i] - d * dt / (s.eta_d * s.energy_kwh)).max(f.min(soc[i]));
                    power_left[i] -= d;
                    discharged[i] = true;
                    *rem -= d;
                    total += d;
                }
            }
            total
        };

        for class in &self.policy.merit_order {
            match class {
                ResourceClass::Renewables => {
                    let u = renewable_available.min(rem);
                    renewable_served = u;
                    rem -= u;
                }
                ResourceClass::StorageDischarge => {
                    storage_discharge += discharge(&mut rem, soc, &mut power_left, &floor);
                }
                ResourceClass::Dispatchable => {
                    for g in &self.dispatchable {
                        let p = (g.rated_kw * avail(g.component)).min(rem);
                        dispatchable_output += p;
                        rem -= p;
                    }
                }
                ResourceClass::GridImport => {
                    let p = import_cap.min(rem);
                    grid_import += p;
                    import_cap -= p;
                    rem -= p;
                }
            }
        }

        let mut shed = TierValues::default();
        for &tier in &self.policy.shedding_order {
            let s = rem.min(connected.get(tier));
            *shed.get_mut(tier) = s;
            rem -= s;
        }
        // The reserve band above soc_min may still serve critical demand.
        if reserve_active && shed.critical > 0.0 {
            let mut want = shed.critical;
            let extra = discharge(&mut want, soc, &mut power_left, &|s: &Storage| s.soc_min);
            storage_discharge += extra;
            shed.critical -= extra;
        }

        let mut surplus = renewable_available - renewable_served;
        let mut storage_charge = 0.0;
        for (i, s) in self.storage.iter().enumerate() {
            if discharged[i] || surplus <= 0.0 {
                continue;
            }
            let headroom = (s.soc_max - soc[i]).max(0.0) * s.energy_kwh / (s.eta_c * dt);
            let c = power_left[i].min(headroom).min(surplus);
            if c > 0.0 {
                soc[i] = (soc[i] + c * dt * s.eta_c / s.energy_kwh).min(s.soc_max.max(soc[i]));
                power_left[i] -= c;
                surplus -= c;
                storage_charge += c;
            }
        }
        if self.policy.grid_charging && mode == GridMode::GridConnected {
            for (i, s) in self.storage.iter().enumerate() {
                if discharged[i] || import_cap <= 0.0 {
                    continue;
                }
                let headroom = (s.soc_max - soc[i]).max(0.0) * s.energy_kwh / (s.eta_c * dt);
                let c = power_left[i].min(headroom).min(import_cap);
                if c > 0.0 {
                    soc[i] = (soc[i] + c * dt * s.eta_c / s.energy_kwh).min(s.soc_max.max(soc[i]));
                    power_left[i] -= c;
                    import_cap -= c;
                    grid_import += c;
                    storage_charge += c;
                }
            }
        }
        let grid_export = surplus.min(export_cap).max(0.0);
        surplus -= grid_export;
        let renewable_curtailed = surplus.max(0.0);

        shed.add_assign(&disconnected);
        DispatchStep {
            t,
            mode,
            load,
            shed_by_tier: shed,
            disconnected,
            renewable_available,
            renewable_used: renewable_available - renewable_curtailed,
            renewable_curtailed,
            dispatchable_output,
            storage_charge,
            storage_discharge,
            soc: soc.to_vec(),
            grid_import,
            grid_export,
            reserve_active,
        }
    }

    /// Dispatches the full horizon from the model's initial SoC.
    pub fn run(&self, availability: &AvailabilityMask) -> Result<DispatchTrace, DispatchError> {
        let n = self.len();
        if let AvailabilityMask::Series(series) = availability {
            if series.len() != self.component_count {
                return Err(DispatchError::LengthMismatch(format!(
                    "availability covers {} components, model has {}",
                    series.len(),
                    self.component_count
                )));
            }
            if let Some((i, s)) = series.iter().enumerate().find(|(_, s)| s.len() != n) {
                return Err(DispatchError::LengthMismatch(format!(
                    "availability series for component {i} has {} steps, scenario has {n}",
                    s.len()
                )));
            }
        }
        let mut soc = self.initial_soc.clone();
        let mut column = vec![1.0; self.component_count];
        let mut steps: Vec<DispatchStep> = Vec::with_capacity(n);
        let mut transitions = Vec::new();
        let mut planned_prev = false;
        for t in 0..n {
            let avail = match availability {
                AvailabilityMask::AllAvailable => None,
                AvailabilityMask::Series(series) => {
                    for (c, s) in series.iter().enumerate() {
                        column[c] = s[t].clamp(0.0, 1.0);
                    }
                    Some(column.as_slice())
                }
            };
            let step = self.step(t, avail, &mut soc);
            let tie_up = match (self.grid_component, avail) {
                (Some(c), Some(a)) => a[c] > 0.0,
                _ => true,
            };
            let planned = self.grid_connected && tie_up && self.policy.planned_island(t);
            if let Some(prev) = steps.last() {
                if prev.mode != step.mode {
                    let planned = match step.mode {
                        GridMode::Islanded => planned,
                        GridMode::GridConnected => planned_prev,
                    };
                    transitions.push(ModeTransition {
                        t,
                        to: step.mode,
                        planned,
                    });
                }
            }
            planned_prev = planned;
            steps.push(step);
        }
        Ok(DispatchTrace {
            scenario_id: self.scenario_id.clone(),
            step_hours: self.step_hours,
            availability: match availability {
                AvailabilityMask::AllAvailable => MaskKind::AllAvailable,
                AvailabilityMask::Series(_) => MaskKind::Masked,
            },
            storage_ids: self.storage_ids.clone(),
            steps,
            transitions,
        })
    }
}

/// Dispatches `scenario` over its full horizon.
pub fn run(
    model: &SystemModel,
    scenario: &Scenario,
    policy: &DispatchPolicy,
    availability: &AvailabilityMask,
) -> Result<DispatchTrace, DispatchError> {
    Dispatcher::new(model, scenario, policy)?.run(availability)
}
