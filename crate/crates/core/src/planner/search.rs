use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::economics::CostModel;
use super::{
    evaluate, DesignCandidate, Evaluation, PlanError, ProtectionConfig, ReliabilityTargets,
};
use crate::dispatch::DispatchPolicy;
use crate::mcs::McsConfig;
use crate::model::{validate, GeneratorKind, ModelError, Priority, SystemModel};
use crate::scenario::{
    combined_capacity_factor, detect_scarcity, scarcity_percentile, ScarcityEvent, ScenarioSet,
};

fn zero_axis() -> Vec<f64> {
    vec![0.0]
}
fn false_axis() -> Vec<bool> {
    vec![false]
}

/// Cartesian grid of candidate sizes. An omitted axis holds a single zero
/// (or `false` for the grid connection).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    #[serde(default = "zero_axis")]
    pub pv_kw: Vec<f64>,
    #[serde(default = "zero_axis")]
    pub wind_kw: Vec<f64>,
    #[serde(default = "zero_axis")]
    pub dispatchable_kw: Vec<f64>,
    #[serde(default = "zero_axis")]
    pub storage_kwh: Vec<f64>,
    #[serde(default = "zero_axis")]
    pub storage_kw: Vec<f64>,
    #[serde(default = "false_axis")]
    pub grid_connected: Vec<bool>,
}

impl Default for CandidateGrid {
    fn default() -> Self {
        CandidateGrid {
            pv_kw: zero_axis(),
            wind_kw: zero_axis(),
            dispatchable_kw: zero_axis(),
            storage_kwh: zero_axis(),
            storage_kw: zero_axis(),
            grid_connected: false_axis(),
        }
    }
}

const AXES: usize = 6;

impl CandidateGrid {
    pub fn dims(&self) -> [usize; AXES] {
        [
            self.pv_kw.len(),
            self.wind_kw.len(),
            self.dispatchable_kw.len(),
            self.storage_kwh.len(),
            self.storage_kw.len(),
            self.grid_connected.len(),
        ]
    }

    pub fn size(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn check(&self) -> Result<(), PlanError> {
        if self.dims().contains(&0) {
            return Err(PlanError::Invalid(
                "every candidate_grid axis needs at least one value".into(),
            ));
        }
        let all = [
            &self.pv_kw,
            &self.wind_kw,
            &self.dispatchable_kw,
            &self.storage_kwh,
            &self.storage_kw,
        ];
        if all
            .iter()
            .flat_map(|a| a.iter())
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(PlanError::Invalid(
                "candidate sizes must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Axis coordinates of a flat index; the last axis varies fastest.
    pub fn coords(&self, mut index: usize) -> [usize; AXES] {
        let dims = self.dims();
        let mut c = [0; AXES];
        for a in (0..AXES).rev() {
            c[a] = index % dims[a];
            index /= dims[a];
        }
        c
    }

    pub fn index(&self, coords: &[usize; AXES]) -> usize {
        self.dims()
            .iter()
            .zip(coords)
            .fold(0, |acc, (d, c)| acc * d + c)
    }

    pub fn candidate(&self, index: usize) -> DesignCandidate {
        let c = self.coords(index);
        DesignCandidate {
            pv_kw: self.pv_kw[c[0]],
            wind_kw: self.wind_kw[c[1]],
            dispatchable_kw: self.dispatchable_kw[c[2]],
            storage_kwh: self.storage_kwh[c[3]],
            storage_kw: self.storage_kw[c[4]],
            grid_connected: self.grid_connected[c[5]],
        }
    }
}

fn default_exhaustive_limit() -> usize {
    4096
}
fn default_outer_loops() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Grids up to this size are enumerated in full.
    #[serde(default = "default_exhaustive_limit")]
    pub exhaustive_limit: usize,
    #[serde(default = "default_outer_loops")]
    pub max_outer_loops: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            exhaustive_limit: default_exhaustive_limit(),
            max_outer_loops: default_outer_loops(),
        }
    }
}

fn default_percentile() -> f64 {
    0.95
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScarcityConfig {
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    /// Reject designs whose storage energy is below the duration hint times
    /// the mean critical load.
    #[serde(default)]
    pub enforce_storage_bound: bool,
}

impl Default for ScarcityConfig {
    fn default() -> Self {
        ScarcityConfig {
            percentile: default_percentile(),
            enforce_storage_bound: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlanInputs {
    pub template: SystemModel,
    pub scenarios: ScenarioSet,
    pub policy: DispatchPolicy,
    pub grid: CandidateGrid,
    pub targets: ReliabilityTargets,
    pub cost_model: CostModel,
    /// Outage simulation applied to every candidate; `None` evaluates
    /// supply adequacy only.
    pub mcs: Option<McsConfig>,
    /// Higher-fidelity simulation used to confirm the selected design.
    pub verification: Option<McsConfig>,
    pub protection: ProtectionConfig,
    pub search: SearchConfig,
    pub scarcity: ScarcityConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStatus {
    Feasible,
    Infeasible,
    /// A candidate met the targets in search but verification kept failing.
    Unverified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: u8,
    pub name: String,
    pub detail: String,
    pub metric: Option<f64>,
    pub loop_activation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub index: usize,
    pub design: DesignCandidate,
    pub lifecycle_cost: f64,
    pub eens_kwh_per_year: f64,
    pub lole_hours_per_year: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub index: usize,
    pub design: DesignCandidate,
    pub eligible: bool,
    pub feasible: bool,
    pub lifecycle_cost: f64,
    pub capex: f64,
    pub eens_kwh_per_year: f64,
    pub lole_hours_per_year: f64,
    pub reasons: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub status: PlanStatus,
    pub chosen: Option<Evaluation>,
    pub verification: Option<Evaluation>,
    /// Closest miss when nothing is feasible: the lowest-LOLE eligible design.
    pub diagnostic: Option<Evaluation>,
    pub frontier: Vec<FrontierPoint>,
    pub evaluations: Vec<CandidateRecord>,
    pub stage_log: Vec<StageEntry>,
    pub storage_hint_hours: Option<f64>,
    pub storage_bound_kwh: Option<f64>,
    pub effective_targets: ReliabilityTargets,
    pub strategy: String,
    pub summary: String,
}

/// Nearest-rank percentile of scarcity durations; `None` without events.
pub fn storage_duration_recommendation(
    events: &[ScarcityEvent],
    p: f64,
) -> Result<Option<f64>, PlanError> {
    if events.is_empty() {
        return Ok(None);
    }
    Ok(Some(scarcity_percentile(events, p)?))
}

fn scarcity_events(
    template: &SystemModel,
    scenarios: &ScenarioSet,
    threshold: f64,
) -> Result<Vec<ScarcityEvent>, PlanError> {
    let pv = template.rated_kw(GeneratorKind::Pv);
    let wind = template.rated_kw(GeneratorKind::Wind);
    let mut events = Vec::new();
    for s in &scenarios.scenarios {
        let cf = combined_capacity_factor(&s.pv_cf, &s.wind_cf, pv, wind)?;
        events.extend(detect_scarcity(&cf, threshold)?);
    }
    Ok(events)
}

fn mean_critical_load(template: &SystemModel, scenarios: &ScenarioSet) -> f64 {
    let mut total = 0.0;
    for s in &scenarios.scenarios {
        let mut sum = 0.0;
        for t in 0..s.len() {
            let (hour, month) = s.calendar(t);
            let kw: f64 = template
                .load_points
                .iter()
                .filter(|lp| lp.priority == Priority::Critical)
                .map(|lp| lp.load_kw(hour, month))
                .sum();
            sum += kw * s.load.values[t];
        }
        total += s.probability * sum / s.len().max(1) as f64;
    }
    total
}

/// Sum of relative target violations; zero when every target is met.
fn infeasibility(e: &Evaluation, targets: &ReliabilityTargets) -> f64 {
    e.violations(targets)
        .iter()
        .map(|(_, v, lim)| (v - lim) / lim.max(1e-9))
        .sum()
}

struct Judged {
    eligible: bool,
    infeasibility: f64,
    reasons: Vec<String>,
}

fn judge(
    e: &Evaluation,
    inputs: &PlanInputs,
    targets: &ReliabilityTargets,
    storage_bound: Option<f64>,
) -> Judged {
    let mut reasons: Vec<String> = e
        .protection
        .reasons
        .iter()
        .map(|r| format!("protection: {r}"))
        .collect();
    if let Some(b) = inputs.cost_model.budget_max {
        if e.cost.capex > b {
            reasons.push(format!("capex {:.2} exceeds budget {b}", e.cost.capex));
        }
    }
    if let Some(b) = storage_bound {
        if e.design.storage_kwh < b {
            reasons.push(format!(
                "storage {} kWh below scarcity bound {b:.2} kWh",
                e.design.storage_kwh
            ));
        }
    }
    let eligible = reasons.is_empty();
    for (m, v, lim) in e.violations(targets) {
        reasons.push(format!("{m} {v:.4} exceeds {lim}"));
    }
    Judged {
        eligible,
        infeasibility: infeasibility(e, targets),
        reasons,
    }
}

fn key_cmp(a: (&Judged, &Evaluation, usize), b: (&Judged, &Evaluation, usize)) -> Ordering {
    (!a.0.eligible)
        .cmp(&!b.0.eligible)
        .then(a.0.infeasibility.total_cmp(&b.0.infeasibility))
        .then(a.1.lifecycle_cost().total_cmp(&b.1.lifecycle_cost()))
        .then(a.1.eens_kwh_per_year.total_cmp(&b.1.eens_kwh_per_year))
        .then(a.1.lole_hours_per_year.total_cmp(&b.1.lole_hours_per_year))
        .then(a.2.cmp(&b.2))
}

type Cache = BTreeMap<usize, Evaluation>;

fn evaluate_missing(
    inputs: &PlanInputs,
    cache: &mut Cache,
    indices: &[usize],
) -> Result<(), PlanError> {
    let todo: Vec<usize> = indices
        .iter()
        .copied()
        .filter(|i| !cache.contains_key(i))
        .collect();
    let results: Vec<Result<Evaluation, PlanError>> = todo
        .par_iter()
        .map(|&i| {
            evaluate(
                &inputs.grid.candidate(i),
                &inputs.template,
                &inputs.scenarios,
                &inputs.policy,
                inputs.mcs.as_ref(),
                &inputs.cost_model,
                &inputs.protection,
            )
        })
        .collect();
    for (i, r) in todo.into_iter().zip(results) {
        cache.insert(i, r?);
    }
    Ok(())
}

fn best_index(
    cache: &Cache,
    inputs: &PlanInputs,
    targets: &ReliabilityTargets,
    bound: Option<f64>,
) -> Option<usize> {
    let judged: Vec<(usize, Judged)> = cache
        .iter()
        .map(|(&i, e)| (i, judge(e, inputs, targets, bound)))
        .collect();
    judged
        .iter()
        .min_by(|a, b| key_cmp((&a.1, &cache[&a.0], a.0), (&b.1, &cache[&b.0], b.0)))
        .map(|(i, _)| *i)
}

fn coarse_lattice(grid: &CandidateGrid) -> Vec<usize> {
    let axes: Vec<Vec<usize>> = grid
        .dims()
        .iter()
        .map(|&d| {
            let mut v: Vec<usize> = (0..d).step_by(2).collect();
            if *v.last().unwrap() != d - 1 {
                v.push(d - 1);
            }
            v
        })
        .collect();
    let mut out = vec![[0usize; AXES]];
    for (a, vals) in axes.iter().enumerate() {
        out = out
            .into_iter()
            .flat_map(|c| {
                vals.iter().map(move |&v| {
                    let mut n = c;
                    n[a] = v;
                    n
                })
            })
            .collect();
    }
    out.iter().map(|c| grid.index(c)).collect()
}

/// Finds the best candidate under `targets`, filling `cache`. Small grids are
/// enumerated; larger ones are scanned on a stride-2 lattice and then refined
/// one axis step at a time until no neighbour improves.
fn locate(
    inputs: &PlanInputs,
    targets: &ReliabilityTargets,
    bound: Option<f64>,
    cache: &mut Cache,
) -> Result<Option<usize>, PlanError> {
    let grid = &inputs.grid;
    if grid.size() <= inputs.search.exhaustive_limit {
        let all: Vec<usize> = (0..grid.size()).collect();
        evaluate_missing(inputs, cache, &all)?;
        return Ok(best_index(cache, inputs, targets, bound));
    }
    evaluate_missing(inputs, cache, &coarse_lattice(grid))?;
    let dims = grid.dims();
    let mut best = best_index(cache, inputs, targets, bound);
    loop {
        let Some(b) = best else { return Ok(None) };
        let c = grid.coords(b);
        let mut neighbours = Vec::new();
        for a in 0..AXES {
            for delta in [-1i64, 1] {
                let v = c[a] as i64 + delta;
                if v >= 0 && (v as usize) < dims[a] {
                    let mut n = c;
                    n[a] = v as usize;
                    neighbours.push(grid.index(&n));
                }
            }
        }
        evaluate_missing(inputs, cache, &neighbours)?;
        let next = best_index(cache, inputs, targets, bound);
        if next == best {
            return Ok(best);
        }
        best = next;
    }
}

/// Indices of the non-dominated points in (cost, EENS, LOLE), sorted by cost.
pub fn frontier(points: &[(usize, f64, f64, f64)]) -> Vec<usize> {
    let dominates = |a: &(usize, f64, f64, f64), b: &(usize, f64, f64, f64)| {
        a.1 <= b.1 && a.2 <= b.2 && a.3 <= b.3 && (a.1 < b.1 || a.2 < b.2 || a.3 < b.3)
    };
    let mut keep: Vec<&(usize, f64, f64, f64)> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(q, p)))
        .collect();
    keep.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then(a.2.total_cmp(&b.2))
            .then(a.3.total_cmp(&b.3))
            .then(a.0.cmp(&b.0))
    });
    keep.into_iter().map(|p| p.0).collect()
}

fn check_inputs(inputs: &PlanInputs) -> Result<(), PlanError> {
    let report = validate(&inputs.template);
    if !report.is_empty() {
        return Err(ModelError::Invalid(report.to_string()).into());
    }
    inputs.scenarios.check()?;
    inputs.policy.check(&inputs.template)?;
    inputs.cost_model.check()?;
    inputs.targets.check()?;
    inputs.grid.check()?;
    for cfg in [&inputs.mcs, &inputs.verification].into_iter().flatten() {
        cfg.check()?;
    }
    if !(inputs.scarcity.percentile > 0.0 && inputs.scarcity.percentile <= 1.0) {
        return Err(PlanError::Invalid(format!(
            "scarcity percentile {} outside (0, 1]",
            inputs.scarcity.percentile
        )));
    }
    if inputs.search.max_outer_loops == 0 {
        return Err(PlanError::Invalid("max_outer_loops must be >= 1".into()));
    }
    Ok(())
}

fn describe(d: &DesignCandidate) -> String {
    format!(
        "PV {} kW, wind {} kW, dispatchable {} kW, storage {} kWh / {} kW, {}",
        d.pv_kw,
        d.wind_kw,
        d.dispatchable_kw,
        d.storage_kwh,
        d.storage_kw,
        if d.grid_connected {
            "grid-connected"
        } else {
            "islanded"
        }
    )
}

fn tighten(
    effective: &mut ReliabilityTargets,
    original: &ReliabilityTargets,
    metric: &str,
    observed: f64,
) {
    let slot = match metric {
        "lole" => (&mut effective.lole_max, original.lole_max),
        "eens" => (&mut effective.eens_max, original.eens_max),
        "shed_critical" => (
            &mut effective.tier_shed_max.critical,
            original.tier_shed_max.critical,
        ),
        "shed_essential" => (
            &mut effective.tier_shed_max.essential,
            original.tier_shed_max.essential,
        ),
        _ => (
            &mut effective.tier_shed_max.non_critical,
            original.tier_shed_max.non_critical,
        ),
    };
    if let (Some(cur), Some(lim)) = (slot.0.as_mut(), slot.1) {
        *cur = (*cur - (observed - lim)).max(0.0);
    }
}

fn stage(
    log: &mut Vec<StageEntry>,
    stage: u8,
    name: &str,
    detail: String,
    metric: Option<f64>,
    loop_activation: bool,
) {
    log.push(StageEntry {
        stage,
        name: name.into(),
        detail,
        metric,
        loop_activation,
    });
}

/// Full planning run: scarcity analysis, candidate search, verification with
/// target tightening, frontier and summary.
pub fn search(inputs: &PlanInputs) -> Result<PlanResult, PlanError> {
    check_inputs(inputs)?;
    let mut log = Vec::new();
    stage(
        &mut log,
        1,
        "inputs",
        format!(
            "{} components, {} load points, {} scenarios of {} h",
            inputs.template.components.len(),
            inputs.template.load_points.len(),
            inputs.scenarios.scenarios.len(),
            inputs.scenarios.horizon_hours()
        ),
        None,
        false,
    );

    let events = scarcity_events(
        &inputs.template,
        &inputs.scenarios,
        inputs.policy.scarcity_threshold,
    )?;
    let hint = storage_duration_recommendation(&events, inputs.scarcity.percentile)?;
    let critical = mean_critical_load(&inputs.template, &inputs.scenarios);
    let storage_bound_kwh = hint.map(|h| h * critical);
    let enforced = if inputs.scarcity.enforce_storage_bound {
        storage_bound_kwh
    } else {
        None
    };
    stage(
        &mut log,
        2,
        "scarcity",
        match hint {
            Some(h) => format!(
                "{} scarcity events; p{} duration {h} h; bound {:.2} kWh for {critical:.2} kW mean critical load",
                events.len(),
                inputs.scarcity.percentile * 100.0,
                h * critical
            ),
            None => "no scarcity events below the threshold".into(),
        },
        hint,
        false,
    );

    let size = inputs.grid.size();
    let strategy = if size <= inputs.search.exhaustive_limit {
        "exhaustive"
    } else {
        "lattice-refine"
    };
    stage(
        &mut log,
        3,
        "candidates",
        format!("{size} candidates, {strategy} search"),
        Some(size as f64),
        false,
    );

    let mut cache = Cache::new();
    let mut effective = inputs.targets;
    let mut best = locate(inputs, &effective, enforced, &mut cache)?;
    stage(
        &mut log,
        4,
        "dispatch",
        format!("{} candidates dispatched over every scenario", cache.len()),
        Some(cache.len() as f64),
        false,
    );
    stage(
        &mut log,
        5,
        "reliability",
        match &inputs.mcs {
            Some(c) => format!(
                "sequential simulation, {} iterations, seed {}",
                c.iterations, c.seed
            ),
            None => "outage simulation disabled; adequacy only".into(),
        },
        inputs.mcs.as_ref().map(|c| c.iterations as f64),
        false,
    );

    let feasible_now = |cache: &Cache, i: usize, t: &ReliabilityTargets| {
        let j = judge(&cache[&i], inputs, t, enforced);
        j.eligible && j.infeasibility == 0.0
    };

    let mut status = PlanStatus::Infeasible;
    let mut verification = None;
    if let Some(i) = best.filter(|&i| feasible_now(&cache, i, &effective)) {
        stage(
            &mut log,
            6,
            "selection",
            format!(
                "least-cost feasible candidate #{i}: {}",
                describe(&cache[&i].design)
            ),
            Some(cache[&i].lifecycle_cost()),
            false,
        );
        status = PlanStatus::Feasible;
        if let Some(vcfg) = &inputs.verification {
            status = PlanStatus::Unverified;
            for round in 0..inputs.search.max_outer_loops {
                let Some(i) = best.filter(|&i| feasible_now(&cache, i, &effective)) else {
                    status = PlanStatus::Infeasible;
                    break;
                };
                let e = &cache[&i];
                let v = evaluate(
                    &e.design,
                    &inputs.template,
                    &inputs.scenarios,
                    &inputs.policy,
                    Some(vcfg),
                    &inputs.cost_model,
                    &inputs.protection,
                )?;
                let misses = v.violations(&inputs.targets);
                if misses.is_empty() {
                    stage(
                        &mut log,
                        7,
                        "verification",
                        format!(
                            "candidate #{i} confirmed with {} iterations",
                            vcfg.iterations
                        ),
                        Some(v.lole_hours_per_year),
                        false,
                    );
                    verification = Some(v);
                    status = PlanStatus::Feasible;
                    break;
                }
                for (m, obs, lim) in &misses {
                    tighten(&mut effective, &inputs.targets, m, *obs);
                    stage(
                        &mut log,
                        7,
                        "verification",
                        format!("loop {}: candidate #{i} {m} {obs:.4} exceeds {lim}; tightening the search target", round + 1),
                        Some(*obs),
                        true,
                    );
                }
                verification = Some(v);
                best = locate(inputs, &effective, enforced, &mut cache)?;
            }
        }
    } else {
        stage(
            &mut log,
            6,
            "selection",
            "no candidate meets every target".into(),
            None,
            false,
        );
    }

    let chosen_index =
        best.filter(|&i| status != PlanStatus::Infeasible && feasible_now(&cache, i, &effective));
    if chosen_index.is_none() {
        status = PlanStatus::Infeasible;
        verification = None;
    }

    let mut records = Vec::with_capacity(cache.len());
    let mut eligible_points = Vec::new();
    for (&i, e) in &cache {
        let j = judge(e, inputs, &inputs.targets, enforced);
        if j.eligible {
            eligible_points.push((
                i,
                e.lifecycle_cost(),
                e.eens_kwh_per_year,
                e.lole_hours_per_year,
            ));
        }
        records.push(CandidateRecord {
            index: i,
            design: e.design,
            eligible: j.eligible,
            feasible: j.eligible && j.infeasibility == 0.0,
            lifecycle_cost: e.lifecycle_cost(),
            capex: e.cost.capex,
            eens_kwh_per_year: e.eens_kwh_per_year,
            lole_hours_per_year: e.lole_hours_per_year,
            reasons: j.reasons,
        });
    }
    let front: Vec<FrontierPoint> = frontier(&eligible_points)
        .into_iter()
        .map(|i| {
            let e = &cache[&i];
            FrontierPoint {
                index: i,
                design: e.design,
                lifecycle_cost: e.lifecycle_cost(),
                eens_kwh_per_year: e.eens_kwh_per_year,
                lole_hours_per_year: e.lole_hours_per_year,
            }
        })
        .collect();

    let diagnostic = if chosen_index.is_none() {
        cache
            .iter()
            .filter(|(_, e)| judge(e, inputs, &inputs.targets, enforced).eligible)
            .min_by(|a, b| {
                a.1.lole_hours_per_year
                    .total_cmp(&b.1.lole_hours_per_year)
                    .then(a.0.cmp(b.0))
            })
            .or_else(|| cache.iter().next())
            .map(|(_, e)| e.clone())
    } else {
        None
    };

    let chosen = chosen_index.map(|i| cache[&i].clone());
    let summary = match (&chosen, &diagnostic) {
        (Some(c), _) => format!(
            "Build {}. Lifecycle cost {:.2}; expected loss of load {:.3} h/yr; expected unserved energy {:.2} kWh/yr{}.",
            describe(&c.design),
            c.lifecycle_cost(),
            c.lole_hours_per_year,
            c.eens_kwh_per_year,
            if status == PlanStatus::Feasible && inputs.verification.is_some() { "; confirmed by a longer simulation" } else { "" }
        ),
        (None, Some(d)) => format!(
            "No candidate meets the targets. The most reliable eligible option, {}, still loses load {:.3} h/yr and leaves {:.2} kWh/yr unserved.",
            describe(&d.design),
            d.lole_hours_per_year,
            d.eens_kwh_per_year
        ),
        (None, None) => "No candidate could be evaluated.".into(),
    };
    stage(&mut log, 8, "summary", summary.clone(), None, false);
    stage(
        &mut log,
        9,
        "frontier",
        format!(
            "{} non-dominated designs over cost, EENS and LOLE",
            front.len()
        ),
        Some(front.len() as f64),
        false,
    );

    Ok(PlanResult {
        status,
        chosen,
        verification,
        diagnostic,
        frontier: front,
        evaluations: records,
        stage_log: log,
        storage_hint_hours: hint,
        storage_bound_kwh,
        effective_targets: effective,
        strategy: strategy.into(),
        summary,
    })
}
