//! Physical and customer description of a microgrid.
//!
//! A [`SystemModel`] lists the components that can fail, the load points they
//! feed, the generator and storage fleet, and the upstream grid connection.
//! Supply structure is declared explicitly: every load point carries one or
//! more supply paths, and a load point is energized while at least one of its
//! paths has every component available.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// 1 year = 8760 h throughout the crate.
pub const HOURS_PER_YEAR: f64 = 8760.0;

pub const SCHEMA_VERSION: u32 = 1;

/// Upper bound on path combinations examined by [`interrupting_sets`].
pub const DEFAULT_ENUMERATION_LIMIT: u64 = 1 << 20;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("unknown load point `{0}`")]
    UnknownLoadPoint(String),
    #[error("load point `{0}` has no non-empty supply path")]
    NoSupplyPath(String),
    #[error("unresolved component id `{0}`")]
    UnresolvedComponent(String),
    #[error(
        "topology too large for exact enumeration: load point `{load_point}` needs {combinations} path combinations (limit {limit})"
    )]
    TopologyTooLarge {
        load_point: String,
        combinations: u128,
        limit: u64,
    },
    #[error("load point `{load_point}` is not radial ({paths} supply paths); evaluate it with Monte Carlo simulation")]
    NotRadial { load_point: String, paths: usize },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("invalid system model: {0}")]
    Invalid(String),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentKind {
    Line,
    Transformer,
    Inverter,
    DispatchableUnit,
    PvUnit,
    WindUnit,
    StorageUnit,
    GridTie,
}

/// One segment of a piecewise-constant failure-rate schedule, in calendar
/// years from the start of the planning horizon. An open `to_year` extends the
/// segment indefinitely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSegment {
    pub from_year: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_year: Option<f64>,
    pub rate: f64,
}

/// Failure rate in occurrences per year, either constant or scheduled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FailureRate {
    Constant(f64),
    Schedule(Vec<RateSegment>),
}

impl Default for FailureRate {
    fn default() -> Self {
        FailureRate::Constant(0.0)
    }
}

impl FailureRate {
    /// Rate in force at `year` (years since horizon start).
    pub fn at(&self, year: f64) -> f64 {
        match self {
            FailureRate::Constant(r) => *r,
            FailureRate::Schedule(segments) => segments
                .iter()
                .find(|s| year >= s.from_year && s.to_year.is_none_or(|end| year < end))
                .or_else(|| segments.last())
                .map_or(0.0, |s| s.rate),
        }
    }

    /// Next schedule boundary strictly after `year`, if any.
    pub fn next_change_after(&self, year: f64) -> Option<f64> {
        match self {
            FailureRate::Constant(_) => None,
            FailureRate::Schedule(segments) => segments
                .iter()
                .filter_map(|s| s.to_year)
                .filter(|&end| end > year)
                .fold(None, |acc: Option<f64>, end| {
                    Some(acc.map_or(end, |a| a.min(end)))
                }),
        }
    }

    /// Time-averaged rate over `[0, years)`.
    pub fn mean_over(&self, years: f64) -> f64 {
        match self {
            FailureRate::Constant(r) => *r,
            FailureRate::Schedule(segments) => {
                if years <= 0.0 {
                    return self.at(0.0);
                }
                let mut total = 0.0;
                for s in segments {
                    let start = s.from_year.max(0.0);
                    let end = s.to_year.unwrap_or(f64::INFINITY).min(years);
                    if end > start {
                        total += s.rate * (end - start);
                    }
                }
                total / years
            }
        }
    }

    /// Whether the schedule defines a rate for every instant of `[0, years)`.
    pub fn covers(&self, years: f64) -> bool {
        match self {
            FailureRate::Constant(_) => true,
            FailureRate::Schedule(segments) => match segments.last() {
                None => false,
                Some(last) => last.to_year.is_none_or(|end| end >= years),
            },
        }
    }

    pub fn max_rate(&self) -> f64 {
        match self {
            FailureRate::Constant(r) => *r,
            FailureRate::Schedule(segments) => segments.iter().map(|s| s.rate).fold(0.0, f64::max),
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            FailureRate::Constant(r) => {
                if !(r.is_finite() && *r >= 0.0) {
                    out.push(format!("failure rate {r} must be finite and >= 0"));
                }
            }
            FailureRate::Schedule(segments) => {
                if segments.is_empty() {
                    out.push("failure-rate schedule is empty".into());
                    return out;
                }
                if segments[0].from_year != 0.0 {
                    out.push(format!(
                        "failure-rate schedule starts at year {} instead of 0",
                        segments[0].from_year
                    ));
                }
                for (i, s) in segments.iter().enumerate() {
                    if !(s.rate.is_finite() && s.rate >= 0.0) {
                        out.push(format!("schedule segment {i} has invalid rate {}", s.rate));
                    }
                    match s.to_year {
                        Some(end) if end <= s.from_year => {
                            out.push(format!("schedule segment {i} ends before it starts"))
                        }
                        None if i + 1 < segments.len() => {
                            out.push(format!("schedule segment {i} is open-ended but not last"))
                        }
                        _ => {}
                    }
                    if let (Some(end), Some(next)) = (s.to_year, segments.get(i + 1)) {
                        if next.from_year != end {
                            out.push(format!(
                                "schedule gap or overlap between year {end} and {}",
                                next.from_year
                            ));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub kind: ComponentKind,
    #[serde(default)]
    pub failure_rate: FailureRate,
    /// Repairs per year; mean repair time is `8760 / repair_rate` hours.
    #[serde(default)]
    pub repair_rate: f64,
}

impl Component {
    pub fn mean_repair_hours(&self) -> Option<f64> {
        (self.repair_rate > 0.0).then(|| HOURS_PER_YEAR / self.repair_rate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Priority {
    Critical,
    Essential,
    NonCritical,
}

impl Priority {
    pub const ALL: [Priority; 3] = [
        Priority::Critical,
        Priority::Essential,
        Priority::NonCritical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Priority::Critical => "critical",
            Priority::Essential => "essential",
            Priority::NonCritical => "non-critical",
        }
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A value per priority tier.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TierValues {
    pub critical: f64,
    pub essential: f64,
    pub non_critical: f64,
}

impl TierValues {
    pub fn uniform(v: f64) -> Self {
        TierValues {
            critical: v,
            essential: v,
            non_critical: v,
        }
    }

    pub fn get(&self, tier: Priority) -> f64 {
        match tier {
            Priority::Critical => self.critical,
            Priority::Essential => self.essential,
            Priority::NonCritical => self.non_critical,
        }
    }

    pub fn get_mut(&mut self, tier: Priority) -> &mut f64 {
        match tier {
            Priority::Critical => &mut self.critical,
            Priority::Essential => &mut self.essential,
            Priority::NonCritical => &mut self.non_critical,
        }
    }

    pub fn total(&self) -> f64 {
        self.critical + self.essential + self.non_critical
    }

    pub fn scaled(&self, k: f64) -> Self {
        TierValues {
            critical: self.critical * k,
            essential: self.essential * k,
            non_critical: self.non_critical * k,
        }
    }

    pub fn add_assign(&mut self, other: &TierValues) {
        self.critical += other.critical;
        self.essential += other.essential;
        self.non_critical += other.non_critical;
    }
}

fn default_hourly() -> Vec<f64> {
    vec![1.0; 24]
}

fn default_monthly() -> Vec<f64> {
    vec![1.0; 12]
}

fn default_priority() -> Priority {
    Priority::NonCritical
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    pub id: String,
    pub customer_count: u64,
    pub peak_load_kw: f64,
    /// Hour-of-day multipliers, 24 entries.
    #[serde(default = "default_hourly")]
    pub hourly_weights: Vec<f64>,
    /// Month-of-year multipliers, 12 entries.
    #[serde(default = "default_monthly")]
    pub monthly_weights: Vec<f64>,
    #[serde(default = "default_priority")]
    pub priority: Priority,
    pub supply_paths: Vec<Vec<String>>,
}

impl LoadPoint {
    /// Demand at the given hour of day (0..24) and month (0..12) before any
    /// scenario multiplier.
    pub fn load_kw(&self, hour: usize, month: usize) -> f64 {
        let w_h = self.hourly_weights.get(hour % 24).copied().unwrap_or(1.0);
        let w_m = self.monthly_weights.get(month % 12).copied().unwrap_or(1.0);
        w_h * w_m * self.peak_load_kw
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Dispatchable,
    Pv,
    Wind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorUnit {
    pub id: String,
    pub kind: GeneratorKind,
    pub rated_kw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_ref: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    pub id: String,
    pub energy_kwh: f64,
    pub power_kw: f64,
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub initial_soc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_ref: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridConnection {
    #[serde(default)]
    pub connected: bool,
    /// `None` means unlimited import.
    #[serde(default)]
    pub import_limit_kw: Option<f64>,
    /// `None` means unlimited export.
    #[serde(default)]
    pub export_limit_kw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_ref: Option<String>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub components: Vec<Component>,
    pub load_points: Vec<LoadPoint>,
    #[serde(default)]
    pub generators: Vec<GeneratorUnit>,
    #[serde(default, rename = "storage")]
    pub storage_units: Vec<StorageUnit>,
    #[serde(default)]
    pub grid: GridConnection,
}

impl SystemModel {
    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        let model: SystemModel = serde_json::from_str(s)?;
        if model.schema_version != SCHEMA_VERSION {
            return Err(ModelError::SchemaVersion {
                found: model.schema_version,
            });
        }
        Ok(model)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// N_T, the total number of customers served.
    pub fn total_customers(&self) -> u64 {
        self.load_points.iter().map(|lp| lp.customer_count).sum()
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn component_index(&self, id: &str) -> Option<usize> {
        self.components.iter().position(|c| c.id == id)
    }

    pub fn load_point(&self, id: &str) -> Option<&LoadPoint> {
        self.load_points.iter().find(|lp| lp.id == id)
    }

    pub fn rated_kw(&self, kind: GeneratorKind) -> f64 {
        self.generators
            .iter()
            .filter(|g| g.kind == kind)
            .map(|g| g.rated_kw)
            .sum()
    }

    /// Returns the model if it has no violations.
    pub fn validated(self) -> Result<Self, ModelError> {
        let report = validate(&self);
        if report.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::Invalid(report.to_string()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    SchemaVersion,
    DuplicateId,
    UnresolvedComponent,
    InvalidFailureRate,
    MissingRepairRate,
    NoCustomers,
    NegativeLoad,
    InvalidWeights,
    NoSupplyPath,
    NonPositiveRating,
    RenewableMarginalCost,
    DegenerateSocBand,
    SocOutOfRange,
    InitialSocOutsideBand,
    InvalidEfficiency,
    InvalidStorageSize,
    InvalidGridLimit,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::SchemaVersion => "unsupported schema version",
            ViolationKind::DuplicateId => "duplicate id",
            ViolationKind::UnresolvedComponent => "unresolved component id",
            ViolationKind::InvalidFailureRate => "invalid failure rate",
            ViolationKind::MissingRepairRate => "missing repair rate",
            ViolationKind::NoCustomers => "no customers",
            ViolationKind::NegativeLoad => "negative peak load",
            ViolationKind::InvalidWeights => "invalid load weights",
            ViolationKind::NoSupplyPath => "no supply path",
            ViolationKind::NonPositiveRating => "non-positive rating",
            ViolationKind::RenewableMarginalCost => "marginal cost on variable renewable",
            ViolationKind::DegenerateSocBand => "degenerate SoC band",
            ViolationKind::SocOutOfRange => "SoC limit outside [0, 1]",
            ViolationKind::InitialSocOutsideBand => "initial SoC outside band",
            ViolationKind::InvalidEfficiency => "efficiency outside (0, 1]",
            ViolationKind::InvalidStorageSize => "invalid storage size",
            ViolationKind::InvalidGridLimit => "invalid grid limit",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): {}", self.kind, self.subject, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    fn push(&mut self, kind: ViolationKind, subject: &str, detail: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            subject: subject.to_string(),
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Collects every invariant violation in `model`. An empty report means the
/// model is well-formed.
pub fn validate(model: &SystemModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    if model.schema_version != SCHEMA_VERSION {
        report.push(
            ViolationKind::SchemaVersion,
            "schema_version",
            format!("found {}, expected {SCHEMA_VERSION}", model.schema_version),
        );
    }

    let check_dupes = |ids: Vec<&str>, what: &str, report: &mut ValidationReport| {
        let mut seen = HashSet::new();
        for id in ids {
            if !seen.insert(id) {
                report.push(
                    ViolationKind::DuplicateId,
                    id,
                    format!("{what} id appears more than once"),
                );
            }
        }
    };
    check_dupes(
        model.components.iter().map(|c| c.id.as_str()).collect(),
        "component",
        &mut report,
    );
    check_dupes(
        model.load_points.iter().map(|c| c.id.as_str()).collect(),
        "load point",
        &mut report,
    );
    check_dupes(
        model.generators.iter().map(|c| c.id.as_str()).collect(),
        "generator",
        &mut report,
    );
    check_dupes(
        model.storage_units.iter().map(|c| c.id.as_str()).collect(),
        "storage",
        &mut report,
    );

    let known: HashSet<&str> = model.components.iter().map(|c| c.id.as_str()).collect();
    let resolve = |id: &str, owner: &str, report: &mut ValidationReport| {
        if !known.contains(id) {
            report.push(
                ViolationKind::UnresolvedComponent,
                owner,
                format!("`{id}` is not a declared component"),
            );
        }
    };

    for c in &model.components {
        for p in c.failure_rate.problems() {
            report.push(ViolationKind::InvalidFailureRate, &c.id, p);
        }
        if c.failure_rate.max_rate() > 0.0 && !(c.repair_rate.is_finite() && c.repair_rate > 0.0) {
            report.push(
                ViolationKind::MissingRepairRate,
                &c.id,
                "repair_rate must be > 0 when the component can fail",
            );
        }
    }

    for lp in &model.load_points {
        if lp.customer_count < 1 {
            report.push(
                ViolationKind::NoCustomers,
                &lp.id,
                "customer_count must be >= 1",
            );
        }
        if !(lp.peak_load_kw.is_finite() && lp.peak_load_kw >= 0.0) {
            report.push(
                ViolationKind::NegativeLoad,
                &lp.id,
                format!("peak_load_kw = {}", lp.peak_load_kw),
            );
        }
        if lp.hourly_weights.len() != 24 || lp.monthly_weights.len() != 12 {
            report.push(
                ViolationKind::InvalidWeights,
                &lp.id,
                format!(
                    "expected 24 hourly and 12 monthly weights, got {} and {}",
                    lp.hourly_weights.len(),
                    lp.monthly_weights.len()
                ),
            );
        }
        if lp
            .hourly_weights
            .iter()
            .chain(&lp.monthly_weights)
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            report.push(
                ViolationKind::InvalidWeights,
                &lp.id,
                "weights must be finite and >= 0",
            );
        }
        if !lp.supply_paths.iter().any(|p| !p.is_empty()) {
            report.push(
                ViolationKind::NoSupplyPath,
                &lp.id,
                "at least one non-empty supply path is required",
            );
        }
        for id in lp.supply_paths.iter().flatten() {
            resolve(id, &lp.id, &mut report);
        }
    }

    for g in &model.generators {
        if !(g.rated_kw.is_finite() && g.rated_kw > 0.0) {
            report.push(
                ViolationKind::NonPositiveRating,
                &g.id,
                format!("rated_kw = {}", g.rated_kw),
            );
        }
        if g.kind != GeneratorKind::Dispatchable && g.marginal_cost.is_some() {
            report.push(
                ViolationKind::RenewableMarginalCost,
                &g.id,
                "pv and wind units take no marginal_cost",
            );
        }
        if let Some(r) = &g.component_ref {
            resolve(r, &g.id, &mut report);
        }
    }

    for s in &model.storage_units {
        if !(s.energy_kwh.is_finite()
            && s.energy_kwh > 0.0
            && s.power_kw.is_finite()
            && s.power_kw >= 0.0)
        {
            report.push(
                ViolationKind::InvalidStorageSize,
                &s.id,
                format!("energy_kwh = {}, power_kw = {}", s.energy_kwh, s.power_kw),
            );
        }
        for eff in [s.charge_efficiency, s.discharge_efficiency] {
            if !(eff > 0.0 && eff <= 1.0) {
                report.push(
                    ViolationKind::InvalidEfficiency,
                    &s.id,
                    format!("efficiency {eff}"),
                );
            }
        }
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(s.soc_min) || !in_unit(s.soc_max) {
            report.push(
                ViolationKind::SocOutOfRange,
                &s.id,
                format!("soc_min = {}, soc_max = {}", s.soc_min, s.soc_max),
            );
        } else if s.soc_min >= s.soc_max {
            report.push(
                ViolationKind::DegenerateSocBand,
                &s.id,
                format!(
                    "soc_min = {} must be below soc_max = {}",
                    s.soc_min, s.soc_max
                ),
            );
        } else if s.initial_soc < s.soc_min || s.initial_soc > s.soc_max {
            report.push(
                ViolationKind::InitialSocOutsideBand,
                &s.id,
                format!("initial_soc = {}", s.initial_soc),
            );
        }
        if let Some(r) = &s.component_ref {
            resolve(r, &s.id, &mut report);
        }
    }

    for (name, limit) in [
        ("import_limit_kw", model.grid.import_limit_kw),
        ("export_limit_kw", model.grid.export_limit_kw),
    ] {
        if let Some(l) = limit {
            if !(l.is_finite() && l >= 0.0) {
                report.push(
                    ViolationKind::InvalidGridLimit,
                    "grid",
                    format!("{name} = {l}"),
                );
            }
        }
    }
    if let Some(r) = &model.grid.component_ref {
        resolve(r, "grid", &mut report);
    }
    report
}

fn unique_paths(lp: &LoadPoint) -> Vec<BTreeSet<&str>> {
    let mut paths: Vec<BTreeSet<&str>> = lp
        .supply_paths
        .iter()
        .map(|p| p.iter().map(String::as_str).collect())
        .collect();
    paths.sort();
    paths.dedup();
    paths
}

/// Minimal sets of components whose simultaneous unavailability de-energizes
/// `load_point`, sorted by size and then lexicographically.
///
/// Every minimal set picks exactly one component from each supply path, so the
/// enumeration walks the product of path choices and keeps the minimal unions.
/// `limit` caps the number of combinations examined.
pub fn interrupting_sets(
    model: &SystemModel,
    load_point: &str,
    limit: u64,
) -> Result<Vec<BTreeSet<String>>, ModelError> {
    let lp = model
        .load_point(load_point)
        .ok_or_else(|| ModelError::UnknownLoadPoint(load_point.to_string()))?;
    if !lp.supply_paths.iter().any(|p| !p.is_empty()) {
        return Err(ModelError::NoSupplyPath(lp.id.clone()));
    }
    for id in lp.supply_paths.iter().flatten() {
        if model.component(id).is_none() {
            return Err(ModelError::UnresolvedComponent(id.clone()));
        }
    }
    let paths = unique_paths(lp);
    // An empty path always conducts.
    if paths.iter().any(|p| p.is_empty()) {
        return Ok(Vec::new());
    }
    let combinations = paths
        .iter()
        .try_fold(1u128, |acc, p| acc.checked_mul(p.len() as u128))
        .unwrap_or(u128::MAX);
    if combinations > limit as u128 {
        return Err(ModelError::TopologyTooLarge {
            load_point: lp.id.clone(),
            combinations,
            limit,
        });
    }

    let choices: Vec<Vec<&str>> = paths.iter().map(|p| p.iter().copied().collect()).collect();
    let mut candidates: BTreeSet<BTreeSet<&str>> = BTreeSet::new();
    let mut odometer = vec![0usize; choices.len()];
    loop {
        let set: BTreeSet<&str> = odometer.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
        candidates.insert(set);
        // advance
        let mut k = 0;
        loop {
            if k == odometer.len() {
                return Ok(minimize(candidates));
            }
            odometer[k] += 1;
            if odometer[k] < choices[k].len() {
                break;
            }
            odometer[k] = 0;
            k += 1;
        }
    }
}

fn minimize(candidates: BTreeSet<BTreeSet<&str>>) -> Vec<BTreeSet<String>> {
    let mut by_size: Vec<BTreeSet<&str>> = candidates.into_iter().collect();
    by_size.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut kept: Vec<BTreeSet<&str>> = Vec::new();
    for set in by_size {
        if !kept.iter().any(|k| k.is_subset(&set)) {
            kept.push(set);
        }
    }
    kept.into_iter()
        .map(|s| s.into_iter().map(str::to_string).collect())
        .collect()
}

/// Σ λ_c over the single supply path of a radial load point, using each
/// component's first-year mean rate.
pub fn radial_equivalent_rate(model: &SystemModel, load_point: &str) -> Result<f64, ModelError> {
    radial_equivalent_rate_over(model, load_point, 1.0)
}

/// As [`radial_equivalent_rate`] with rates averaged over `horizon_years`.
pub fn radial_equivalent_rate_over(
    model: &SystemModel,
    load_point: &str,
    horizon_years: f64,
) -> Result<f64, ModelError> {
    let path = radial_path(model, load_point)?;
    Ok(path
        .iter()
        .map(|c| c.failure_rate.mean_over(horizon_years))
        .sum())
}

/// Components of the single supply path of a radial load point.
pub fn radial_path<'a>(
    model: &'a SystemModel,
    load_point: &str,
) -> Result<Vec<&'a Component>, ModelError> {
    let lp = model
        .load_point(load_point)
        .ok_or_else(|| ModelError::UnknownLoadPoint(load_point.to_string()))?;
    let paths = unique_paths(lp);
    if paths.len() != 1 {
        return Err(ModelError::NotRadial {
            load_point: lp.id.clone(),
            paths: paths.len(),
        });
    }
    paths[0]
        .iter()
        .map(|id| {
            model
                .component(id)
                .ok_or_else(|| ModelError::UnresolvedComponent(id.to_string()))
        })
        .collect()
}

/// Supply paths for the taps of a radial feeder: the load point at position
/// `k` is fed through the first `k + 1` components of `chain`.
pub fn radial_feeder_paths(chain: &[String]) -> Vec<Vec<String>> {
    (1..=chain.len()).map(|k| chain[..k].to_vec()).collect()
}

fn component_position(model: &SystemModel, id: &str) -> Result<usize, ModelError> {
    model
        .component_index(id)
        .ok_or_else(|| ModelError::UnresolvedComponent(id.to_string()))
}

/// Per load point, its distinct supply paths as component indices.
pub(crate) fn path_indices(model: &SystemModel) -> Result<Vec<Vec<Vec<usize>>>, ModelError> {
    model
        .load_points
        .iter()
        .map(|lp| {
            unique_paths(lp)
                .into_iter()
                .map(|p| {
                    p.into_iter()
                        .map(|id| component_position(model, id))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Fraction of a load point that stays connected: the best path, where each
/// path carries the least available of its components. Exact for 0/1 masks.
pub(crate) fn connected_fraction(paths: &[Vec<usize>], available: &[f64]) -> f64 {
    paths
        .iter()
        .map(|p| p.iter().map(|&c| available[c]).fold(1.0, f64::min))
        .fold(0.0, f64::max)
}

/// Index-based supply structure used by the simulators.
#[derive(Clone, Debug)]
pub(crate) struct SupplyStructure {
    /// Per load point: supply paths as component indices.
    pub paths: Vec<Vec<Vec<usize>>>,
    /// Per load point: interrupting sets when enumerable.
    pub cut_sets: Vec<Option<Vec<Vec<usize>>>>,
}

impl SupplyStructure {
    pub fn new(model: &SystemModel, limit: u64) -> Result<Self, ModelError> {
        let paths = path_indices(model)?;
        let mut cut_sets = Vec::with_capacity(model.load_points.len());
        for lp in &model.load_points {
            let cuts = match interrupting_sets(model, &lp.id, limit) {
                Ok(sets) => Some(
                    sets.iter()
                        .map(|s| {
                            s.iter()
                                .map(|id| component_position(model, id))
                                .collect::<Result<Vec<_>, _>>()
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                ),
                Err(ModelError::TopologyTooLarge { .. }) => None,
                Err(e) => return Err(e),
            };
            cut_sets.push(cuts);
        }
        Ok(SupplyStructure { paths, cut_sets })
    }

    /// Whether load point `lp` is energized given component availability.
    pub fn energized(&self, lp: usize, available: &[bool]) -> bool {
        match &self.cut_sets[lp] {
            Some(cuts) => !cuts.iter().any(|cut| cut.iter().all(|&c| !available[c])),
            None => self.paths[lp]
                .iter()
                .any(|p| p.iter().all(|&c| available[c])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(id: &str, rate: f64) -> Component {
        Component {
            id: id.into(),
            kind: ComponentKind::Line,
            failure_rate: FailureRate::Constant(rate),
            repair_rate: if rate > 0.0 { 876.0 } else { 0.0 },
        }
    }

    fn lp(id: &str, paths: &[&[&str]]) -> LoadPoint {
        LoadPoint {
            id: id.into(),
            customer_count: 10,
            peak_load_kw: 50.0,
            hourly_weights: vec![1.0; 24],
            monthly_weights: vec![1.0; 12],
            priority: Priority::NonCritical,
            supply_paths: paths
                .iter()
                .map(|p| p.iter().map(|s| s.to_string()).collect())
                .collect(),
        }
    }

    fn model(comps: Vec<Component>, lps: Vec<LoadPoint>) -> SystemModel {
        SystemModel {
            schema_version: SCHEMA_VERSION,
            components: comps,
            load_points: lps,
            generators: vec![],
            storage_units: vec![],
            grid: GridConnection::default(),
        }
    }

    fn sets(v: &[&[&str]]) -> Vec<BTreeSet<String>> {
        v.iter()
            .map(|s| s.iter().map(|x| x.to_string()).collect())
            .collect()
    }

    #[test]
    fn missing_component_is_one_violation() {
        let m = model(vec![comp("A", 0.1)], vec![lp("L1", &[&["A", "Z"]])]);
        let r = validate(&m);
        assert_eq!(r.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::UnresolvedComponent);
        assert_eq!(r.violations[0].kind.to_string(), "unresolved component id");
    }

    #[test]
    fn degenerate_soc_band() {
        let mut m = model(vec![comp("A", 0.1)], vec![lp("L1", &[&["A"]])]);
        m.storage_units.push(StorageUnit {
            id: "B1".into(),
            energy_kwh: 10.0,
            power_kw: 5.0,
            charge_efficiency: 0.95,
            discharge_efficiency: 0.95,
            soc_min: 0.5,
            soc_max: 0.5,
            initial_soc: 0.5,
            component_ref: None,
        });
        let r = validate(&m);
        assert_eq!(r.len(), 1);
        assert_eq!(r.violations[0].kind.to_string(), "degenerate SoC band");
    }

    #[test]
    fn schedule_gap_detected() {
        let mut c = comp("A", 0.0);
        c.failure_rate = FailureRate::Schedule(vec![
            RateSegment {
                from_year: 0.0,
                to_year: Some(2.0),
                rate: 0.1,
            },
            RateSegment {
                from_year: 3.0,
                to_year: None,
                rate: 0.2,
            },
        ]);
        c.repair_rate = 100.0;
        let m = model(vec![c], vec![lp("L1", &[&["A"]])]);
        let r = validate(&m);
        assert_eq!(r.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::InvalidFailureRate);
    }

    #[test]
    fn failing_component_needs_repair_rate() {
        let mut c = comp("A", 0.3);
        c.repair_rate = 0.0;
        let m = model(vec![c], vec![lp("L1", &[&["A"]])]);
        assert_eq!(
            validate(&m).violations[0].kind,
            ViolationKind::MissingRepairRate
        );
    }

    #[test]
    fn schedule_rate_lookup() {
        let r = FailureRate::Schedule(vec![
            RateSegment {
                from_year: 0.0,
                to_year: Some(1.0),
                rate: 0.5,
            },
            RateSegment {
                from_year: 1.0,
                to_year: None,
                rate: 0.1,
            },
        ]);
        assert_eq!(r.at(0.5), 0.5);
        assert_eq!(r.at(3.0), 0.1);
        assert_eq!(r.next_change_after(0.2), Some(1.0));
        assert_eq!(r.next_change_after(1.0), None);
        assert!((r.mean_over(2.0) - 0.3).abs() < 1e-12);
        assert!(r.covers(50.0));
    }

    #[test]
    fn radial_single_path_gives_singletons() {
        let m = model(
            vec![comp("A", 0.1), comp("B", 0.2)],
            vec![lp("L1", &[&["A", "B"]])],
        );
        assert_eq!(
            interrupting_sets(&m, "L1", DEFAULT_ENUMERATION_LIMIT).unwrap(),
            sets(&[&["A"], &["B"]])
        );
    }

    #[test]
    fn parallel_paths_need_both() {
        let m = model(
            vec![comp("A", 0.1), comp("B", 0.2)],
            vec![lp("L1", &[&["A"], &["B"]])],
        );
        assert_eq!(
            interrupting_sets(&m, "L1", DEFAULT_ENUMERATION_LIMIT).unwrap(),
            sets(&[&["A", "B"]])
        );
    }

    #[test]
    fn shared_component_paths() {
        let m = model(
            vec![comp("A", 0.1), comp("B", 0.2), comp("C", 0.3)],
            vec![lp("L1", &[&["A", "C"], &["B", "C"]])],
        );
        assert_eq!(
            interrupting_sets(&m, "L1", DEFAULT_ENUMERATION_LIMIT).unwrap(),
            sets(&[&["C"], &["A", "B"]])
        );
    }

    #[test]
    fn enumeration_limit_enforced() {
        let m = model(
            vec![
                comp("A", 0.1),
                comp("B", 0.2),
                comp("C", 0.3),
                comp("D", 0.3),
            ],
            vec![lp("L1", &[&["A", "B"], &["C", "D"]])],
        );
        let err = interrupting_sets(&m, "L1", 3).unwrap_err();
        assert!(matches!(
            err,
            ModelError::TopologyTooLarge {
                combinations: 4,
                ..
            }
        ));
        assert!(err
            .to_string()
            .contains("topology too large for exact enumeration"));
    }

    #[test]
    fn radial_rate_sums_path() {
        let m = model(
            vec![comp("A", 0.1), comp("B", 0.2), comp("C", 0.3)],
            vec![lp("L1", &[&["A", "B", "C"]]), lp("L2", &[&["A"], &["B"]])],
        );
        assert!((radial_equivalent_rate(&m, "L1").unwrap() - 0.6).abs() < 1e-12);
        assert!(matches!(
            radial_equivalent_rate(&m, "L2"),
            Err(ModelError::NotRadial { paths: 2, .. })
        ));
    }

    #[test]
    fn radial_rate_zero_and_identity() {
        let m = model(
            vec![comp("A", 0.0), comp("B", 0.5)],
            vec![lp("L1", &[&["A"]]), lp("L2", &[&["B"]])],
        );
        assert_eq!(radial_equivalent_rate(&m, "L1").unwrap(), 0.0);
        assert_eq!(radial_equivalent_rate(&m, "L2").unwrap(), 0.5);
    }

    #[test]
    fn feeder_helper_builds_prefixes() {
        let chain: Vec<String> = ["S", "L1", "L2"].iter().map(|s| s.to_string()).collect();
        let paths = radial_feeder_paths(&chain);
        assert_eq!(paths.len(), 3);
        assert_eq!(paths[2], chain);
        assert_eq!(paths[0], vec!["S".to_string()]);
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let m = model(vec![comp("A", 0.1)], vec![lp("L1", &[&["A"]])]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(SystemModel::from_json_str(&s).unwrap(), m);
        let bad = s.replace("\"schema_version\":1", "\"schema_version\":7");
        assert!(matches!(
            SystemModel::from_json_str(&bad),
            Err(ModelError::SchemaVersion { found: 7 })
        ));
    }
}
