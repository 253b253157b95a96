//! Reliability indices: load-point, customer-weighted system, deterministic
//! and probabilistic adequacy, interruption cost and metric selection.

mod advisor;
mod cost;
mod report;

pub use advisor::{advise, Advice, AdviceRow, DecisionContext, UnknownContext};
pub use cost::{interruption_cost, DamageFunction, InterruptionCost, TierDamage};
pub use report::{IndexEntry, IndexReport};

use serde::{Deserialize, Serialize};

use crate::dispatch::{DispatchTrace, SHED_EPSILON_KW};
use crate::mcs::OutageLog;
use crate::model::{
    radial_path, GeneratorKind, ModelError, SystemModel, TierValues, HOURS_PER_YEAR,
};
use crate::scenario::{Scenario, ScenarioSet};

/// Customary planning-reserve band, percent.
pub const PRM_GUIDANCE_BAND: (f64, f64) = (6.0, 30.0);
/// Common LOLE benchmark of 0.1 day per year, in hours.
pub const LOLE_BENCHMARK_HOURS: f64 = 2.4;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("load point `{0}` is not radial; use MCS for meshed topologies")]
    Meshed(String),
    #[error("total customer count is zero")]
    NoCustomers,
    #[error("peak demand is zero")]
    ZeroPeak,
    #[error("demand energy is zero")]
    ZeroDemand,
    #[error("scenario is empty")]
    EmptyScenario,
    #[error("no dispatch trace for scenario `{0}`")]
    MissingTrace(String),
    #[error("trace for scenario `{id}` has {found} steps, expected {expected}")]
    TraceLength {
        id: String,
        found: usize,
        expected: usize,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for IndexError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NotRadial { load_point, .. } => IndexError::Meshed(load_point),
            other => IndexError::Model(other),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadPointIndex {
    pub id: String,
    /// Interruptions per year.
    pub lambda: f64,
    /// Outage hours per year.
    pub u_hours: f64,
    /// Hours per interruption; absent when `lambda` is zero.
    pub r_hours: Option<f64>,
}

impl LoadPointIndex {
    pub fn new(id: impl Into<String>, lambda: f64, u_hours: f64) -> Self {
        LoadPointIndex {
            id: id.into(),
            lambda,
            u_hours,
            r_hours: (lambda > 0.0).then(|| u_hours / lambda),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadPointIndices {
    pub load_points: Vec<LoadPointIndex>,
}

/// λ_i = Σ λ_c, U_i = Σ λ_c·r_c and r_i = U_i/λ_i over each load point's
/// single supply path. Rates are first-year means.
pub fn load_point_analytic(model: &SystemModel) -> Result<LoadPointIndices, IndexError> {
    let mut out = Vec::with_capacity(model.load_points.len());
    for lp in &model.load_points {
        let mut lambda = 0.0;
        let mut u = 0.0;
        for c in radial_path(model, &lp.id)? {
            let rate = c.failure_rate.mean_over(1.0);
            if rate <= 0.0 {
                continue;
            }
            let r = c.mean_repair_hours().ok_or_else(|| {
                IndexError::Invalid(format!("component `{}` has no repair rate", c.id))
            })?;
            lambda += rate;
            u += rate * r;
        }
        out.push(LoadPointIndex::new(lp.id.clone(), lambda, u));
    }
    Ok(LoadPointIndices { load_points: out })
}

/// Annual sustained/momentary rates at one load point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadPointRates {
    pub customers: u64,
    pub sustained_per_year: f64,
    pub sustained_hours_per_year: f64,
    pub momentary_per_year: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomerIndices {
    pub saifi: f64,
    pub saidi: f64,
    pub maifi: f64,
    /// Absent when no customer was affected.
    pub caifi: Option<f64>,
    /// Absent when SAIFI is zero.
    pub caidi: Option<f64>,
    pub cemi_n: f64,
    pub n: u32,
    pub customers_total: u64,
    pub customers_affected: f64,
}

/// Customer-weighted system indices from per-load-point rates.
/// `customers_affected` is the expected number of customers with at least one
/// sustained interruption per reporting period and `cemi_fraction` the
/// expected fraction with more than `n`.
pub fn system_indices(
    rates: &[LoadPointRates],
    customers_affected: f64,
    n: u32,
    cemi_fraction: f64,
) -> Result<CustomerIndices, IndexError> {
    let total: u64 = rates.iter().map(|r| r.customers).sum();
    if total == 0 {
        return Err(IndexError::NoCustomers);
    }
    let nt = total as f64;
    let weighted = |f: fn(&LoadPointRates) -> f64| {
        rates.iter().map(|r| f(r) * r.customers as f64).sum::<f64>()
    };
    let interruptions = weighted(|r| r.sustained_per_year);
    let saifi = interruptions / nt;
    let saidi = weighted(|r| r.sustained_hours_per_year) / nt;
    let maifi = weighted(|r| r.momentary_per_year) / nt;
    Ok(CustomerIndices {
        saifi,
        saidi,
        maifi,
        caifi: (customers_affected > 0.0).then(|| interruptions / customers_affected.min(nt)),
        caidi: (saifi > 0.0).then(|| saidi / saifi),
        cemi_n: cemi_fraction,
        n,
        customers_total: total,
        customers_affected,
    })
}

/// Customer indices from MCS outage logs. Each log is one reporting period of
/// `horizon_years`; interruptions shorter than `momentary_hours` count toward
/// MAIFI only.
pub fn customer_indices(
    logs: &[OutageLog],
    model: &SystemModel,
    horizon_years: f64,
    momentary_hours: f64,
    n: u32,
) -> Result<CustomerIndices, IndexError> {
    if !(horizon_years > 0.0) {
        return Err(IndexError::Invalid(format!(
            "horizon_years must be > 0, got {horizon_years}"
        )));
    }
    let nlp = model.load_points.len();
    let customers: Vec<u64> = model
        .load_points
        .iter()
        .map(|lp| lp.customer_count)
        .collect();
    let total: u64 = customers.iter().sum();
    if total == 0 {
        return Err(IndexError::NoCustomers);
    }
    let mut sustained = vec![0u64; nlp];
    let mut hours = vec![0.0; nlp];
    let mut momentary = vec![0u64; nlp];
    let mut affected_sum = 0.0;
    let mut cemi_sum = 0.0;
    let mut counts = vec![0u32; nlp];
    for log in logs {
        counts.iter_mut().for_each(|c| *c = 0);
        for i in &log.interruptions {
            if i.duration() < momentary_hours {
                momentary[i.load_point] += 1;
            } else {
                sustained[i.load_point] += 1;
                hours[i.load_point] += i.duration();
                counts[i.load_point] += 1;
            }
        }
        affected_sum += (0..nlp)
            .filter(|&lp| counts[lp] > 0)
            .map(|lp| customers[lp] as f64)
            .sum::<f64>();
        cemi_sum += (0..nlp)
            .filter(|&lp| counts[lp] > n)
            .map(|lp| customers[lp] as f64)
            .sum::<f64>()
            / total as f64;
    }
    let k = logs.len().max(1) as f64;
    let periods = k * horizon_years;
    let rates: Vec<LoadPointRates> = (0..nlp)
        .map(|lp| LoadPointRates {
            customers: customers[lp],
            sustained_per_year: sustained[lp] as f64 / periods,
            sustained_hours_per_year: hours[lp] / periods,
            momentary_per_year: momentary[lp] as f64 / periods,
        })
        .collect();
    system_indices(&rates, affected_sum / k, n, cemi_sum / k)
}

fn poisson_tail_above(lambda: f64, n: u32) -> f64 {
    // P(K > n) = 1 - Σ_{k<=n} e^{-λ} λ^k / k!
    let mut term = (-lambda).exp();
    let mut cdf = term;
    for k in 1..=n {
        term *= lambda / k as f64;
        cdf += term;
    }
    (1.0 - cdf).clamp(0.0, 1.0)
}

/// Customer indices from analytic load-point rates, treating each load
/// point's annual interruption count as Poisson. No momentary events.
pub fn customer_indices_analytic(
    model: &SystemModel,
    indices: &LoadPointIndices,
    n: u32,
) -> Result<CustomerIndices, IndexError> {
    let total = model.total_customers();
    if total == 0 {
        return Err(IndexError::NoCustomers);
    }
    let mut rates = Vec::new();
    let mut affected = 0.0;
    let mut cemi = 0.0;
    for (lp, idx) in model.load_points.iter().zip(&indices.load_points) {
        let nc = lp.customer_count as f64;
        rates.push(LoadPointRates {
            customers: lp.customer_count,
            sustained_per_year: idx.lambda,
            sustained_hours_per_year: idx.u_hours,
            momentary_per_year: 0.0,
        });
        affected += nc * (1.0 - (-idx.lambda).exp());
        cemi += nc * poisson_tail_above(idx.lambda, n);
    }
    system_indices(&rates, affected, n, cemi / total as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicAdequacy {
    pub prm_percent: f64,
    pub erm_percent: f64,
    pub installed_kw: f64,
    pub peak_kw: f64,
    pub available_energy_kwh: f64,
    pub demand_energy_kwh: f64,
    pub prm_guidance_band: (f64, f64),
    pub caveats: Vec<String>,
}

/// System demand per step of `scenario`, kW.
pub fn demand_series(model: &SystemModel, scenario: &Scenario) -> Vec<f64> {
    (0..scenario.len())
        .map(|t| {
            let (hour, month) = scenario.calendar(t);
            let m = scenario.load.values[t];
            model
                .load_points
                .iter()
                .map(|lp| lp.load_kw(hour, month) * m)
                .sum()
        })
        .collect()
}

/// PRM from generator nameplate capacity against the peak step; ERM from
/// step-by-step available energy (dispatchable nameplate plus renewable
/// output) against demand energy.
pub fn adequacy_deterministic(
    model: &SystemModel,
    scenario: &Scenario,
) -> Result<DeterministicAdequacy, IndexError> {
    if scenario.is_empty() {
        return Err(IndexError::EmptyScenario);
    }
    let demand = demand_series(model, scenario);
    let peak = demand.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(IndexError::ZeroPeak);
    }
    let dt = scenario.step_hours();
    let demand_energy: f64 = demand.iter().sum::<f64>() * dt;
    if demand_energy <= 0.0 {
        return Err(IndexError::ZeroDemand);
    }
    let installed: f64 = model.generators.iter().map(|g| g.rated_kw).sum();
    let firm = model.rated_kw(GeneratorKind::Dispatchable);
    let pv = model.rated_kw(GeneratorKind::Pv);
    let wind = model.rated_kw(GeneratorKind::Wind);
    let available: f64 = (0..scenario.len())
        .map(|t| firm + pv * scenario.pv_cf.values[t] + wind * scenario.wind_cf.values[t])
        .sum::<f64>()
        * dt;
    let mut caveats = Vec::new();
    if pv + wind > 0.0 {
        caveats.push(format!(
            "{:.0}% of installed capacity is variable renewable; nameplate PRM overstates firm capacity, so confirm adequacy with LOLE/EENS",
            100.0 * (pv + wind) / installed
        ));
    }
    Ok(DeterministicAdequacy {
        prm_percent: (installed - peak) / peak * 100.0,
        erm_percent: (available - demand_energy) / demand_energy * 100.0,
        installed_kw: installed,
        peak_kw: peak,
        available_energy_kwh: available,
        demand_energy_kwh: demand_energy,
        prm_guidance_band: PRM_GUIDANCE_BAND,
        caveats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdequacyIndices {
    pub lolp: f64,
    /// Hours per horizon.
    pub lole_hours: f64,
    pub lpsp: f64,
    /// kWh per horizon.
    pub eens_kwh: f64,
    pub eens_by_tier: TierValues,
    pub demand_kwh: f64,
    pub horizon_steps: usize,
    pub step_hours: f64,
}

impl AdequacyIndices {
    pub fn horizon_hours(&self) -> f64 {
        self.horizon_steps as f64 * self.step_hours
    }

    /// Scales the horizon totals to one year.
    pub fn per_year(&self) -> (f64, f64) {
        let k = HOURS_PER_YEAR / self.horizon_hours();
        (self.lole_hours * k, self.eens_kwh * k)
    }
}

/// Shed and demand of one scenario, for [`adequacy_from_series`].
#[derive(Clone, Copy, Debug)]
pub struct ScenarioSeries<'a> {
    pub probability: f64,
    pub shed_kw: &'a [f64],
    pub demand_kw: &'a [f64],
    pub shed_by_tier: Option<&'a [TierValues]>,
}

/// LOLP, LOLE, EENS and LPSP over probability-weighted scenarios sharing
/// `step_hours` and one horizon.
pub fn adequacy_from_series(
    series: &[ScenarioSeries],
    step_hours: f64,
) -> Result<AdequacyIndices, IndexError> {
    let first = series.first().ok_or(IndexError::EmptyScenario)?;
    let t_steps = first.shed_kw.len();
    if t_steps == 0 {
        return Err(IndexError::EmptyScenario);
    }
    let mut lol_steps = 0.0;
    let mut eens = 0.0;
    let mut demand = 0.0;
    let mut by_tier = TierValues::default();
    for s in series {
        if s.shed_kw.len() != t_steps || s.demand_kw.len() != t_steps {
            return Err(IndexError::Invalid("scenario series lengths differ".into()));
        }
        let count = s.shed_kw.iter().filter(|&&x| x > SHED_EPSILON_KW).count() as f64;
        lol_steps += s.probability * count;
        eens += s.probability * s.shed_kw.iter().sum::<f64>() * step_hours;
        demand += s.probability * s.demand_kw.iter().sum::<f64>() * step_hours;
        if let Some(tiers) = s.shed_by_tier {
            let mut sum = TierValues::default();
            tiers.iter().for_each(|t| sum.add_assign(t));
            by_tier.add_assign(&sum.scaled(s.probability * step_hours));
        }
    }
    let lole = lol_steps * step_hours;
    Ok(AdequacyIndices {
        lolp: lol_steps / t_steps as f64,
        lole_hours: lole,
        lpsp: if demand > 0.0 { eens / demand } else { 0.0 },
        eens_kwh: eens,
        eens_by_tier: by_tier,
        demand_kwh: demand,
        horizon_steps: t_steps,
        step_hours,
    })
}

/// Probabilistic adequacy over dispatch traces, one per scenario in `set`.
pub fn adequacy_probabilistic(
    set: &ScenarioSet,
    traces: &[DispatchTrace],
) -> Result<AdequacyIndices, IndexError> {
    let mut columns = Vec::with_capacity(set.scenarios.len());
    for s in &set.scenarios {
        let trace = traces
            .iter()
            .find(|t| t.scenario_id == s.id)
            .ok_or_else(|| IndexError::MissingTrace(s.id.clone()))?;
        if trace.steps.len() != set.horizon_steps {
            return Err(IndexError::TraceLength {
                id: s.id.clone(),
                found: trace.steps.len(),
                expected: set.horizon_steps,
            });
        }
        let shed: Vec<f64> = trace.steps.iter().map(|st| st.shed_total()).collect();
        let demand: Vec<f64> = trace.steps.iter().map(|st| st.load_total()).collect();
        let tiers: Vec<TierValues> = trace.steps.iter().map(|st| st.shed_by_tier).collect();
        columns.push((s.probability, shed, demand, tiers));
    }
    let series: Vec<ScenarioSeries> = columns
        .iter()
        .map(|(p, shed, demand, tiers)| ScenarioSeries {
            probability: *p,
            shed_kw: shed,
            demand_kw: demand,
            shed_by_tier: Some(tiers),
        })
        .collect();
    adequacy_from_series(&series, set.step_hours())
}
