//! Monte Carlo reliability evaluation.
//!
//! The sequential mode walks a continuous-time chronology of component
//! failures and repairs per iteration, tracks load-point interruptions, and
//! dispatches each outage window against the scenario to measure the energy
//! left unserved beyond what the all-available system would shed anyway. The
//! non-sequential mode samples independent component states without
//! chronology.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispatch::{DispatchError, DispatchPolicy, Dispatcher};
use crate::model::{
    validate, Component, ModelError, Priority, SupplyStructure, SystemModel, TierValues,
    DEFAULT_ENUMERATION_LIMIT, HOURS_PER_YEAR,
};
use crate::scenario::ScenarioSet;

pub const DEFAULT_MOMENTARY_MINUTES: f64 = 5.0;
pub const MIN_MOMENTARY_MINUTES: f64 = 1.0;
pub const CONVERGENCE_CHECK_INTERVAL: u64 = 1000;
pub const DEFAULT_COV_EPSILON: f64 = 0.05;
/// Longest stretch dispatched after an outage while storage recovers to the
/// all-available trajectory.
pub const RECOVERY_TAIL_HOURS: f64 = 168.0;
const Z95: f64 = 1.96;
const SOC_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum McsError {
    #[error("{what} must be > 0, got {value}")]
    InvalidRate { what: &'static str, value: f64 },
    #[error("uniform draw {0} outside (0, 1]")]
    InvalidDraw(f64),
    #[error("invalid MCS configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}

/// Time to failure in years for rate `lambda` (per year) and uniform draw `x`.
pub fn draw_ttf(lambda: f64, x: f64) -> Result<f64, McsError> {
    exponential(lambda, x, "failure rate")
}

/// Time to repair in years for repair rate `mu` (per year) and uniform draw `x`.
pub fn draw_ttr(mu: f64, x: f64) -> Result<f64, McsError> {
    exponential(mu, x, "repair rate")
}

fn exponential(rate: f64, x: f64, what: &'static str) -> Result<f64, McsError> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(McsError::InvalidRate { what, value: rate });
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(McsError::InvalidDraw(x));
    }
    let t = -x.ln() / rate;
    Ok(if t == 0.0 { 0.0 } else { t })
}

/// Uniform draw on (0, 1].
pub fn uniform_open_closed<R: Rng>(rng: &mut R) -> f64 {
    (1.0 - rng.gen::<f64>()).max(f64::MIN_POSITIVE)
}

/// Load-point demand from hour and month weights.
pub fn load_at(w_h: f64, w_m: f64, peak_kw: f64) -> f64 {
    w_h * w_m * peak_kw
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McsMode {
    #[default]
    Sequential,
    Nonsequential,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convergence {
    #[default]
    FixedN,
    CovOfEens,
}

fn default_horizon() -> f64 {
    1.0
}
fn default_cov() -> f64 {
    DEFAULT_COV_EPSILON
}
fn default_momentary() -> f64 {
    DEFAULT_MOMENTARY_MINUTES
}
fn default_limit() -> u64 {
    DEFAULT_ENUMERATION_LIMIT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McsConfig {
    /// Iteration count, or the cap when converging on the EENS coefficient of variation.
    pub iterations: u64,
    #[serde(default = "default_horizon")]
    pub horizon_years: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: McsMode,
    #[serde(default)]
    pub convergence: Convergence,
    #[serde(default = "default_cov")]
    pub cov_epsilon: f64,
    #[serde(default = "default_momentary")]
    pub momentary_threshold_minutes: f64,
    #[serde(default = "default_limit")]
    pub enumeration_limit: u64,
}

impl McsConfig {
    pub fn new(iterations: u64, horizon_years: f64, seed: u64) -> Self {
        McsConfig {
            iterations,
            horizon_years,
            seed,
            mode: McsMode::Sequential,
            convergence: Convergence::FixedN,
            cov_epsilon: DEFAULT_COV_EPSILON,
            momentary_threshold_minutes: DEFAULT_MOMENTARY_MINUTES,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
        }
    }

    pub fn check(&self) -> Result<(), McsError> {
        let bad = |m: String| Err(McsError::InvalidConfig(m));
        if self.iterations == 0 {
            return bad("iterations must be >= 1".into());
        }
        if !(self.horizon_years.is_finite() && self.horizon_years > 0.0) {
            return bad(format!(
                "horizon_years must be > 0, got {}",
                self.horizon_years
            ));
        }
        if !(self.cov_epsilon > 0.0 && self.cov_epsilon < 1.0) {
            return bad(format!("cov_epsilon {} outside (0, 1)", self.cov_epsilon));
        }
        if !(self.momentary_threshold_minutes.is_finite()
            && self.momentary_threshold_minutes >= MIN_MOMENTARY_MINUTES)
        {
            return bad(format!(
                "momentary threshold must be >= {MIN_MOMENTARY_MINUTES} minute, got {}",
                self.momentary_threshold_minutes
            ));
        }
        Ok(())
    }

    pub fn momentary_threshold_hours(&self) -> f64 {
        self.momentary_threshold_minutes / 60.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutageEvent {
    pub component: String,
    pub t_fail: f64,
    pub t_restore: f64,
    /// Load points de-energized by this failure.
    pub affected_load_points: Vec<String>,
    pub unserved_energy: f64,
    pub momentary: bool,
}

/// A continuous de-energized interval at one load point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interruption {
    pub load_point: usize,
    pub start: f64,
    pub end: f64,
}

impl Interruption {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutageLog {
    pub iteration: u64,
    pub scenario: usize,
    pub events: Vec<OutageEvent>,
    pub interruptions: Vec<Interruption>,
    /// Unserved energy beyond the all-available baseline, per tier, kWh.
    pub unserved_by_tier: TierValues,
    /// Hours with loss of load that the all-available baseline does not have.
    pub lol_hours: f64,
}

impl OutageLog {
    pub fn unserved_kwh(&self) -> f64 {
        self.unserved_by_tier.total()
    }
}

pub fn write_outage_csv<W: Write>(logs: &[OutageLog], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "component",
        "t_fail_h",
        "t_restore_h",
        "unserved_kwh",
        "momentary",
    ])?;
    for log in logs {
        for e in &log.events {
            w.write_record([
                log.iteration.to_string(),
                e.component.clone(),
                e.t_fail.to_string(),
                e.t_restore.to_string(),
                e.unserved_energy.to_string(),
                e.momentary.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadPointEstimate {
    pub id: String,
    /// Interruptions per year, momentary included. Absent without chronology.
    pub lambda: Option<f64>,
    pub lambda_half_width: Option<f64>,
    pub sustained_lambda: Option<f64>,
    pub momentary_lambda: Option<f64>,
    /// Interrupted hours per year.
    pub u_hours: f64,
    pub u_half_width: f64,
    /// Hours per interruption; absent when no interruption was observed.
    pub r_hours: Option<f64>,
    /// Fraction of time de-energized.
    pub unavailability: f64,
    pub unavailability_half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McsEstimate {
    pub mode: McsMode,
    pub chronology: String,
    pub iterations_used: u64,
    pub converged: bool,
    pub horizon_years: f64,
    pub momentary_threshold_minutes: f64,
    pub confidence_level: f64,
    pub load_points: Vec<LoadPointEstimate>,
    pub eens_kwh_per_year: f64,
    pub eens_half_width: f64,
    pub eens_by_tier: TierValues,
    pub lole_hours_per_year: f64,
    pub lole_half_width: f64,
    /// Coefficient of variation of the EENS estimate.
    pub eens_cov: Option<f64>,
    pub caveats: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McsRun {
    pub logs: Vec<OutageLog>,
    pub estimate: McsEstimate,
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    fn sd(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        var.max(0.0).sqrt()
    }

    fn half_width(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            Z95 * self.sd() / (self.n as f64).sqrt()
        }
    }

    fn cov(&self) -> Option<f64> {
        let m = self.mean();
        (m > 0.0 && self.n >= 2).then(|| self.sd() / (m * (self.n as f64).sqrt()))
    }
}

struct Baseline {
    dispatcher: Dispatcher,
    soc_before: Vec<Vec<f64>>,
    shed: Vec<TierValues>,
    lol: Vec<bool>,
}

impl Baseline {
    fn new(dispatcher: Dispatcher) -> Self {
        let n = dispatcher.len();
        let mut soc = dispatcher.initial_soc().to_vec();
        let mut soc_before = Vec::with_capacity(n);
        let mut shed = Vec::with_capacity(n);
        let mut lol = Vec::with_capacity(n);
        for t in 0..n {
            soc_before.push(soc.clone());
            let st = dispatcher.step(t, None, &mut soc);
            shed.push(st.shed_by_tier);
            lol.push(st.loss_of_load());
        }
        Baseline {
            dispatcher,
            soc_before,
            shed,
            lol,
        }
    }
}

struct Context<'a> {
    model: &'a SystemModel,
    config: &'a McsConfig,
    /// Component indices sorted by id.
    order: Vec<usize>,
    supply: SupplyStructure,
    load_points_of: Vec<Vec<usize>>,
    baselines: Vec<Baseline>,
    cumulative: Vec<f64>,
    horizon_hours: f64,
}

struct Outcome {
    log: OutageLog,
    interruptions_per_lp: Vec<u32>,
    hours_per_lp: Vec<f64>,
}

impl<'a> Context<'a> {
    fn new(
        model: &'a SystemModel,
        scenarios: &ScenarioSet,
        policy: &DispatchPolicy,
        config: &'a McsConfig,
        with_storage: bool,
    ) -> Result<Self, McsError> {
        config.check()?;
        let report = validate(model);
        if !report.is_empty() {
            return Err(McsError::InvalidModel(report.to_string()));
        }
        scenarios
            .check()
            .map_err(|e| McsError::InvalidConfig(e.to_string()))?;
        let supply = SupplyStructure::new(model, config.enumeration_limit)?;
        let mut order: Vec<usize> = (0..model.components.len()).collect();
        order.sort_by(|&a, &b| model.components[a].id.cmp(&model.components[b].id));
        let mut load_points_of = vec![Vec::new(); model.components.len()];
        for (lp, paths) in supply.paths.iter().enumerate() {
            let mut comps: Vec<usize> = paths.iter().flatten().copied().collect();
            comps.sort_unstable();
            comps.dedup();
            for c in comps {
                load_points_of[c].push(lp);
            }
        }
        let stripped;
        let dispatch_model = if with_storage {
            model
        } else {
            stripped = SystemModel {
                storage_units: Vec::new(),
                ..model.clone()
            };
            &stripped
        };
        let baselines = scenarios
            .scenarios
            .iter()
            .map(|s| Dispatcher::new(dispatch_model, s, policy).map(Baseline::new))
            .collect::<Result<Vec<_>, _>>()?;
        let mut acc = 0.0;
        let cumulative = scenarios
            .scenarios
            .iter()
            .map(|s| {
                acc += s.probability;
                acc
            })
            .collect();
        Ok(Context {
            model,
            config,
            order,
            supply,
            load_points_of,
            baselines,
            cumulative,
            horizon_hours: config.horizon_years * HOURS_PER_YEAR,
        })
    }

    fn rng(&self, iteration: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(iteration);
        rng
    }

    fn pick_scenario(&self, u: f64) -> usize {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let target = u * total;
        self.cumulative
            .iter()
            .position(|&c| target <= c)
            .unwrap_or(self.cumulative.len() - 1)
    }

    /// Next failure time in hours at or after `from`, sampled as a
    /// piecewise-exponential law over the rate schedule. `None` past the horizon.
    fn next_failure(&self, c: &Component, from: f64, rng: &mut ChaCha8Rng) -> Option<f64> {
        let mut t = from;
        while t < self.horizon_hours {
            let year = t / HOURS_PER_YEAR;
            let rate = c.failure_rate.at(year);
            let boundary = c
                .failure_rate
                .next_change_after(year)
                .map(|y| y * HOURS_PER_YEAR);
            if rate > 0.0 {
                let ttf =
                    draw_ttf(rate, uniform_open_closed(rng)).expect("positive rate and (0,1] draw");
                let candidate = t + ttf * HOURS_PER_YEAR;
                match boundary {
                    Some(b) if candidate >= b => t = b,
                    _ => return (candidate < self.horizon_hours).then_some(candidate),
                }
            } else {
                t = boundary?;
            }
        }
        None
    }

    fn sequential_iteration(&self, iteration: u64) -> Outcome {
        let model = self.model;
        let mut rng = self.rng(iteration);
        let scenario = self.pick_scenario(uniform_open_closed(&mut rng));
        let nc = model.components.len();
        let nlp = model.load_points.len();
        let mut up = vec![true; nc];
        let mut next: Vec<Option<f64>> = vec![None; nc];
        for &c in &self.order {
            next[c] = self.next_failure(&model.components[c], 0.0, &mut rng);
        }
        let mut energized: Vec<bool> = (0..nlp).map(|lp| self.supply.energized(lp, &up)).collect();
        let mut open: Vec<Option<f64>> = vec![None; nlp];
        let mut events: Vec<OutageEvent> = Vec::new();
        let mut event_components: Vec<usize> = Vec::new();
        let mut interruptions = Vec::new();
        let momentary_h = self.config.momentary_threshold_hours();

        loop {
            let mut best: Option<(usize, f64)> = None;
            for &c in &self.order {
                if let Some(t) = next[c] {
                    if best.is_none_or(|(_, bt)| t < bt) {
                        best = Some((c, t));
                    }
                }
            }
            let Some((c, t)) = best else { break };
            let comp = &model.components[c];
            if up[c] {
                up[c] = false;
                let ttr = draw_ttr(comp.repair_rate, uniform_open_closed(&mut rng))
                    .expect("validated repair rate")
                    * HOURS_PER_YEAR;
                next[c] = Some(t + ttr);
                let mut affected = Vec::new();
                for &lp in &self.load_points_of[c] {
                    if energized[lp] && !self.supply.energized(lp, &up) {
                        energized[lp] = false;
                        open[lp] = Some(t);
                        affected.push(model.load_points[lp].id.clone());
                    }
                }
                events.push(OutageEvent {
                    component: comp.id.clone(),
                    t_fail: t,
                    t_restore: t + ttr,
                    affected_load_points: affected,
                    unserved_energy: 0.0,
                    momentary: ttr < momentary_h,
                });
                event_components.push(c);
            } else {
                up[c] = true;
                next[c] = self.next_failure(comp, t, &mut rng);
                for &lp in &self.load_points_of[c] {
                    if !energized[lp] && self.supply.energized(lp, &up) {
                        energized[lp] = true;
                        if let Some(start) = open[lp].take() {
                            interruptions.push(Interruption {
                                load_point: lp,
                                start,
                                end: t,
                            });
                        }
                    }
                }
            }
        }
        interruptions.sort_by(|a, b| {
            a.start
                .total_cmp(&b.start)
                .then(a.load_point.cmp(&b.load_point))
        });

        let mut interruptions_per_lp = vec![0u32; nlp];
        let mut hours_per_lp = vec![0.0; nlp];
        for i in &interruptions {
            interruptions_per_lp[i.load_point] += 1;
            hours_per_lp[i.load_point] += i.duration();
        }

        let mut unserved_by_tier = TierValues::default();
        let mut lol_hours = 0.0;
        let baseline = &self.baselines[scenario];
        let mut start = 0;
        while start < events.len() {
            let mut end = start + 1;
            let mut reach = events[start].t_restore;
            while end < events.len() && events[end].t_fail < reach {
                reach = reach.max(events[end].t_restore);
                end += 1;
            }
            let outages: Vec<(usize, f64, f64)> = (start..end)
                .map(|i| (event_components[i], events[i].t_fail, events[i].t_restore))
                .collect();
            let (unserved, lol) = self.window_impact(baseline, &outages);
            let total = unserved.total();
            let span: f64 = outages.iter().map(|o| o.2 - o.1).sum();
            for (k, e) in events[start..end].iter_mut().enumerate() {
                let share = if span > 0.0 {
                    (outages[k].2 - outages[k].1) / span
                } else {
                    1.0 / outages.len() as f64
                };
                e.unserved_energy = total * share;
            }
            unserved_by_tier.add_assign(&unserved);
            lol_hours += lol;
            start = end;
        }

        Outcome {
            log: OutageLog {
                iteration,
                scenario,
                events,
                interruptions,
                unserved_by_tier,
                lol_hours,
            },
            interruptions_per_lp,
            hours_per_lp,
        }
    }

    /// Dispatches an outage cluster with fractional per-step availability,
    /// starting from the baseline state and continuing until storage rejoins
    /// the baseline trajectory. Returns the unserved energy and loss-of-load
    /// hours in excess of the baseline.
    fn window_impact(&self, b: &Baseline, outages: &[(usize, f64, f64)]) -> (TierValues, f64) {
        let d = &b.dispatcher;
        let n = d.len();
        if n == 0 {
            return (TierValues::default(), 0.0);
        }
        let dt = d.step_hours();
        let a = outages.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
        let e = outages.iter().map(|o| o.2).fold(0.0, f64::max);
        let k0 = (a / dt).floor() as usize;
        let k1 = ((e / dt).ceil() as usize).max(k0 + 1);
        let mut soc = b.soc_before[k0 % n].clone();
        let mut avail = vec![1.0; d.component_count()];
        let mut extra = TierValues::default();
        let mut lol = 0.0;
        let mut account = |k: usize, st: &crate::dispatch::DispatchStep| {
            let base = &b.shed[k % n];
            for tier in Priority::ALL {
                *extra.get_mut(tier) += (st.shed_by_tier.get(tier) - base.get(tier)) * dt;
            }
            if st.loss_of_load() && !b.lol[k % n] {
                lol += dt;
            }
        };
        for k in k0..k1 {
            avail.iter_mut().for_each(|v| *v = 1.0);
            let (lo, hi) = (k as f64 * dt, (k + 1) as f64 * dt);
            for &(c, s, f) in outages {
                let overlap = f.min(hi) - s.max(lo);
                if overlap > 0.0 {
                    avail[c] = (avail[c] - overlap / dt).max(0.0);
                }
            }
            let st = d.step(k % n, Some(&avail), &mut soc);
            account(k, &st);
        }
        let tail_steps = (RECOVERY_TAIL_HOURS / dt).ceil() as usize;
        let mut k = k1;
        while k < k1 + tail_steps {
            let target = &b.soc_before[k % n];
            if soc
                .iter()
                .zip(target)
                .all(|(x, y)| (x - y).abs() <= SOC_MATCH_TOLERANCE)
            {
                break;
            }
            let st = d.step(k % n, None, &mut soc);
            account(k, &st);
            k += 1;
        }
        for tier in Priority::ALL {
            let v = extra.get_mut(tier);
            *v = v.max(0.0);
        }
        (extra, lol)
    }

    fn nonsequential_sample(&self, sample: u64, unavailability: &[f64]) -> (Vec<bool>, f64, bool) {
        let mut rng = self.rng(sample);
        let scenario = self.pick_scenario(uniform_open_closed(&mut rng));
        let b = &self.baselines[scenario];
        let step = if b.dispatcher.is_empty() {
            0
        } else {
            rng.gen_range(0..b.dispatcher.len())
        };
        let mut up = vec![true; self.model.components.len()];
        for &c in &self.order {
            let u = uniform_open_closed(&mut rng);
            // u lies in (0, 1], so q = 0 never marks a component down.
            up[c] = !(u < unavailability[c]);
        }
        let down: Vec<bool> = (0..self.model.load_points.len())
            .map(|lp| !self.supply.energized(lp, &up))
            .collect();
        if up.iter().all(|&u| u) || b.dispatcher.is_empty() {
            return (down, 0.0, false);
        }
        let avail: Vec<f64> = up.iter().map(|&u| if u { 1.0 } else { 0.0 }).collect();
        let st = b.dispatcher.step(step, Some(&avail), &mut []);
        let shed = (st.shed_total() - b.shed[step].total()).max(0.0);
        let lol = st.loss_of_load() && !b.lol[step];
        (down, shed, lol)
    }
}

fn thread_note() -> String {
    "iteration results are reduced in iteration order, so output does not depend on thread count"
        .into()
}

/// Sequential (chronological) simulation over `config.iterations` iterations.
pub fn run_sequential(
    model: &SystemModel,
    scenarios: &ScenarioSet,
    policy: &DispatchPolicy,
    config: &McsConfig,
) -> Result<McsRun, McsError> {
    let ctx = Context::new(model, scenarios, policy, config, true)?;
    for c in &model.components {
        if c.failure_rate.max_rate() > 0.0 && !(c.repair_rate > 0.0) {
            return Err(McsError::InvalidRate {
                what: "repair rate",
                value: c.repair_rate,
            });
        }
    }
    let nlp = model.load_points.len();
    let years = config.horizon_years;
    let momentary_h = config.momentary_threshold_hours();
    let mut logs = Vec::new();
    let mut lambda = vec![Moments::default(); nlp];
    let mut hours = vec![Moments::default(); nlp];
    let mut sustained = vec![0u64; nlp];
    let mut momentary = vec![0u64; nlp];
    let mut eens = Moments::default();
    let mut lole = Moments::default();
    let mut by_tier = TierValues::default();
    let mut done = 0u64;
    let mut converged = config.convergence == Convergence::FixedN;
    let batch = match config.convergence {
        Convergence::FixedN => config.iterations,
        Convergence::CovOfEens => CONVERGENCE_CHECK_INTERVAL,
    };
    while done < config.iterations {
        let end = (done + batch).min(config.iterations);
        let outcomes: Vec<Outcome> = (done..end)
            .into_par_iter()
            .map(|i| ctx.sequential_iteration(i))
            .collect();
        for o in outcomes {
            for lp in 0..nlp {
                lambda[lp].push(o.interruptions_per_lp[lp] as f64 / years);
                hours[lp].push(o.hours_per_lp[lp] / years);
            }
            for i in &o.log.interruptions {
                if i.duration() < momentary_h {
                    momentary[i.load_point] += 1;
                } else {
                    sustained[i.load_point] += 1;
                }
            }
            eens.push(o.log.unserved_kwh() / years);
            lole.push(o.log.lol_hours / years);
            by_tier.add_assign(&o.log.unserved_by_tier);
            logs.push(o.log);
        }
        done = end;
        if config.convergence == Convergence::CovOfEens {
            if let Some(cov) = eens.cov() {
                if cov < config.cov_epsilon {
                    converged = true;
                    break;
                }
            }
        }
    }
    log::debug!(
        "sequential MCS finished {done} iterations; {}",
        thread_note()
    );
    let n = done as f64;
    let load_points = model
        .load_points
        .iter()
        .enumerate()
        .map(|(i, lp)| {
            let l = lambda[i].mean();
            let u = hours[i].mean();
            LoadPointEstimate {
                id: lp.id.clone(),
                lambda: Some(l),
                lambda_half_width: Some(lambda[i].half_width()),
                sustained_lambda: Some(sustained[i] as f64 / (n * years)),
                momentary_lambda: Some(momentary[i] as f64 / (n * years)),
                u_hours: u,
                u_half_width: hours[i].half_width(),
                r_hours: (l > 0.0).then(|| u / l),
                unavailability: u / HOURS_PER_YEAR,
                unavailability_half_width: hours[i].half_width() / HOURS_PER_YEAR,
            }
        })
        .collect();
    let mut caveats = Vec::new();
    if !converged {
        caveats.push(format!(
            "EENS coefficient of variation did not fall below {} within {} iterations",
            config.cov_epsilon, config.iterations
        ));
    }
    Ok(McsRun {
        logs,
        estimate: McsEstimate {
            mode: McsMode::Sequential,
            chronology: "sequential".into(),
            iterations_used: done,
            converged,
            horizon_years: years,
            momentary_threshold_minutes: config.momentary_threshold_minutes,
            confidence_level: 0.95,
            load_points,
            eens_kwh_per_year: eens.mean(),
            eens_half_width: eens.half_width(),
            eens_by_tier: by_tier.scaled(1.0 / (n * years)),
            lole_hours_per_year: lole.mean(),
            lole_half_width: lole.half_width(),
            eens_cov: eens.cov(),
            caveats,
        },
    })
}

/// Steady-state unavailability λ/(λ+μ) of a component, using its mean rate
/// over `years`.
pub fn steady_state_unavailability(c: &Component, years: f64) -> f64 {
    let lambda = c.failure_rate.mean_over(years);
    if lambda <= 0.0 {
        0.0
    } else {
        lambda / (lambda + c.repair_rate)
    }
}

/// Independent state sampling. Each sample draws every component up or down
/// from its steady-state unavailability and one random scenario step; storage
/// is not represented.
pub fn run_nonsequential(
    model: &SystemModel,
    scenarios: &ScenarioSet,
    policy: &DispatchPolicy,
    config: &McsConfig,
) -> Result<McsRun, McsError> {
    let ctx = Context::new(model, scenarios, policy, config, false)?;
    let q: Vec<f64> = model
        .components
        .iter()
        .map(|c| steady_state_unavailability(c, config.horizon_years))
        .collect();
    let nlp = model.load_points.len();
    let mut down = vec![Moments::default(); nlp];
    let mut shed = Moments::default();
    let mut lol = Moments::default();
    let samples: Vec<(Vec<bool>, f64, bool)> = (0..config.iterations)
        .into_par_iter()
        .map(|i| ctx.nonsequential_sample(i, &q))
        .collect();
    for (d, s, l) in samples {
        for lp in 0..nlp {
            down[lp].push(if d[lp] { 1.0 } else { 0.0 });
        }
        shed.push(s * HOURS_PER_YEAR);
        lol.push(if l { HOURS_PER_YEAR } else { 0.0 });
    }
    let load_points = model
        .load_points
        .iter()
        .enumerate()
        .map(|(i, lp)| LoadPointEstimate {
            id: lp.id.clone(),
            lambda: None,
            lambda_half_width: None,
            sustained_lambda: None,
            momentary_lambda: None,
            u_hours: down[i].mean() * HOURS_PER_YEAR,
            u_half_width: down[i].half_width() * HOURS_PER_YEAR,
            r_hours: None,
            unavailability: down[i].mean(),
            unavailability_half_width: down[i].half_width(),
        })
        .collect();
    Ok(McsRun {
        logs: Vec::new(),
        estimate: McsEstimate {
            mode: McsMode::Nonsequential,
            chronology: "none".into(),
            iterations_used: config.iterations,
            converged: true,
            horizon_years: config.horizon_years,
            momentary_threshold_minutes: config.momentary_threshold_minutes,
            confidence_level: 0.95,
            load_points,
            eens_kwh_per_year: shed.mean(),
            eens_half_width: shed.half_width(),
            eens_by_tier: TierValues::default(),
            lole_hours_per_year: lol.mean(),
            lole_half_width: lol.half_width(),
            eens_cov: shed.cov(),
            caveats: vec![
                "state sampling has no chronology: interruption frequency is not estimated".into(),
                "storage is not represented, so energy-shifting effects are not captured".into(),
                "U_i is the sampled unavailability times 8760 h".into(),
            ],
        },
    })
}

/// Dispatches to the mode selected in `config`.
pub fn run(
    model: &SystemModel,
    scenarios: &ScenarioSet,
    policy: &DispatchPolicy,
    config: &McsConfig,
) -> Result<McsRun, McsError> {
    match config.mode {
        McsMode::Sequential => run_sequential(model, scenarios, policy, config),
        McsMode::Nonsequential => run_nonsequential(model, scenarios, policy, config),
    }
}
