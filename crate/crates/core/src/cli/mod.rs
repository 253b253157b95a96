//! Command-line front end: argument parsing, input loading, run manifests
//! and report emission.

mod plan_file;

pub use plan_file::{LoadedPlan, PlanFile, ScenarioRef};

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dispatch::{self, AvailabilityMask, DispatchPolicy};
use crate::indices::{
    adequacy_deterministic, adequacy_probabilistic, advise, customer_indices,
    customer_indices_analytic, interruption_cost, load_point_analytic, DecisionContext, IndexError,
    IndexReport, LoadPointIndex, LoadPointIndices, TierDamage,
};
use crate::mcs::{self, Convergence, McsConfig, McsMode, DEFAULT_MOMENTARY_MINUTES};
use crate::model::{Priority, SystemModel, TierValues};
use crate::planner::{self, PlanStatus};
use crate::scenario::{
    assemble, combined_capacity_factor, detect_scarcity, fit_regimes, load_history_csv,
    load_scenario_file, sample_chronology, scarcity_percentile, write_scenario_csv, Scenario,
    ScenarioSet,
};

/// Balance residual above which a dispatch trace is treated as an internal fault.
const BALANCE_TOLERANCE_KW: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Infeasible(_) => "infeasible",
            CliError::Internal(_) => "internal",
        }
    }

    /// One-line JSON error record.
    pub fn to_line(&self) -> String {
        json!({"error": {"kind": self.kind(), "code": self.exit_code(), "message": self.to_string().replace('\n', " ")}})
            .to_string()
    }
}

macro_rules! input_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}
input_error!(
    crate::model::ModelError,
    crate::scenario::ScenarioError,
    crate::dispatch::DispatchError,
    crate::mcs::McsError,
    crate::indices::IndexError,
    crate::indices::UnknownContext,
    crate::planner::PlanError
);

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Input(format!(
            "{}:{}:{}: {}",
            path.display(),
            e.line(),
            e.column(),
            e
        ))
    })
}

pub fn read_model(path: &Path) -> Result<SystemModel, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    SystemModel::from_json_str(&text)
        .map_err(|e| match e {
            crate::model::ModelError::Json(j) => CliError::Input(format!(
                "{}:{}:{}: {}",
                path.display(),
                j.line(),
                j.column(),
                j
            )),
            other => CliError::Input(format!("{}: {other}", path.display())),
        })?
        .validated()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Run provenance embedded in every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub seed_source: String,
    pub inputs: Vec<InputDigest>,
    pub options: BTreeMap<String, Value>,
    pub started_at: String,
    pub finished_at: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest(path: &Path) -> Result<InputDigest, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Independent sub-seed for a named subsystem.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[derive(Parser, Debug)]
#[command(
    name = "relgrid",
    version,
    about = "Microgrid reliability evaluation and planning"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for JSON and CSV outputs; JSON goes to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Interruptions at or below this many minutes count as momentary.
    #[arg(long = "momentary-threshold", global = true)]
    pub momentary_threshold: Option<f64>,
    /// Allow a run without --seed; a seed is generated and recorded.
    #[arg(long = "no-seed-ok", global = true)]
    pub no_seed_ok: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Dispatch every scenario with all components available and report adequacy.
    Evaluate(EvaluateArgs),
    /// Monte Carlo reliability simulation.
    Mcs(McsArgs),
    /// Load-point, customer, adequacy and cost indices.
    Indices(IndicesArgs),
    /// Build scenarios from history and detect renewable scarcity.
    Scenarios(ScenariosArgs),
    /// Reliability-constrained sizing from a plan file.
    Plan(PlanArgs),
    /// Recommend reliability metrics for a decision context.
    Advise(AdviseArgs),
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// System model JSON.
    #[arg(long)]
    pub system: PathBuf,
    /// Scenario CSV.
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Dispatch policy JSON.
    #[arg(long)]
    pub policy: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Sequential,
    Nonsequential,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ConvergenceArg {
    FixedN,
    CovOfEens,
}

#[derive(Args, Debug)]
pub struct McsArgs {
    /// System model JSON.
    #[arg(long)]
    pub system: PathBuf,
    /// Scenario CSV; a flat year with no renewable output when absent.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    /// Dispatch policy JSON.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// MCS configuration JSON; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Iteration count, or the cap under cov-of-eens convergence.
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Simulated years per iteration.
    #[arg(long)]
    pub years: Option<f64>,
    /// Sequential state-duration or non-sequential state sampling.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Stop after a fixed count or once the EENS coefficient of variation falls below --cov-epsilon.
    #[arg(long, value_enum)]
    pub convergence: Option<ConvergenceArg>,
    /// Target coefficient of variation for cov-of-eens.
    #[arg(long = "cov-epsilon")]
    pub cov_epsilon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct IndicesArgs {
    /// System model JSON.
    #[arg(long)]
    pub system: PathBuf,
    /// Scenario CSV for the adequacy indices.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    /// Dispatch policy JSON.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Estimate customer indices by simulation instead of analytically.
    #[arg(long = "mcs-iterations")]
    pub mcs_iterations: Option<u64>,
    /// Simulated years per iteration and reporting period length.
    #[arg(long, default_value_t = 1.0)]
    pub years: f64,
    /// CEMI threshold n.
    #[arg(long = "cemi-n", default_value_t = 1)]
    pub cemi_n: u32,
    /// Value of lost load per kWh, all tiers.
    #[arg(long)]
    pub voll: Option<f64>,
    /// Per-tier damage functions JSON.
    #[arg(long)]
    pub cdf: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScenariosArgs {
    /// Hourly history CSV.
    #[arg(long)]
    pub history: PathBuf,
    /// Weather regimes to fit; 0 replays the history as one scenario.
    #[arg(long, default_value_t = 4)]
    pub regimes: usize,
    /// Length of each sampled chronology in days.
    #[arg(long, default_value_t = 365)]
    pub days: usize,
    /// Number of chronologies to sample.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Combined capacity factor below which a step is scarce.
    #[arg(long, default_value_t = 0.15)]
    pub threshold: f64,
    /// Tail percentile of scarcity durations used for the storage hint.
    #[arg(long, default_value_t = 0.95)]
    pub percentile: f64,
    /// Installed PV used to weight the combined capacity factor.
    #[arg(long = "pv-kw", default_value_t = 0.0)]
    pub pv_kw: f64,
    /// Installed wind used to weight the combined capacity factor.
    #[arg(long = "wind-kw", default_value_t = 0.0)]
    pub wind_kw: f64,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    /// Plan JSON.
    pub plan: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
}

#[derive(Args, Debug)]
pub struct AdviseArgs {
    /// Decision context, for example adequacy or regulatory.
    #[arg(long)]
    pub context: String,
    /// Output format when writing to stdout.
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
}

struct Seed {
    value: Option<u64>,
    source: &'static str,
}

fn resolve_seed(global: &GlobalArgs, from_file: Option<u64>) -> Result<Seed, CliError> {
    if let Some(s) = global.seed {
        return Ok(Seed {
            value: Some(s),
            source: "cli",
        });
    }
    if let Some(s) = from_file {
        return Ok(Seed {
            value: Some(s),
            source: "input",
        });
    }
    if global.no_seed_ok {
        let t = chrono::Utc::now().timestamp_nanos_opt().unwrap_or_default() as u64;
        return Ok(Seed {
            value: Some(derive_seed(t, "generated")),
            source: "generated",
        });
    }
    Err(CliError::Input(
        "--seed is required for stochastic runs (pass --no-seed-ok to generate one)".into(),
    ))
}

struct Outcome {
    subcommand: &'static str,
    seed: Seed,
    inputs: Vec<PathBuf>,
    options: BTreeMap<String, Value>,
    result: Value,
    csv: Vec<(String, Vec<u8>)>,
    text: Option<String>,
    /// Print `text` rather than the JSON document when writing to stdout.
    prefer_text: bool,
    failure: Option<CliError>,
}

impl Outcome {
    fn new(subcommand: &'static str) -> Self {
        Outcome {
            subcommand,
            seed: Seed {
                value: None,
                source: "none",
            },
            inputs: Vec::new(),
            options: BTreeMap::new(),
            result: Value::Null,
            csv: Vec::new(),
            text: None,
            prefer_text: false,
            failure: None,
        }
    }

    fn opt(&mut self, key: &str, v: impl Serialize) {
        self.options
            .insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| CliError::Internal(format!("{name}: {e}")))?;
        self.csv.push((name.into(), buf));
        Ok(())
    }
}

fn to_value(v: &impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

fn load_policy(path: &Option<PathBuf>, o: &mut Outcome) -> Result<DispatchPolicy, CliError> {
    match path {
        Some(p) => {
            o.inputs.push(p.clone());
            read_json(p)
        }
        None => Ok(DispatchPolicy::default()),
    }
}

fn load_scenarios(path: &Option<PathBuf>, o: &mut Outcome) -> Result<ScenarioSet, CliError> {
    match path {
        Some(p) => {
            o.inputs.push(p.clone());
            Ok(load_scenario_file(p)?)
        }
        None => Ok(ScenarioSet::single(Scenario::flat(
            "flat-year",
            8760,
            1.0,
            0.0,
            0.0,
        )?)?),
    }
}

fn momentary(global: &GlobalArgs) -> f64 {
    global
        .momentary_threshold
        .unwrap_or(DEFAULT_MOMENTARY_MINUTES)
}

fn check_balance(traces: &[dispatch::DispatchTrace]) -> Result<(), CliError> {
    for tr in traces {
        let r = tr.max_balance_residual();
        if !(r <= BALANCE_TOLERANCE_KW) {
            return Err(CliError::Internal(format!(
                "scenario `{}`: power balance residual {r} kW exceeds {BALANCE_TOLERANCE_KW} kW",
                tr.scenario_id
            )));
        }
    }
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs, _g: &GlobalArgs) -> Result<Outcome, CliError> {
    let mut o = Outcome::new("evaluate");
    o.inputs.push(a.system.clone());
    let model = read_model(&a.system)?;
    let set = load_scenarios(&Some(a.scenarios.clone()), &mut o)?;
    let policy = load_policy(&a.policy, &mut o)?;
    let mut traces = Vec::new();
    for s in &set.scenarios {
        traces.push(dispatch::run(
            &model,
            s,
            &policy,
            &AvailabilityMask::AllAvailable,
        )?);
    }
    check_balance(&traces)?;
    let adequacy = adequacy_probabilistic(&set, &traces)?;
    let det = adequacy_deterministic(&model, &set.scenarios[0])?;
    let report = IndexReport::new(DEFAULT_MOMENTARY_MINUTES, 1)
        .with_adequacy(adequacy)
        .with_deterministic(det);
    for tr in &traces {
        let name = if traces.len() == 1 {
            "trace.csv".to_string()
        } else {
            format!("trace_{}.csv", tr.scenario_id)
        };
        o.csv(&name, |b| tr.write_csv(b))?;
    }
    o.csv("index_summary.csv", |b| report.write_csv(b))?;
    let scenarios: Vec<Value> = traces
        .iter()
        .zip(&set.scenarios)
        .map(|(tr, s)| {
            json!({
                "id": tr.scenario_id,
                "probability": s.probability,
                "demand_kwh": tr.demand_energy_kwh(),
                "shed_kwh": tr.shed_energy_kwh(),
                "loss_of_load_steps": tr.loss_of_load_steps(),
                "max_balance_residual_kw": tr.max_balance_residual(),
                "mode_transitions": tr.transitions,
            })
        })
        .collect();
    o.opt("policy", &policy);
    o.result = json!({"scenarios": scenarios, "report": to_value(&report)?});
    Ok(o)
}

fn mcs_config(
    a: &McsArgs,
    g: &GlobalArgs,
    seed: u64,
    o: &mut Outcome,
) -> Result<McsConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => {
            o.inputs.push(p.clone());
            read_json(p)?
        }
        None => McsConfig::new(10_000, 1.0, seed),
    };
    cfg.seed = seed;
    if let Some(n) = a.iterations {
        cfg.iterations = n;
    }
    if let Some(y) = a.years {
        cfg.horizon_years = y;
    }
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Sequential => McsMode::Sequential,
            ModeArg::Nonsequential => McsMode::Nonsequential,
        };
    }
    if let Some(c) = a.convergence {
        cfg.convergence = match c {
            ConvergenceArg::FixedN => Convergence::FixedN,
            ConvergenceArg::CovOfEens => Convergence::CovOfEens,
        };
    }
    if let Some(e) = a.cov_epsilon {
        cfg.cov_epsilon = e;
    }
    if let Some(m) = g.momentary_threshold {
        cfg.momentary_threshold_minutes = m;
    }
    cfg.check()?;
    Ok(cfg)
}

fn cmd_mcs(a: &McsArgs, g: &GlobalArgs) -> Result<Outcome, CliError> {
    let mut o = Outcome::new("mcs");
    o.inputs.push(a.system.clone());
    let model = read_model(&a.system)?;
    let set = load_scenarios(&a.scenarios, &mut o)?;
    let policy = load_policy(&a.policy, &mut o)?;
    o.seed = resolve_seed(g, None)?;
    let cfg = mcs_config(a, g, o.seed.value.unwrap_or_default(), &mut o)?;
    let run = mcs::run(&model, &set, &policy, &cfg)?;
    o.csv("outage_log.csv", |b| mcs::write_outage_csv(&run.logs, b))?;
    o.opt("mcs", &cfg);
    o.opt("policy", &policy);
    o.result = to_value(&run.estimate)?;
    Ok(o)
}

fn cmd_indices(a: &IndicesArgs, g: &GlobalArgs) -> Result<Outcome, CliError> {
    let mut o = Outcome::new("indices");
    o.inputs.push(a.system.clone());
    let model = read_model(&a.system)?;
    let set = load_scenarios(&a.scenarios, &mut o)?;
    let policy = load_policy(&a.policy, &mut o)?;
    let minutes = momentary(g);
    let mut report = IndexReport::new(minutes, a.cemi_n);
    let mut eens_by_tier = TierValues::default();
    let mut events: Vec<(Priority, f64)> = Vec::new();
    let mut event_weight = 1.0;

    let mut traces = Vec::new();
    for s in &set.scenarios {
        traces.push(dispatch::run(
            &model,
            s,
            &policy,
            &AvailabilityMask::AllAvailable,
        )?);
    }
    check_balance(&traces)?;
    let adequacy = adequacy_probabilistic(&set, &traces)?;
    let year = crate::model::HOURS_PER_YEAR / set.horizon_hours();
    eens_by_tier.add_assign(&adequacy.eens_by_tier.scaled(year));
    report = report
        .with_adequacy(adequacy)
        .with_deterministic(adequacy_deterministic(&model, &set.scenarios[0])?);

    match a.mcs_iterations {
        Some(n) => {
            o.seed = resolve_seed(g, None)?;
            let mut cfg = McsConfig::new(n, a.years, o.seed.value.unwrap_or_default());
            cfg.momentary_threshold_minutes = minutes;
            cfg.check()?;
            let run = mcs::run_sequential(&model, &set, &policy, &cfg)?;
            let lp = LoadPointIndices {
                load_points: run
                    .estimate
                    .load_points
                    .iter()
                    .map(|e| {
                        LoadPointIndex::new(
                            e.id.clone(),
                            e.sustained_lambda.unwrap_or(0.0),
                            e.u_hours,
                        )
                    })
                    .collect(),
            };
            let cust = customer_indices(
                &run.logs,
                &model,
                cfg.horizon_years,
                cfg.momentary_threshold_hours(),
                a.cemi_n,
            )?;
            eens_by_tier.add_assign(&run.estimate.eens_by_tier);
            for log in &run.logs {
                for ev in log.events.iter().filter(|e| !e.momentary) {
                    for id in &ev.affected_load_points {
                        if let Some(lp) = model.load_point(id) {
                            events.push((lp.priority, ev.t_restore - ev.t_fail));
                        }
                    }
                }
            }
            event_weight = 1.0 / (run.logs.len() as f64 * cfg.horizon_years);
            report = report.with_load_points(lp).with_customer(cust);
            report.caveats.push(format!(
                "customer indices estimated from {n} simulated years of {}",
                cfg.horizon_years
            ));
            o.opt("mcs", &cfg);
        }
        None => {
            let lp = load_point_analytic(&model).map_err(|e| match e {
                IndexError::Meshed(_) => CliError::Input(format!("{e}; pass --mcs-iterations")),
                other => other.into(),
            })?;
            let cust = customer_indices_analytic(&model, &lp, a.cemi_n)?;
            for i in &lp.load_points {
                if let (Some(r), Some(p)) = (i.r_hours, model.load_point(&i.id)) {
                    events.push((p.priority, r));
                }
            }
            report = report.with_load_points(lp).with_customer(cust);
        }
    }

    if a.voll.is_some() || a.cdf.is_some() {
        let cdf: TierDamage = match &a.cdf {
            Some(p) => {
                o.inputs.push(p.clone());
                read_json(p)?
            }
            None => TierDamage::default(),
        };
        // Simulated events are summed over every iteration; scale to one year.
        let mut cost = interruption_cost(
            &eens_by_tier,
            &TierValues::uniform(a.voll.unwrap_or(0.0)),
            &cdf,
            &events,
        )?;
        cost.cdf_term *= event_weight;
        cost.total_cost = cost.voll_term + cost.cdf_term;
        report = report.with_cost(cost);
    }
    o.opt("cemi_n", a.cemi_n);
    o.opt("momentary_threshold_minutes", minutes);
    o.opt("voll", a.voll);
    o.csv("index_summary.csv", |b| report.write_csv(b))?;
    o.result = to_value(&report)?;
    Ok(o)
}

fn cmd_scenarios(a: &ScenariosArgs, g: &GlobalArgs) -> Result<Outcome, CliError> {
    let mut o = Outcome::new("scenarios");
    o.inputs.push(a.history.clone());
    let history = load_history_csv(&a.history)?;
    let set = if a.regimes == 0 {
        ScenarioSet::single(history.to_scenario("history")?)?
    } else {
        o.seed = resolve_seed(g, None)?;
        let seed = o.seed.value.unwrap_or_default();
        if a.count == 0 {
            return Err(CliError::Input("--count must be >= 1".into()));
        }
        let model = fit_regimes(
            history.to_day_profiles(),
            a.regimes,
            1.0,
            derive_seed(seed, "regimes"),
        )?;
        let mut out = Vec::with_capacity(a.count);
        for k in 0..a.count {
            let mut c = sample_chronology(
                &model,
                a.days,
                derive_seed(seed, &format!("chronology-{k}")),
            )?;
            c.scenario.id = format!("s{k}");
            out.push(c.scenario);
        }
        assemble(out, &vec![1.0; a.count])?
    };
    let mut events = Vec::new();
    let mut listed = Vec::new();
    for s in &set.scenarios {
        let cf = combined_capacity_factor(&s.pv_cf, &s.wind_cf, a.pv_kw, a.wind_kw)?;
        for e in detect_scarcity(&cf, a.threshold)? {
            listed.push(json!({"scenario": s.id, "start_step": e.start_step, "duration_hours": e.duration_hours, "min_cf": e.min_cf}));
            events.push(e);
        }
    }
    if !(a.percentile > 0.0 && a.percentile <= 1.0) {
        return Err(CliError::Input(format!(
            "--percentile {} outside (0, 1]",
            a.percentile
        )));
    }
    let pct = if events.is_empty() {
        None
    } else {
        Some(scarcity_percentile(&events, a.percentile)?)
    };
    o.csv("scenarios.csv", |b| write_scenario_csv(&set, b))?;
    o.opt("regimes", a.regimes);
    o.opt("days", a.days);
    o.opt("count", a.count);
    o.opt("threshold", a.threshold);
    o.opt("percentile", a.percentile);
    o.result = json!({
        "scenarios": set.scenarios.iter().map(|s| json!({"id": s.id, "probability": s.probability, "steps": s.len()})).collect::<Vec<_>>(),
        "scarcity_events": listed,
        "scarcity_duration_percentile_hours": pct,
    });
    Ok(o)
}

fn cmd_plan(a: &PlanArgs, g: &GlobalArgs) -> Result<Outcome, CliError> {
    let mut o = Outcome::new("plan");
    let mut loaded = PlanFile::load(&a.plan)?;
    o.inputs = loaded.paths.clone();
    let stochastic = loaded.inputs.mcs.is_some() || loaded.inputs.verification.is_some();
    if stochastic {
        o.seed = resolve_seed(g, loaded.file.seed)?;
        let seed = o.seed.value.unwrap_or_default();
        for cfg in [&mut loaded.inputs.mcs, &mut loaded.inputs.verification]
            .into_iter()
            .flatten()
        {
            cfg.seed = seed;
            if let Some(m) = g.momentary_threshold {
                cfg.momentary_threshold_minutes = m;
            }
        }
    }
    let result = planner::search(&loaded.inputs)?;
    o.csv("frontier.csv", |b| write_frontier(&result.frontier, b))?;
    o.opt("candidate_grid", &loaded.inputs.grid);
    o.opt("targets", loaded.inputs.targets);
    o.opt("cost_model", &loaded.inputs.cost_model);
    o.opt("policy", &loaded.inputs.policy);
    o.opt("mcs", &loaded.inputs.mcs);
    o.opt("verification", &loaded.inputs.verification);
    o.opt("protection", &loaded.inputs.protection);
    o.opt("search", &loaded.inputs.search);
    o.opt("scarcity", &loaded.inputs.scarcity);
    if result.status != PlanStatus::Feasible {
        o.failure = Some(CliError::Infeasible(format!(
            "plan status {:?}: {}",
            result.status, result.summary
        )));
    }
    o.text = Some(result.summary.clone());
    o.result = to_value(&result)?;
    Ok(o)
}

fn write_frontier(points: &[planner::FrontierPoint], out: &mut Vec<u8>) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index",
        "pv_kw",
        "wind_kw",
        "dispatchable_kw",
        "storage_kwh",
        "storage_kw",
        "grid_connected",
        "lifecycle_cost",
        "eens_kwh_per_year",
        "lole_hours_per_year",
    ])?;
    for p in points {
        let d = &p.design;
        w.write_record([
            p.index.to_string(),
            d.pv_kw.to_string(),
            d.wind_kw.to_string(),
            d.dispatchable_kw.to_string(),
            d.storage_kwh.to_string(),
            d.storage_kw.to_string(),
            d.grid_connected.to_string(),
            p.lifecycle_cost.to_string(),
            p.eens_kwh_per_year.to_string(),
            p.lole_hours_per_year.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_advise(a: &AdviseArgs) -> Result<Outcome, CliError> {
    let mut o = Outcome::new("advise");
    let ctx: DecisionContext = a.context.parse()?;
    let advice = advise(ctx);
    o.opt("context", ctx.as_str());
    o.text = Some(advice.to_text());
    o.result = to_value(&advice)?;
    o.prefer_text = matches!(a.format, FormatArg::Text);
    Ok(o)
}

/// Report document: manifest plus result payload.
pub fn document(manifest: &RunManifest, result: &Value) -> Result<String, CliError> {
    serde_json::to_string_pretty(&json!({"manifest": manifest, "result": result}))
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn emit(o: Outcome, global: &GlobalArgs, started: String) -> Result<Option<CliError>, CliError> {
    let mut digests = Vec::with_capacity(o.inputs.len());
    for p in &o.inputs {
        digests.push(digest(p)?);
    }
    let manifest = RunManifest {
        tool: "relgrid".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: o.subcommand.into(),
        seed: o.seed.value,
        seed_source: o.seed.source.into(),
        inputs: digests,
        options: o.options.clone(),
        started_at: started,
        finished_at: now(),
    };
    let doc = document(&manifest, &o.result)?;
    match &global.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            let path = dir.join(format!("{}.json", o.subcommand));
            fs::write(&path, doc.as_bytes()).map_err(|e| io_error(&path, e))?;
            for (name, bytes) in &o.csv {
                let p = dir.join(name);
                fs::write(&p, bytes).map_err(|e| io_error(&p, e))?;
            }
            if let Some(t) = &o.text {
                let p = dir.join(format!("{}.txt", o.subcommand));
                fs::write(&p, t.as_bytes()).map_err(|e| io_error(&p, e))?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut h = stdout.lock();
            let body = if o.prefer_text {
                o.text.clone().unwrap_or_default()
            } else {
                doc
            };
            match writeln!(h, "{body}").and_then(|_| h.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    return Err(CliError::Internal(e.to_string()))
                }
                _ => {}
            }
        }
    }
    Ok(o.failure)
}

fn execute(cli: &Cli) -> Result<Option<CliError>, CliError> {
    let started = now();
    let g = &cli.global;
    let outcome = match &cli.command {
        Command::Evaluate(a) => cmd_evaluate(a, g),
        Command::Mcs(a) => cmd_mcs(a, g),
        Command::Indices(a) => cmd_indices(a, g),
        Command::Scenarios(a) => cmd_scenarios(a, g),
        Command::Plan(a) => cmd_plan(a, g),
        Command::Advise(a) => cmd_advise(a),
    }?;
    emit(outcome, g, started)
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                eprintln!(
                    "{}",
                    CliError::Input(
                        e.to_string()
                            .lines()
                            .next()
                            .unwrap_or("invalid arguments")
                            .to_string()
                    )
                    .to_line()
                );
            }
            return code;
        }
    };
    if let Some(m) = cli.global.momentary_threshold {
        if !(m.is_finite() && m >= mcs::MIN_MOMENTARY_MINUTES) {
            eprintln!(
                "{}",
                CliError::Input(format!(
                    "--momentary-threshold must be >= {} minute",
                    mcs::MIN_MOMENTARY_MINUTES
                ))
                .to_line()
            );
            return 2;
        }
    }
    let result = match cli.global.threads {
        Some(0) => Err(CliError::Input("--threads must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(CliError::Internal(e.to_string())),
        },
        None => execute(&cli),
    };
    match result {
        Ok(None) => 0,
        Ok(Some(e)) | Err(e) => {
            eprintln!("{}", e.to_line());
            e.exit_code()
        }
    }
}
