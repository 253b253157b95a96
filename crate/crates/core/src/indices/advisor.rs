use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionContext {
    TopologyWeakPoints,
    Adequacy,
    CustomerServiceQuality,
    CostReliabilityTradeoff,
    Regulatory,
}

impl DecisionContext {
    pub const ALL: [DecisionContext; 5] = [
        DecisionContext::TopologyWeakPoints,
        DecisionContext::Adequacy,
        DecisionContext::CustomerServiceQuality,
        DecisionContext::CostReliabilityTradeoff,
        DecisionContext::Regulatory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DecisionContext::TopologyWeakPoints => "topology-weak-points",
            DecisionContext::Adequacy => "adequacy",
            DecisionContext::CustomerServiceQuality => "customer-service-quality",
            DecisionContext::CostReliabilityTradeoff => "cost-reliability-tradeoff",
            DecisionContext::Regulatory => "regulatory",
        }
    }

    pub fn names() -> String {
        Self::ALL
            .iter()
            .map(|c| c.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for DecisionContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown decision context `{given}`; expected one of: {valid}")]
pub struct UnknownContext {
    pub given: String,
    pub valid: String,
}

impl FromStr for DecisionContext {
    type Err = UnknownContext;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownContext {
                given: s.to_string(),
                valid: Self::names(),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdviceRow {
    /// The recommended metric set as conventionally written.
    pub metrics: String,
    /// Matching index names in this toolkit's reports.
    pub indices: Vec<String>,
    pub captures: String,
    pub strengths: String,
    pub limitations: String,
    pub guidance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Advice {
    pub context: DecisionContext,
    pub rows: Vec<AdviceRow>,
}

impl Advice {
    pub fn to_text(&self) -> String {
        let mut out = format!("context: {}\n", self.context);
        for r in &self.rows {
            out.push_str(&format!(
                "\nrecommended: {}\n  indices: {}\n  captures: {}\n  strengths: {}\n  limitations: {}\n  guidance: {}\n",
                r.metrics,
                r.indices.join(", "),
                r.captures,
                r.strengths,
                r.limitations,
                r.guidance
            ));
        }
        out
    }
}

fn row(
    metrics: &str,
    indices: &[&str],
    captures: &str,
    strengths: &str,
    limitations: &str,
    guidance: &str,
) -> AdviceRow {
    AdviceRow {
        metrics: metrics.into(),
        indices: indices.iter().map(|s| s.to_string()).collect(),
        captures: captures.into(),
        strengths: strengths.into(),
        limitations: limitations.into(),
        guidance: guidance.into(),
    }
}

pub fn advise(context: DecisionContext) -> Advice {
    let rows = match context {
        DecisionContext::TopologyWeakPoints => vec![row(
            "λ_i, U_i, d_i",
            &["lambda_i", "u_i", "r_i"],
            "Failure frequency and outage time seen at each load point.",
            "Locates the weakest buses; feeds every customer-weighted system index.",
            "Only sees outages caused by component failures, not supply shortfalls from low renewables or empty storage.",
            "Rank load points to target reinforcement, redundancy and protection; pair with adequacy indices for energy shortfalls.",
        )],
        DecisionContext::Adequacy => vec![
            row(
                "LOLP, LOLE, LPSP",
                &["lolp", "lole", "lpsp"],
                "How likely, how long and what share of demand goes unmet.",
                "Probabilistic; reflects renewable and demand uncertainty; LOLE has a common 0.1 day/yr benchmark.",
                "Blind to shortfall size; needs good stochastic inputs; LPSP hides when shortfalls happen.",
                "Combine LOLP/LOLE with EENS so both frequency and size of shortfalls are visible; use LPSP when sizing islanded systems.",
            ),
            row(
                "PRM, ERM",
                &["prm", "erm"],
                "Capacity or energy headroom over demand.",
                "Easy to compute and explain.",
                "Deterministic; ignores variability, storage state and correlated demand.",
                "Screening only; back every PRM/ERM figure with probabilistic indices for renewable-heavy systems.",
            ),
        ],
        DecisionContext::CustomerServiceQuality => vec![
            row(
                "SAIFI + SAIDI",
                &["saifi", "saidi"],
                "Interruption frequency and duration for the average customer per year.",
                "Standard utility benchmarks covering both frequency and duration.",
                "Annual averages hide seasonal and daily clustering; all customers weigh the same; unserved energy is not seen.",
                "Report and track trends with these; add CAIFI/CEMI_n for concentrated exposure and EENS for energy impact.",
            ),
            row(
                "CAIFI, CAIDI, MAIFI, CEMI_n",
                &["caifi", "caidi", "maifi", "cemi_n"],
                "Exposure of affected customers, restoration time, momentary events and repeat interruptions.",
                "Shows which customers are served worst.",
                "Thresholds are a matter of convention; critical and non-critical loads are treated alike.",
                "Use when equity of service or detailed outage profiles matter.",
            ),
        ],
        DecisionContext::CostReliabilityTradeoff => vec![row(
            "EENS (with VOLL/CDF)",
            &["eens", "voll", "cdf"],
            "Expected unserved energy per year, convertible to money through VOLL or damage functions.",
            "Measures shortfall size and prices it directly; fits constrained optimisation.",
            "One number hides timing and location; depends on dispatch policy and VOLL assumptions.",
            "Make it the core planning metric; price it with VOLL and check LOLE alongside when appraising investments.",
        )],
        DecisionContext::Regulatory => vec![row(
            "SAIFI + SAIDI + LOLE",
            &["saifi", "saidi", "lole"],
            "Customer interruption performance together with generation adequacy.",
            "Matches common utility reporting and planning standards.",
            "Built for centralised grids; yearly totals hide seasonal weak spots.",
            "Use as the baseline reporting set; for renewable microgrids also report EENS and per-tier shortfalls.",
        )],
    };
    Advice { context, rows }
}
