use serde::{Deserialize, Serialize};

use super::{DesignCandidate, PlanError};
use crate::model::{Priority, TierValues};

fn one() -> u32 {
    1
}

/// Capital, operating and outage cost parameters. Currency is whatever the
/// inputs use.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub capex_pv_per_kw: f64,
    pub capex_wind_per_kw: f64,
    pub capex_dispatchable_per_kw: f64,
    pub capex_storage_per_kwh: f64,
    pub capex_storage_per_kw: f64,
    pub capex_grid_connection: f64,
    pub opex_pv_per_kw_year: f64,
    pub opex_wind_per_kw_year: f64,
    pub opex_dispatchable_per_kw_year: f64,
    pub opex_storage_per_kwh_year: f64,
    /// Variable O&M per kWh of dispatchable output.
    pub variable_opex_per_kwh: f64,
    /// Fuel per kWh of dispatchable output.
    pub fuel_per_kwh: f64,
    pub import_price_per_kwh: f64,
    pub export_price_per_kwh: f64,
    pub voll_per_kwh: f64,
    /// Per-tier VOLL; overrides `voll_per_kwh` when present.
    pub voll_by_tier: Option<TierValues>,
    pub discount_rate: f64,
    #[serde(default = "one")]
    pub horizon_years: u32,
    pub budget_max: Option<f64>,
}

/// Annual energy flows of one design, kWh/yr.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnualFlows {
    pub dispatchable_kwh: f64,
    pub import_kwh: f64,
    pub export_kwh: f64,
    pub served_kwh: f64,
    pub unserved_by_tier: TierValues,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub capex: f64,
    /// Annual cost excluding unserved energy.
    pub annual_operating: f64,
    pub annual_unserved: f64,
    pub lifecycle_cost: f64,
    pub lcoe: Option<f64>,
}

impl CostModel {
    pub fn check(&self) -> Result<(), PlanError> {
        if !(0.0..1.0).contains(&self.discount_rate) {
            return Err(PlanError::Invalid(format!(
                "discount_rate {} outside [0, 1)",
                self.discount_rate
            )));
        }
        if self.horizon_years < 1 {
            return Err(PlanError::Invalid("cost horizon_years must be >= 1".into()));
        }
        let voll = self.voll();
        if Priority::ALL.iter().any(|&t| !(voll.get(t) >= 0.0)) {
            return Err(PlanError::Invalid("VOLL must be >= 0".into()));
        }
        Ok(())
    }

    pub fn voll(&self) -> TierValues {
        self.voll_by_tier
            .unwrap_or_else(|| TierValues::uniform(self.voll_per_kwh))
    }

    pub fn capex(&self, d: &DesignCandidate) -> f64 {
        d.pv_kw * self.capex_pv_per_kw
            + d.wind_kw * self.capex_wind_per_kw
            + d.dispatchable_kw * self.capex_dispatchable_per_kw
            + d.storage_kwh * self.capex_storage_per_kwh
            + d.storage_kw * self.capex_storage_per_kw
            + if d.grid_connected {
                self.capex_grid_connection
            } else {
                0.0
            }
    }

    pub fn annual_operating(&self, d: &DesignCandidate, flows: &AnnualFlows) -> f64 {
        d.pv_kw * self.opex_pv_per_kw_year
            + d.wind_kw * self.opex_wind_per_kw_year
            + d.dispatchable_kw * self.opex_dispatchable_per_kw_year
            + d.storage_kwh * self.opex_storage_per_kwh_year
            + flows.dispatchable_kwh * (self.variable_opex_per_kwh + self.fuel_per_kwh)
            + flows.import_kwh * self.import_price_per_kwh
            - flows.export_kwh * self.export_price_per_kwh
    }

    pub fn annual_unserved(&self, flows: &AnnualFlows) -> f64 {
        let voll = self.voll();
        Priority::ALL
            .iter()
            .map(|&t| flows.unserved_by_tier.get(t) * voll.get(t))
            .sum()
    }

    /// Σ_{y=1..H} 1/(1+r)^y.
    pub fn annuity_factor(&self) -> f64 {
        (1..=self.horizon_years)
            .map(|y| (1.0 + self.discount_rate).powi(-(y as i32)))
            .sum()
    }

    pub fn breakdown(&self, d: &DesignCandidate, flows: &AnnualFlows) -> CostBreakdown {
        let capex = self.capex(d);
        let operating = self.annual_operating(d, flows);
        let unserved = self.annual_unserved(flows);
        let af = self.annuity_factor();
        CostBreakdown {
            capex,
            annual_operating: operating,
            annual_unserved: unserved,
            lifecycle_cost: capex + af * (operating + unserved),
            lcoe: lcoe(capex + af * operating, flows.served_kwh * af).ok(),
        }
    }
}

/// Discounted cost over discounted delivered energy.
pub fn lcoe(discounted_cost: f64, discounted_energy_kwh: f64) -> Result<f64, PlanError> {
    if !(discounted_energy_kwh > 0.0) {
        return Err(PlanError::Invalid("LCOE needs delivered energy > 0".into()));
    }
    Ok(discounted_cost / discounted_energy_kwh)
}

/// LCOE from yearly cost and energy streams (index 0 is year 1) plus an
/// up-front cost at year 0.
pub fn lcoe_from_streams(
    upfront: f64,
    costs: &[f64],
    energy_kwh: &[f64],
    discount_rate: f64,
) -> Result<f64, PlanError> {
    let df = |y: usize| (1.0 + discount_rate).powi(-(y as i32 + 1));
    let cost = upfront
        + costs
            .iter()
            .enumerate()
            .map(|(y, c)| c * df(y))
            .sum::<f64>();
    let energy = energy_kwh
        .iter()
        .enumerate()
        .map(|(y, e)| e * df(y))
        .sum::<f64>();
    lcoe(cost, energy)
}
