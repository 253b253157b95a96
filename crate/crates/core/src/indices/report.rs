use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    AdequacyIndices, CustomerIndices, DeterministicAdequacy, InterruptionCost, LoadPointIndices,
    LOLE_BENCHMARK_HOURS,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub name: String,
    pub scope: String,
    pub value: Option<f64>,
    pub unit: String,
    pub horizon: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub momentary_minutes: f64,
    pub cemi_n: u32,
    pub lole_benchmark_hours_per_year: f64,
}

/// Every computed index with its unit and horizon, the thresholds in force
/// and any caveats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub entries: Vec<IndexEntry>,
    pub thresholds: Thresholds,
    pub load_points: Option<LoadPointIndices>,
    pub customer: Option<CustomerIndices>,
    pub adequacy: Option<AdequacyIndices>,
    pub deterministic: Option<DeterministicAdequacy>,
    pub interruption_cost: Option<InterruptionCost>,
    pub caveats: Vec<String>,
}

impl IndexReport {
    pub fn new(momentary_minutes: f64, cemi_n: u32) -> Self {
        IndexReport {
            entries: Vec::new(),
            thresholds: Thresholds {
                momentary_minutes,
                cemi_n,
                lole_benchmark_hours_per_year: LOLE_BENCHMARK_HOURS,
            },
            load_points: None,
            customer: None,
            adequacy: None,
            deterministic: None,
            interruption_cost: None,
            caveats: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, scope: &str, value: Option<f64>, unit: &str, horizon: &str) {
        self.entries.push(IndexEntry {
            name: name.into(),
            scope: scope.into(),
            value,
            unit: unit.into(),
            horizon: horizon.into(),
        });
    }

    pub fn with_load_points(mut self, lp: LoadPointIndices) -> Self {
        for i in &lp.load_points {
            self.push(
                "lambda_i",
                &i.id,
                Some(i.lambda),
                "interruptions/yr",
                "year",
            );
            self.push("u_i", &i.id, Some(i.u_hours), "h/yr", "year");
            self.push("r_i", &i.id, i.r_hours, "h/interruption", "per event");
        }
        self.load_points = Some(lp);
        self
    }

    pub fn with_customer(mut self, c: CustomerIndices) -> Self {
        self.push(
            "saifi",
            "system",
            Some(c.saifi),
            "interruptions/customer/yr",
            "year",
        );
        self.push("saidi", "system", Some(c.saidi), "h/customer/yr", "year");
        self.push(
            "maifi",
            "system",
            Some(c.maifi),
            "momentary interruptions/customer/yr",
            "year",
        );
        self.push(
            "caifi",
            "system",
            c.caifi,
            "interruptions/affected customer/yr",
            "year",
        );
        self.push("caidi", "system", c.caidi, "h/interruption", "per event");
        self.push(
            &format!("cemi_{}", c.n),
            "system",
            Some(c.cemi_n),
            "fraction of customers",
            "reporting period",
        );
        if c.caifi.is_none() {
            self.caveats
                .push("CAIFI is absent because no customer was interrupted".into());
        }
        self.customer = Some(c);
        self
    }

    pub fn with_adequacy(mut self, a: AdequacyIndices) -> Self {
        let horizon = format!("{} h", a.horizon_hours());
        self.push("lolp", "system", Some(a.lolp), "fraction", &horizon);
        self.push("lole", "system", Some(a.lole_hours), "h", &horizon);
        self.push("lpsp", "system", Some(a.lpsp), "fraction", &horizon);
        self.push("eens", "system", Some(a.eens_kwh), "kWh", &horizon);
        let (lole_year, _) = a.per_year();
        if lole_year > LOLE_BENCHMARK_HOURS {
            self.caveats.push(format!(
                "LOLE of {lole_year:.3} h/yr exceeds the common {LOLE_BENCHMARK_HOURS} h/yr (0.1 day/yr) benchmark"
            ));
        }
        self.adequacy = Some(a);
        self
    }

    pub fn with_deterministic(mut self, d: DeterministicAdequacy) -> Self {
        self.push("prm", "system", Some(d.prm_percent), "%", "peak step");
        self.push(
            "erm",
            "system",
            Some(d.erm_percent),
            "%",
            "scenario horizon",
        );
        let (lo, hi) = d.prm_guidance_band;
        if d.prm_percent < lo || d.prm_percent > hi {
            self.caveats.push(format!(
                "PRM of {:.1}% lies outside the customary {lo}-{hi}% band",
                d.prm_percent
            ));
        }
        self.caveats.extend(d.caveats.iter().cloned());
        self.deterministic = Some(d);
        self
    }

    pub fn with_cost(mut self, c: InterruptionCost) -> Self {
        self.push(
            "interruption_cost",
            "system",
            Some(c.total_cost),
            "currency",
            "evaluation horizon",
        );
        self.interruption_cost = Some(c);
        self
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "scope", "value", "unit", "horizon"])?;
        for e in &self.entries {
            w.write_record([
                e.name.as_str(),
                e.scope.as_str(),
                &e.value.map_or_else(String::new, |v| v.to_string()),
                e.unit.as_str(),
                e.horizon.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
