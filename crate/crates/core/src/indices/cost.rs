use serde::{Deserialize, Serialize};

use super::IndexError;
use crate::model::{Priority, TierValues};

/// Piecewise-linear interruption cost against outage duration. Knots are
/// `(hours, cost)`; the curve starts at (0, 0) and extends past the last knot
/// along the final segment's slope.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DamageFunction {
    pub knots: Vec<(f64, f64)>,
}

impl DamageFunction {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, IndexError> {
        let f = DamageFunction { knots };
        f.check()?;
        Ok(f)
    }

    pub fn check(&self) -> Result<(), IndexError> {
        let mut prev = (0.0, 0.0);
        for &(h, c) in &self.knots {
            if !(h.is_finite() && c.is_finite()) || h <= prev.0 || c < prev.1 {
                return Err(IndexError::Invalid(format!(
                    "damage function knots must have increasing durations and non-decreasing costs, got ({h}, {c}) after ({}, {})",
                    prev.0, prev.1
                )));
            }
            prev = (h, c);
        }
        Ok(())
    }

    pub fn eval(&self, hours: f64) -> f64 {
        if hours <= 0.0 || self.knots.is_empty() {
            return 0.0;
        }
        let mut prev = (0.0, 0.0);
        for &(h, c) in &self.knots {
            if hours <= h {
                return prev.1 + (c - prev.1) * (hours - prev.0) / (h - prev.0);
            }
            prev = (h, c);
        }
        let n = self.knots.len();
        let before = if n >= 2 {
            self.knots[n - 2]
        } else {
            (0.0, 0.0)
        };
        let slope = (prev.1 - before.1) / (prev.0 - before.0);
        prev.1 + slope * (hours - prev.0)
    }
}

/// Damage functions per priority tier; a missing tier contributes nothing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TierDamage {
    #[serde(default)]
    pub critical: Option<DamageFunction>,
    #[serde(default)]
    pub essential: Option<DamageFunction>,
    #[serde(default)]
    pub non_critical: Option<DamageFunction>,
}

impl TierDamage {
    pub fn get(&self, tier: Priority) -> Option<&DamageFunction> {
        match tier {
            Priority::Critical => self.critical.as_ref(),
            Priority::Essential => self.essential.as_ref(),
            Priority::NonCritical => self.non_critical.as_ref(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.critical.is_none() && self.essential.is_none() && self.non_critical.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterruptionCost {
    pub voll: TierValues,
    pub voll_term: f64,
    pub cdf_term: f64,
    pub total_cost: f64,
}

/// Σ_tier EENS·VOLL plus the damage-function value of every event
/// `(tier, duration_hours)`.
pub fn interruption_cost(
    eens_by_tier: &TierValues,
    voll: &TierValues,
    cdf: &TierDamage,
    events: &[(Priority, f64)],
) -> Result<InterruptionCost, IndexError> {
    for tier in Priority::ALL {
        let v = voll.get(tier);
        if !(v.is_finite() && v >= 0.0) {
            return Err(IndexError::Invalid(format!(
                "VOLL for tier {} must be >= 0, got {v}",
                tier.as_str()
            )));
        }
        if let Some(f) = cdf.get(tier) {
            f.check()?;
        }
    }
    let voll_term: f64 = Priority::ALL
        .iter()
        .map(|&t| eens_by_tier.get(t) * voll.get(t))
        .sum();
    let cdf_term: f64 = events
        .iter()
        .map(|&(tier, h)| cdf.get(tier).map_or(0.0, |f| f.eval(h)))
        .sum();
    Ok(InterruptionCost {
        voll: *voll,
        voll_term,
        cdf_term,
        total_cost: voll_term + cdf_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_voll() {
        let eens = TierValues {
            critical: 0.0,
            essential: 0.0,
            non_critical: 2.0,
        };
        let c = interruption_cost(
            &eens,
            &TierValues::uniform(10.0),
            &TierDamage::default(),
            &[],
        )
        .unwrap();
        assert_eq!(c.total_cost, 20.0);
        let z = interruption_cost(
            &TierValues::default(),
            &TierValues::uniform(10.0),
            &TierDamage::default(),
            &[],
        )
        .unwrap();
        assert_eq!(z.total_cost, 0.0);
    }

    #[test]
    fn knot_value_at_knot() {
        let f = DamageFunction::new(vec![(1.0, 5.0), (4.0, 10.0)]).unwrap();
        let cdf = TierDamage {
            critical: Some(f.clone()),
            ..TierDamage::default()
        };
        let c = interruption_cost(
            &TierValues::default(),
            &TierValues::uniform(0.0),
            &cdf,
            &[(Priority::Critical, 4.0)],
        )
        .unwrap();
        assert_eq!(c.cdf_term, 10.0);
        assert_eq!(f.eval(0.5), 2.5);
        assert!((f.eval(2.5) - 7.5).abs() < 1e-12);
        assert!((f.eval(7.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn decreasing_curve_rejected() {
        assert!(DamageFunction::new(vec![(1.0, 5.0), (2.0, 4.0)]).is_err());
        assert!(interruption_cost(
            &TierValues::default(),
            &TierValues::uniform(-1.0),
            &TierDamage::default(),
            &[]
        )
        .is_err());
    }
}
