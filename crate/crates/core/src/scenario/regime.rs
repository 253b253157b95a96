//! Weather-regime clustering of historical days and Markov resampling of
//! multi-day chronologies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioError, SeriesUnit, TimeSeries};

const REFINEMENT_SWEEPS: usize = 100;

/// One historical day of load multiplier and capacity factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayProfile {
    pub load: Vec<f64>,
    pub pv: Vec<f64>,
    pub wind: Vec<f64>,
}

impl DayProfile {
    /// Clustering features: (mean pv cf, mean wind cf, mean load multiplier).
    pub fn features(&self) -> [f64; 3] {
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        [mean(&self.pv), mean(&self.wind), mean(&self.load)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeModel {
    pub regime_count: usize,
    pub step_hours: f64,
    pub centroids: Vec<[f64; 3]>,
    pub day_labels: Vec<usize>,
    /// `transition_counts[a][b]` counts day pairs labelled a then b.
    pub transition_counts: Vec<Vec<u64>>,
    /// Per regime, indices into `days`.
    pub regime_day_pools: Vec<Vec<usize>>,
    pub days: Vec<DayProfile>,
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64; 3], centroids: &[[f64; 3]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(point, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Labels each day with its nearest regime centroid. Centroids start from a
/// seeded k-means++ draw and are refined for up to 100 sweeps; regimes are then
/// renumbered in ascending centroid order so labels do not depend on the draw.
pub fn fit_regimes(
    days: Vec<DayProfile>,
    regime_count: usize,
    step_hours: f64,
    seed: u64,
) -> Result<RegimeModel, ScenarioError> {
    if regime_count < 2 {
        return Err(ScenarioError::TooFewRegimes(regime_count));
    }
    if let Some(first) = days.first() {
        let expected = first.load.len();
        for (index, d) in days.iter().enumerate() {
            for found in [d.load.len(), d.pv.len(), d.wind.len()] {
                if found != expected || found == 0 {
                    return Err(ScenarioError::DayLength {
                        index,
                        found,
                        expected,
                    });
                }
            }
        }
    }
    let feats: Vec<[f64; 3]> = days.iter().map(DayProfile::features).collect();
    let mut distinct: Vec<[u64; 3]> = feats.iter().map(|f| f.map(f64::to_bits)).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < regime_count {
        return Err(ScenarioError::TooFewDays {
            needed: regime_count,
            found: distinct.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![feats[rng.gen_range(0..feats.len())]];
    while centroids.len() < regime_count {
        let d2: Vec<f64> = feats
            .iter()
            .map(|f| {
                centroids
                    .iter()
                    .map(|c| dist2(f, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let r = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > r {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            d2.iter().position(|&d| d > 0.0).unwrap_or(0)
        };
        centroids.push(feats[pick]);
    }

    let mut labels: Vec<usize> = feats.iter().map(|f| nearest(f, &centroids)).collect();
    for _ in 0..REFINEMENT_SWEEPS {
        let mut sums = vec![[0.0; 3]; regime_count];
        let mut counts = vec![0usize; regime_count];
        for (f, &l) in feats.iter().zip(&labels) {
            for k in 0..3 {
                sums[l][k] += f[k];
            }
            counts[l] += 1;
        }
        for r in 0..regime_count {
            if counts[r] > 0 {
                centroids[r] = sums[r].map(|s| s / counts[r] as f64);
            } else {
                // Re-seed an empty regime at the day farthest from its centroid.
                let far = (0..feats.len())
                    .max_by(|&a, &b| {
                        dist2(&feats[a], &centroids[labels[a]])
                            .total_cmp(&dist2(&feats[b], &centroids[labels[b]]))
                            .then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                centroids[r] = feats[far];
            }
        }
        let next: Vec<usize> = feats.iter().map(|f| nearest(f, &centroids)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }

    let mut order: Vec<usize> = (0..regime_count).collect();
    order.sort_by(|&a, &b| {
        centroids[a]
            .iter()
            .zip(&centroids[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut rename = vec![0; regime_count];
    for (new, &old) in order.iter().enumerate() {
        rename[old] = new;
    }
    let centroids: Vec<[f64; 3]> = order.iter().map(|&old| centroids[old]).collect();
    let day_labels: Vec<usize> = labels.iter().map(|&l| rename[l]).collect();

    let mut transition_counts = vec![vec![0u64; regime_count]; regime_count];
    for pair in day_labels.windows(2) {
        transition_counts[pair[0]][pair[1]] += 1;
    }
    let mut regime_day_pools = vec![Vec::new(); regime_count];
    for (i, &l) in day_labels.iter().enumerate() {
        regime_day_pools[l].push(i);
    }
    Ok(RegimeModel {
        regime_count,
        step_hours,
        centroids,
        day_labels,
        transition_counts,
        regime_day_pools,
        days,
    })
}

/// A sampled chronology with the regime path and source days that built it.
#[derive(Clone, Debug, PartialEq)]
pub struct Chronology {
    pub scenario: Scenario,
    pub regimes: Vec<usize>,
    pub source_days: Vec<usize>,
}

fn categorical<R: Rng>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let r = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if w > 0.0 && acc > r {
            return Some(i);
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// Draws a regime path from the empirical transition counts and concatenates
/// one historical day per step. The first regime follows the empirical
/// distribution of transition destinations; a regime whose row has no
/// observed transitions falls back to that same distribution.
pub fn sample_chronology(
    model: &RegimeModel,
    horizon_days: usize,
    seed: u64,
) -> Result<Chronology, ScenarioError> {
    if horizon_days == 0 {
        return Err(ScenarioError::EmptyHorizon);
    }
    let k = model.regime_count;
    let mut entry: Vec<f64> = (0..k)
        .map(|b| {
            model
                .transition_counts
                .iter()
                .map(|row| row.get(b).copied().unwrap_or(0) as f64)
                .sum()
        })
        .collect();
    if entry.iter().sum::<f64>() <= 0.0 {
        entry = model
            .regime_day_pools
            .iter()
            .map(|p| p.len() as f64)
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut regimes: Vec<usize> = Vec::with_capacity(horizon_days);
    let mut source_days = Vec::with_capacity(horizon_days);
    let (mut load, mut pv, mut wind) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..horizon_days {
        let weights: Vec<f64> = match regimes.last() {
            Some(&prev) => {
                let row: Vec<f64> = model.transition_counts[prev]
                    .iter()
                    .map(|&c| c as f64)
                    .collect();
                if row.iter().sum::<f64>() > 0.0 {
                    row
                } else {
                    entry.clone()
                }
            }
            None => entry.clone(),
        };
        let regime = categorical(&mut rng, &weights).ok_or(ScenarioError::EmptyRegimePool(0))?;
        let pool = &model.regime_day_pools[regime];
        if pool.is_empty() {
            return Err(ScenarioError::EmptyRegimePool(regime));
        }
        let day_index = pool[rng.gen_range(0..pool.len())];
        let day = &model.days[day_index];
        load.extend_from_slice(&day.load);
        pv.extend_from_slice(&day.pv);
        wind.extend_from_slice(&day.wind);
        regimes.push(regime);
        source_days.push(day_index);
    }
    let scenario = Scenario::new(
        format!("regime-sample-{seed}"),
        0.0,
        TimeSeries::new(model.step_hours, load, SeriesUnit::Multiplier)?,
        TimeSeries::new(model.step_hours, pv, SeriesUnit::CapacityFactor)?,
        TimeSeries::new(model.step_hours, wind, SeriesUnit::CapacityFactor)?,
    )?;
    Ok(Chronology {
        scenario,
        regimes,
        source_days,
    })
}
