use std::path::PathBuf;

use proptest::prelude::*;

use relgrid::dispatch::{self, AvailabilityMask, DispatchPolicy};
use relgrid::indices::{load_point_analytic, system_indices, LoadPointRates};
use relgrid::mcs::{self, McsConfig, McsMode};
use relgrid::model::{Priority, SystemModel};
use relgrid::scenario::{
    detect_scarcity, fit_regimes, load_history_csv, sample_chronology, scarcity_percentile,
    Scenario, ScenarioSet, SeriesUnit, TimeSeries,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn three_bus() -> SystemModel {
    SystemModel::from_path(fixture("three_bus.json"))
        .unwrap()
        .validated()
        .unwrap()
}

fn scenario(load: Vec<f64>, pv: Vec<f64>, wind: Vec<f64>) -> Scenario {
    Scenario::new(
        "p",
        0.0,
        TimeSeries::hourly(load, SeriesUnit::Multiplier).unwrap(),
        TimeSeries::hourly(pv, SeriesUnit::CapacityFactor).unwrap(),
        TimeSeries::hourly(wind, SeriesUnit::CapacityFactor).unwrap(),
    )
    .unwrap()
}

fn series(len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(0.0..2.0f64, len),
        prop::collection::vec(0.0..=1.0f64, len),
        prop::collection::vec(0.0..=1.0f64, len),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dispatch_conserves_energy_under_partial_outages(
        (load, pv, wind) in series(24),
        mask in prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64], 24), 6),
        islanded in any::<bool>(),
    ) {
        let mut model = three_bus();
        model.grid.connected = !islanded;
        let trace = dispatch::run(&model, &scenario(load, pv, wind), &DispatchPolicy::default(), &AvailabilityMask::Series(mask)).unwrap();
        let storage = &model.storage_units[0];
        for step in &trace.steps {
            prop_assert!(step.balance_residual().abs() < 1e-6, "residual {}", step.balance_residual());
            for tier in Priority::ALL {
                prop_assert!(step.shed_by_tier.get(tier) >= -1e-9);
                prop_assert!(step.shed_by_tier.get(tier) <= step.load.get(tier) + 1e-9);
            }
            let soc = step.soc[0];
            prop_assert!(soc >= storage.soc_min - 1e-9 && soc <= storage.soc_max + 1e-9, "soc {soc}");
            prop_assert!(step.storage_charge <= storage.power_kw + 1e-9);
            prop_assert!(step.storage_discharge <= storage.power_kw + 1e-9);
            prop_assert!(step.storage_charge * step.storage_discharge == 0.0);
            if islanded {
                prop_assert_eq!(step.grid_import, 0.0);
                prop_assert_eq!(step.grid_export, 0.0);
            } else {
                prop_assert!(step.grid_import <= 100.0 + 1e-9 && step.grid_export <= 50.0 + 1e-9);
            }
        }
    }

    #[test]
    fn shed_follows_priority((load, pv, wind) in series(12)) {
        let mut model = three_bus();
        model.grid.connected = false;
        let trace = dispatch::run(&model, &scenario(load, pv, wind), &DispatchPolicy::default(), &AvailabilityMask::AllAvailable).unwrap();
        for step in &trace.steps {
            let full = |t: Priority| step.shed_by_tier.get(t) >= step.load.get(t) - 1e-9;
            if step.shed_by_tier.get(Priority::Critical) > 1e-9 {
                prop_assert!(full(Priority::Essential) && full(Priority::NonCritical));
            }
            if step.shed_by_tier.get(Priority::Essential) > 1e-9 {
                prop_assert!(full(Priority::NonCritical));
            }
        }
    }

    #[test]
    fn scarcity_events_cover_exactly_the_low_steps(
        cf in prop::collection::vec(0.0..=1.0f64, 1..200),
        threshold in 0.05..0.95f64,
        step_hours in prop_oneof![Just(1.0), Just(0.5), Just(0.25)],
    ) {
        let series = TimeSeries::new(step_hours, cf.clone(), SeriesUnit::CapacityFactor).unwrap();
        let events = detect_scarcity(&series, threshold).unwrap();
        let mut covered = vec![false; cf.len()];
        let mut last_end = None;
        for e in &events {
            let len = (e.duration_hours / step_hours).round() as usize;
            prop_assert!(len >= 1);
            if let Some(end) = last_end {
                prop_assert!(e.start_step > end, "events must be separated by a non-scarce step");
            }
            for c in covered.iter_mut().skip(e.start_step).take(len) {
                *c = true;
            }
            let window = &cf[e.start_step..e.start_step + len];
            prop_assert_eq!(e.min_cf, window.iter().cloned().fold(f64::INFINITY, f64::min));
            last_end = Some(e.start_step + len);
        }
        for (t, &v) in cf.iter().enumerate() {
            prop_assert_eq!(covered[t], v < threshold, "step {}", t);
        }
        if !events.is_empty() {
            let p = scarcity_percentile(&events, 1.0).unwrap();
            let max = events.iter().map(|e| e.duration_hours).fold(0.0, f64::max);
            prop_assert_eq!(p, max);
        }
    }

    #[test]
    fn analytic_series_rates(
        rates in prop::collection::vec((0.0..2.0f64, 1.0..100.0f64), 1..6),
    ) {
        let components: Vec<_> = rates
            .iter()
            .enumerate()
            .map(|(i, (l, r))| serde_json::json!({"id": format!("c{i}"), "kind": "line", "failure_rate": l, "repair_rate": 8760.0 / r}))
            .collect();
        let path: Vec<_> = (0..rates.len()).map(|i| format!("c{i}")).collect();
        let model: SystemModel = serde_json::from_value(serde_json::json!({
            "components": components,
            "load_points": [{"id": "lp", "customer_count": 5, "peak_load_kw": 1, "supply_paths": [path]}],
        }))
        .unwrap();
        let lp = &load_point_analytic(&model.validated().unwrap()).unwrap().load_points[0];
        let lambda: f64 = rates.iter().map(|(l, _)| l).sum();
        let u: f64 = rates.iter().map(|(l, r)| l * r).sum();
        prop_assert!((lp.lambda - lambda).abs() < 1e-9);
        prop_assert!((lp.u_hours - u).abs() < 1e-6 * u.max(1.0));
        if lambda > 0.0 {
            prop_assert!((lp.r_hours.unwrap() - u / lambda).abs() < 1e-6 * (u / lambda).max(1.0));
        }
    }

    #[test]
    fn customer_weighted_indices(
        rows in prop::collection::vec((1u64..500, 0.0..3.0f64, 0.0..20.0f64, 0.0..5.0f64), 1..8),
    ) {
        let rates: Vec<_> = rows
            .iter()
            .map(|&(n, f, h, m)| LoadPointRates { customers: n, sustained_per_year: f, sustained_hours_per_year: h, momentary_per_year: m })
            .collect();
        let total: f64 = rows.iter().map(|r| r.0 as f64).sum();
        let idx = system_indices(&rates, total, 1, 0.0).unwrap();
        let w = |k: fn(&(u64, f64, f64, f64)) -> f64| rows.iter().map(|r| r.0 as f64 * k(r)).sum::<f64>() / total;
        prop_assert!((idx.saifi - w(|r| r.1)).abs() < 1e-9);
        prop_assert!((idx.saidi - w(|r| r.2)).abs() < 1e-9);
        prop_assert!((idx.maifi - w(|r| r.3)).abs() < 1e-9);
        if idx.saifi > 0.0 {
            prop_assert!((idx.caidi.unwrap() * idx.saifi - idx.saidi).abs() < 1e-9);
            prop_assert!((idx.caifi.unwrap() - idx.saifi).abs() < 1e-9);
        }
    }
}

#[test]
fn history_to_chronology_to_dispatch() {
    let history = load_history_csv(fixture("history.csv")).unwrap();
    let regimes = fit_regimes(history.to_day_profiles(), 3, 1.0, 4).unwrap();
    let a = sample_chronology(&regimes, 14, 9).unwrap();
    let b = sample_chronology(&regimes, 14, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.scenario.len(), 14 * 24);
    assert_eq!(a.regimes.len(), 14);
    for (day, &src) in a.source_days.iter().enumerate() {
        assert_eq!(regimes.day_labels[src], a.regimes[day]);
        let got = &a.scenario.pv_cf.values[day * 24..(day + 1) * 24];
        let want = &history.pv_cf[src * 24..(src + 1) * 24];
        assert_eq!(got, want);
    }
    let trace = dispatch::run(
        &three_bus(),
        &a.scenario,
        &DispatchPolicy::default(),
        &AvailabilityMask::AllAvailable,
    )
    .unwrap();
    assert_eq!(trace.steps.len(), 14 * 24);
    assert!(trace.max_balance_residual() < 1e-6);
}

#[test]
fn mcs_does_not_depend_on_thread_count() {
    let model = SystemModel::from_path(fixture("radial_feeder.json"))
        .unwrap()
        .validated()
        .unwrap();
    let set = ScenarioSet::single(Scenario::flat("flat", 24 * 30, 1.0, 0.0, 0.0).unwrap()).unwrap();
    let cfg = McsConfig::new(300, 1.0, 21);
    let pool = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
    };
    let one = pool(1).install(|| mcs::run(&model, &set, &DispatchPolicy::default(), &cfg).unwrap());
    let four =
        pool(4).install(|| mcs::run(&model, &set, &DispatchPolicy::default(), &cfg).unwrap());
    assert_eq!(one.estimate, four.estimate);
    assert_eq!(one.logs, four.logs);
}

#[test]
fn nonsequential_matches_steady_state_unavailability() {
    let model = SystemModel::from_path(fixture("radial_feeder.json"))
        .unwrap()
        .validated()
        .unwrap();
    let set = ScenarioSet::single(Scenario::flat("flat", 24, 1.0, 0.0, 0.0).unwrap()).unwrap();
    let mut cfg = McsConfig::new(40_000, 1.0, 2);
    cfg.mode = McsMode::Nonsequential;
    let run = mcs::run(&model, &set, &DispatchPolicy::default(), &cfg).unwrap();
    let q: Vec<f64> = model
        .components
        .iter()
        .map(|c| mcs::steady_state_unavailability(c, 1.0))
        .collect();
    let expected = 1.0 - q.iter().map(|q| 1.0 - q).product::<f64>();
    let lp = &run.estimate.load_points[0];
    assert_eq!(run.estimate.chronology, "none");
    assert!(
        (lp.unavailability - expected).abs() <= 3.0 * lp.unavailability_half_width.max(1e-4),
        "{} vs {expected}",
        lp.unavailability
    );
}
