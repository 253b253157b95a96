//! C ABI over the relgrid library.
//!
//! Models live behind an opaque `RgModel` handle. Every call returns an
//! `RgStatus`; on failure `rg_last_error` gives a message for the calling
//! thread. Strings handed out by the library are UTF-8 JSON and must be
//! released with `rg_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use relgrid::cli::{CliError, PlanFile};
use relgrid::dispatch::DispatchPolicy;
use relgrid::indices::{advise, load_point_analytic, DecisionContext};
use relgrid::mcs::{self, McsConfig};
use relgrid::model::{interrupting_sets, validate, SystemModel, DEFAULT_ENUMERATION_LIMIT};
use relgrid::planner::{self, PlanStatus};
use relgrid::scenario::{
    detect_scarcity, parse_scenario_csv, scarcity_percentile, ScarcityEvent, Scenario, ScenarioSet,
    SeriesUnit, TimeSeries,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Infeasible = 4,
    Internal = 5,
    Panic = 6,
}

/// Opaque system model handle.
pub struct RgModel {
    model: SystemModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

struct Fail(RgStatus, String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(RgStatus::InvalidInput, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RgStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside relgrid");
            RgStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RgStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn model<'a>(p: *const RgModel) -> Result<&'a SystemModel, Fail> {
    p.as_ref().map(|m| &m.model).ok_or_else(|| null("model"))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = value;
    Ok(())
}

unsafe fn put_json(out: *mut *mut c_char, value: &impl serde::Serialize) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    let s = serde_json::to_string(value).map_err(|e| Fail(RgStatus::Internal, e.to_string()))?;
    *out = CString::new(s)
        .map_err(|e| Fail(RgStatus::Internal, e.to_string()))?
        .into_raw();
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next relgrid call on the same thread.
#[no_mangle]
pub extern "C" fn rg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a system model.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_model_from_json(
    json: *const c_char,
    out: *mut *mut RgModel,
) -> RgStatus {
    guard(|| {
        let m = SystemModel::from_json_str(text(json, "json")?)?.validated()?;
        put(out, Box::into_raw(Box::new(RgModel { model: m })), "out")
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from `rg_model_from_json` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rg_model_free(model: *mut RgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the validation report as a JSON array of violations.
///
/// # Safety
/// `model` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_model_validate(
    model: *const RgModel,
    out_json: *mut *mut c_char,
) -> RgStatus {
    guard(|| put_json(out_json, &validate(self::model(model)?).violations))
}

/// Exponential time to failure in years from a uniform draw `u` in (0, 1].
///
/// # Safety
/// `out_years` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_draw_ttf(
    lambda_per_year: f64,
    u: f64,
    out_years: *mut f64,
) -> RgStatus {
    guard(|| put(out_years, mcs::draw_ttf(lambda_per_year, u)?, "out_years"))
}

/// Exponential time to repair in years from a uniform draw `u` in (0, 1].
///
/// # Safety
/// `out_years` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_draw_ttr(mu_per_year: f64, u: f64, out_years: *mut f64) -> RgStatus {
    guard(|| put(out_years, mcs::draw_ttr(mu_per_year, u)?, "out_years"))
}

/// Minimal interrupting component sets of a load point as a JSON array of
/// arrays of component ids.
///
/// # Safety
/// `model` must be a live handle; `load_point` NUL-terminated; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_interrupting_sets(
    model: *const RgModel,
    load_point: *const c_char,
    out_json: *mut *mut c_char,
) -> RgStatus {
    guard(|| {
        let sets = interrupting_sets(
            self::model(model)?,
            text(load_point, "load_point")?,
            DEFAULT_ENUMERATION_LIMIT,
        )?;
        put_json(out_json, &sets)
    })
}

/// Analytic λ, U and r for every radial load point, as JSON.
///
/// # Safety
/// `model` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_load_point_analytic(
    model: *const RgModel,
    out_json: *mut *mut c_char,
) -> RgStatus {
    guard(|| put_json(out_json, &load_point_analytic(self::model(model)?)?))
}

/// Monte Carlo estimate as JSON. `scenarios_csv` may be null for a flat year
/// with no renewable output; `config_json` holds an MCS configuration.
///
/// # Safety
/// `model` must be a live handle; strings NUL-terminated; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_mcs_run(
    model: *const RgModel,
    scenarios_csv: *const c_char,
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> RgStatus {
    guard(|| {
        let m = self::model(model)?;
        let set = if scenarios_csv.is_null() {
            ScenarioSet::single(Scenario::flat("flat-year", 8760, 1.0, 0.0, 0.0)?)?
        } else {
            parse_scenario_csv(
                text(scenarios_csv, "scenarios_csv")?.as_bytes(),
                "scenarios_csv",
            )?
        };
        let cfg: McsConfig = serde_json::from_str(text(config_json, "config_json")?)?;
        cfg.check()?;
        let run = mcs::run(m, &set, &DispatchPolicy::default(), &cfg)?;
        put_json(out_json, &run.estimate)
    })
}

/// Scarcity events of a combined capacity-factor series, as JSON.
///
/// # Safety
/// `cf` must point to `len` readable values; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_detect_scarcity(
    cf: *const f64,
    len: usize,
    step_hours: f64,
    threshold: f64,
    out_json: *mut *mut c_char,
) -> RgStatus {
    guard(|| {
        if cf.is_null() && len > 0 {
            return Err(null("cf"));
        }
        let values = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(cf, len).to_vec()
        };
        let series = TimeSeries::new(step_hours, values, SeriesUnit::CapacityFactor)?;
        put_json(out_json, &detect_scarcity(&series, threshold)?)
    })
}

/// Nearest-rank p-quantile of event durations in hours.
///
/// # Safety
/// `durations` must point to `len` readable values; `out_hours` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_scarcity_percentile(
    durations: *const f64,
    len: usize,
    p: f64,
    out_hours: *mut f64,
) -> RgStatus {
    guard(|| {
        if durations.is_null() && len > 0 {
            return Err(null("durations"));
        }
        let d = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(durations, len)
        };
        let events: Vec<ScarcityEvent> = d
            .iter()
            .map(|&h| ScarcityEvent {
                start_step: 0,
                duration_hours: h,
                min_cf: 0.0,
            })
            .collect();
        put(out_hours, scarcity_percentile(&events, p)?, "out_hours")
    })
}

/// Metric recommendation for a decision context, as JSON.
///
/// # Safety
/// `context` must be NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_advise(context: *const c_char, out_json: *mut *mut c_char) -> RgStatus {
    guard(|| {
        let ctx: DecisionContext = text(context, "context")?.parse()?;
        put_json(out_json, &advise(ctx))
    })
}

/// Runs a plan file and writes the result as JSON. Returns
/// `RG_STATUS_INFEASIBLE` with the result still written when no design
/// passes.
///
/// # Safety
/// `plan_path` must be NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_plan(plan_path: *const c_char, out_json: *mut *mut c_char) -> RgStatus {
    guard(|| {
        let path = Path::new(text(plan_path, "plan_path")?);
        let mut loaded = PlanFile::load(path).map_err(|e| match e {
            CliError::Internal(m) => Fail(RgStatus::Internal, m),
            other => Fail(RgStatus::InvalidInput, other.to_string()),
        })?;
        let stochastic = loaded.inputs.mcs.is_some() || loaded.inputs.verification.is_some();
        if stochastic {
            let seed = loaded.file.seed.ok_or_else(|| {
                Fail(
                    RgStatus::InvalidInput,
                    "plan needs a `seed` when simulation is configured".into(),
                )
            })?;
            for cfg in [&mut loaded.inputs.mcs, &mut loaded.inputs.verification]
                .into_iter()
                .flatten()
            {
                cfg.seed = seed;
            }
        }
        let result = planner::search(&loaded.inputs)?;
        put_json(out_json, &result)?;
        if result.status != PlanStatus::Feasible {
            return Err(Fail(RgStatus::Infeasible, result.summary));
        }
        Ok(())
    })
}
