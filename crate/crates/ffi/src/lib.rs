//! C ABI for the geoflow engine.
//!
//! Every function returns an `int32_t` status (`GEOFLOW_OK` on success) and
//! writes results through out-pointers. On failure the calling thread's last
//! error message is set; read it with `geoflow_last_error_message`. Handles are
//! opaque, owned by the caller and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use geoflow::cli::Scenario;
use geoflow::dynamics::{DynamicsSpec, Form};
use geoflow::games::{builtin, PopulationGame};
use geoflow::integrator::{integrate, IntegratorConfig, Trajectory};
use geoflow::metrics::MetricField;
use geoflow::numerics::Matrix;
use geoflow::simplex::SimplexPoint;
use geoflow::Error;

pub const GEOFLOW_OK: i32 = 0;
pub const GEOFLOW_ERR_NULL_POINTER: i32 = -1;
pub const GEOFLOW_ERR_INVALID_ARGUMENT: i32 = -2;
pub const GEOFLOW_ERR_DIMENSION: i32 = -3;
pub const GEOFLOW_ERR_DOMAIN: i32 = -4;
pub const GEOFLOW_ERR_NUMERICAL: i32 = -5;
pub const GEOFLOW_ERR_UNSUPPORTED: i32 = -6;
pub const GEOFLOW_ERR_BUFFER_TOO_SMALL: i32 = -7;
pub const GEOFLOW_ERR_PANIC: i32 = -99;

pub const GEOFLOW_FORM_PROJECTED: i32 = 0;
pub const GEOFLOW_FORM_COORDS: i32 = 1;
pub const GEOFLOW_FORM_NORMALIZED: i32 = 2;
pub const GEOFLOW_FORM_HOPKINS: i32 = 3;

/// Population game.
pub struct GeoflowGame(PopulationGame);

/// Metric field on the simplex.
pub struct GeoflowMetric(MetricField);

/// Game, metric and field form.
pub struct GeoflowSpec(DynamicsSpec);

/// Sampled solution path.
pub struct GeoflowTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    fn null(name: &str) -> Self {
        Failure::new(GEOFLOW_ERR_NULL_POINTER, format!("{name} is null"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DimensionMismatch { .. } | Error::DimensionalityLimit(_) => GEOFLOW_ERR_DIMENSION,
            Error::OutsideDomain | Error::NotInterior | Error::SignViolation(_) | Error::ZeroSalience(_) => {
                GEOFLOW_ERR_DOMAIN
            }
            Error::StepExplosion(_) | Error::EvaluationFailure(_) => GEOFLOW_ERR_NUMERICAL,
            Error::NonSteep
            | Error::MissingPotential
            | Error::MissingHessian
            | Error::EnumerationImpossible
            | Error::NotMatching => GEOFLOW_ERR_UNSUPPORTED,
            Error::NonSymmetric(_) | Error::InvalidArgument(_) => GEOFLOW_ERR_INVALID_ARGUMENT,
        };
        Failure::new(code, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Outcome>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GEOFLOW_OK,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.code
        }
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {detail}"));
            GEOFLOW_ERR_PANIC
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(name))
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T, name: &str) -> Outcome {
    if out.is_null() {
        return Err(Failure::null(name));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(GEOFLOW_ERR_INVALID_ARGUMENT, format!("{name} is not valid UTF-8")))
}

fn check_dim(expected: usize, got: usize) -> Outcome {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got }.into())
    }
}

unsafe fn free_box<T>(p: *mut T) -> i32 {
    guard(|| {
        if !p.is_null() {
            drop(Box::from_raw(p));
        }
        Ok(())
    })
}

/// Null-terminated library version; static storage.
#[no_mangle]
pub extern "C" fn geoflow_version() -> *const c_char {
    const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    catch_unwind(|| VERSION.as_ptr().cast()).unwrap_or(ptr::null())
}

/// Copies the calling thread's last error message into `buf`.
///
/// Returns the buffer size needed including the terminating nul, or 0 when no
/// error has been recorded. The copy is truncated (and still nul-terminated)
/// when `len` is too small; `buf` may be null to query the size.
///
/// # Safety
/// `buf` must be null or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn geoflow_last_error_message(buf: *mut c_char, len: usize) -> i32 {
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        LAST_ERROR.with(|slot| {
            let slot = slot.borrow();
            let Some(msg) = slot.as_ref() else { return 0 };
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
            i32::try_from(bytes.len()).unwrap_or(i32::MAX)
        })
    }));
    outcome.unwrap_or(GEOFLOW_ERR_PANIC)
}

/// Clears the calling thread's last error message.
#[no_mangle]
pub extern "C" fn geoflow_clear_error() {
    let _ = catch_unwind(|| LAST_ERROR.with(|slot| *slot.borrow_mut() = None));
}

/// Built-in game by name: `rps`, `rps-permanent`, `rps-dominated`, `toy`,
/// `coordination`, `contractive`.
///
/// # Safety
/// `name` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn geoflow_game_builtin(name: *const c_char, out: *mut *mut GeoflowGame) -> i32 {
    guard(|| {
        let name = text(name, "name")?;
        let game = builtin::by_name(name)
            .ok_or_else(|| Failure::new(GEOFLOW_ERR_INVALID_ARGUMENT, format!("unknown builtin game {name:?}")))?;
        put(out, GeoflowGame(game), "out")
    })
}

/// Matching game `π(x) = A x` from a row-major `n × n` matrix. With
/// `symmetric` set, `A` must be symmetric and the game gets a potential.
///
/// # Safety
/// `data` must point to `n * n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn geoflow_game_matching(
    data: *const f64,
    n: usize,
    symmetric: bool,
    out: *mut *mut GeoflowGame,
) -> i32 {
    guard(|| {
        if n < 2 {
            return Err(Failure::new(GEOFLOW_ERR_INVALID_ARGUMENT, "n must be at least 2"));
        }
        let len = n.checked_mul(n).ok_or_else(|| Failure::new(GEOFLOW_ERR_INVALID_ARGUMENT, "n is too large"))?;
        let values = input(data, len, "data")?;
        let rows: Vec<Vec<f64>> = values.chunks(n).map(<[f64]>::to_vec).collect();
        let a = Matrix::from_rows(&rows)?;
        let game = if symmetric { PopulationGame::symmetric_matching(a)? } else { PopulationGame::matching(a)? };
        put(out, GeoflowGame(game), "out")
    })
}

/// Number of strategies.
///
/// # Safety
/// `game` must be a live handle; `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn geoflow_game_dim(game: *const GeoflowGame, n: *mut usize) -> i32 {
    guard(|| {
        let game = handle(game, "game")?;
        *n.as_mut().ok_or_else(|| Failure::null("n"))? = game.0.n();
        Ok(())
    })
}

/// Payoff vector at the population state `x`.
///
/// # Safety
/// `x` and `payoff` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn geoflow_game_payoff(
    game: *const GeoflowGame,
    x: *const f64,
    n: usize,
    payoff: *mut f64,
) -> i32 {
    guard(|| {
        let game = handle(game, "game")?;
        check_dim(game.0.n(), n)?;
        let x = SimplexPoint::new(input(x, n, "x")?.to_vec())?;
        let pi = game.0.payoff(&x)?;
        output(payoff, n, "payoff")?.copy_from_slice(pi.coords());
        Ok(())
    })
}

/// # Safety
/// `game` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn geoflow_game_free(game: *mut GeoflowGame) -> i32 {
    free_box(game)
}

/// Euclidean metric; its dynamics is the projection dynamics.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn geoflow_metric_euclidean(n: usize, out: *mut *mut GeoflowMetric) -> i32 {
    guard(|| {
        if n < 2 {
            return Err(Failure::new(GEOFLOW_ERR_INVALID_ARGUMENT, "n must be at least 2"));
        }
        put(out, GeoflowMetric(MetricField::euclidean(n)), "out")
    })
}

/// Shahshahani metric; its dynamics is the replicator dynamics.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn geoflow_metric_shahshahani(n: usize, out: *mut *mut GeoflowMetric) -> i32 {
    guard(|| {
        if n < 2 {
            return Err(Failure::new(GEOFLOW_ERR_INVALID_ARGUMENT, "n must be at least 2"));
        }
        put(out, GeoflowMetric(MetricField::shahshahani(n)), "out")
    })
}

/// Separable metric with inverse weights `x^p`, `p >= 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn geoflow_metric_prep(n: usize, p: f64, out: *mut *mut GeoflowMetric) -> i32 {
    guard(|| {
        if n < 2 {
            return Err(Failure::new(GEOFLOW_ERR_INVALID_ARGUMENT, "n must be at least 2"));
        }
        put(out, GeoflowMetric(MetricField::prep(n, p)?), "out")
    })
}

/// # Safety
/// `metric` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn geoflow_metric_free(metric: *mut GeoflowMetric) -> i32 {
    free_box(metric)
}

/// Dynamics of `game` under `metric` in the given `GEOFLOW_FORM_*`. Both
/// inputs are copied; the caller keeps ownership of them.
///
/// # Safety
/// `game` and `metric` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn geoflow_spec_new(
    game: *const GeoflowGame,
    metric: *const GeoflowMetric,
    form: i32,
    out: *mut *mut GeoflowSpec,
) -> i32 {
    guard(|| {
        let game = handle(game, "game")?;
        let metric = handle(metric, "metric")?;
        let form = match form {
            GEOFLOW_FORM_PROJECTED => Form::Projected,
            GEOFLOW_FORM_COORDS => Form::Coords,
            GEOFLOW_FORM_NORMALIZED => Form::Normalized,
            GEOFLOW_FORM_HOPKINS => Form::Hopkins,
            other => return Err(Failure::new(GEOFLOW_ERR_INVALID_ARGUMENT, format!("unknown form {other}"))),
        };
        let spec = DynamicsSpec::new(game.0.clone(), metric.0.clone())?.with_form(form);
        put(out, GeoflowSpec(spec), "out")
    })
}

/// Velocity at the state `x`.
///
/// # Safety
/// `x` and `velocity` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn geoflow_spec_field(
    spec: *const GeoflowSpec,
    x: *const f64,
    n: usize,
    velocity: *mut f64,
) -> i32 {
    guard(|| {
        let spec = handle(spec, "spec")?;
        check_dim(spec.0.n(), n)?;
        let x = SimplexPoint::new(input(x, n, "x")?.to_vec())?;
        let v = spec.0.field(&x)?;
        output(velocity, n, "velocity")?.copy_from_slice(v.coords());
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn geoflow_spec_free(spec: *mut GeoflowSpec) -> i32 {
    free_box(spec)
}

/// Integrates from `x0` to `t_end` with fixed `step` and default settings.
///
/// # Safety
/// `x0` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn geoflow_integrate(
    spec: *const GeoflowSpec,
    x0: *const f64,
    n: usize,
    step: f64,
    t_end: f64,
    out: *mut *mut GeoflowTrajectory,
) -> i32 {
    guard(|| {
        let spec = handle(spec, "spec")?;
        check_dim(spec.0.n(), n)?;
        let x0 = SimplexPoint::new(input(x0, n, "x0")?.to_vec())?;
        let traj = integrate(&spec.0, &x0, &IntegratorConfig::new(step, t_end))?;
        put(out, GeoflowTrajectory(traj), "out")
    })
}

/// Number of samples and states dimension.
///
/// # Safety
/// `traj` must be a live handle; `len` and `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn geoflow_trajectory_shape(traj: *const GeoflowTrajectory, len: *mut usize, n: *mut usize) -> i32 {
    guard(|| {
        let traj = handle(traj, "traj")?;
        *len.as_mut().ok_or_else(|| Failure::null("len"))? = traj.0.len();
        *n.as_mut().ok_or_else(|| Failure::null("n"))? = traj.0.n();
        Ok(())
    })
}

/// Copies the sample times; `capacity` must be at least the sample count.
///
/// # Safety
/// `times` must be valid for `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn geoflow_trajectory_times(
    traj: *const GeoflowTrajectory,
    times: *mut f64,
    capacity: usize,
) -> i32 {
    guard(|| {
        let traj = handle(traj, "traj")?;
        let len = traj.0.len();
        if capacity < len {
            return Err(Failure::new(GEOFLOW_ERR_BUFFER_TOO_SMALL, format!("need {len} doubles, got {capacity}")));
        }
        output(times, len, "times")?.copy_from_slice(&traj.0.times);
        Ok(())
    })
}

/// Copies the states row-major (`len × n`); `capacity` counts doubles.
///
/// # Safety
/// `states` must be valid for `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn geoflow_trajectory_states(
    traj: *const GeoflowTrajectory,
    states: *mut f64,
    capacity: usize,
) -> i32 {
    guard(|| {
        let traj = handle(traj, "traj")?;
        let n = traj.0.n();
        let need = traj.0.len() * n;
        if capacity < need {
            return Err(Failure::new(GEOFLOW_ERR_BUFFER_TOO_SMALL, format!("need {need} doubles, got {capacity}")));
        }
        let dst = output(states, need, "states")?;
        for (row, s) in dst.chunks_mut(n.max(1)).zip(&traj.0.states) {
            row.copy_from_slice(s.coords());
        }
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn geoflow_trajectory_free(traj: *mut GeoflowTrajectory) -> i32 {
    free_box(traj)
}

/// Runs the audit on a scenario given as JSON text and returns the report as
/// JSON. Release the result with `geoflow_string_free`.
///
/// # Safety
/// `scenario_json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn geoflow_audit_json(scenario_json: *const c_char, out: *mut *mut c_char) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let scenario = Scenario::from_json(text(scenario_json, "scenario_json")?)
            .map_err(|e| Failure::new(GEOFLOW_ERR_INVALID_ARGUMENT, e.to_string()))?;
        let report = geoflow::cli::audit(&scenario).map_err(|e| {
            let code = match e.exit_code() {
                2 => GEOFLOW_ERR_INVALID_ARGUMENT,
                3 => GEOFLOW_ERR_DIMENSION,
                _ => GEOFLOW_ERR_NUMERICAL,
            };
            Failure::new(code, e.to_string())
        })?;
        let json = serde_json::to_string(&report).expect("report serializes");
        *out = CString::new(json).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn geoflow_string_free(s: *mut c_char) -> i32 {
    guard(|| {
        if !s.is_null() {
            drop(CString::from_raw(s));
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_error_codes() {
        let code = guard(|| panic!("boom"));
        assert_eq!(code, GEOFLOW_ERR_PANIC);
        let mut buf = [0 as c_char; 64];
        let need = unsafe { geoflow_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(msg, "internal panic: boom");
        assert_eq!(need as usize, msg.len() + 1);
    }
}
