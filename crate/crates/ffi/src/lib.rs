//! C interface to the atbat solver.
//!
//! Every fallible function returns an `AtbatStatus`; on failure the message
//! is available from `atbat_last_error` on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings handed
//! out by the library are released with `atbat_string_free`.
//!
//! Zone indices run 0..=16 with `ATBAT_ZONE_FAR` (17) for pitches off the
//! grid. State indices are `balls * 3 + strikes` for counts, then
//! `ATBAT_STATE_ON_BASE` and `ATBAT_STATE_OUT`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use atbat::config::AppConfig;
use atbat::game::{next_state_on_label, Count, PitchLabel};
use atbat::pipeline::{AppError, SolveOverrides, SolveRequest, SolveResponse, TrainedModels};
use atbat::solver::{solve_matrix_game_lp, MatrixGame, SolverError};
use atbat::zones::{default_grid, PlateCoords};

pub const ATBAT_ZONE_FAR: i32 = 17;
pub const ATBAT_STATE_ON_BASE: i32 = 12;
pub const ATBAT_STATE_OUT: i32 = 13;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtbatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotFound = 3,
    Internal = 4,
    Panic = 5,
}

/// A trained store opened for solving.
pub struct AtbatStore {
    config: AppConfig,
    models: TrainedModels,
}

/// One solved matchup.
pub struct AtbatSolution {
    response: SolveResponse,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

struct Failure(AtbatStatus, String);

impl From<AppError> for Failure {
    fn from(e: AppError) -> Self {
        let status = match e {
            AppError::Validation(_) => AtbatStatus::InvalidArgument,
            AppError::NotFound(_) => AtbatStatus::NotFound,
            AppError::Internal(_) => AtbatStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let status = match e {
            SolverError::SolverStalled { .. } | SolverError::NumericalError(_) => AtbatStatus::Internal,
            _ => AtbatStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(AtbatStatus::InvalidArgument, msg.into())
}

fn null(name: &str) -> Failure {
    Failure(AtbatStatus::NullPointer, format!("{name} is null"))
}

/// Runs `f`, turning errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AtbatStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AtbatStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            AtbatStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{name} is not UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

fn count(balls: u8, strikes: u8) -> Result<Count, Failure> {
    Count::new(balls, strikes).map_err(|e| invalid(e.to_string()))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn atbat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Zone index of a plate location (feet) on the default grid.
///
/// # Safety
/// `zone_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn atbat_zone_of(x: f64, z: f64, zone_out: *mut i32) -> AtbatStatus {
    guard(|| {
        let slot = out(zone_out, "zone_out")?;
        let p = PlateCoords::new(x, z).map_err(|e| invalid(e.to_string()))?;
        let zone = default_grid().zone_of(p).map_err(|e| invalid(e.to_string()))?;
        *slot = zone.index() as i32;
        Ok(())
    })
}

/// State reached from a count after a labeled pitch. `label` is one of
/// called_strike, ball, whiff, foul, hit, out_in_play.
///
/// # Safety
/// `label` must be a NUL-terminated string and `state_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn atbat_next_state(
    balls: u8,
    strikes: u8,
    label: *const c_char,
    state_out: *mut i32,
) -> AtbatStatus {
    guard(|| {
        let slot = out(state_out, "state_out")?;
        let code = str_arg(label, "label")?;
        let label = PitchLabel::from_code(code).ok_or_else(|| invalid(format!("unknown pitch label {code:?}")))?;
        *slot = next_state_on_label(count(balls, strikes)?, label).index() as i32;
        Ok(())
    })
}

/// Solves a zero-sum matrix game. `payoff` is row-major `rows x cols`; rows
/// maximize. `cap` in (0, 1] bounds each column probability; pass 0 for no
/// cap. The mix outputs may be NULL when not wanted.
///
/// # Safety
/// `payoff` must hold `rows * cols` doubles, `row_mix_out` `rows` and
/// `col_mix_out` `cols` writable doubles when not NULL.
#[no_mangle]
pub unsafe extern "C" fn atbat_matrix_game_solve(
    payoff: *const f64,
    rows: usize,
    cols: usize,
    cap: f64,
    value_out: *mut f64,
    row_mix_out: *mut f64,
    col_mix_out: *mut f64,
) -> AtbatStatus {
    guard(|| {
        if payoff.is_null() {
            return Err(null("payoff"));
        }
        let value = out(value_out, "value_out")?;
        let n = rows.checked_mul(cols).ok_or_else(|| invalid("matrix too large"))?;
        if n == 0 {
            return Err(invalid("matrix must have at least one row and one column"));
        }
        let flat = std::slice::from_raw_parts(payoff, n);
        let game = MatrixGame::new(flat.chunks(cols).map(<[f64]>::to_vec).collect())?;
        let cap = if cap == 0.0 { None } else { Some(cap) };
        let sol = solve_matrix_game_lp(&game, cap)?;
        *value = sol.value;
        if !row_mix_out.is_null() {
            std::slice::from_raw_parts_mut(row_mix_out, rows).copy_from_slice(&sol.row_mix);
        }
        if !col_mix_out.is_null() {
            std::slice::from_raw_parts_mut(col_mix_out, cols).copy_from_slice(&sol.col_mix);
        }
        Ok(())
    })
}

/// Opens a trained store. Configuration comes from the `ATBAT_*`
/// environment, with the store directory taken from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `store_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn atbat_store_open(path: *const c_char, store_out: *mut *mut AtbatStore) -> AtbatStatus {
    guard(|| {
        let slot = out(store_out, "store_out")?;
        *slot = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        let mut config = AppConfig::from_env(None).map_err(|e| invalid(e.to_string()))?;
        config.store = path;
        let models = TrainedModels::load(&config.store)?;
        *slot = Box::into_raw(Box::new(AtbatStore { config, models }));
        Ok(())
    })
}

/// # Safety
/// `store` must come from `atbat_store_open` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn atbat_store_free(store: *mut AtbatStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Solves one matchup. `overrides_json` may be NULL, or a JSON object with
/// any of excluded_pitch_types, threshold, cap and variance_scale.
///
/// # Safety
/// `store` must be a live handle, the strings NUL-terminated, and
/// `solution_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn atbat_solve_matchup(
    store: *const AtbatStore,
    pitcher_id: *const c_char,
    batter_id: *const c_char,
    overrides_json: *const c_char,
    solution_out: *mut *mut AtbatSolution,
) -> AtbatStatus {
    guard(|| {
        let slot = out(solution_out, "solution_out")?;
        *slot = ptr::null_mut();
        let store = store.as_ref().ok_or_else(|| null("store"))?;
        let overrides: SolveOverrides = if overrides_json.is_null() {
            SolveOverrides::default()
        } else {
            serde_json::from_str(str_arg(overrides_json, "overrides_json")?)
                .map_err(|e| invalid(format!("overrides: {e}")))?
        };
        let req = SolveRequest {
            pitcher_id: str_arg(pitcher_id, "pitcher_id")?.to_string(),
            batter_id: str_arg(batter_id, "batter_id")?.to_string(),
            overrides,
        };
        let response = store.models.solve(&store.config, &req)?;
        *slot = Box::into_raw(Box::new(AtbatSolution { response }));
        Ok(())
    })
}

/// Equilibrium on-base probability from a count.
///
/// # Safety
/// `solution` must be a live handle and `value_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn atbat_solution_value(
    solution: *const AtbatSolution,
    balls: u8,
    strikes: u8,
    value_out: *mut f64,
) -> AtbatStatus {
    guard(|| {
        let value = out(value_out, "value_out")?;
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        *value = s.response.solution.value(count(balls, strikes)?);
        Ok(())
    })
}

/// The full solve response as JSON. Free the string with `atbat_string_free`.
///
/// # Safety
/// `solution` must be a live handle and `json_out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn atbat_solution_to_json(solution: *const AtbatSolution, json_out: *mut *mut c_char) -> AtbatStatus {
    guard(|| {
        let slot = out(json_out, "json_out")?;
        *slot = ptr::null_mut();
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let json = serde_json::to_string(&s.response).map_err(|e| Failure(AtbatStatus::Internal, e.to_string()))?;
        *slot = CString::new(json).map_err(|e| Failure(AtbatStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `solution` must come from `atbat_solve_matchup` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn atbat_solution_free(solution: *mut AtbatSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `s` must be a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn atbat_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
