//! C ABI over the urbanbound core.
//!
//! Surveys and rankings cross the boundary as opaque handles owned by the
//! caller and released with the matching `*_free` function. Every fallible
//! call returns a [`UbStatus`]; the message for the most recent failure on
//! the calling thread is available from [`ub_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use urbanbound::fit::{loglog_ols, ScalingPoint};
use urbanbound::graph::build_network;
use urbanbound::ingest::{assemble_survey, parse_population, parse_trips, Survey};
use urbanbound::spectral::{rank_network, CentralityRanking, EigenOptions, ScalingMode};
use urbanbound::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InputError = 3,
    SolverFailure = 4,
    FitError = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UbScalingMode {
    Unit2 = 0,
    Unit1 = 1,
}

/// Log-log OLS result, `log10(T) = intercept + beta * log10(P)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UbFit {
    pub beta: f64,
    pub intercept: f64,
    pub se_beta: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
}

/// Opaque survey handle.
pub struct UbSurvey(Survey);

/// Opaque per-survey centrality ranking.
pub struct UbRanking(CentralityRanking);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: UbStatus, msg: impl Into<String>) -> UbStatus {
    set_error(msg);
    status
}

fn core_status(e: &Error) -> UbStatus {
    match e {
        Error::InsufficientPoints { .. }
        | Error::NonPositivePoint { .. }
        | Error::DegenerateRegressor => UbStatus::FitError,
        e if e.is_input_error() => UbStatus::InputError,
        _ => UbStatus::SolverFailure,
    }
}

fn from_core(e: Error) -> UbStatus {
    let status = core_status(&e);
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> UbStatus) -> UbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(UbStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, UbStatus> {
    if p.is_null() {
        return Err(fail(UbStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(UbStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($p:expr, $name:expr) => {
        if $p.is_null() {
            return fail(UbStatus::NullPointer, concat!($name, " is null"));
        }
    };
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ub_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ub_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses one survey from in-memory CSV text (same formats as the files).
///
/// # Safety
/// All string arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ub_survey_from_csv(
    survey_id: *const c_char,
    trips_csv: *const c_char,
    population_csv: *const c_char,
    out: *mut *mut UbSurvey,
) -> UbStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        let id = try_ffi!(str_arg(survey_id, "survey_id"));
        let trips = try_ffi!(str_arg(trips_csv, "trips_csv"));
        let pop = try_ffi!(str_arg(population_csv, "population_csv"));
        let survey = parse_trips(trips.as_bytes(), id)
            .and_then(|t| Ok((t, parse_population(pop.as_bytes(), id)?)))
            .and_then(|(t, p)| assemble_survey(&t, &p, id));
        match survey {
            Ok(s) => {
                *out = Box::into_raw(Box::new(UbSurvey(s)));
                UbStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `survey` must come from [`ub_survey_from_csv`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ub_survey_free(survey: *mut UbSurvey) {
    if !survey.is_null() {
        drop(Box::from_raw(survey));
    }
}

/// # Safety
/// `survey` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ub_survey_zone_count(survey: *const UbSurvey) -> usize {
    survey.as_ref().map_or(0, |s| s.0.zone_count())
}

/// # Safety
/// `survey` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ub_survey_totals(
    survey: *const UbSurvey,
    population: *mut f64,
    trips: *mut f64,
) -> UbStatus {
    non_null!(survey, "survey");
    non_null!(population, "population");
    non_null!(trips, "trips");
    let s = &(*survey).0;
    *population = s.total_population();
    *trips = s.total_trips();
    UbStatus::Ok
}

/// Leading-eigenvector centrality for one survey.
///
/// # Safety
/// `survey` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ub_rank(
    survey: *const UbSurvey,
    tol: f64,
    max_iter: usize,
    seed: u64,
    mode: UbScalingMode,
    out: *mut *mut UbRanking,
) -> UbStatus {
    guard(|| {
        non_null!(survey, "survey");
        non_null!(out, "out");
        *out = ptr::null_mut();
        let s = &(*survey).0;
        let opts = EigenOptions {
            tol,
            max_iter,
            seed,
        };
        let mode = match mode {
            UbScalingMode::Unit2 => ScalingMode::Unit2,
            UbScalingMode::Unit1 => ScalingMode::Unit1,
        };
        match rank_network(s.id(), &build_network(s), &opts, mode) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(UbRanking(r)));
                UbStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `ranking` must come from [`ub_rank`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ub_ranking_free(ranking: *mut UbRanking) {
    if !ranking.is_null() {
        drop(Box::from_raw(ranking));
    }
}

/// # Safety
/// `ranking` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ub_ranking_len(ranking: *const UbRanking) -> usize {
    ranking.as_ref().map_or(0, |r| r.0.zones.len())
}

/// # Safety
/// `ranking` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ub_ranking_lambda(ranking: *const UbRanking) -> f64 {
    ranking.as_ref().map_or(f64::NAN, |r| r.0.lambda)
}

/// Number of warnings attached to the ranking (degenerate spectrum etc.).
///
/// # Safety
/// `ranking` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ub_ranking_warning_count(ranking: *const UbRanking) -> usize {
    ranking.as_ref().map_or(0, |r| r.0.warnings.len())
}

/// Copies the scores into `buf`, in zone order. `len` must equal
/// [`ub_ranking_len`].
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ub_ranking_psi(
    ranking: *const UbRanking,
    buf: *mut f64,
    len: usize,
) -> UbStatus {
    non_null!(ranking, "ranking");
    let psi = &(*ranking).0.psi;
    if len != psi.len() {
        return fail(
            UbStatus::OutOfRange,
            format!("buffer holds {len} values, ranking has {}", psi.len()),
        );
    }
    if len > 0 {
        non_null!(buf, "buf");
        ptr::copy_nonoverlapping(psi.as_ptr(), buf, len);
    }
    UbStatus::Ok
}

/// Zone id at `index`, as a new string released with [`ub_string_free`].
///
/// # Safety
/// `ranking` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ub_ranking_zone_id(
    ranking: *const UbRanking,
    index: usize,
    out: *mut *mut c_char,
) -> UbStatus {
    non_null!(ranking, "ranking");
    non_null!(out, "out");
    *out = ptr::null_mut();
    let zones = &(*ranking).0.zones;
    let Some(z) = zones.get(index) else {
        return fail(
            UbStatus::OutOfRange,
            format!("index {index} out of range for {} zones", zones.len()),
        );
    };
    match CString::new(z.as_str()) {
        Ok(c) => {
            *out = c.into_raw();
            UbStatus::Ok
        }
        Err(_) => fail(UbStatus::InvalidUtf8, "zone id contains NUL"),
    }
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ub_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Log-log OLS of `trips` against `population` over `n` points.
///
/// # Safety
/// Both arrays must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ub_loglog_ols(
    population: *const f64,
    trips: *const f64,
    n: usize,
    out: *mut UbFit,
) -> UbStatus {
    guard(|| {
        non_null!(out, "out");
        if n > 0 {
            non_null!(population, "population");
            non_null!(trips, "trips");
        }
        let (p, t) = if n == 0 {
            (&[][..], &[][..])
        } else {
            (
                std::slice::from_raw_parts(population, n),
                std::slice::from_raw_parts(trips, n),
            )
        };
        let points: Vec<ScalingPoint> = p
            .iter()
            .zip(t)
            .enumerate()
            .map(|(i, (&p, &t))| ScalingPoint::new(format!("point {i}"), p, t))
            .collect();
        match loglog_ols(&points) {
            Ok(f) => {
                *out = UbFit {
                    beta: f.beta,
                    intercept: f.intercept,
                    se_beta: f.se_beta,
                    ci_lo: f.ci95.0,
                    ci_hi: f.ci95.1,
                    r2: f.r2,
                    adj_r2: f.adj_r2,
                    n: f.n,
                };
                UbStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}
