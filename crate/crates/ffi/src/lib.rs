//! C ABI over the `distmean` library.
//!
//! Every function returns a [`DmStatus`]; on failure the message is kept per
//! thread and read with [`dm_last_error_message`]. Objects are opaque handles
//! created by a `*_new`/run function and released by the matching `*_free`.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use distmean::codec::FixedPointCodec;
use distmean::harness::{estimate_risk, RiskEstimate, RiskOptions, MAX_FAILURE_FRACTION};
use distmean::info::gaussian_posterior;
use distmean::info::{Axis, DiscreteJoint};
use distmean::model::{ExperimentConfig, PriorSpec};
use distmean::normal::normal_cdf;
use distmean::protocols::ProtocolSpec;
use distmean::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ProtocolError = 3,
    InvalidDistribution = 4,
    Panic = 5,
}

/// Fixed-point scalar codec.
pub struct DmCodec(FixedPointCodec);

/// Outcome of a Monte Carlo risk estimate.
pub struct DmRunResult(RiskEstimate);

/// Finite joint distribution over named axes.
pub struct DmJoint(DiscreteJoint);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_of(error: &Error) -> DmStatus {
    match error {
        Error::InsufficientMachines { .. }
        | Error::Precondition(_)
        | Error::Transcript(_)
        | Error::BudgetMismatch(_)
        | Error::MachineOutOfRange { .. } => DmStatus::ProtocolError,
        Error::Unnormalized { .. }
        | Error::InvalidDistribution(_)
        | Error::NotConditionallyIndependent { .. }
        | Error::GridTooCoarse { .. } => DmStatus::InvalidDistribution,
        _ => DmStatus::InvalidArgument,
    }
}

struct Failure(DmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DmStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(DmStatus::InvalidArgument, message.into())
}

/// Runs `body`, translating errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Failure>>(body: F) -> DmStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DmStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn dm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Standard normal CDF.
#[no_mangle]
pub extern "C" fn dm_normal_cdf(x: f64) -> f64 {
    normal_cdf(x)
}

/// Posterior mean and variance of V ~ N(0, delta2) given the sum of `n`
/// draws from N(V, sigma2).
///
/// # Safety
/// `mean` and `variance` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dm_gaussian_posterior(
    delta2: f64,
    sigma2: f64,
    n: usize,
    sum: f64,
    mean: *mut f64,
    variance: *mut f64,
) -> DmStatus {
    guard(|| {
        if mean.is_null() || variance.is_null() {
            return Err(null("output pointer"));
        }
        let post = gaussian_posterior(delta2, sigma2, n, sum)?;
        write(mean, post.mean)?;
        write(variance, post.variance)
    })
}

/// Codec with `2^bits` levels on `[lo, hi]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dm_codec_new(lo: f64, hi: f64, bits: u32, out: *mut *mut DmCodec) -> DmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let codec = FixedPointCodec::new(lo, hi, bits)?;
        write(out, Box::into_raw(Box::new(DmCodec(codec))))
    })
}

/// # Safety
/// `codec` must come from [`dm_codec_new`] and `code` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dm_codec_encode(codec: *const DmCodec, x: f64, code: *mut u64) -> DmStatus {
    guard(|| {
        let c = handle(codec, "codec")?;
        if code.is_null() {
            return Err(null("output pointer"));
        }
        write(code, c.0.encode(x)?)
    })
}

/// # Safety
/// `codec` must come from [`dm_codec_new`] and `x` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dm_codec_decode(codec: *const DmCodec, code: u64, x: *mut f64) -> DmStatus {
    guard(|| {
        let c = handle(codec, "codec")?;
        if x.is_null() {
            return Err(null("output pointer"));
        }
        write(x, c.0.decode(code)?)
    })
}

/// # Safety
/// `codec` must come from [`dm_codec_new`] or be null; it is not usable after.
#[no_mangle]
pub unsafe extern "C" fn dm_codec_free(codec: *mut DmCodec) {
    if !codec.is_null() {
        drop(Box::from_raw(codec));
    }
}

/// Estimates the Bayes risk of a protocol over `trials` independent trials.
///
/// `protocol_json` and `prior_json` take the same objects as the `protocol`
/// and `prior` fields of a `simulate` spec. The result is written even when
/// the status is `ProtocolError` because too many trials failed; it then
/// describes the completed trials only.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dm_estimate_risk(
    protocol_json: *const c_char,
    prior_json: *const c_char,
    d: usize,
    m: usize,
    n: usize,
    sigma2: f64,
    trials: usize,
    seed: u64,
    jobs: usize,
    out: *mut *mut DmRunResult,
) -> DmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let protocol: ProtocolSpec = serde_json::from_str(text(protocol_json, "protocol_json")?)
            .map_err(|e| invalid(format!("protocol: {e}")))?;
        let prior: PriorSpec =
            serde_json::from_str(text(prior_json, "prior_json")?).map_err(|e| invalid(format!("prior: {e}")))?;
        let config = ExperimentConfig::new(d, m, n, sigma2)?;
        let options = RiskOptions::with_jobs(jobs.max(1));
        let estimate = estimate_risk(protocol.build().as_ref(), &prior, &config, trials, seed, &options)?;
        let failing = estimate.failure_fraction >= MAX_FAILURE_FRACTION;
        let message = estimate.failures.first().map(|f| f.error.clone());
        write(out, Box::into_raw(Box::new(DmRunResult(estimate))))?;
        if failing {
            return Err(Failure(
                DmStatus::ProtocolError,
                message.unwrap_or_else(|| "too many failed trials".into()),
            ));
        }
        Ok(())
    })
}

/// Summary of a run: means of squared error, bits and machines, with the
/// standard error of the squared-error mean.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DmRiskSummary {
    pub mse: f64,
    pub mse_stderr: f64,
    pub bits: f64,
    pub machines: f64,
    pub completed_trials: usize,
    pub failed_trials: usize,
}

/// # Safety
/// `result` must come from [`dm_estimate_risk`]; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dm_run_result_summary(result: *const DmRunResult, out: *mut DmRiskSummary) -> DmStatus {
    guard(|| {
        let r = &handle(result, "result")?.0;
        write(
            out,
            DmRiskSummary {
                mse: r.mse.mean,
                mse_stderr: r.mse.stderr,
                bits: r.bits.mean,
                machines: r.machines.mean,
                completed_trials: r.records.len(),
                failed_trials: r.failed_trials,
            },
        )
    })
}

/// Squared error of completed trial `index`, in trial order.
///
/// # Safety
/// `result` must come from [`dm_estimate_risk`]; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dm_run_result_squared_error(
    result: *const DmRunResult,
    index: usize,
    out: *mut f64,
) -> DmStatus {
    guard(|| {
        let r = &handle(result, "result")?.0;
        let record = r
            .records
            .get(index)
            .ok_or_else(|| invalid(format!("trial {index} out of range for {} records", r.records.len())))?;
        write(out, record.squared_error)
    })
}

/// # Safety
/// `result` must come from [`dm_estimate_risk`] or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_run_result_free(result: *mut DmRunResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Joint distribution with axes of the given sizes; `table` is row-major
/// with the last axis fastest and must sum to 1.
///
/// # Safety
/// `sizes` holds `rank` entries, `table` holds `len`; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dm_joint_new(
    sizes: *const usize,
    rank: usize,
    table: *const f64,
    len: usize,
    out: *mut *mut DmJoint,
) -> DmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let sizes = slice(sizes, rank, "sizes")?;
        let table = slice(table, len, "table")?;
        let axes = sizes.iter().enumerate().map(|(i, &s)| Axis::new(format!("a{i}"), s)).collect();
        let joint = DiscreteJoint::new(axes, table.to_vec())?;
        write(out, Box::into_raw(Box::new(DmJoint(joint))))
    })
}

/// Entropy in bits of the marginal on `axes`.
///
/// # Safety
/// `joint` must come from [`dm_joint_new`]; `axes` holds `count` entries.
#[no_mangle]
pub unsafe extern "C" fn dm_joint_entropy(
    joint: *const DmJoint,
    axes: *const usize,
    count: usize,
    out: *mut f64,
) -> DmStatus {
    guard(|| {
        let j = &handle(joint, "joint")?.0;
        let axes = slice(axes, count, "axes")?;
        write(out, j.entropy_of(axes)?)
    })
}

/// I(A;B) in bits between two disjoint axis groups.
///
/// # Safety
/// `joint` must come from [`dm_joint_new`]; the axis arrays hold their counts.
#[no_mangle]
pub unsafe extern "C" fn dm_joint_mutual_information(
    joint: *const DmJoint,
    a: *const usize,
    a_count: usize,
    b: *const usize,
    b_count: usize,
    out: *mut f64,
) -> DmStatus {
    guard(|| {
        let j = &handle(joint, "joint")?.0;
        let a = slice(a, a_count, "a")?;
        let b = slice(b, b_count, "b")?;
        write(out, j.mutual_information_between(a, b)?)
    })
}

/// I(A;B|C) in bits between disjoint axis groups.
///
/// # Safety
/// `joint` must come from [`dm_joint_new`]; the axis arrays hold their counts.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dm_joint_conditional_mutual_information(
    joint: *const DmJoint,
    a: *const usize,
    a_count: usize,
    b: *const usize,
    b_count: usize,
    c: *const usize,
    c_count: usize,
    out: *mut f64,
) -> DmStatus {
    guard(|| {
        let j = &handle(joint, "joint")?.0;
        let a = slice(a, a_count, "a")?;
        let b = slice(b, b_count, "b")?;
        let c = slice(c, c_count, "c")?;
        write(out, j.conditional_mutual_information_between(a, b, c)?)
    })
}

/// # Safety
/// `joint` must come from [`dm_joint_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn dm_joint_free(joint: *mut DmJoint) {
    if !joint.is_null() {
        drop(Box::from_raw(joint));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let p = dm_last_error_message();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
    }

    #[test]
    fn codec_round_trip_and_errors() {
        let mut codec = ptr::null_mut();
        unsafe {
            assert_eq!(dm_codec_new(-1.0, 1.0, 4, &mut codec), DmStatus::Ok);
            assert!(dm_last_error_message().is_null());
            let mut code = 0;
            assert_eq!(dm_codec_encode(codec, 1.0, &mut code), DmStatus::Ok);
            assert_eq!(code, 15);
            let mut x = 0.0;
            assert_eq!(dm_codec_decode(codec, code, &mut x), DmStatus::Ok);
            let mut reference = 0u64;
            let rust = FixedPointCodec::new(-1.0, 1.0, 4).unwrap();
            assert_eq!(x, rust.decode(15).unwrap());
            assert_eq!(dm_codec_decode(codec, 16, &mut x), DmStatus::InvalidArgument);
            assert!(last_error().contains("16"));
            assert_eq!(dm_codec_encode(codec, f64::NAN, &mut reference), DmStatus::InvalidArgument);
            assert_eq!(dm_codec_encode(codec, 0.0, ptr::null_mut()), DmStatus::NullPointer);
            dm_codec_free(codec);
            dm_codec_free(ptr::null_mut());
            assert_eq!(dm_codec_new(1.0, -1.0, 4, &mut codec), DmStatus::InvalidArgument);
            assert_eq!(dm_codec_encode(ptr::null(), 0.0, &mut reference), DmStatus::NullPointer);
        }
    }

    #[test]
    fn risk_run_matches_the_library() {
        let protocol = CString::new(r#"{"kind":"averaging"}"#).unwrap();
        let prior = CString::new(r#"{"kind":"uniform_interval","lo":-1.0,"hi":1.0}"#).unwrap();
        let mut result = ptr::null_mut();
        let mut summary = DmRiskSummary::default();
        unsafe {
            let status = dm_estimate_risk(protocol.as_ptr(), prior.as_ptr(), 2, 8, 2, 1.0, 200, 7, 1, &mut result);
            assert_eq!(status, DmStatus::Ok);
            assert_eq!(dm_run_result_summary(result, &mut summary), DmStatus::Ok);
            let mut first = 0.0;
            assert_eq!(dm_run_result_squared_error(result, 0, &mut first), DmStatus::Ok);
            assert_eq!(dm_run_result_squared_error(result, 200, &mut first), DmStatus::InvalidArgument);
            dm_run_result_free(result);
        }
        let config = ExperimentConfig::new(2, 8, 2, 1.0).unwrap();
        let spec: ProtocolSpec = serde_json::from_str(r#"{"kind":"averaging"}"#).unwrap();
        let direct = estimate_risk(
            spec.build().as_ref(),
            &PriorSpec::UniformInterval { lo: -1.0, hi: 1.0 },
            &config,
            200,
            7,
            &RiskOptions::with_jobs(1),
        )
        .unwrap();
        assert_eq!(summary.mse, direct.mse.mean);
        assert_eq!(summary.bits, direct.bits.mean);
        assert_eq!(summary.completed_trials, 200);
        assert_eq!(summary.failed_trials, 0);
    }

    #[test]
    fn risk_run_reports_bad_inputs() {
        let good_protocol = CString::new(r#"{"kind":"bisection"}"#).unwrap();
        let prior = CString::new(r#"{"kind":"uniform_interval","lo":-1.0,"hi":1.0}"#).unwrap();
        let bad = CString::new(r#"{"kind":"telepathy"}"#).unwrap();
        let mut result = ptr::null_mut();
        unsafe {
            let s = dm_estimate_risk(bad.as_ptr(), prior.as_ptr(), 1, 64, 1, 1.0, 100, 1, 1, &mut result);
            assert_eq!(s, DmStatus::InvalidArgument);
            assert!(last_error().starts_with("protocol"));
            let s = dm_estimate_risk(good_protocol.as_ptr(), prior.as_ptr(), 0, 64, 1, 1.0, 100, 1, 1, &mut result);
            assert_eq!(s, DmStatus::InvalidArgument);
            let s = dm_estimate_risk(ptr::null(), prior.as_ptr(), 1, 64, 1, 1.0, 100, 1, 1, &mut result);
            assert_eq!(s, DmStatus::NullPointer);
            let s = dm_estimate_risk(good_protocol.as_ptr(), prior.as_ptr(), 1, 64, 1, 1.0, 10, 1, 1, &mut result);
            assert_eq!(s, DmStatus::ProtocolError);
            assert!(result.is_null());
        }
    }

    #[test]
    fn joint_information_quantities() {
        // X a fair bit, Y = X, Z an independent fair bit.
        let sizes = [2usize, 2, 2];
        let mut table = [0.0; 8];
        for x in 0..2 {
            for z in 0..2 {
                table[x * 4 + x * 2 + z] = 0.25;
            }
        }
        let mut joint = ptr::null_mut();
        let mut v = f64::NAN;
        unsafe {
            assert_eq!(dm_joint_new(sizes.as_ptr(), 3, table.as_ptr(), 8, &mut joint), DmStatus::Ok);
            assert_eq!(dm_joint_entropy(joint, [0usize, 1, 2].as_ptr(), 3, &mut v), DmStatus::Ok);
            assert!((v - 2.0).abs() < 1e-12);
            assert_eq!(dm_joint_mutual_information(joint, &0, 1, &1, 1, &mut v), DmStatus::Ok);
            assert!((v - 1.0).abs() < 1e-12);
            assert_eq!(dm_joint_mutual_information(joint, &0, 1, &2, 1, &mut v), DmStatus::Ok);
            assert!(v.abs() < 1e-12);
            assert_eq!(
                dm_joint_conditional_mutual_information(joint, &0, 1, &1, 1, &2, 1, &mut v),
                DmStatus::Ok
            );
            assert!((v - 1.0).abs() < 1e-12);
            dm_joint_free(joint);

            let unnormalized = [0.5, 0.6];
            let s = dm_joint_new([2usize].as_ptr(), 1, unnormalized.as_ptr(), 2, &mut joint);
            assert_eq!(s, DmStatus::InvalidDistribution);
            let s = dm_joint_new(ptr::null(), 1, unnormalized.as_ptr(), 2, &mut joint);
            assert_eq!(s, DmStatus::NullPointer);
        }
    }

    #[test]
    fn scalar_helpers() {
        assert_eq!(dm_normal_cdf(0.0), 0.5);
        assert!((dm_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        let (mut mean, mut var) = (0.0, 0.0);
        unsafe {
            assert_eq!(dm_gaussian_posterior(1.0, 1.0, 3, 6.0, &mut mean, &mut var), DmStatus::Ok);
            assert!((mean - 1.5).abs() < 1e-15 && (var - 0.25).abs() < 1e-15);
            assert_eq!(dm_gaussian_posterior(0.0, 1.0, 3, 6.0, &mut mean, &mut var), DmStatus::InvalidArgument);
            assert_eq!(dm_gaussian_posterior(1.0, 1.0, 3, 6.0, ptr::null_mut(), &mut var), DmStatus::NullPointer);
        }
    }
}
