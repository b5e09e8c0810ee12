//! C ABI over the replanning environment and the Q-network policy.
//!
//! Every fallible call returns a `ReplanStatus`; on failure the message is kept
//! per thread and can be read with `replan_last_error`. Handles are opaque and
//! must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use replan::drl::{self, QNetwork};
use replan::env::observation::OBS_DIM;
use replan::env::{Action, EnvSettings, Outcome, ReplanEnv};
use replan::error::ReplanError;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplanStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    InitialPlanFailed = 4,
    StepAfterDone = 5,
    ModelFormat = 6,
    Io = 7,
    Internal = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &ReplanError) -> ReplanStatus {
    match e {
        ReplanError::Config(_) => ReplanStatus::Config,
        ReplanError::InitialPlanFailed { .. } => ReplanStatus::InitialPlanFailed,
        ReplanError::StepAfterDone => ReplanStatus::StepAfterDone,
        ReplanError::ModelFormat(_) => ReplanStatus::ModelFormat,
        ReplanError::Io { .. } => ReplanStatus::Io,
        _ => ReplanStatus::Internal,
    }
}

fn fail(status: ReplanStatus, msg: impl Into<String>) -> ReplanStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), ReplanStatus>) -> ReplanStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ReplanStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(ReplanStatus::Panic, "internal panic"),
    }
}

fn core_err(e: ReplanError) -> ReplanStatus {
    fail(status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, ReplanStatus> {
    if p.is_null() {
        return Err(fail(ReplanStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        fail(
            ReplanStatus::InvalidArgument,
            format!("{what} is not UTF-8"),
        )
    })
}

unsafe fn obs_out<'a>(p: *mut f64, len: usize) -> Result<Option<&'a mut [f64]>, ReplanStatus> {
    if p.is_null() {
        return Ok(None);
    }
    if len < OBS_DIM {
        return Err(fail(
            ReplanStatus::InvalidArgument,
            format!("observation buffer holds {len} values, need {OBS_DIM}"),
        ));
    }
    Ok(Some(std::slice::from_raw_parts_mut(p, OBS_DIM)))
}

/// Opaque environment handle.
pub struct ReplanEnvHandle {
    env: ReplanEnv,
}

/// Opaque Q-network handle.
pub struct ReplanQNet {
    net: QNetwork<f32>,
}

/// Outcome of one decision step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ReplanStepInfo {
    pub reward: f64,
    /// Simulated seconds covered by the step.
    pub elapsed: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub replanned: bool,
}

/// Summary of a finished episode. `outcome` is 0 success, 1 collision, 2 timeout.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ReplanEpisodeInfo {
    pub outcome: u32,
    pub sim_time: f64,
    pub decisions: u64,
    pub replans: u64,
    pub l_path: f64,
    pub travelled: f64,
    pub sgt: f64,
}

/// Length of an observation vector.
#[no_mangle]
pub extern "C" fn replan_obs_dim() -> usize {
    OBS_DIM
}

/// Copies the last error message of this thread into `buf` (NUL terminated,
/// truncated to fit) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn replan_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates an environment. `settings_json` may be null for the defaults;
/// otherwise it is a JSON object with any of the settings sections.
///
/// # Safety
/// `settings_json` must be null or a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn replan_env_new(
    settings_json: *const c_char,
    out: *mut *mut ReplanEnvHandle,
) -> ReplanStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(ReplanStatus::NullPointer, "out is null"));
        }
        let settings = if settings_json.is_null() {
            EnvSettings::default()
        } else {
            let text = str_arg(settings_json, "settings_json")?;
            serde_json::from_str::<EnvSettings>(text)
                .map_err(|e| fail(ReplanStatus::Config, format!("settings: {e}")))?
        };
        let env = ReplanEnv::new(settings).map_err(core_err)?;
        *out = Box::into_raw(Box::new(ReplanEnvHandle { env }));
        Ok(())
    })
}

/// Releases an environment; null is ignored.
///
/// # Safety
/// `env` must be null or a handle from `replan_env_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn replan_env_free(env: *mut ReplanEnvHandle) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Starts the episode for `seed` and writes the first observation.
///
/// # Safety
/// `env` must be a live handle; `obs` must be null or hold `obs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn replan_env_reset(
    env: *mut ReplanEnvHandle,
    seed: u64,
    obs: *mut f64,
    obs_len: usize,
) -> ReplanStatus {
    guard(|| {
        let h = env
            .as_mut()
            .ok_or_else(|| fail(ReplanStatus::NullPointer, "env is null"))?;
        let dst = obs_out(obs, obs_len)?;
        let o = h.env.reset(seed).map_err(core_err)?;
        if let Some(dst) = dst {
            dst.copy_from_slice(&o.to_vec());
        }
        Ok(())
    })
}

/// Applies `action` (0 keep the path, 1 replan).
///
/// # Safety
/// `env` must be a live handle; `info` must be null or valid; `obs` must be
/// null or hold `obs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn replan_env_step(
    env: *mut ReplanEnvHandle,
    action: u32,
    info: *mut ReplanStepInfo,
    obs: *mut f64,
    obs_len: usize,
) -> ReplanStatus {
    guard(|| {
        let h = env
            .as_mut()
            .ok_or_else(|| fail(ReplanStatus::NullPointer, "env is null"))?;
        let a = Action::from_index(action as usize).ok_or_else(|| {
            fail(
                ReplanStatus::InvalidArgument,
                format!("unknown action {action}"),
            )
        })?;
        let dst = obs_out(obs, obs_len)?;
        let r = h.env.step(a).map_err(core_err)?;
        if let Some(dst) = dst {
            dst.copy_from_slice(&r.observation.to_vec());
        }
        if let Some(info) = info.as_mut() {
            *info = ReplanStepInfo {
                reward: r.reward,
                elapsed: r.elapsed,
                terminated: r.terminated,
                truncated: r.truncated,
                replanned: r.replanned,
            };
        }
        Ok(())
    })
}

/// Summary of the finished episode; `InvalidArgument` while it is still running.
///
/// # Safety
/// `env` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn replan_env_result(
    env: *const ReplanEnvHandle,
    out: *mut ReplanEpisodeInfo,
) -> ReplanStatus {
    guard(|| {
        let h = env
            .as_ref()
            .ok_or_else(|| fail(ReplanStatus::NullPointer, "env is null"))?;
        let out = out
            .as_mut()
            .ok_or_else(|| fail(ReplanStatus::NullPointer, "out is null"))?;
        let r = h
            .env
            .result()
            .ok_or_else(|| fail(ReplanStatus::InvalidArgument, "episode is not finished"))?;
        *out = ReplanEpisodeInfo {
            outcome: match r.outcome {
                Outcome::Success => 0,
                Outcome::Collision => 1,
                Outcome::Timeout => 2,
            },
            sim_time: r.sim_time,
            decisions: r.decisions,
            replans: r.replans,
            l_path: r.l_path,
            travelled: r.travelled,
            sgt: r.sgt,
        };
        Ok(())
    })
}

/// Loads a weight file written by `replan train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn replan_qnet_load(
    path: *const c_char,
    out: *mut *mut ReplanQNet,
) -> ReplanStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(ReplanStatus::NullPointer, "out is null"));
        }
        let p = str_arg(path, "path")?;
        let net = drl::load_weights(Path::new(p)).map_err(core_err)?;
        *out = Box::into_raw(Box::new(ReplanQNet { net }));
        Ok(())
    })
}

/// Releases a network; null is ignored.
///
/// # Safety
/// `net` must be null or a handle from `replan_qnet_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn replan_qnet_free(net: *mut ReplanQNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Q-values of both actions and the greedy action for one observation.
///
/// # Safety
/// `net` must be a live handle, `obs` must hold `obs_len` doubles, and `q`
/// (two doubles) and `action` must each be null or valid.
#[no_mangle]
pub unsafe extern "C" fn replan_qnet_act(
    net: *const ReplanQNet,
    obs: *const f64,
    obs_len: usize,
    q: *mut f64,
    action: *mut u32,
) -> ReplanStatus {
    guard(|| {
        let h = net
            .as_ref()
            .ok_or_else(|| fail(ReplanStatus::NullPointer, "net is null"))?;
        if obs.is_null() {
            return Err(fail(ReplanStatus::NullPointer, "obs is null"));
        }
        if obs_len != OBS_DIM {
            return Err(fail(
                ReplanStatus::InvalidArgument,
                format!("observation has {obs_len} values, expected {OBS_DIM}"),
            ));
        }
        let x: Vec<f32> = std::slice::from_raw_parts(obs, obs_len)
            .iter()
            .map(|&v| v as f32)
            .collect();
        let qs = drl::q_values(&h.net, &x);
        if !q.is_null() {
            *q = qs.0 as f64;
            *q.add(1) = qs.1 as f64;
        }
        if let Some(a) = action.as_mut() {
            *a = drl::greedy_action(qs).index() as u32;
        }
        Ok(())
    })
}
