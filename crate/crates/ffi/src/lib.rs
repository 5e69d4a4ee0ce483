//! C interface. Every function returns a `TwStatus`; on failure the message
//! is available from `tw_last_error` on the same thread. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tiltwing::checkpoint::Checkpoint;
use tiltwing::config::RunConfig;
use tiltwing::env::{ObsMode, TakeoffEnv, TerminationCause};
use tiltwing::sac::SacAgent;
use tiltwing::transformer::Transformer;
use tiltwing::vehicle::{aero, ControlInput, VehicleConfig};
use tiltwing::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    Numerical = 4,
    Io = 5,
    Format = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwCause {
    None = 0,
    TookOff = 1,
    Ground = 2,
    NegativeFreestream = 3,
    Timeout = 4,
}

/// Result of one environment step. `observation` holds `observation_len`
/// valid entries.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TwStep {
    pub observation: [f64; 7],
    pub observation_len: usize,
    pub reward: f64,
    pub energy_wh: f64,
    pub cause: TwCause,
    pub done: bool,
}

/// Takeoff environment in vanilla observation mode.
pub struct TwEnv(TakeoffEnv);
pub struct TwTransformer(Transformer);
pub struct TwAgent(SacAgent);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(TwStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Infeasible(_) => TwStatus::Infeasible,
            Error::NonFinite(_) | Error::NonConvergence { .. } | Error::Shape { .. } => TwStatus::Numerical,
            Error::Contract(_) => TwStatus::InvalidArgument,
            Error::Io(_) => TwStatus::Io,
            Error::Format(_) | Error::Json(_) => TwStatus::Format,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TwStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TwStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside tiltwing".into());
            TwStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(TwStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn mut_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn cause(c: TerminationCause) -> TwCause {
    match c {
        TerminationCause::None => TwCause::None,
        TerminationCause::TookOff => TwCause::TookOff,
        TerminationCause::Ground => TwCause::Ground,
        TerminationCause::NegativeFreestream => TwCause::NegativeFreestream,
        TerminationCause::Timeout => TwCause::Timeout,
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Relative accuracy 1 − |e_gen − e_ref| / e_ref.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn tw_accuracy(e_gen: f64, e_ref: f64, out: *mut f64) -> TwStatus {
    guard(|| {
        let out = mut_ref(out, "out")?;
        *out = tiltwing::metrics::accuracy(e_gen, e_ref)?;
        Ok(())
    })
}

/// Wing drag coefficient of the default vehicle at angle of attack `alpha`
/// (rad).
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn tw_drag_coeff(alpha: f64, out: *mut f64) -> TwStatus {
    guard(|| {
        if !alpha.is_finite() {
            return Err(Fail(TwStatus::InvalidArgument, "alpha is not finite".into()));
        }
        *mut_ref(out, "out")? = aero::drag_coeff(alpha, &VehicleConfig::default());
        Ok(())
    })
}

/// Creates an environment from a JSON run config (null for defaults; only
/// the `vehicle` and `env` sections matter).
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tw_env_new(config_json: *const c_char, out: *mut *mut TwEnv) -> TwStatus {
    guard(|| {
        let out = mut_ref(out, "out")?;
        let mut cfg = serde_json::to_value(RunConfig::desk()).map_err(Error::from)?;
        if !config_json.is_null() {
            let patch: serde_json::Value =
                serde_json::from_str(str_arg(config_json, "config_json")?).map_err(Error::from)?;
            for key in ["vehicle", "env"] {
                if let Some(section) = patch.get(key).and_then(|v| v.as_object()) {
                    for (k, v) in section {
                        cfg[key][k] = v.clone();
                    }
                }
            }
        }
        let cfg: RunConfig = serde_json::from_value(cfg).map_err(|e| Fail(TwStatus::Format, e.to_string()))?;
        let env = TakeoffEnv::new(cfg.vehicle, cfg.env, ObsMode::Vanilla)?;
        *out = Box::into_raw(Box::new(TwEnv(env)));
        Ok(())
    })
}

/// # Safety
/// `env` must be null or a handle from `tw_env_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tw_env_free(env: *mut TwEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Resets to the initial state and writes the observation.
///
/// # Safety
/// `env` must be a live handle; `obs` must hold `cap` doubles; `len` must
/// be valid.
#[no_mangle]
pub unsafe extern "C" fn tw_env_reset(env: *mut TwEnv, seed: u64, obs: *mut f64, cap: usize, len: *mut usize) -> TwStatus {
    guard(|| {
        let env = mut_ref(env, "env")?;
        let len = mut_ref(len, "len")?;
        let o = env.0.reset(seed);
        *len = o.len();
        if cap < o.len() {
            return Err(Fail(TwStatus::BufferTooSmall, format!("observation needs {} doubles", o.len())));
        }
        if obs.is_null() {
            return Err(null("obs"));
        }
        std::slice::from_raw_parts_mut(obs, o.len()).copy_from_slice(&o);
        Ok(())
    })
}

/// Applies power (W) and wing angle (rad) for one step.
///
/// # Safety
/// `env` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tw_env_step(env: *mut TwEnv, power: f64, theta: f64, out: *mut TwStep) -> TwStatus {
    guard(|| {
        let env = mut_ref(env, "env")?;
        let out = mut_ref(out, "out")?;
        let r = env.0.step(ControlInput::new(power, theta))?;
        let mut observation = [0.0; 7];
        observation[..r.observation.len()].copy_from_slice(&r.observation);
        *out = TwStep {
            observation,
            observation_len: r.observation.len(),
            reward: r.reward,
            energy_wh: r.energy_wh,
            cause: cause(r.cause),
            done: r.terminated(),
        };
        Ok(())
    })
}

/// Loads a transformer checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tw_transformer_load(path: *const c_char, out: *mut *mut TwTransformer) -> TwStatus {
    guard(|| {
        let out = mut_ref(out, "out")?;
        let ckpt = Checkpoint::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(TwTransformer(Transformer::from_checkpoint(&ckpt)?)));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from `tw_transformer_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tw_transformer_free(t: *mut TwTransformer) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Proposal for the action after `n` normalized (power, angle) pairs stored
/// row-major in `history`.
///
/// # Safety
/// `t` must be a live handle, `history` must hold `2 n` doubles and `mean`
/// and `var` must each hold 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_transformer_propose(
    t: *const TwTransformer,
    history: *const f64,
    n: usize,
    mean: *mut f64,
    var: *mut f64,
) -> TwStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("transformer"))?;
        let h = slice(history, 2 * n, "history")?;
        if mean.is_null() || var.is_null() {
            return Err(null("mean/var"));
        }
        let pairs: Vec<[f64; 2]> = h.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let p = t.0.propose_next(&pairs)?;
        std::slice::from_raw_parts_mut(mean, 2).copy_from_slice(&p.mean);
        std::slice::from_raw_parts_mut(var, 2).copy_from_slice(&p.var);
        Ok(())
    })
}

/// Loads a SAC agent checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tw_agent_load(path: *const c_char, out: *mut *mut TwAgent) -> TwStatus {
    guard(|| {
        let out = mut_ref(out, "out")?;
        let ckpt = Checkpoint::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(TwAgent(SacAgent::from_checkpoint(&ckpt)?)));
        Ok(())
    })
}

/// # Safety
/// `a` must be null or a handle from `tw_agent_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tw_agent_free(a: *mut TwAgent) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Observation and action sizes of an agent.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tw_agent_dims(a: *const TwAgent, obs_dim: *mut usize, act_dim: *mut usize) -> TwStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("agent"))?;
        *mut_ref(obs_dim, "obs_dim")? = a.0.obs_dim;
        *mut_ref(act_dim, "act_dim")? = a.0.act_dim;
        Ok(())
    })
}

/// Deterministic action in [−1, 1]^act_dim for an observation.
///
/// # Safety
/// `a` must be a live handle, `obs` must hold `obs_len` doubles and
/// `action` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_agent_act(
    a: *const TwAgent,
    obs: *const f64,
    obs_len: usize,
    action: *mut f64,
    cap: usize,
) -> TwStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("agent"))?;
        let o = slice(obs, obs_len, "obs")?;
        let act = a.0.select_action(o, false, &mut ChaCha8Rng::seed_from_u64(0))?;
        if cap < act.len() {
            return Err(Fail(TwStatus::BufferTooSmall, format!("action needs {} doubles", act.len())));
        }
        if action.is_null() {
            return Err(null("action"));
        }
        std::slice::from_raw_parts_mut(action, act.len()).copy_from_slice(&act);
        Ok(())
    })
}
