//! C interface to curvlab.
//!
//! Chains are opaque [`CurvlabChain`] handles built from JSON chain specs and
//! released with [`curvlab_chain_free`]. Every function returns a
//! [`CurvlabStatus`]; on failure a message is kept per thread and can be read
//! with [`curvlab_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use curvlab::chain::{adjoint, semigroup_at, ProbabilityVector, StateSpace, StochasticMatrix};
use curvlab::entropy::{entropy_decay_curve, estimate_alpha, AlphaOptions};
use curvlab::metric::MetricSpace;
use curvlab::models::solve_epsilon_q;
use curvlab::spec::{Chain, ChainSpec};
use curvlab::transport::{ollivier_curvature, sectional_holds, wasserstein_value};
use curvlab::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurvlabStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Malformed input: bad JSON, wrong dimensions, invalid entries.
    InvalidInput = 2,
    /// Well-formed input violating a precondition (irreducibility, monotonicity, size cap).
    Precondition = 3,
    /// A numerical routine failed.
    Numerical = 4,
    /// The caller's buffer is too small.
    BufferTooSmall = 5,
    /// An internal panic was caught.
    Panic = 6,
}

/// An analyzed chain: a kernel or a generator with its stationary law, metric and generating set.
pub struct CurvlabChain {
    chain: Chain,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> CurvlabStatus {
    match curvlab::cli::exit_code(err) {
        2 => CurvlabStatus::InvalidInput,
        3 => CurvlabStatus::Precondition,
        _ => CurvlabStatus::Numerical,
    }
}

struct Fail(CurvlabStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(CurvlabStatus::NullPointer, format!("`{name}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CurvlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CurvlabStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            CurvlabStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a>(chain: *const CurvlabChain) -> Result<&'a CurvlabChain, Fail> {
    chain.as_ref().ok_or_else(|| null("chain"))
}

/// The one-step kernel for discrete chains; `e^{tL}` for generators.
fn kernel_at(chain: &Chain, t: f64) -> Result<(StochasticMatrix, ProbabilityVector), Fail> {
    Ok(match chain {
        Chain::Discrete(m) => (m.kernel.clone(), m.pi.clone()),
        Chain::Continuous(m) => (semigroup_at(&m.generator, t)?, m.pi.clone()),
    })
}

fn stationary(chain: &Chain) -> &ProbabilityVector {
    match chain {
        Chain::Discrete(m) => &m.pi,
        Chain::Continuous(m) => &m.pi,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn curvlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn curvlab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses and builds a chain from a JSON chain spec.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn curvlab_chain_from_json(json: *const c_char, out: *mut *mut CurvlabChain) -> CurvlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(CurvlabStatus::InvalidInput, format!("spec is not UTF-8: {e}")))?;
        let spec = ChainSpec::from_json(text).map_err(|e| {
            Fail(
                CurvlabStatus::InvalidInput,
                format!("line {}, column {}: {e}", e.line(), e.column()),
            )
        })?;
        let chain = spec.build()?;
        *out = Box::into_raw(Box::new(CurvlabChain { chain }));
        Ok(())
    })
}

/// Releases a chain. Null is accepted.
///
/// # Safety
/// `chain` must come from [`curvlab_chain_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn curvlab_chain_free(chain: *mut CurvlabChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Number of states; `is_generator` is set to 1 for continuous-time chains.
///
/// # Safety
/// Pointers must be valid; `is_generator` may be null.
#[no_mangle]
pub unsafe extern "C" fn curvlab_chain_num_states(
    chain: *const CurvlabChain,
    out: *mut usize,
    is_generator: *mut i32,
) -> CurvlabStatus {
    guard(|| {
        let c = handle(chain)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = c.chain.space().len();
        if let Some(g) = is_generator.as_mut() {
            *g = matches!(c.chain, Chain::Continuous(_)) as i32;
        }
        Ok(())
    })
}

/// Writes the stationary law into `out[0..len]`; `len` must equal the state count.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn curvlab_chain_stationary(chain: *const CurvlabChain, out: *mut f64, len: usize) -> CurvlabStatus {
    guard(|| {
        let c = handle(chain)?;
        let pi = stationary(&c.chain);
        if len < pi.len() {
            return Err(Fail(CurvlabStatus::BufferTooSmall, format!("need {} entries", pi.len())));
        }
        slice_mut(out, len, "out")?[..pi.len()].copy_from_slice(pi.weights());
        Ok(())
    })
}

/// Ollivier curvature of the kernel at time `t` (ignored for discrete chains).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn curvlab_chain_curvature(chain: *const CurvlabChain, t: f64, kappa: *mut f64) -> CurvlabStatus {
    guard(|| {
        let c = handle(chain)?;
        let kappa = kappa.as_mut().ok_or_else(|| null("kappa"))?;
        let (p, _) = kernel_at(&c.chain, t)?;
        *kappa = ollivier_curvature(&p, c.chain.metric(), c.chain.generating_set())?.kappa;
        Ok(())
    })
}

/// Whether the adjoint of the kernel at time `t` has non-negative sectional curvature.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn curvlab_chain_sectional(chain: *const CurvlabChain, t: f64, holds: *mut i32) -> CurvlabStatus {
    guard(|| {
        let c = handle(chain)?;
        let holds = holds.as_mut().ok_or_else(|| null("holds"))?;
        let (p, pi) = kernel_at(&c.chain, t)?;
        let star = adjoint(&p, &pi)?;
        *holds = sectional_holds(&star, c.chain.metric(), c.chain.generating_set())? as i32;
        Ok(())
    })
}

/// Estimates the entropy contraction constant of the kernel at time `t`.
/// `starts == 0` and `tol <= 0` select the defaults.
///
/// # Safety
/// Pointers must be valid; `lambda2` may be null.
#[no_mangle]
pub unsafe extern "C" fn curvlab_chain_estimate_alpha(
    chain: *const CurvlabChain,
    t: f64,
    starts: usize,
    tol: f64,
    seed: u64,
    alpha_hat: *mut f64,
    lambda2: *mut f64,
) -> CurvlabStatus {
    guard(|| {
        let c = handle(chain)?;
        let alpha_hat = alpha_hat.as_mut().ok_or_else(|| null("alpha_hat"))?;
        let (p, _) = kernel_at(&c.chain, t)?;
        let defaults = AlphaOptions::default();
        let opts = AlphaOptions {
            starts: if starts == 0 { defaults.starts } else { starts },
            tol: if tol > 0.0 { tol } else { defaults.tol },
            seed,
        };
        let est = estimate_alpha(&p, &opts)?;
        *alpha_hat = est.alpha_hat;
        if let Some(l) = lambda2.as_mut() {
            *l = est.lambda2;
        }
        Ok(())
    })
}

/// `out[k] = H(μ₀ P_{times[k]} | π)` along the chain's semigroup (`e^{t(P−I)}` for kernels).
///
/// # Safety
/// `mu0` must hold `n` doubles, `times` and `out` `n_times` doubles each.
#[no_mangle]
pub unsafe extern "C" fn curvlab_chain_entropy_curve(
    chain: *const CurvlabChain,
    mu0: *const f64,
    n: usize,
    times: *const f64,
    n_times: usize,
    out: *mut f64,
) -> CurvlabStatus {
    guard(|| {
        let c = handle(chain)?;
        let mu0 = ProbabilityVector::new(c.chain.space().clone(), slice(mu0, n, "mu0")?.to_vec())?;
        let times = slice(times, n_times, "times")?;
        let out = slice_mut(out, n_times, "out")?;
        let curve = entropy_decay_curve(&c.chain.generator(), &mu0, times)?;
        out.copy_from_slice(&curve.values);
        Ok(())
    })
}

/// Wasserstein distance between `mu` and `nu` under the row-major `n × n` metric `dist`.
///
/// # Safety
/// `mu`, `nu` must hold `n` doubles and `dist` `n * n`.
#[no_mangle]
pub unsafe extern "C" fn curvlab_wasserstein(
    mu: *const f64,
    nu: *const f64,
    dist: *const f64,
    n: usize,
    out: *mut f64,
) -> CurvlabStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if n == 0 {
            return Err(Error::EmptySpace.into());
        }
        let (mu, nu) = (slice(mu, n, "mu")?, slice(nu, n, "nu")?);
        let d = slice(dist, n * n, "dist")?;
        let metric = MetricSpace::from_fn(StateSpace::indexed(n)?, |x, y| d[x * n + y])?;
        *out = wasserstein_value(mu, nu, &metric)?;
        Ok(())
    })
}

/// The root of `ε = (1 + e^{2ε/q})^{−1}`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn curvlab_solve_epsilon_q(q: u32, out: *mut f64) -> CurvlabStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = solve_epsilon_q(q)?;
        Ok(())
    })
}
