//! C ABI over the level-set loss and gradient.
//!
//! A session owns the kernels, the target and the ILT configuration. It is
//! immutable once created, so one session may be evaluated from several
//! threads at once.
//!
//! ```c
//! typedef struct IldlsSession IldlsSession;
//!
//! IldlsSession *ildls_session_create(const char *config,
//!                                    const char *const *kernel_paths,
//!                                    size_t n_kernels,
//!                                    const char *target_path);
//! void ildls_session_destroy(IldlsSession *s);
//! int ildls_session_shape(const IldlsSession *s, size_t *width, size_t *height);
//! int ildls_eval_loss_and_grad(const IldlsSession *s, const double *psi,
//!                              size_t len, double *loss, double *grad);
//! size_t ildls_last_error(const IldlsSession *s, char *buf, size_t cap);
//! ```
//!
//! Grids are row-major `f64`, `width * height` long. `config` uses the
//! `key = value` format of the CLI; `ilt.process_variation` picks the
//! nominal or the 3x3 condition grid for the life of the session.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ildls_core::config::RunConfig;
use ildls_core::ilt::IltEngine;
use ildls_core::io;
use ildls_core::lithosim::KernelBank;
use ildls_core::LevelSet;
use thiserror::Error;

pub const ILDLS_OK: c_int = 0;
pub const ILDLS_ERR_ARGUMENT: c_int = 1;
pub const ILDLS_ERR_LENGTH: c_int = 2;
pub const ILDLS_ERR_NON_FINITE: c_int = 3;
pub const ILDLS_ERR_NO_INTERFACE: c_int = 4;
pub const ILDLS_ERR_COMPUTE: c_int = 5;
pub const ILDLS_ERR_PANIC: c_int = 6;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("{0}")]
    Argument(String),

    #[error("psi has {found} values, expected {expected}")]
    Length { expected: usize, found: usize },

    #[error(transparent)]
    Core(#[from] ildls_core::Error),

    #[error("internal panic: {0}")]
    Panic(String),
}

impl BridgeError {
    pub fn code(&self) -> c_int {
        use ildls_core::Error as E;
        match self {
            BridgeError::Argument(_) => ILDLS_ERR_ARGUMENT,
            BridgeError::Length { .. } => ILDLS_ERR_LENGTH,
            BridgeError::Core(E::NonFiniteInput { .. }) => ILDLS_ERR_NON_FINITE,
            BridgeError::Core(E::NoInterface) => ILDLS_ERR_NO_INTERFACE,
            BridgeError::Core(_) => ILDLS_ERR_COMPUTE,
            BridgeError::Panic(_) => ILDLS_ERR_PANIC,
        }
    }
}

pub struct Session {
    engine: IltEngine,
    width: usize,
    height: usize,
    pixel_size: f64,
    last_error: Mutex<String>,
}

impl Session {
    pub fn new(config: &str, kernel_paths: &[PathBuf], target_path: &Path) -> Result<Self, BridgeError> {
        let cfg = RunConfig::parse(config)?.resolved()?;
        let mut bank = KernelBank::new();
        for p in kernel_paths {
            bank.insert(io::read_kernels(p)?);
        }
        let target = io::read_pgm(target_path, cfg.pixel_size)?;
        let engine = IltEngine::new(&target, &bank, &cfg.ilt)?;
        let (width, height) = target.shape();
        Ok(Self {
            engine,
            width,
            height,
            pixel_size: cfg.pixel_size,
            last_error: Mutex::new(String::new()),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Loss and `dL/dpsi`. `grad` is written only on success.
    pub fn eval(&self, psi: &[f64], grad: &mut [f64]) -> Result<f64, BridgeError> {
        let expected = self.width * self.height;
        if psi.len() != expected {
            return Err(BridgeError::Length { expected, found: psi.len() });
        }
        if grad.len() != expected {
            return Err(BridgeError::Length { expected, found: grad.len() });
        }
        let field = ildls_core::ScalarField::new(self.width, self.height, self.pixel_size, psi.to_vec())?;
        let (loss, g) = self.engine.levelset_gradient(&LevelSet::new(field)?)?;
        grad.copy_from_slice(g.data());
        Ok(loss)
    }

    fn record(&self, e: &BridgeError) {
        let mut slot = self.last_error.lock().unwrap_or_else(|p| p.into_inner());
        *slot = e.to_string();
    }

    pub fn last_error(&self) -> String {
        self.last_error.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

thread_local! {
    static CREATE_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown".into())
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, BridgeError> {
    if p.is_null() {
        return Err(BridgeError::Argument(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| BridgeError::Argument(format!("{what} is not valid UTF-8")))
}

unsafe fn create(
    config: *const c_char,
    kernel_paths: *const *const c_char,
    n_kernels: usize,
    target_path: *const c_char,
) -> Result<Session, BridgeError> {
    let config = c_str(config, "config")?;
    if kernel_paths.is_null() && n_kernels > 0 {
        return Err(BridgeError::Argument("kernel_paths is null".into()));
    }
    let mut kernels = Vec::with_capacity(n_kernels);
    for i in 0..n_kernels {
        kernels.push(PathBuf::from(c_str(*kernel_paths.add(i), "kernel path")?));
    }
    let target = PathBuf::from(c_str(target_path, "target_path")?);
    Session::new(config, &kernels, &target)
}

/// Returns null on failure; the message is then available from
/// `ildls_last_error(NULL, ...)` on the same thread.
///
/// # Safety
/// Pointers must be null or point to NUL-terminated strings;
/// `kernel_paths` must hold `n_kernels` of them.
#[no_mangle]
pub unsafe extern "C" fn ildls_session_create(
    config: *const c_char,
    kernel_paths: *const *const c_char,
    n_kernels: usize,
    target_path: *const c_char,
) -> *mut Session {
    let result = catch_unwind(AssertUnwindSafe(|| create(config, kernel_paths, n_kernels, target_path)))
        .unwrap_or_else(|p| Err(BridgeError::Panic(panic_message(p))));
    match result {
        Ok(s) => {
            CREATE_ERROR.with(|e| e.borrow_mut().clear());
            Box::into_raw(Box::new(s))
        }
        Err(e) => {
            CREATE_ERROR.with(|slot| *slot.borrow_mut() = e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `session` must be null or a handle from `ildls_session_create` that has
/// not been destroyed, with no calls on it in flight.
#[no_mangle]
pub unsafe extern "C" fn ildls_session_destroy(session: *mut Session) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// # Safety
/// `session` must be a live handle; `width` and `height` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ildls_session_shape(session: *const Session, width: *mut usize, height: *mut usize) -> c_int {
    let Some(s) = session.as_ref() else {
        return ILDLS_ERR_ARGUMENT;
    };
    if !width.is_null() {
        *width = s.width;
    }
    if !height.is_null() {
        *height = s.height;
    }
    ILDLS_OK
}

/// Writes the loss to `*loss` and `dL/dpsi` to `grad` (`len` values).
/// Nothing is written unless the call returns `ILDLS_OK`.
///
/// # Safety
/// `session` must be a live handle; `psi` readable and `grad` writable for
/// `len` doubles; `loss` writable.
#[no_mangle]
pub unsafe extern "C" fn ildls_eval_loss_and_grad(
    session: *const Session,
    psi: *const f64,
    len: usize,
    loss: *mut f64,
    grad: *mut f64,
) -> c_int {
    let Some(s) = session.as_ref() else {
        return ILDLS_ERR_ARGUMENT;
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        if psi.is_null() || loss.is_null() || grad.is_null() {
            return Err(BridgeError::Argument("null buffer".into()));
        }
        let input = std::slice::from_raw_parts(psi, len);
        let mut out = vec![0.0; len];
        let value = s.eval(input, &mut out)?;
        std::slice::from_raw_parts_mut(grad, len).copy_from_slice(&out);
        *loss = value;
        Ok(())
    }))
    .unwrap_or_else(|p| Err(BridgeError::Panic(panic_message(p))));
    match result {
        Ok(()) => ILDLS_OK,
        Err(e) => {
            s.record(&e);
            e.code()
        }
    }
}

/// Copies the last error message, NUL-terminated and truncated to `cap`
/// bytes, into `buf`. Returns the full message length without the NUL.
/// With a null `session`, reports the last failed create on this thread.
///
/// # Safety
/// `session` must be null or a live handle; `buf` null or writable for
/// `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn ildls_last_error(session: *const Session, buf: *mut c_char, cap: usize) -> usize {
    let message = match session.as_ref() {
        Some(s) => s.last_error(),
        None => CREATE_ERROR.with(|e| e.borrow().clone()),
    };
    if !buf.is_null() && cap > 0 {
        let n = message.len().min(cap - 1);
        std::ptr::copy_nonoverlapping(message.as_ptr(), buf as *mut u8, n);
        *buf.add(n) = 0;
    }
    message.len()
}
