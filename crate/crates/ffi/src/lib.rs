//! C ABI over the qdmsim library.
//!
//! Every function returns a [`QdmStatus`]; on failure the message is kept in
//! a thread-local slot readable through [`qdm_last_error_message`]. Device
//! handles are opaque and must be released with [`qdm_device_free`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qdmsim::cache::TableStore;
use qdmsim::config::RunConfig;
use qdmsim::hamiltonians::{eigh_sorted, Sector};
use qdmsim::protocols::{switch, DeviceOptions, SwitchContext, SwitchOptions};
use qdmsim::wavefunctions::AxialBasis;
use qdmsim::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdmStatus {
    QdmOk = 0,
    /// A pointer argument was null.
    QdmErrNull = 1,
    /// Out-of-range or malformed argument.
    QdmErrInvalidArgument = 2,
    /// Configuration text could not be parsed or validated.
    QdmErrConfig = 3,
    /// A numerical routine failed (non-convergence, positivity loss, ...).
    QdmErrNumeric = 4,
    /// Output buffer too small.
    QdmErrBufferTooSmall = 5,
    QdmErrIo = 6,
    /// A Rust panic was caught at the boundary.
    QdmErrPanic = 7,
}

/// Charge sector selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdmSector {
    QdmOneElectron = 1,
    QdmTwoElectronSinglet = 2,
}

impl From<QdmSector> for Sector {
    fn from(s: QdmSector) -> Self {
        match s {
            QdmSector::QdmOneElectron => Sector::OneElectron,
            QdmSector::QdmTwoElectronSinglet => Sector::TwoElectronSinglet,
        }
    }
}

/// Opaque handle: geometry, device model and phonon tables for one tunnel coupling.
pub struct QdmDevice {
    ctx: SwitchContext,
    options: SwitchOptions,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn status_of(err: &Error) -> QdmStatus {
    match err {
        Error::InvalidParameter(_) => QdmStatus::QdmErrInvalidArgument,
        Error::Config(_) => QdmStatus::QdmErrConfig,
        Error::Io(_) => QdmStatus::QdmErrIo,
        _ => QdmStatus::QdmErrNumeric,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (QdmStatus, String)>) -> QdmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QdmStatus::QdmOk,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QdmStatus::QdmErrPanic
        }
    }
}

fn lib<T>(r: qdmsim::Result<T>) -> Result<T, (QdmStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (QdmStatus, String) {
    (QdmStatus::QdmErrNull, "null pointer argument".to_string())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qdm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qdm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

fn build_device(sector: QdmSector, t_e: f64, opts: DeviceOptions, switch_opts: SwitchOptions, n_omega: usize) -> Result<Box<QdmDevice>, (QdmStatus, String)> {
    if !(t_e > 0.0) {
        return Err((QdmStatus::QdmErrInvalidArgument, "t_e must be positive".into()));
    }
    let ctx = lib(SwitchContext::for_tunnel_coupling(sector.into(), t_e, &opts, &TableStore::default(), n_omega))?;
    Ok(Box::new(QdmDevice { ctx, options: switch_opts }))
}

/// Creates a device with default material parameters for tunnel coupling `t_e` (meV).
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn qdm_device_new(sector: QdmSector, t_e: f64, out: *mut *mut QdmDevice) -> QdmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let d = build_device(sector, t_e, DeviceOptions::default(), SwitchOptions::default(), 2000)?;
        *out = Box::into_raw(d);
        Ok(())
    })
}

/// Creates a device from TOML configuration text (same schema as the command line tool).
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn qdm_device_new_from_config(
    config_toml: *const c_char,
    sector: QdmSector,
    t_e: f64,
    out: *mut *mut QdmDevice,
) -> QdmStatus {
    guard(|| {
        if out.is_null() || config_toml.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(config_toml)
            .to_str()
            .map_err(|_| (QdmStatus::QdmErrConfig, "configuration is not UTF-8".to_string()))?;
        let cfg = lib(RunConfig::from_toml(text))?;
        let d = build_device(sector, t_e, cfg.device_options(), cfg.switch_options(0), cfg.bath.n_omega)?;
        *out = Box::into_raw(d);
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `dev` must come from a `qdm_device_new*` call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qdm_device_free(dev: *mut QdmDevice) {
    if !dev.is_null() {
        drop(Box::from_raw(dev));
    }
}

/// Tunnel coupling (meV), dipole length (nm) and barrier width (nm) of the device.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qdm_device_geometry(dev: *const QdmDevice, t_e: *mut f64, dipole_length: *mut f64, barrier_width: *mut f64) -> QdmStatus {
    guard(|| {
        let d = dev.as_ref().ok_or_else(null)?;
        if t_e.is_null() || dipole_length.is_null() || barrier_width.is_null() {
            return Err(null());
        }
        *t_e = d.ctx.device.t_e;
        *dipole_length = d.ctx.device.d;
        *barrier_width = d.ctx.basis.potential.barrier_width;
        Ok(())
    })
}

/// Coulomb elements V_BB, V_BT, V_TT in meV written to `out[0..3]`.
///
/// # Safety
/// `out` must point to three writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qdm_device_coulomb(dev: *const QdmDevice, out: *mut f64) -> QdmStatus {
    guard(|| {
        let d = dev.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let c = &d.ctx.device.coulomb;
        *out = c.v_bb;
        *out.add(1) = c.v_bt;
        *out.add(2) = c.v_tt;
        Ok(())
    })
}

/// Eigenvalues (meV, ascending) of the sector Hamiltonian at field `field` (V/nm).
///
/// # Safety
/// `energies` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qdm_spectrum(dev: *const QdmDevice, field: f64, energies: *mut f64, len: usize) -> QdmStatus {
    guard(|| {
        let d = dev.as_ref().ok_or_else(null)?;
        if energies.is_null() {
            return Err(null());
        }
        let dim = d.ctx.sector.dim();
        if len < dim {
            return Err((QdmStatus::QdmErrBufferTooSmall, format!("need {dim} entries")));
        }
        if !field.is_finite() {
            return Err((QdmStatus::QdmErrInvalidArgument, "field must be finite".into()));
        }
        let (e, _) = eigh_sorted(&d.ctx.device.hamiltonian(d.ctx.sector, field));
        ptr::copy_nonoverlapping(e.as_ptr(), energies, dim);
        Ok(())
    })
}

/// Runs one switching protocol at speed `v` (V/ps) and temperature (K).
/// Final eigenbasis populations go to `populations[0..dim]`, the target-state
/// population to `fidelity`.
///
/// # Safety
/// `populations` must point to `len` writable doubles; `fidelity` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qdm_switch(
    dev: *const QdmDevice,
    temperature: f64,
    v: f64,
    dissipation: c_int,
    populations: *mut f64,
    len: usize,
    fidelity: *mut f64,
) -> QdmStatus {
    guard(|| {
        let d = dev.as_ref().ok_or_else(null)?;
        if populations.is_null() || fidelity.is_null() {
            return Err(null());
        }
        let dim = d.ctx.sector.dim();
        if len < dim {
            return Err((QdmStatus::QdmErrBufferTooSmall, format!("need {dim} entries")));
        }
        let o = lib(switch(&d.ctx, temperature, v, dissipation != 0, &d.options))?;
        ptr::copy_nonoverlapping(o.final_populations.as_ptr(), populations, dim);
        *fidelity = o.fidelity;
        Ok(())
    })
}

/// |t_e| (meV) of the default-material geometry with barrier width `w` (nm).
///
/// # Safety
/// `t_e` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qdm_tunnel_coupling_for_barrier(w: f64, t_e: *mut f64) -> QdmStatus {
    guard(|| {
        if t_e.is_null() {
            return Err(null());
        }
        let basis: AxialBasis = lib(DeviceOptions::default().basis_for_barrier_width(w))?;
        *t_e = basis.t_e.abs();
        Ok(())
    })
}
