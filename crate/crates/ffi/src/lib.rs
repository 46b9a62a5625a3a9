//! C ABI for the relativistic Stern-Gerlach toolkit.
//!
//! Conventions:
//! - Handles (`RelsgConfig`, `RelsgSpinor`) are opaque pointers created by
//!   `relsg_*_new` constructors and released with the matching `_free`.
//!   Freeing a null pointer is a no-op.
//! - Every fallible call returns a `RelsgStatus`; outputs are written
//!   through pointers only on `RelsgStatus_Ok`.
//! - The message for the most recent error on the calling thread is
//!   available via `relsg_last_error`.
//! - Four-vectors are `double[4]` in (t, x, y, z) order with metric
//!   signature (+,-,-,-); complex 2-spinors are `double[4]` as
//!   (re0, im0, re1, im1).
//!
//! The generated header is written to `include/relsg.h` at build time.

use std::cell::RefCell;
use std::os::raw::c_char;

use relsg::lorentz::{FourVector, SpinorAmplitude};
use relsg::observable::{compare_operators, rest_frame_b, sg_field_tensor, sg_operator};
use relsg::spinor::Spinor;
use relsg::tomography::{predict_mean, BlochState};
use relsg::wkbsim::{run_measurement, FieldProfile, RunParams};
use relsg::{Error, SGConfig};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelsgStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// The inputs describe an invalid configuration (bad velocity, axis,
    /// field, or parameter value).
    InvalidConfig = 2,
    /// The inputs are structurally valid but outside the mathematical
    /// domain (off-shell momentum, mismatched momenta, rank-deficient
    /// systems, ...).
    Domain = 3,
    /// A numerical procedure failed (integration blow-up, step budget).
    Numerical = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn fail(e: &Error) -> RelsgStatus {
    let status = match e {
        Error::InvalidConfig(_)
        | Error::NonPositiveMass(_)
        | Error::NonUnitAxis(_)
        | Error::ZeroField
        | Error::ZeroAmplitude => RelsgStatus::InvalidConfig,
        Error::IntegrationError(_) | Error::DetectorNotReached(_) => RelsgStatus::Numerical,
        _ => RelsgStatus::Domain,
    };
    let mut msg = e.to_string().into_bytes();
    msg.push(0);
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
    status
}

fn fail_null() -> RelsgStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = b"null pointer argument\0".to_vec());
    RelsgStatus::NullPointer
}

/// Copies the most recent error message on this thread into `buf`
/// (NUL-terminated, truncated to `len` bytes) and returns the full
/// message length including the NUL. `buf` may be null to query the
/// required size.
#[no_mangle]
pub unsafe extern "C" fn relsg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        if msg.is_empty() {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        }
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        msg.len()
    })
}

/// Opaque Stern-Gerlach apparatus configuration.
pub struct RelsgConfig(SGConfig);

/// Opaque momentum-labeled 2-spinor state.
pub struct RelsgSpinor(Spinor);

/// Creates a configuration from a device 4-velocity `v`, a unit spacelike
/// field direction `b` orthogonal to `v`, and the device-frame magnitude.
#[no_mangle]
pub unsafe extern "C" fn relsg_config_new(
    v: *const f64,
    b: *const f64,
    magnitude: f64,
    out: *mut *mut RelsgConfig,
) -> RelsgStatus {
    if v.is_null() || b.is_null() || out.is_null() {
        return fail_null();
    }
    let v = FourVector(std::slice::from_raw_parts(v, 4).try_into().unwrap());
    let b = FourVector(std::slice::from_raw_parts(b, 4).try_into().unwrap());
    match SGConfig::new(v, b, magnitude) {
        Ok(cfg) => {
            *out = Box::into_raw(Box::new(RelsgConfig(cfg)));
            RelsgStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Creates a configuration for an apparatus at rest with field along the
/// 3-direction `dir` (need not be normalized).
#[no_mangle]
pub unsafe extern "C" fn relsg_config_device_rest(
    dir: *const f64,
    magnitude: f64,
    out: *mut *mut RelsgConfig,
) -> RelsgStatus {
    if dir.is_null() || out.is_null() {
        return fail_null();
    }
    let d: [f64; 3] = std::slice::from_raw_parts(dir, 3).try_into().unwrap();
    match SGConfig::device_rest(d, magnitude) {
        Ok(cfg) => {
            *out = Box::into_raw(Box::new(RelsgConfig(cfg)));
            RelsgStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Releases a configuration handle.
#[no_mangle]
pub unsafe extern "C" fn relsg_config_free(cfg: *mut RelsgConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Creates a spinor state from an amplitude (re0, im0, re1, im1), an
/// on-shell momentum `p`, and the mass.
#[no_mangle]
pub unsafe extern "C" fn relsg_spinor_new(
    psi: *const f64,
    p: *const f64,
    mass: f64,
    out: *mut *mut RelsgSpinor,
) -> RelsgStatus {
    if psi.is_null() || p.is_null() || out.is_null() {
        return fail_null();
    }
    let a = std::slice::from_raw_parts(psi, 4);
    let amp = SpinorAmplitude::new(
        num_complex(a[0], a[1]),
        num_complex(a[2], a[3]),
    );
    let p = FourVector(std::slice::from_raw_parts(p, 4).try_into().unwrap());
    match Spinor::new(amp, p, mass) {
        Ok(s) => {
            *out = Box::into_raw(Box::new(RelsgSpinor(s)));
            RelsgStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

fn num_complex(re: f64, im: f64) -> relsg::lorentz::C64 {
    relsg::lorentz::C64::new(re, im)
}

/// Releases a spinor handle.
#[no_mangle]
pub unsafe extern "C" fn relsg_spinor_free(s: *mut RelsgSpinor) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// I_u norm of the state.
#[no_mangle]
pub unsafe extern "C" fn relsg_spinor_norm(s: *const RelsgSpinor, out: *mut f64) -> RelsgStatus {
    if s.is_null() || out.is_null() {
        return fail_null();
    }
    *out = (*s).0.norm();
    RelsgStatus::Ok
}

/// Expectation of the covariant Stern-Gerlach observable in the state.
#[no_mangle]
pub unsafe extern "C" fn relsg_expectation(
    cfg: *const RelsgConfig,
    state: *const RelsgSpinor,
    out: *mut f64,
) -> RelsgStatus {
    if cfg.is_null() || state.is_null() || out.is_null() {
        return fail_null();
    }
    let s = &(*state).0;
    let r = sg_operator(&(*cfg).0, &s.p, s.mass).and_then(|obs| obs.expectation(s));
    match r {
        Ok(v) => {
            *out = v;
            RelsgStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Measurement axis `n` (4-vector) and rest-frame magnetic field `b_rf`
/// for a particle of momentum `p` and the given mass. Either output may
/// be null if not wanted.
#[no_mangle]
pub unsafe extern "C" fn relsg_direction(
    cfg: *const RelsgConfig,
    p: *const f64,
    mass: f64,
    n_out: *mut f64,
    b_rf_out: *mut f64,
) -> RelsgStatus {
    if cfg.is_null() || p.is_null() {
        return fail_null();
    }
    let p = FourVector(std::slice::from_raw_parts(p, 4).try_into().unwrap());
    let obs = match sg_operator(&(*cfg).0, &p, mass) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    if !n_out.is_null() {
        std::ptr::copy_nonoverlapping(obs.n.0.as_ptr(), n_out, 4);
    }
    if !b_rf_out.is_null() {
        let f = sg_field_tensor(&(*cfg).0);
        let b = rest_frame_b(&f, &p.scale(1.0 / mass));
        std::ptr::copy_nonoverlapping(b.0.as_ptr(), b_rf_out, 4);
    }
    RelsgStatus::Ok
}

/// Expectations of the three candidate spin operators in the state:
/// the covariant operator and the two rival constructions.
#[no_mangle]
pub unsafe extern "C" fn relsg_compare(
    cfg: *const RelsgConfig,
    state: *const RelsgSpinor,
    sg_out: *mut f64,
    sprime_out: *mut f64,
    sdoubleprime_out: *mut f64,
) -> RelsgStatus {
    if cfg.is_null() || state.is_null() {
        return fail_null();
    }
    let s = &(*state).0;
    match compare_operators(&(*cfg).0, &s.p, s.mass, s) {
        Ok(c) => {
            if !sg_out.is_null() {
                *sg_out = c.sg;
            }
            if !sprime_out.is_null() {
                *sprime_out = c.sprime;
            }
            if !sdoubleprime_out.is_null() {
                *sdoubleprime_out = c.sdoubleprime;
            }
            RelsgStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Predicted measurement mean for a rest-frame Bloch vector `r` measured
/// by the apparatus on a particle of momentum `p` and the given mass.
#[no_mangle]
pub unsafe extern "C" fn relsg_predict_mean(
    r: *const f64,
    cfg: *const RelsgConfig,
    p: *const f64,
    mass: f64,
    out: *mut f64,
) -> RelsgStatus {
    if r.is_null() || cfg.is_null() || p.is_null() || out.is_null() {
        return fail_null();
    }
    let r: [f64; 3] = std::slice::from_raw_parts(r, 3).try_into().unwrap();
    let p = FourVector(std::slice::from_raw_parts(p, 4).try_into().unwrap());
    let result = BlochState::new(r).and_then(|b| predict_mean(&b, &(*cfg).0, &p, mass));
    match result {
        Ok(v) => {
            *out = v;
            RelsgStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Field-slab and integrator parameters for `relsg_simulate`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RelsgSimParams {
    /// Device-frame magnitude slope.
    pub gradient: f64,
    /// Unit gradient direction (device frame).
    pub gradient_dir: [f64; 3],
    /// Unit beam axis of the slab (device frame).
    pub slab_axis: [f64; 3],
    /// Slab extent along the axis.
    pub slab_min: f64,
    pub slab_max: f64,
    /// Smooth ramp width at the slab edges.
    pub edge_width: f64,
    /// Slab origin, device frame.
    pub origin: [f64; 3],
    /// Electric charge.
    pub charge: f64,
    /// Magnetic-moment coupling.
    pub coupling: f64,
    /// Detector coordinate along the slab axis.
    pub detector_plane: f64,
    /// Initial event (t, x, y, z).
    pub x0: [f64; 4],
    /// Proper-time step.
    pub dtau: f64,
    /// Step budget.
    pub max_steps: usize,
    /// Separation threshold for the `resolved` flag.
    pub packet_width: f64,
}

/// Per-branch outcome of `relsg_simulate`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RelsgBranchOutcome {
    /// +1.0 or -1.0.
    pub branch: f64,
    /// Born weight of the branch.
    pub weight: f64,
    /// Transverse arrival position relative to the free ray.
    pub deflection: [f64; 3],
    /// Proper time at the detector plane.
    pub arrival_tau: f64,
    /// Drift of the conserved ray scalar over the run.
    pub conservation_drift: f64,
}

/// Outcome report of `relsg_simulate`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RelsgReport {
    pub plus: RelsgBranchOutcome,
    pub minus: RelsgBranchOutcome,
    /// Distance between the two arrival spots.
    pub separation: f64,
    /// 1 if the separation exceeds the packet width, else 0.
    pub resolved: i32,
    /// Worst |div B| encountered, a diagnostic of the idealized profile.
    pub maxwell_violation: f64,
}

/// Splits the state on the apparatus eigenbasis and integrates both
/// branches through the field slab to the detector plane.
#[no_mangle]
pub unsafe extern "C" fn relsg_simulate(
    cfg: *const RelsgConfig,
    state: *const RelsgSpinor,
    params: *const RelsgSimParams,
    out: *mut RelsgReport,
) -> RelsgStatus {
    if cfg.is_null() || state.is_null() || params.is_null() || out.is_null() {
        return fail_null();
    }
    let p = &*params;
    let result = (|| {
        let mut profile =
            FieldProfile::new((*cfg).0.clone(), p.gradient, p.gradient_dir)?;
        profile.slab_axis = p.slab_axis;
        profile.slab_range = [p.slab_min, p.slab_max];
        profile.edge_width = p.edge_width;
        profile.origin = p.origin;
        profile.charge = p.charge;
        profile.coupling = p.coupling;
        let run = RunParams {
            dtau: p.dtau,
            max_steps: p.max_steps,
            packet_width: p.packet_width,
            sample_every: usize::MAX,
        };
        run_measurement(
            &(*state).0,
            &profile,
            &FourVector(p.x0),
            p.detector_plane,
            &run,
        )
    })();
    match result {
        Ok(rep) => {
            let branch = |b: &relsg::wkbsim::BranchOutcome| RelsgBranchOutcome {
                branch: b.branch,
                weight: b.weight,
                deflection: b.deflection,
                arrival_tau: b.arrival_tau,
                conservation_drift: b.conservation_drift,
            };
            *out = RelsgReport {
                plus: branch(&rep.plus),
                minus: branch(&rep.minus),
                separation: rep.separation,
                resolved: rep.resolved as i32,
                maxwell_violation: rep.maxwell_violation,
            };
            RelsgStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn config_and_expectation_roundtrip() {
        unsafe {
            let mut cfg: *mut RelsgConfig = std::ptr::null_mut();
            let dir = [0.0, 0.0, 1.0];
            assert_eq!(
                relsg_config_device_rest(dir.as_ptr(), 1.0, &mut cfg),
                RelsgStatus::Ok
            );

            let psi = [1.0, 0.0, 0.0, 0.0];
            let p = [1.0, 0.0, 0.0, 0.0];
            let mut sp: *mut RelsgSpinor = std::ptr::null_mut();
            assert_eq!(
                relsg_spinor_new(psi.as_ptr(), p.as_ptr(), 1.0, &mut sp),
                RelsgStatus::Ok
            );

            let mut val = 0.0;
            assert_eq!(relsg_expectation(cfg, sp, &mut val), RelsgStatus::Ok);
            assert_abs_diff_eq!(val, 1.0, epsilon = 1e-12);

            relsg_spinor_free(sp);
            relsg_config_free(cfg);
        }
    }

    #[test]
    fn null_arguments_are_rejected_with_message() {
        unsafe {
            let mut val = 0.0;
            assert_eq!(
                relsg_expectation(std::ptr::null(), std::ptr::null(), &mut val),
                RelsgStatus::NullPointer
            );
            let mut buf = [0i8; 64];
            let n = relsg_last_error(buf.as_mut_ptr(), buf.len());
            assert!(n > 0);
            let msg = std::ffi::CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
            assert!(msg.contains("null"));
        }
    }

    #[test]
    fn invalid_config_maps_to_status_and_message() {
        unsafe {
            let mut cfg: *mut RelsgConfig = std::ptr::null_mut();
            // Spacelike "velocity": rejected.
            let v = [0.5, 1.0, 0.0, 0.0];
            let b = [0.0, 0.0, 0.0, 1.0];
            assert_eq!(
                relsg_config_new(v.as_ptr(), b.as_ptr(), 1.0, &mut cfg),
                RelsgStatus::InvalidConfig
            );
            let needed = relsg_last_error(std::ptr::null_mut(), 0);
            assert!(needed > 0);
        }
    }

    #[test]
    fn direction_matches_known_value() {
        unsafe {
            let mut cfg: *mut RelsgConfig = std::ptr::null_mut();
            let dir = [1.0, 0.0, 0.0];
            assert_eq!(
                relsg_config_device_rest(dir.as_ptr(), 1.0, &mut cfg),
                RelsgStatus::Ok
            );
            // beta = 0.6 along x.
            let p = [1.25, 0.75, 0.0, 0.0];
            let mut n = [0.0; 4];
            let mut b = [0.0; 4];
            assert_eq!(
                relsg_direction(cfg, p.as_ptr(), 1.0, n.as_mut_ptr(), b.as_mut_ptr()),
                RelsgStatus::Ok
            );
            assert_abs_diff_eq!(n[0], 0.75, epsilon = 1e-12);
            assert_abs_diff_eq!(n[1], 1.25, epsilon = 1e-12);
            relsg_config_free(cfg);
        }
    }

    #[test]
    fn simulate_splits_and_reports() {
        unsafe {
            let mut cfg: *mut RelsgConfig = std::ptr::null_mut();
            let dir = [0.0, 0.0, 1.0];
            assert_eq!(
                relsg_config_device_rest(dir.as_ptr(), 0.1, &mut cfg),
                RelsgStatus::Ok
            );
            let psi = [1.0, 0.0, 0.0, 0.0];
            let p = [1.25, 0.75, 0.0, 0.0];
            let mut sp: *mut RelsgSpinor = std::ptr::null_mut();
            assert_eq!(
                relsg_spinor_new(psi.as_ptr(), p.as_ptr(), 1.0, &mut sp),
                RelsgStatus::Ok
            );
            let params = RelsgSimParams {
                gradient: 0.05,
                gradient_dir: [0.0, 0.0, 1.0],
                slab_axis: [1.0, 0.0, 0.0],
                slab_min: 0.5,
                slab_max: 2.5,
                edge_width: 0.4,
                origin: [0.0; 3],
                charge: 0.0,
                coupling: 1.0,
                detector_plane: 4.0,
                x0: [0.0; 4],
                dtau: 1e-3,
                max_steps: 10_000_000,
                packet_width: 0.1,
            };
            let mut report = std::mem::zeroed::<RelsgReport>();
            assert_eq!(
                relsg_simulate(cfg, sp, &params, &mut report),
                RelsgStatus::Ok
            );
            assert_abs_diff_eq!(report.plus.weight + report.minus.weight, 1.0, epsilon = 1e-10);
            assert!(report.separation > 0.0);
            assert!(
                report.plus.deflection[2] * report.minus.deflection[2] < 0.0,
                "branches should deflect oppositely"
            );
            relsg_spinor_free(sp);
            relsg_config_free(cfg);
        }
    }
}
