//! Semiclassical (WKB-limit) Stern-Gerlach simulation.
//!
//! The incoming state is split into the +1/-1 eigenpackets of the
//! Stern-Gerlach operator. Each packet then follows a classical ray:
//!     m d^2x^a/dtau^2 = e F^a_b k^b / m  +/-  (mu / 2m) d^a |B_RF|,
//! the Lorentz force plus a branch-signed force along the gradient of the
//! rest-frame field magnitude, while the spin amplitude is transported by
//!     dphi/dtau = -(i e / 2m) F_{ab} L^{ab} phi.
//! Along each ray the scalar k.k -/+ mu |B_RF(x)| is conserved, which the
//! tests use to pin the integrator's fourth-order convergence.
//!
//! The field is a slab: in the device frame the magnitude is
//! (B0 + G s_g) * ramp(s_a), with s_g the coordinate along the gradient
//! direction, s_a the coordinate along the slab axis, and ramp a C^3
//! smoothstep of configurable edge width (an abrupt or merely C^1 edge
//! would spoil the integrator's order). A straight |B|(x) profile with a
//! fixed direction cannot satisfy the source-free Maxwell equations
//! exactly; the violation is computed and reported as a diagnostic rather
//! than hidden.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lorentz::{
    dot, FourVector, Generators, LorentzPair, C64, SpinorAmplitude, SpinorMatrix,
};
use crate::observable::{sg_field_tensor, sg_operator, SGConfig};
use crate::spinor::Spinor;

fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// C^3 smoothstep: 0 at t<=0, 1 at t>=1, three vanishing derivatives at
/// both ends.
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let t4 = t * t * t * t;
        t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
    }
}

fn smoothstep_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let t3 = t * t * t;
        t3 * (140.0 + t * (-420.0 + t * (420.0 - 140.0 * t)))
    }
}

/// An inhomogeneous Stern-Gerlach field slab.
#[derive(Debug, Clone)]
pub struct FieldProfile {
    /// Base field: device velocity, field direction, magnitude B0 at the
    /// reference point.
    pub config: SGConfig,
    /// Magnitude slope G along `gradient_direction` (device frame).
    pub gradient: f64,
    /// Unit 3-vector (device frame) along which the magnitude grows.
    pub gradient_direction: [f64; 3],
    /// Unit 3-vector (device frame): the beam/slab axis.
    pub slab_axis: [f64; 3],
    /// Slab extent [s0, s1] along the slab axis (device frame), measured
    /// from the reference point.
    pub slab_range: [f64; 2],
    /// Width of the smooth ramp at each slab edge.
    pub edge_width: f64,
    /// Device-frame reference point where the magnitude equals B0.
    pub origin: [f64; 3],
    /// Lorentz-force charge e.
    pub charge: f64,
    /// Magnetic-moment coupling mu in the gradient force (defaults to the
    /// charge).
    pub coupling: f64,
    /// Sign toggle on the gradient force. +1 (the default) makes the +
    /// branch accelerate toward weaker field and conserves k.k - mu|B_RF|
    /// on that branch; -1 selects the opposite convention.
    pub gradient_sign: f64,
}

impl FieldProfile {
    pub fn new(config: SGConfig, gradient: f64, gradient_direction: [f64; 3]) -> Result<Self> {
        let n = norm3(&gradient_direction);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NonUnitAxis(n));
        }
        Ok(FieldProfile {
            config,
            gradient,
            gradient_direction,
            slab_axis: [0.0, 0.0, 1.0],
            slab_range: [0.0, 1.0],
            edge_width: 0.1,
            origin: [0.0; 3],
            charge: 1.0,
            coupling: 1.0,
            gradient_sign: 1.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = norm3(&self.slab_axis);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NonUnitAxis(n));
        }
        if self.slab_range[1] <= self.slab_range[0] {
            return Err(Error::InvalidConfig(format!(
                "slab range [{}, {}] is empty",
                self.slab_range[0], self.slab_range[1]
            )));
        }
        if self.edge_width <= 0.0
            || 2.0 * self.edge_width > self.slab_range[1] - self.slab_range[0]
        {
            return Err(Error::InvalidConfig(format!(
                "edge width {} does not fit in the slab",
                self.edge_width
            )));
        }
        Ok(())
    }

    /// Precomputes the frame transformation and field-tensor templates used
    /// in the integrator inner loop.
    pub fn context(&self) -> ProfileContext {
        let to_dev = LorentzPair::standard_boost(&self.config.device_velocity, 1.0)
            .expect("validated device velocity")
            .inverse();
        let unit = SGConfig {
            field_magnitude: 1.0,
            ..self.config
        };
        let f_unit = sg_field_tensor(&unit).0;
        let gens = Generators::standard();
        let mut fl_unit = SpinorMatrix::zeros();
        for a in 0..4 {
            for b in 0..4 {
                if f_unit[(a, b)] != 0.0 {
                    fl_unit += gens.upper(a, b) * c(f_unit[(a, b)], 0.0);
                }
            }
        }
        let b0 = to_dev.apply(&self.config.field_direction);
        let s = b0.spatial();
        let n = norm3(&s);
        ProfileContext {
            to_dev,
            f_unit,
            fl_unit,
            b_dev: [s[0] / n, s[1] / n, s[2] / n],
        }
    }

    /// Lab -> device-frame transformation for the profile geometry.
    fn to_device(&self) -> LorentzPair {
        self.context().to_dev
    }

    /// Device-frame spatial coordinates of a lab event.
    pub fn device_coords(&self, x: &FourVector) -> [f64; 3] {
        self.to_device().apply(x).spatial()
    }

    /// Slab-axis coordinate (device frame) of a lab event, relative to the
    /// reference point.
    pub fn axis_coordinate(&self, x: &FourVector) -> f64 {
        let s = self.device_coords(x);
        dot3(&sub3(&s, &self.origin), &self.slab_axis)
    }

    /// Device-frame field magnitude at a lab event.
    pub fn magnitude(&self, x: &FourVector) -> f64 {
        self.magnitude_with(&self.context(), x)
    }

    /// Magnitude and its device-frame spatial gradient at device-frame
    /// spatial coordinates.
    fn magnitude_and_gradient_device(&self, s: &[f64; 3]) -> (f64, [f64; 3]) {
        let rel = sub3(s, &self.origin);
        let sg = dot3(&rel, &self.gradient_direction);
        let sa = dot3(&rel, &self.slab_axis);
        let [s0, s1] = self.slab_range;
        let w = self.edge_width;

        let linear = self.config.field_magnitude + self.gradient * sg;
        let (ramp, dramp) = if sa <= s0 || sa >= s1 {
            (0.0, 0.0)
        } else if sa < s0 + w {
            let t = (sa - s0) / w;
            (smoothstep(t), smoothstep_deriv(t) / w)
        } else if sa > s1 - w {
            let t = (s1 - sa) / w;
            (smoothstep(t), -smoothstep_deriv(t) / w)
        } else {
            (1.0, 0.0)
        };

        if linear <= 0.0 {
            return (0.0, [0.0; 3]);
        }
        let m = linear * ramp;
        let mut grad = [0.0; 3];
        for i in 0..3 {
            grad[i] =
                self.gradient * self.gradient_direction[i] * ramp + linear * dramp * self.slab_axis[i];
        }
        (m, grad)
    }

    /// Covariant components d_a |B|(x) of the magnitude gradient in lab
    /// coordinates (time component nonzero only for a moving device).
    pub fn magnitude_gradient_lower(&self, ctx: &ProfileContext, x: &FourVector) -> [f64; 4] {
        let s = ctx.to_dev.apply(x).spatial();
        let (_, grad_dev) = self.magnitude_and_gradient_device(&s);
        // Chain rule: d/dx^a_lab = (Lambda_dev)^b_a d/dx^b_dev where
        // x_dev = Lambda_dev x.
        let mut out = [0.0; 4];
        for (a, o) in out.iter_mut().enumerate() {
            for (i, g) in grad_dev.iter().enumerate() {
                *o += ctx.to_dev.vector[(i + 1, a)] * g;
            }
        }
        out
    }

    /// Local field tensor F_{ab}(x): the homogeneous-configuration tensor
    /// scaled by the local magnitude.
    pub fn field_tensor_at(&self, x: &FourVector) -> nalgebra::Matrix4<f64> {
        let ctx = self.context();
        ctx.f_unit * self.magnitude_with(&ctx, x)
    }

    /// Device-frame field magnitude at a lab event, using a precomputed
    /// context.
    pub fn magnitude_with(&self, ctx: &ProfileContext, x: &FourVector) -> f64 {
        let (m, _) = self.magnitude_and_gradient_device(&ctx.to_dev.apply(x).spatial());
        m
    }

    /// Kinematic enhancement of the rest-frame magnitude for 4-velocity u:
    /// |B_RF| = |B_dev| * sqrt((v.u)^2 - (b.u)^2).
    pub fn kinematic_factor(&self, u: &FourVector) -> f64 {
        let vu = dot(&self.config.device_velocity, u);
        let bu = dot(&self.config.field_direction, u);
        (vu * vu - bu * bu).max(0.0).sqrt()
    }

    /// |B_RF| at a lab event for a (frozen) 4-velocity u.
    pub fn b_rf_magnitude(&self, x: &FourVector, u: &FourVector) -> f64 {
        self.b_rf_magnitude_with(&self.context(), x, u)
    }

    /// As `b_rf_magnitude`, with a precomputed context.
    pub fn b_rf_magnitude_with(&self, ctx: &ProfileContext, x: &FourVector, u: &FourVector) -> f64 {
        self.magnitude_with(ctx, x) * self.kinematic_factor(u)
    }

    /// Slab-axis coordinate with a precomputed context.
    pub fn axis_coordinate_with(&self, ctx: &ProfileContext, x: &FourVector) -> f64 {
        let s = ctx.to_dev.apply(x).spatial();
        dot3(&sub3(&s, &self.origin), &self.slab_axis)
    }

    /// The local violation of the source-free Maxwell equations,
    /// |div B| in the device frame (a fixed-direction magnitude profile
    /// cannot be divergence-free).
    pub fn maxwell_violation(&self, x: &FourVector) -> f64 {
        self.maxwell_violation_with(&self.context(), x)
    }

    /// As `maxwell_violation`, with a precomputed context.
    pub fn maxwell_violation_with(&self, ctx: &ProfileContext, x: &FourVector) -> f64 {
        let s = ctx.to_dev.apply(x).spatial();
        let (_, grad) = self.magnitude_and_gradient_device(&s);
        dot3(&grad, &ctx.b_dev).abs()
    }
}

/// Cached frame and tensor data shared across integrator steps.
#[derive(Debug, Clone)]
pub struct ProfileContext {
    to_dev: LorentzPair,
    /// Field tensor for unit device-frame magnitude.
    f_unit: nalgebra::Matrix4<f64>,
    /// F_{ab} L^{ab} for unit device-frame magnitude.
    fl_unit: SpinorMatrix,
    /// Device-frame spatial field direction.
    b_dev: [f64; 3],
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// One branch of a split packet: a classical ray carrying a spin
/// amplitude and a fixed complex weight.
#[derive(Debug, Clone)]
pub struct WKBPacket {
    /// +1.0 or -1.0: which eigenvalue branch this packet follows.
    pub branch: f64,
    pub position: FourVector,
    pub wavevector: FourVector,
    pub amplitude: SpinorAmplitude,
    pub weight: C64,
    pub mass: f64,
    /// Initial 4-velocity, frozen at the split; the kinematic factor in
    /// |B_RF| is evaluated with it so the gradient force derives from a
    /// static potential along the ray.
    pub initial_velocity: FourVector,
    pub tau: f64,
}

impl WKBPacket {
    pub fn velocity(&self) -> FourVector {
        self.wavevector.scale(1.0 / self.mass)
    }

    /// The conserved ray scalar k.k - branch * mu * |B_RF(x)| (for the
    /// default gradient sign).
    pub fn conserved_scalar(&self, profile: &FieldProfile) -> f64 {
        self.conserved_scalar_with(profile, &profile.context())
    }

    /// As `conserved_scalar`, with a precomputed context.
    pub fn conserved_scalar_with(&self, profile: &FieldProfile, ctx: &ProfileContext) -> f64 {
        self.wavevector.norm_sqr()
            - self.branch
                * profile.gradient_sign
                * profile.coupling
                * profile.b_rf_magnitude_with(ctx, &self.position, &self.initial_velocity)
    }
}

/// Splits a state into the +/- eigenpackets of the Stern-Gerlach operator,
/// with weights a = <psi+|psi>, b = <psi-|psi> in the invariant product.
pub fn split(state: &Spinor, cfg: &SGConfig, x0: &FourVector) -> Result<(WKBPacket, WKBPacket)> {
    let state = state.normalized()?;
    let obs = sg_operator(cfg, &state.p, state.mass)?;
    let (plus, minus) = obs.eigenstates()?;
    let a = plus.inner_product(&state)?;
    let b = minus.inner_product(&state)?;
    let u0 = state.velocity();
    let make = |branch: f64, eig: &Spinor, w: C64| WKBPacket {
        branch,
        position: *x0,
        wavevector: state.p,
        amplitude: eig.psi,
        weight: w,
        mass: state.mass,
        initial_velocity: u0,
        tau: 0.0,
    };
    Ok((make(1.0, &plus, a), make(-1.0, &minus, b)))
}

/// Right-hand side of the coupled ray + spin-transport system.
/// State: (x, k, phi); returns (dx/dtau, dk/dtau, dphi/dtau).
fn derivatives(
    pkt_branch: f64,
    mass: f64,
    kappa: f64,
    profile: &FieldProfile,
    ctx: &ProfileContext,
    x: &FourVector,
    k: &FourVector,
    phi: &SpinorAmplitude,
) -> (FourVector, FourVector, SpinorAmplitude) {
    let dx = k.scale(1.0 / mass);

    let s_dev = ctx.to_dev.apply(x).spatial();
    let (mag, grad_dev) = profile.magnitude_and_gradient_device(&s_dev);

    // Lorentz force dk^a/dtau = (e/m) F^a_b k^b = (e/m) eta^{ac} F_{cb} k^b.
    let mut dk = [0.0; 4];
    for (a, d) in dk.iter_mut().enumerate() {
        let sign = crate::lorentz::eta(a);
        let mut s = 0.0;
        for b in 0..4 {
            s += ctx.f_unit[(a, b)] * k.0[b];
        }
        *d = profile.charge / mass * sign * s * mag;
    }

    // Gradient force +/- (mu/2m) d^a |B_RF|, with the kinematic factor
    // kappa frozen at the initial velocity. Chain rule maps the
    // device-frame spatial gradient to lab covariant components.
    let pref = pkt_branch * profile.gradient_sign * profile.coupling / (2.0 * mass) * kappa;
    for (a, d) in dk.iter_mut().enumerate() {
        let mut g = 0.0;
        for (i, gd) in grad_dev.iter().enumerate() {
            g += ctx.to_dev.vector[(i + 1, a)] * gd;
        }
        *d += pref * crate::lorentz::eta(a) * g;
    }

    // Spin transport dphi/dtau = -(i e / 2m) F_{ab} L^{ab} phi.
    let dphi = ctx.fl_unit * phi * c(0.0, -profile.charge * mag / (2.0 * mass));

    (dx, FourVector(dk), dphi)
}

/// One fixed-step RK4 update of position, wavevector, and spin amplitude.
pub fn step(pkt: &WKBPacket, profile: &FieldProfile, dtau: f64) -> Result<WKBPacket> {
    step_with(pkt, profile, &profile.context(), dtau)
}

/// As `step`, with a precomputed context (use this in integration loops).
pub fn step_with(
    pkt: &WKBPacket,
    profile: &FieldProfile,
    ctx: &ProfileContext,
    dtau: f64,
) -> Result<WKBPacket> {
    if dtau <= 0.0 {
        return Err(Error::InvalidConfig(format!("dtau must be positive, got {dtau}")));
    }
    let kappa = profile.kinematic_factor(&pkt.initial_velocity);
    let rhs = |x: &FourVector, k: &FourVector, phi: &SpinorAmplitude| {
        derivatives(pkt.branch, pkt.mass, kappa, profile, ctx, x, k, phi)
    };

    let (dx1, dk1, dp1) = rhs(&pkt.position, &pkt.wavevector, &pkt.amplitude);
    let h2 = dtau / 2.0;
    let (dx2, dk2, dp2) = rhs(
        &pkt.position.add(&dx1.scale(h2)),
        &pkt.wavevector.add(&dk1.scale(h2)),
        &(pkt.amplitude + dp1 * c(h2, 0.0)),
    );
    let (dx3, dk3, dp3) = rhs(
        &pkt.position.add(&dx2.scale(h2)),
        &pkt.wavevector.add(&dk2.scale(h2)),
        &(pkt.amplitude + dp2 * c(h2, 0.0)),
    );
    let (dx4, dk4, dp4) = rhs(
        &pkt.position.add(&dx3.scale(dtau)),
        &pkt.wavevector.add(&dk3.scale(dtau)),
        &(pkt.amplitude + dp3 * c(dtau, 0.0)),
    );

    let sixth = dtau / 6.0;
    let x = pkt
        .position
        .add(&dx1.add(&dx2.scale(2.0)).add(&dx3.scale(2.0)).add(&dx4).scale(sixth));
    let k = pkt
        .wavevector
        .add(&dk1.add(&dk2.scale(2.0)).add(&dk3.scale(2.0)).add(&dk4).scale(sixth));
    let phi = pkt.amplitude
        + (dp1 + dp2 * c(2.0, 0.0) + dp3 * c(2.0, 0.0) + dp4) * c(sixth, 0.0);

    let tau = pkt.tau + dtau;
    if !k.as_vector4().iter().all(|v| v.is_finite())
        || !x.as_vector4().iter().all(|v| v.is_finite())
        || k.t().abs() > 1e12
    {
        return Err(Error::IntegrationError(tau));
    }
    Ok(WKBPacket {
        position: x,
        wavevector: k,
        amplitude: phi,
        tau,
        ..pkt.clone()
    })
}

/// Integration controls for `run_measurement`.
#[derive(Debug, Clone)]
pub struct RunParams {
    pub dtau: f64,
    pub max_steps: usize,
    /// Transverse packet width used for the `resolved` flag.
    pub packet_width: f64,
    /// Keep every n-th step in the trajectory sample (1 = all).
    pub sample_every: usize,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            dtau: 1e-3,
            max_steps: 10_000_000,
            packet_width: 0.1,
            sample_every: 10,
        }
    }
}

/// One sampled trajectory point, in lab coordinates.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub branch: f64,
    pub tau: f64,
    pub x: [f64; 4],
    pub k: [f64; 4],
    pub b_mag: f64,
}

/// Outcome of one branch at the detector plane.
#[derive(Debug, Clone)]
pub struct BranchOutcome {
    pub branch: f64,
    pub weight: f64,
    /// Device-frame transverse position at the plane (component along the
    /// slab axis removed).
    pub arrival_transverse: [f64; 3],
    /// Arrival transverse position minus the free straight-line arrival.
    pub deflection: [f64; 3],
    pub arrival_tau: f64,
    pub final_wavevector: FourVector,
    pub final_amplitude: SpinorAmplitude,
    /// Peak drift of the conserved ray scalar over the run.
    pub conservation_drift: f64,
    pub samples: Vec<TrajectorySample>,
}

/// Full measurement report for both branches.
#[derive(Debug, Clone)]
pub struct MeasurementReport {
    pub plus: BranchOutcome,
    pub minus: BranchOutcome,
    /// Device-frame distance between the two arrival spots.
    pub separation: f64,
    pub resolved: bool,
    /// Largest device-frame |div B| seen along either trajectory.
    pub maxwell_violation: f64,
}

/// Integrates one packet to the detector plane (a device-frame slab-axis
/// coordinate), interpolating the crossing linearly between steps.
pub fn integrate_to_plane(
    pkt: &WKBPacket,
    profile: &FieldProfile,
    plane: f64,
    params: &RunParams,
) -> Result<(BranchOutcome, f64)> {
    profile.validate()?;
    let ctx = profile.context();
    let mut cur = pkt.clone();
    let mut samples = Vec::new();
    let c0 = cur.conserved_scalar_with(profile, &ctx);
    let mut drift: f64 = 0.0;
    let mut maxwell: f64 = 0.0;

    let record = |p: &WKBPacket, out: &mut Vec<TrajectorySample>| {
        out.push(TrajectorySample {
            branch: p.branch,
            tau: p.tau,
            x: p.position.0,
            k: p.wavevector.0,
            b_mag: profile.b_rf_magnitude_with(&ctx, &p.position, &p.initial_velocity),
        });
    };
    record(&cur, &mut samples);

    let free_arrival = free_transverse_arrival(pkt, profile, plane)?;

    for step_idx in 0..params.max_steps {
        let prev = cur.clone();
        cur = step_with(&cur, profile, &ctx, params.dtau)?;
        drift = drift.max((cur.conserved_scalar_with(profile, &ctx) - c0).abs());
        maxwell = maxwell.max(profile.maxwell_violation_with(&ctx, &cur.position));
        if step_idx % params.sample_every == 0 {
            record(&cur, &mut samples);
        }

        let s_prev = profile.axis_coordinate_with(&ctx, &prev.position);
        let s_cur = profile.axis_coordinate_with(&ctx, &cur.position);
        if s_prev < plane && s_cur >= plane {
            let f = (plane - s_prev) / (s_cur - s_prev);
            let xi = prev.position.add(&cur.position.sub(&prev.position).scale(f));
            let ki = prev.wavevector.add(&cur.wavevector.sub(&prev.wavevector).scale(f));
            let taui = prev.tau + f * (cur.tau - prev.tau);
            let dev = profile.device_coords(&xi);
            let transverse = remove_axis(&sub3(&dev, &profile.origin), &profile.slab_axis);
            let deflection = sub3(&transverse, &free_arrival);
            let final_pkt = WKBPacket {
                position: xi,
                wavevector: ki,
                tau: taui,
                ..cur.clone()
            };
            record(&final_pkt, &mut samples);
            return Ok((
                BranchOutcome {
                    branch: pkt.branch,
                    weight: pkt.weight.norm_sqr(),
                    arrival_transverse: transverse,
                    deflection,
                    arrival_tau: taui,
                    final_wavevector: ki,
                    final_amplitude: final_pkt.amplitude,
                    conservation_drift: drift,
                    samples,
                },
                maxwell,
            ));
        }
    }
    Err(Error::DetectorNotReached(params.max_steps))
}

/// Transverse device-frame coordinates where a free (field-off) packet
/// would cross the plane.
fn free_transverse_arrival(
    pkt: &WKBPacket,
    profile: &FieldProfile,
    plane: f64,
) -> Result<[f64; 3]> {
    let to_dev = profile.to_device();
    let x_dev = to_dev.apply(&pkt.position);
    let k_dev = to_dev.apply(&pkt.wavevector);
    let s0 = dot3(&sub3(&x_dev.spatial(), &profile.origin), &profile.slab_axis);
    let va = dot3(&k_dev.spatial(), &profile.slab_axis);
    if va <= 0.0 {
        return Err(Error::InvalidConfig(
            "packet does not move toward the detector plane".into(),
        ));
    }
    let lam = (plane - s0) / va;
    let arrive = [
        x_dev.spatial()[0] + lam * k_dev.spatial()[0],
        x_dev.spatial()[1] + lam * k_dev.spatial()[1],
        x_dev.spatial()[2] + lam * k_dev.spatial()[2],
    ];
    Ok(remove_axis(&sub3(&arrive, &profile.origin), &profile.slab_axis))
}

fn remove_axis(v: &[f64; 3], axis: &[f64; 3]) -> [f64; 3] {
    let along = dot3(v, axis);
    [
        v[0] - along * axis[0],
        v[1] - along * axis[1],
        v[2] - along * axis[2],
    ]
}

/// Splits the state and carries both branches to the detector plane.
pub fn run_measurement(
    state: &Spinor,
    profile: &FieldProfile,
    x0: &FourVector,
    plane: f64,
    params: &RunParams,
) -> Result<MeasurementReport> {
    profile.validate()?;
    if plane <= profile.slab_range[1] {
        return Err(Error::InvalidConfig(format!(
            "detector plane {plane} must lie beyond the slab exit {}",
            profile.slab_range[1]
        )));
    }
    let (pk_plus, pk_minus) = split(state, &profile.config, x0)?;
    let (plus, mx1) = integrate_to_plane(&pk_plus, profile, plane, params)?;
    let (minus, mx2) = integrate_to_plane(&pk_minus, profile, plane, params)?;
    let sep = {
        let d = sub3(&plus.arrival_transverse, &minus.arrival_transverse);
        norm3(&d)
    };
    Ok(MeasurementReport {
        separation: sep,
        resolved: sep > params.packet_width,
        maxwell_violation: mx1.max(mx2),
        plus,
        minus,
    })
}

/// Writes trajectory samples as CSV with the stable header.
pub fn write_trajectory_csv<W: std::io::Write>(
    samples: &[TrajectorySample],
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "branch,tau,t,x,y,z,kt,kx,ky,kz,Bmag")?;
    for s in samples {
        writeln!(
            out,
            "{},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}",
            if s.branch > 0.0 { "+1" } else { "-1" },
            s.tau,
            s.x[0],
            s.x[1],
            s.x[2],
            s.x[3],
            s.k[0],
            s.k[1],
            s.k[2],
            s.k[3],
            s.b_mag
        )?;
    }
    Ok(())
}

/// Ray-bundle estimate of the wavevector divergence d_a k^a around a
/// packet: integrates a center ray plus six spatially offset rays for
/// `steps` steps and returns the final central-difference estimate of the
/// spatial divergence (the profile is static in the device frame, so the
/// time derivative of k^0 is dropped). Diagnostic only.
pub fn bundle_divergence(
    pkt: &WKBPacket,
    profile: &FieldProfile,
    delta: f64,
    dtau: f64,
    steps: usize,
) -> Result<f64> {
    let mut rays = Vec::with_capacity(7);
    rays.push(pkt.clone());
    for i in 0..3 {
        for sign in [1.0, -1.0] {
            let mut offset = pkt.clone();
            offset.position.0[i + 1] += sign * delta;
            rays.push(offset);
        }
    }
    let ctx = profile.context();
    for _ in 0..steps {
        for ray in rays.iter_mut() {
            *ray = step_with(ray, profile, &ctx, dtau)?;
        }
    }
    let mut div = 0.0;
    for i in 0..3 {
        let kp = rays[1 + 2 * i].wavevector.0[i + 1];
        let km = rays[2 + 2 * i].wavevector.0[i + 1];
        // Spatial divergence with raised index: d_i k^i enters d_a k^a
        // directly in these coordinates.
        div += (kp - km) / (2.0 * delta);
    }
    Ok(div)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::pauli;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector2;

    fn c1(re: f64) -> C64 {
        c(re, 0.0)
    }

    /// Device at rest, field along z with gradient along z, slab along x.
    /// Weak enough that a beam with |k| ~ 1 passes the magnetic barrier
    /// instead of reflecting off the entrance ramp.
    fn standard_profile() -> FieldProfile {
        let cfg = SGConfig::device_rest([0.0, 0.0, 1.0], 0.1).unwrap();
        let mut p = FieldProfile::new(cfg, 0.05, [0.0, 0.0, 1.0]).unwrap();
        p.slab_axis = [1.0, 0.0, 0.0];
        p.slab_range = [0.5, 2.5];
        p.edge_width = 0.4;
        p.charge = 0.0;
        p.coupling = 1.0;
        p
    }

    /// Strong-field variant: packets reflect, which is fine for testing
    /// conservation along the ray.
    fn strong_profile() -> FieldProfile {
        let mut p = standard_profile();
        p.config.field_magnitude = 1.0;
        p.gradient = 0.5;
        p
    }

    fn moving_state(px: f64) -> Spinor {
        let m = 1.0;
        let p = FourVector::new((m * m + px * px).sqrt(), px, 0.0, 0.0);
        Spinor::new(Vector2::new(c1(1.0), c1(0.0)), p, m)
            .unwrap()
            .normalized()
            .unwrap()
    }

    #[test]
    fn profile_shape() {
        let p = strong_profile();
        // Outside the slab the field vanishes.
        assert_eq!(p.magnitude(&FourVector::new(0.0, 0.0, 0.0, 0.0)), 0.0);
        assert_eq!(p.magnitude(&FourVector::new(0.0, 3.0, 0.0, 0.0)), 0.0);
        // In the interior it is B0 + G z.
        let x = FourVector::new(0.0, 1.5, 0.0, 0.2);
        assert_abs_diff_eq!(p.magnitude(&x), 1.0 + 0.5 * 0.2, epsilon = 1e-12);
        // Ramp is continuous and monotone at the entry edge.
        let a = p.magnitude(&FourVector::new(0.0, 0.55, 0.0, 0.0));
        let b = p.magnitude(&FourVector::new(0.0, 0.75, 0.0, 0.0));
        assert!(0.0 < a && a < b && b < 1.0);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let p = standard_profile();
        let h = 1e-6;
        for probe in [
            FourVector::new(0.3, 1.5, 0.1, 0.2),
            FourVector::new(0.0, 0.7, -0.3, 0.5),
            FourVector::new(1.0, 2.3, 0.2, -0.4),
        ] {
            let grad = p.magnitude_gradient_lower(&p.context(), &probe);
            for a in 0..4 {
                let mut xp = probe;
                let mut xm = probe;
                xp.0[a] += h;
                xm.0[a] -= h;
                let fd = (p.magnitude(&xp) - p.magnitude(&xm)) / (2.0 * h);
                assert_abs_diff_eq!(grad[a], fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn gradient_transforms_with_device_frame() {
        // The same slab described from a boosted frame must give the
        // magnitude at mapped events.
        let p = standard_profile();
        let t = LorentzPair::boost([0.0, 1.0, 0.0], 0.7).unwrap();
        let mut q = p.clone();
        q.config = p.config.transform(&t).unwrap();
        let x = FourVector::new(0.4, 1.5, 0.2, 0.3);
        assert_abs_diff_eq!(q.magnitude(&t.apply(&x)), p.magnitude(&x), epsilon = 1e-10);
    }

    #[test]
    fn free_packet_moves_straight() {
        let mut p = standard_profile();
        p.config.field_magnitude = 1.0;
        // Probe far outside the slab: field is zero there.
        let state = moving_state(0.5);
        let (pk, _) = split(&state, &p.config, &FourVector::new(0.0, -10.0, 0.0, 0.0)).unwrap();
        let stepped = step(&pk, &p, 1e-3).unwrap();
        let expect = pk.position.add(&pk.velocity().scale(1e-3));
        for a in 0..4 {
            assert_abs_diff_eq!(stepped.position.0[a], expect.0[a], epsilon = 1e-12);
            assert_abs_diff_eq!(stepped.wavevector.0[a], pk.wavevector.0[a], epsilon = 1e-12);
        }
    }

    #[test]
    fn cyclotron_motion_matches_analytic_frequency() {
        // Homogeneous B along z inside a wide slab, charged packet moving
        // along x: circular motion with omega = e B / (gamma m), i.e.
        // k rotates at e B / m per unit proper time.
        let cfg = SGConfig::device_rest([0.0, 0.0, 1.0], 2.0).unwrap();
        let mut p = FieldProfile::new(cfg, 0.0, [0.0, 0.0, 1.0]).unwrap();
        p.slab_axis = [1.0, 0.0, 0.0];
        p.slab_range = [-100.0, 100.0];
        p.edge_width = 1.0;
        p.charge = 1.0;
        p.coupling = 0.0;

        let state = moving_state(0.6);
        let (pk, _) = split(&state, &p.config, &FourVector::ZERO).unwrap();
        let ctx = p.context();
        let mut cur = pk;
        let dtau = 1e-3;
        let steps = 500;
        for _ in 0..steps {
            cur = step_with(&cur, &p, &ctx, dtau).unwrap();
        }
        let tau = dtau * steps as f64;
        let omega = p.charge * 2.0 / 1.0; // e B / m per proper time
        // Transverse wavevector rotates rigidly.
        let k0 = 0.6;
        let expect_kx = k0 * (omega * tau).cos();
        let expect_ky = -k0 * (omega * tau).sin() * omega.signum();
        // Sign of rotation checked loosely; magnitude pinned tightly.
        let kx = cur.wavevector.0[1];
        let ky = cur.wavevector.0[2];
        assert_abs_diff_eq!(
            (kx * kx + ky * ky).sqrt(),
            k0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(kx, expect_kx, epsilon = 1e-8);
        assert_abs_diff_eq!(ky.abs(), expect_ky.abs(), epsilon = 1e-8);
        // k.k conserved.
        assert_abs_diff_eq!(cur.wavevector.norm_sqr(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn split_weights() {
        let cfg = standard_profile().config;
        let obs = sg_operator(&cfg, &moving_state(0.5).p, 1.0).unwrap();
        let (plus, minus) = obs.eigenstates().unwrap();

        let (a, b) = {
            let (pk_p, pk_m) = split(&plus, &cfg, &FourVector::ZERO).unwrap();
            (pk_p.weight, pk_m.weight)
        };
        assert!((a.norm() - 1.0).abs() < 1e-12 && b.norm() < 1e-12);

        // Equal superposition.
        let mix = Spinor::new(plus.psi + minus.psi, plus.p, 1.0)
            .unwrap()
            .normalized()
            .unwrap();
        let (pk_p, pk_m) = split(&mix, &cfg, &FourVector::ZERO).unwrap();
        assert_abs_diff_eq!(pk_p.weight.norm_sqr(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pk_m.weight.norm_sqr(), 0.5, epsilon = 1e-12);

        // Random state: weights reconstruct the state.
        let psi = Spinor::new(
            plus.psi * c(0.3, 0.4) + minus.psi * c(-0.7, 0.2),
            plus.p,
            1.0,
        )
        .unwrap()
        .normalized()
        .unwrap();
        let (pk_p, pk_m) = split(&psi, &cfg, &FourVector::ZERO).unwrap();
        assert_abs_diff_eq!(
            pk_p.weight.norm_sqr() + pk_m.weight.norm_sqr(),
            1.0,
            epsilon = 1e-12
        );
        let resum = pk_p.amplitude * pk_p.weight + pk_m.amplitude * pk_m.weight;
        assert!((resum - psi.psi).norm() < 1e-12);
    }

    #[test]
    fn conserved_scalar_and_rk4_order() {
        let p = strong_profile();
        let state = moving_state(0.8);
        let x0 = FourVector::new(0.0, 0.0, 0.0, 0.1);
        let (pk, _) = split(&state, &p.config, &x0).unwrap();

        let ctx = p.context();
        let drift_for = |dtau: f64| -> f64 {
            let mut cur = pk.clone();
            let c0 = cur.conserved_scalar_with(&p, &ctx);
            let mut worst: f64 = 0.0;
            let steps = (2.0 / dtau) as usize;
            for _ in 0..steps {
                cur = step_with(&cur, &p, &ctx, dtau).unwrap();
                worst = worst.max((cur.conserved_scalar_with(&p, &ctx) - c0).abs());
            }
            worst
        };

        let d1 = drift_for(1e-3);
        assert!(d1 < 1e-8, "drift {d1} exceeds 1e-8 over ~2 units of tau");
        let d2 = drift_for(5e-4);
        let ratio = d1 / d2;
        assert!(
            (ratio - 16.0).abs() <= 0.2 * 16.0,
            "RK4 convergence ratio {ratio} not within 16 +/- 20%"
        );
    }

    #[test]
    fn branches_deflect_oppositely() {
        // A weak field keeps the two branches in the linear-response
        // regime where their deflections are antisymmetric to 1e-8. The
        // base magnitude matters most: the slab entrance acts as a
        // potential barrier for one branch and a well for the other, so
        // transit times (and with them the deflection lever arm) differ at
        // first order in B0.
        let mut p = standard_profile();
        p.config.field_magnitude = 1e-6;
        p.gradient = 1e-4;
        // Equal superposition of the two eigenpackets.
        let (e_plus, e_minus) = sg_operator(&p.config, &moving_state(0.8).p, 1.0)
            .unwrap()
            .eigenstates()
            .unwrap();
        let state = Spinor::new(e_plus.psi + e_minus.psi, e_plus.p, 1.0)
            .unwrap()
            .normalized()
            .unwrap();
        let x0 = FourVector::new(0.0, 0.0, 0.0, 0.0);
        let params = RunParams {
            dtau: 1e-3,
            packet_width: 1e-5,
            ..Default::default()
        };
        let report = run_measurement(&state, &p, &x0, 4.0, &params).unwrap();

        // Deflections opposite and equal in magnitude (uncharged packet).
        for i in 0..3 {
            assert_abs_diff_eq!(
                report.plus.deflection[i],
                -report.minus.deflection[i],
                epsilon = 1e-8
            );
        }
        assert!(report.separation > 0.0);
        // + branch moves toward weaker field: deflection dotted with the
        // gradient direction (z) is negative.
        assert!(report.plus.deflection[2] < 0.0);
        assert!(report.minus.deflection[2] > 0.0);
        // Weights are transported, not re-measured.
        assert_abs_diff_eq!(report.plus.weight, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(report.minus.weight, 0.5, epsilon = 1e-10);
        assert!(report.resolved);
        assert!(report.maxwell_violation > 0.0);
    }

    #[test]
    fn zero_gradient_means_zero_separation() {
        let mut p = standard_profile();
        p.gradient = 0.0;
        let state = moving_state(0.8);
        let report = run_measurement(
            &state,
            &p,
            &FourVector::ZERO,
            4.0,
            &RunParams::default(),
        )
        .unwrap();
        assert!(report.separation < 1e-10);
        assert!(!report.resolved);
    }

    #[test]
    fn pure_eigenstate_weights_transported() {
        let p = standard_profile();
        let obs = sg_operator(&p.config, &moving_state(0.8).p, 1.0).unwrap();
        let (plus, minus) = obs.eigenstates().unwrap();
        let psi = Spinor::new(
            plus.psi * c1(0.5) + minus.psi * c1(0.75f64.sqrt()),
            plus.p,
            1.0,
        )
        .unwrap();
        let report = run_measurement(
            &psi,
            &p,
            &FourVector::ZERO,
            4.0,
            &RunParams::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(report.plus.weight, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(report.minus.weight, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn spin_constant_without_field() {
        let mut p = standard_profile();
        p.config.field_magnitude = 0.0;
        p.gradient = 0.0;
        p.charge = 1.0;
        let state = moving_state(0.5);
        let (pk, _) = split_with_axis_fallback(&state, &p, &FourVector::ZERO);
        let ctx = p.context();
        let initial = pk.amplitude;
        let mut cur = pk;
        for _ in 0..100 {
            cur = step_with(&cur, &p, &ctx, 1e-2).unwrap();
        }
        assert!((cur.amplitude - initial).norm() < 1e-14);
    }

    /// split() needs a nonzero field to pick the eigenbasis; for field-off
    /// tests build the packet directly.
    fn split_with_axis_fallback(
        state: &Spinor,
        _profile: &FieldProfile,
        x0: &FourVector,
    ) -> (WKBPacket, WKBPacket) {
        let mk = |branch: f64| WKBPacket {
            branch,
            position: *x0,
            wavevector: state.p,
            amplitude: state.psi,
            weight: c1(std::f64::consts::FRAC_1_SQRT_2),
            mass: state.mass,
            initial_velocity: state.velocity(),
            tau: 0.0,
        };
        (mk(1.0), mk(-1.0))
    }

    #[test]
    fn larmor_precession_rate() {
        // Comoving packet at rest in a homogeneous z-field: <sigma_x>
        // precesses at e B / m.
        let b0 = 0.8;
        let cfg = SGConfig::device_rest([0.0, 0.0, 1.0], b0).unwrap();
        let mut p = FieldProfile::new(cfg, 0.0, [0.0, 0.0, 1.0]).unwrap();
        p.slab_axis = [0.0, 0.0, 1.0];
        p.slab_range = [-50.0, 50.0];
        p.edge_width = 1.0;
        p.charge = 1.0;
        p.coupling = 0.0;

        // sigma_x eigenstate at rest; keep it away from the detector logic
        // and just step directly. The packet sits at rest so the gradient
        // force is irrelevant.
        let psi = Spinor::new(
            Vector2::new(c1(1.0), c1(1.0)),
            FourVector::REST,
            1.0,
        )
        .unwrap()
        .normalized()
        .unwrap();
        let pk = WKBPacket {
            branch: 1.0,
            position: FourVector::ZERO,
            wavevector: FourVector::REST,
            amplitude: psi.psi,
            weight: c1(1.0),
            mass: 1.0,
            initial_velocity: FourVector::REST,
            tau: 0.0,
        };
        let ctx = p.context();
        let dtau = 1e-3;
        let steps = 700;
        let mut cur = pk;
        for _ in 0..steps {
            cur = step_with(&cur, &p, &ctx, dtau).unwrap();
        }
        let tau = dtau * steps as f64;
        let sx = (cur.amplitude.adjoint() * pauli(1) * cur.amplitude)[(0, 0)].re
            / cur.amplitude.norm_squared();
        // Closed form: phi(tau) = exp(i e B tau sigma_z / 2m) phi(0), so
        // <sigma_x>(tau) = cos(e B tau / m).
        assert_abs_diff_eq!(sx, (b0 * tau).cos(), epsilon = 1e-9);
    }

    #[test]
    fn eigenstate_survives_short_slab() {
        // A short, weak slab: the + eigenpacket stays the + eigenstate of
        // the local operator to high fidelity.
        let cfg = SGConfig::device_rest([0.0, 0.0, 1.0], 1e-3).unwrap();
        let mut p = FieldProfile::new(cfg, 1e-4, [0.0, 0.0, 1.0]).unwrap();
        p.slab_axis = [1.0, 0.0, 0.0];
        p.slab_range = [0.1, 0.6];
        p.edge_width = 0.1;
        p.charge = 1.0;
        p.coupling = 1.0;

        let state = moving_state(1.0);
        let (pk, _) = split(&state, &p.config, &FourVector::ZERO).unwrap();
        let report_pkt = integrate_to_plane(&pk, &p, 1.0, &RunParams::default())
            .unwrap()
            .0;
        let obs = sg_operator(&p.config, &report_pkt.final_wavevector, 1.0).unwrap();
        let (plus_local, _) = obs.eigenstates().unwrap();
        let out = Spinor::new(report_pkt.final_amplitude, report_pkt.final_wavevector, 1.0)
            .unwrap()
            .normalized()
            .unwrap();
        let fid = plus_local.inner_product(&out).unwrap().norm();
        assert!(fid >= 1.0 - 1e-5, "fidelity {fid} too low");
    }

    #[test]
    fn frame_covariance_of_separation() {
        // The same experiment described from a frame boosted transverse to
        // everything gives the same device-frame separation.
        let p = standard_profile();
        let state = moving_state(0.8);
        let x0 = FourVector::ZERO;
        let params = RunParams::default();
        let base = run_measurement(&state, &p, &x0, 4.0, &params).unwrap();

        let t = LorentzPair::boost([0.0, 1.0, 0.0], 0.5).unwrap();
        let mut q = p.clone();
        q.config = p.config.transform(&t).unwrap();
        let state2 = state.transform(&t);
        let x02 = t.apply(&x0);
        let moved = run_measurement(&state2, &q, &x02, 4.0, &params).unwrap();
        assert_abs_diff_eq!(base.separation, moved.separation, epsilon = 1e-6);
    }

    #[test]
    fn csv_header_and_shape() {
        let p = standard_profile();
        let state = moving_state(0.8);
        let report =
            run_measurement(&state, &p, &FourVector::ZERO, 3.0, &RunParams::default()).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&report.plus.samples, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "branch,tau,t,x,y,z,kt,kx,ky,kz,Bmag");
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 11);
        assert!(first.starts_with("+1,"));
    }

    #[test]
    fn detector_unreachable_is_an_error() {
        let p = standard_profile();
        let state = moving_state(0.8);
        let params = RunParams {
            max_steps: 10,
            ..Default::default()
        };
        match run_measurement(&state, &p, &FourVector::ZERO, 4.0, &params) {
            Err(Error::DetectorNotReached(10)) => {}
            other => panic!("expected DetectorNotReached, got {other:?}"),
        }
    }

    #[test]
    fn bundle_divergence_small_for_gentle_field() {
        let p = standard_profile();
        let state = moving_state(0.8);
        let (pk, _) = split(&state, &p.config, &FourVector::new(0.0, 1.0, 0.0, 0.0)).unwrap();
        let div = bundle_divergence(&pk, &p, 1e-3, 1e-3, 200).unwrap();
        assert!(div.abs() < 1.0, "divergence estimate {div} unexpectedly large");
    }
}
