//! Pulse schedules for single- and two-qubit gates.
//!
//! Single-qubit rotations are resonant drives inside `{S, S-1}`. Two-qubit
//! gates are built from free precession under static Stark fields (z
//! shifts) and J-coupling windows, in the frame rotating at
//! [`TwoQubitParams::frame`].

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    propagate_columns, qubit_pair_indices, rotating_hamiltonian, two_qubit_phases, IntegratorConfig,
};
use crate::efg::EfgCoefficients;
use crate::error::{NerError, Result};
use crate::hamiltonians::{
    rabi_angular_frequency, resonance_omega_single, DriveParams, HamiltonianModel, JSchedule, NucleusParams,
    TwoQubitParams,
};
use crate::linalg::{expm_hermitian, phase_diag, sub_matrix, unitarity_residue};
use crate::spinops::{half_spin, make_spin_operators};
use crate::CMatrix;

const FIDELITY_UNITARITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// V/m
    pub e_amp: f64,
    /// rad
    pub phi: f64,
    /// rad/s
    pub omega: f64,
    /// s
    pub duration: f64,
}

impl PulseSpec {
    pub fn drive(&self, b0: f64, e0: f64) -> DriveParams {
        DriveParams::new(self.e_amp, self.omega, self.phi, b0).with_static_field(e0)
    }
}

/// Resonant pulse rotating `{S, S-1}` by `angle` about
/// `cos(axis_phi) x + sin(axis_phi) y`.
///
/// Angles are taken modulo 2π into `[0, 2π)`. A negative `Ω_R` is absorbed
/// by turning the drive phase by π.
pub fn pulse_for_rotation(
    nucleus: &NucleusParams,
    coeffs: &EfgCoefficients,
    b0: f64,
    e0: f64,
    e_amp: f64,
    axis_phi: f64,
    angle: f64,
) -> Result<PulseSpec> {
    if nucleus.s.two_s() == 1 {
        return Err(NerError::NoDrive("spin 1/2 has no quadrupole coupling".into()));
    }
    if !(e_amp > 0.0) || !e_amp.is_finite() {
        return Err(NerError::InvalidParameter(format!("drive amplitude must be > 0, got {e_amp}")));
    }
    if !angle.is_finite() || !axis_phi.is_finite() {
        return Err(NerError::InvalidParameter("rotation angle and axis must be finite".into()));
    }
    let omega_r = rabi_angular_frequency(nucleus, coeffs.a, e_amp);
    if omega_r == 0.0 {
        return Err(NerError::NoDrive("A or Q vanishes".into()));
    }
    let angle = angle.rem_euclid(TAU);
    let phi = if omega_r < 0.0 { axis_phi + PI } else { axis_phi }.rem_euclid(TAU);
    Ok(PulseSpec {
        e_amp,
        phi,
        omega: resonance_omega_single(nucleus, coeffs, e0, b0),
        duration: angle / omega_r.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SegmentKind {
    Drive1,
    Drive2,
    ZShift1,
    ZShift2,
    JWindow,
}

/// One piece of a schedule. The static fields `e1`, `e2` and the coupling
/// `j_hz` are constant over the segment; drive segments also carry the
/// pulse and the signed subspace Rabi rate `Ω_R` it was planned with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
    pub e1: f64,
    pub e2: f64,
    pub j_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseSpec>,
    #[serde(default)]
    pub rabi_rad_s: f64,
}

impl Segment {
    fn free(kind: SegmentKind, duration: f64, e1: f64, e2: f64, j_hz: f64) -> Self {
        Self { kind, duration, e1, e2, j_hz, pulse: None, rabi_rad_s: 0.0 }
    }

    fn drive_target(&self) -> Option<usize> {
        match self.kind {
            SegmentKind::Drive1 => Some(0),
            SegmentKind::Drive2 => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSchedule {
    pub target: String,
    /// Common rotating-frame angular frequency, rad/s.
    pub frame_omega: f64,
    pub segments: Vec<Segment>,
}

impl GateSchedule {
    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.segments {
            if !(s.duration >= 0.0) {
                return Err(NerError::InvalidParameter(format!("negative segment duration {}", s.duration)));
            }
            if s.drive_target().is_some() {
                if s.pulse.is_none() {
                    return Err(NerError::InvalidParameter("drive segment without pulse".into()));
                }
                if s.j_hz != 0.0 {
                    return Err(NerError::InvalidParameter("drive segments must have J = 0".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateFidelityReport {
    pub target_name: String,
    pub fidelity: f64,
    pub leakage: f64,
}

/// `|tr(U_target† U)| / d`, global-phase invariant.
pub fn gate_fidelity(u_actual: &CMatrix, u_target: &CMatrix) -> Result<f64> {
    if u_actual.shape() != u_target.shape() || !u_actual.is_square() {
        return Err(NerError::DimensionMismatch(format!(
            "gate fidelity of {:?} against {:?}",
            u_actual.shape(),
            u_target.shape()
        )));
    }
    for u in [u_actual, u_target] {
        let r = unitarity_residue(u);
        if !(r <= FIDELITY_UNITARITY_TOL) {
            return Err(NerError::NonUnitary(r));
        }
    }
    Ok(trace_fidelity(u_actual, u_target))
}

/// Same formula as [`gate_fidelity`] without the unitarity check, for
/// subspace blocks that have leaked.
pub fn trace_fidelity(u_actual: &CMatrix, u_target: &CMatrix) -> f64 {
    let d = u_target.nrows() as f64;
    ((u_target.adjoint() * u_actual).trace().norm() / d).clamp(0.0, 1.0)
}

pub fn cz_matrix() -> CMatrix {
    phase_diag(&[0.0, 0.0, 0.0, PI])
}

/// Control on the first (slow-index) qubit.
pub fn cnot_matrix() -> CMatrix {
    let one = Complex64::new(1.0, 0.0);
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = one;
    m[(1, 1)] = one;
    m[(2, 3)] = one;
    m[(3, 2)] = one;
    m
}

pub fn target_matrix(name: &str) -> Option<CMatrix> {
    match name {
        "CZ" => Some(cz_matrix()),
        "CNOT" => Some(cnot_matrix()),
        _ => None,
    }
}

/// Smallest `d >= 0` with `rate · d ≡ delta (mod 2π)`.
fn nonneg_duration(delta: f64, rate: f64, what: &str) -> Result<f64> {
    if rate == 0.0 || !rate.is_finite() {
        return Err(NerError::NoDrive(format!("{what} has zero precession rate")));
    }
    let signed = if rate > 0.0 { delta } else { -delta };
    Ok(signed.rem_euclid(TAU) / rate.abs())
}

/// Qubit precession rates (rad/s) of each nucleus for given static fields, J = 0.
fn rates(params: &TwoQubitParams, e1: f64, e2: f64) -> Result<(f64, f64)> {
    let p = two_qubit_phases(&params.with_fields(e1, e2, JSchedule::default()), 1.0)?;
    Ok((p.phi1, p.phi2))
}

fn require_reference_frame(params: &TwoQubitParams) -> Result<()> {
    if let Some(w) = params.frame_omega {
        if w != params.reference_omega() {
            return Err(NerError::InvalidParameter(
                "gate synthesis works in the default frame (nucleus 1 resonance)".into(),
            ));
        }
    }
    Ok(())
}

fn cz_segments(params: &TwoQubitParams, j_const: f64) -> Result<Vec<Segment>> {
    params.validate()?;
    require_reference_frame(params)?;
    if j_const == 0.0 || !j_const.is_finite() {
        return Err(NerError::InvalidParameter(format!("CZ needs a finite nonzero J, got {j_const}")));
    }
    // ∫2πJ dt = ±π makes exp(-iθ s1z s2z) a controlled phase of π
    let tau = 1.0 / (2.0 * j_const.abs());
    let theta = PI * j_const.signum();
    let window = two_qubit_phases(&params.with_fields(0.0, 0.0, JSchedule::constant(j_const, tau)), tau)?;
    let (shift1_q1, shift1_q2) = rates(params, params.e1, 0.0)?;
    let (shift2_q1, shift2_q2) = rates(params, 0.0, params.e2)?;
    let target = -0.5 * theta;
    let d1 = nonneg_duration(target - window.phi1, shift1_q1, "z shift on qubit 1")?;
    let d2 = nonneg_duration(target - window.phi2 - shift1_q2 * d1, shift2_q2, "z shift on qubit 2")?;
    debug_assert!(shift2_q1 == 0.0);
    Ok(vec![
        Segment::free(SegmentKind::JWindow, tau, 0.0, 0.0, j_const),
        Segment::free(SegmentKind::ZShift1, d1, params.e1, 0.0, 0.0),
        Segment::free(SegmentKind::ZShift2, d2, 0.0, params.e2, 0.0),
    ])
}

/// J window of `1/(2|J|)` followed by z shifts on each qubit that remove
/// the single-qubit phases, leaving a controlled-Z.
///
/// Uses `params.e1`, `params.e2` as the z-shift control fields.
pub fn synthesize_cz(params: &TwoQubitParams, j_const: f64) -> Result<GateSchedule> {
    Ok(GateSchedule { target: "CZ".into(), frame_omega: params.frame(), segments: cz_segments(params, j_const)? })
}

/// Drive on the second nucleus used by [`synthesize_cnot`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitDrive {
    /// A coefficient of nucleus 2, m^-1.
    pub a: f64,
    /// V/m
    pub e_amp: f64,
}

/// `Ry(π/2)₂ · CZ · Ry(-π/2)₂`, with a final z shift on qubit 2 undoing
/// the precession accumulated during the two drive pulses.
pub fn synthesize_cnot(params: &TwoQubitParams, j_const: f64, drive2: &QubitDrive) -> Result<GateSchedule> {
    let cz = cz_segments(params, j_const)?;
    let coeffs2 = EfgCoefficients { a: drive2.a, ..params.coeffs2() };
    let (_, delta) = rates(params, 0.0, 0.0)?;
    let (_, shift2_q2) = rates(params, 0.0, params.e2)?;

    let mut segments = Vec::new();
    let mut t = 0.0;
    // accumulated, not yet compensated z angle on qubit 2
    let mut alpha = 0.0;
    let push_rotation = |segments: &mut Vec<Segment>, t: &mut f64, alpha: &mut f64, axis: f64| -> Result<()> {
        let mut pulse = pulse_for_rotation(&params.nucleus2, &coeffs2, params.b0, 0.0, drive2.e_amp, axis, FRAC_PI_2)?;
        pulse.phi = (pulse.phi - delta * *t + *alpha).rem_euclid(TAU);
        let rabi = rabi_angular_frequency(&params.nucleus2, coeffs2.a, drive2.e_amp);
        segments.push(Segment {
            kind: SegmentKind::Drive2,
            duration: pulse.duration,
            e1: 0.0,
            e2: 0.0,
            j_hz: 0.0,
            pulse: Some(pulse),
            rabi_rad_s: rabi,
        });
        *t += pulse.duration;
        *alpha += delta * pulse.duration;
        Ok(())
    };
    push_rotation(&mut segments, &mut t, &mut alpha, 1.5 * PI)?;
    for s in cz {
        t += s.duration;
        segments.push(s);
    }
    push_rotation(&mut segments, &mut t, &mut alpha, FRAC_PI_2)?;
    let d = nonneg_duration(-alpha, shift2_q2, "z shift on qubit 2")?;
    segments.push(Segment::free(SegmentKind::ZShift2, d, 0.0, params.e2, 0.0));
    Ok(GateSchedule { target: "CNOT".into(), frame_omega: params.frame(), segments })
}

fn params_in_frame(params: &TwoQubitParams, schedule: &GateSchedule) -> TwoQubitParams {
    TwoQubitParams { frame_omega: Some(schedule.frame_omega), ..params.clone() }
}

/// Closed-form 4x4 unitary of one segment starting at schedule time `t0`.
fn segment_unitary(params: &TwoQubitParams, seg: &Segment, t0: f64) -> Result<CMatrix> {
    let d = seg.duration;
    let p = params.with_fields(seg.e1, seg.e2, JSchedule::constant(seg.j_hz, d));
    let ph = two_qubit_phases(&p, d)?;
    let q = 0.25 * ph.theta;
    let u12 = phase_diag(&[q, -q, -q, q]);
    let mut factors = [phase_diag(&[0.5 * ph.phi1, -0.5 * ph.phi1]), phase_diag(&[0.5 * ph.phi2, -0.5 * ph.phi2])];
    if let (Some(k), Some(pulse)) = (seg.drive_target(), seg.pulse.as_ref()) {
        if d > 0.0 {
            // rotating at the drive detuning δ makes the 2x2 problem static
            let rate = if k == 0 { ph.phi1 } else { ph.phi2 } / d;
            let delta = pulse.omega - params.frame();
            let half = half_spin();
            let (c, s) = (pulse.phi.cos(), pulse.phi.sin());
            let h_static = &half.sz * Complex64::new(rate - delta, 0.0)
                + (&half.sx * Complex64::new(c, 0.0) + &half.sy * Complex64::new(s, 0.0))
                    * Complex64::new(seg.rabi_rad_s, 0.0);
            let into = phase_diag(&[-0.5 * delta * t0, 0.5 * delta * t0]);
            let out = phase_diag(&[0.5 * delta * (t0 + d), -0.5 * delta * (t0 + d)]);
            factors[k] = out * expm_hermitian(&h_static, d) * into;
        }
    }
    let u = factors[0].kronecker(&factors[1]) * u12;
    Ok(u * Complex64::from_polar(1.0, -ph.global))
}

/// Product of the closed-form segment unitaries, in the schedule's frame.
pub fn ideal_unitary(params: &TwoQubitParams, schedule: &GateSchedule) -> Result<CMatrix> {
    schedule.validate()?;
    let p = params_in_frame(params, schedule);
    let mut u = CMatrix::identity(4, 4);
    let mut t = 0.0;
    for seg in &schedule.segments {
        u = segment_unitary(&p, seg, t)? * u;
        t += seg.duration;
    }
    Ok(u)
}

/// Hilbert space used for simulating a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationSpace {
    /// `{S, S-1} ⊗ {S, S-1}` only.
    Subspace,
    /// Both nuclei in full, `(2S+1)^2` states.
    Full,
}

/// Piecewise generator of a schedule in its rotating frame, with local time
/// starting at 0.
pub fn schedule_model(
    params: &TwoQubitParams,
    schedule: &GateSchedule,
    space: SimulationSpace,
) -> Result<HamiltonianModel> {
    schedule.validate()?;
    params.validate()?;
    let p = params_in_frame(params, schedule);
    let s = p.nucleus1.s;
    let d = s.dim();
    let ops = make_spin_operators(s);
    let id = ops.identity();
    let two_s = s.two_s() as f64;
    let sqrt_2s = two_s.sqrt();

    struct Piece {
        end: f64,
        static_part: CMatrix,
        drive: Option<(CMatrix, CMatrix, f64, f64)>,
    }
    let mut pieces = Vec::with_capacity(schedule.segments.len());
    let mut t = 0.0;
    for seg in &schedule.segments {
        let fields = p.with_fields(seg.e1, seg.e2, JSchedule::constant(seg.j_hz, f64::INFINITY));
        let mut h = crate::hamiltonians::h_two(&fields, 0.0)?;
        let m: Vec<f64> = s.m_values().collect();
        for a in 0..d {
            for b in 0..d {
                h[(a * d + b, a * d + b)] -= Complex64::new(p.frame() * (m[a] + m[b]), 0.0);
            }
        }
        let drive = match (seg.drive_target(), seg.pulse) {
            (Some(k), Some(pulse)) => {
                let amp = seg.rabi_rad_s / ((two_s - 1.0) * sqrt_2s);
                let (dx, dy) = (ops.drive_x() * Complex64::new(amp, 0.0), ops.drive_y() * Complex64::new(amp, 0.0));
                let (dx, dy) = if k == 0 {
                    (dx.kronecker(&id), dy.kronecker(&id))
                } else {
                    (id.kronecker(&dx), id.kronecker(&dy))
                };
                Some((dx, dy, pulse.omega - p.frame(), pulse.phi))
            }
            _ => None,
        };
        pieces.push(Piece { end: t + seg.duration, static_part: h, drive });
        t += seg.duration;
    }
    let breakpoints: Vec<f64> = pieces.iter().map(|pc| pc.end).collect();
    let indices = qubit_pair_indices(s);
    let project = move |m: CMatrix| match space {
        SimulationSpace::Subspace => sub_matrix(&m, &indices),
        SimulationSpace::Full => m,
    };
    let pieces: Vec<Piece> = pieces
        .into_iter()
        .map(|pc| Piece {
            end: pc.end,
            static_part: project(pc.static_part),
            drive: pc.drive.map(|(dx, dy, delta, phi)| (project(dx), project(dy), delta, phi)),
        })
        .collect();
    let dim = match space {
        SimulationSpace::Subspace => 4,
        SimulationSpace::Full => d * d,
    };
    Ok(HamiltonianModel::new(dim, move |t| {
        let k = pieces.iter().position(|pc| t < pc.end).unwrap_or(pieces.len().saturating_sub(1));
        let Some(pc) = pieces.get(k) else {
            return CMatrix::zeros(dim, dim);
        };
        match &pc.drive {
            None => pc.static_part.clone(),
            Some((dx, dy, delta, phi)) => {
                let theta = delta * t + phi;
                &pc.static_part + dx * Complex64::new(theta.cos(), 0.0) + dy * Complex64::new(theta.sin(), 0.0)
            }
        }
    })
    .with_breakpoints(breakpoints))
}

#[derive(Debug, Clone)]
pub struct ScheduleOutcome {
    /// Block on `{S, S-1} ⊗ {S, S-1}`.
    pub unitary: CMatrix,
    /// Largest population lost from the qubit space over the four basis inputs.
    pub leakage: f64,
}

/// Integrates the schedule with its local clock starting at `t_origin`.
pub fn simulate_schedule(
    params: &TwoQubitParams,
    schedule: &GateSchedule,
    space: SimulationSpace,
    t_origin: f64,
    cfg: &IntegratorConfig,
) -> Result<ScheduleOutcome> {
    let model = schedule_model(params, schedule, space)?.shifted(-t_origin);
    let dim = model.dim();
    let indices: Vec<usize> = match space {
        SimulationSpace::Subspace => (0..4).collect(),
        SimulationSpace::Full => qubit_pair_indices(params.nucleus1.s).to_vec(),
    };
    let mut x = CMatrix::zeros(dim, 4);
    for (col, &row) in indices.iter().enumerate() {
        x[(row, col)] = Complex64::new(1.0, 0.0);
    }
    let (x, _) = propagate_columns(&model, &x, t_origin, t_origin + schedule.total_duration(), cfg)?;
    let unitary = CMatrix::from_fn(4, 4, |i, j| x[(indices[i], j)]);
    let leakage = (0..4).map(|j| 1.0 - unitary.column(j).norm_squared()).fold(0.0, f64::max).max(0.0);
    Ok(ScheduleOutcome { unitary, leakage })
}

pub fn ideal_report(params: &TwoQubitParams, schedule: &GateSchedule, target: &CMatrix) -> Result<GateFidelityReport> {
    let u = ideal_unitary(params, schedule)?;
    Ok(GateFidelityReport { target_name: schedule.target.clone(), fidelity: gate_fidelity(&u, target)?, leakage: 0.0 })
}

pub fn simulated_report(
    params: &TwoQubitParams,
    schedule: &GateSchedule,
    target: &CMatrix,
    space: SimulationSpace,
    cfg: &IntegratorConfig,
) -> Result<GateFidelityReport> {
    let out = simulate_schedule(params, schedule, space, 0.0, cfg)?;
    Ok(GateFidelityReport {
        target_name: schedule.target.clone(),
        fidelity: trace_fidelity(&out.unitary, target),
        leakage: out.leakage,
    })
}

/// Scores a single-qubit pulse against `target` (2x2). With `full`, the
/// whole spin is integrated in the drive's rotating frame and the
/// `{S, S-1}` block is compared; otherwise the closed form is used.
pub fn rotation_report(
    nucleus: &NucleusParams,
    coeffs: &EfgCoefficients,
    drive: &DriveParams,
    duration: f64,
    target: &CMatrix,
    full: Option<&IntegratorConfig>,
) -> Result<GateFidelityReport> {
    let name = "rotation".to_string();
    match full {
        None => {
            let u = crate::dynamics::analytic_single_propagator(nucleus, coeffs, drive, duration)?;
            Ok(GateFidelityReport { target_name: name, fidelity: gate_fidelity(u.matrix(), target)?, leakage: 0.0 })
        }
        Some(cfg) => {
            let ops = nucleus.operators();
            let h = rotating_hamiltonian(nucleus, &ops, coeffs, drive)?;
            let model = HamiltonianModel::constant(h);
            let d = ops.dim();
            let mut x = CMatrix::zeros(d, 2);
            x[(0, 0)] = Complex64::new(1.0, 0.0);
            x[(1, 1)] = Complex64::new(1.0, 0.0);
            let (x, _) = propagate_columns(&model, &x, 0.0, duration, cfg)?;
            let block = x.rows(0, 2).into_owned();
            let leakage = (0..2).map(|j| 1.0 - block.column(j).norm_squared()).fold(0.0, f64::max).max(0.0);
            Ok(GateFidelityReport { target_name: name, fidelity: trace_fidelity(&block, target), leakage })
        }
    }
}
