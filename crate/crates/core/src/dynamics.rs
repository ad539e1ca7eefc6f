//! Time evolution.
//!
//! [`evolve`] is a brute-force integrator for any [`HamiltonianModel`]:
//! midpoint-sampled matrix exponentials with step-halving error control.
//! It serves as the reference against which the closed-form propagators
//! below are checked.

use num_complex::Complex64;

use crate::efg::EfgCoefficients;
use crate::error::{NerError, Result};
use crate::hamiltonians::{
    drive_amplitude, h_lqse, rabi_angular_frequency, resonance_omega_single, DriveParams, HamiltonianModel,
    NucleusParams, TwoQubitParams,
};
use crate::linalg::{expm_hermitian, phase_diag, unitarity_residue};
use crate::spinops::{half_spin, SpinOperators, SpinQuantum};
use crate::{CMatrix, CVector};

const NORM_TOL: f64 = 1e-10;
const UNITARITY_TOL: f64 = 1e-9;
const MIN_STEP: f64 = 1e-18;
/// Relative tolerance used when checking a drive against its resonance.
pub const RESONANCE_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(NerError::NotNormalized(norm));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes before wrapping.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(NerError::NotNormalized(norm));
        }
        Ok(Self { amplitudes: amplitudes.unscale(norm) })
    }

    /// Basis state `k` (index 0 is `m = S`).
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(NerError::DimensionMismatch(format!("basis index {k} outside dimension {dim}")));
        }
        let mut v = CVector::zeros(dim);
        v[k] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub(crate) fn from_unchecked(amplitudes: CVector) -> Self {
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `|<self|other>|`.
    pub fn overlap(&self, other: &StateVector) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    u: CMatrix,
}

impl Propagator {
    pub fn new(u: CMatrix) -> Result<Self> {
        if !u.is_square() {
            return Err(NerError::DimensionMismatch(format!("propagator must be square, got {:?}", u.shape())));
        }
        let r = unitarity_residue(&u);
        if !(r < UNITARITY_TOL) {
            return Err(NerError::NonUnitary(r));
        }
        Ok(Self { u })
    }

    pub fn identity(dim: usize) -> Self {
        Self { u: CMatrix::identity(dim, dim) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.u
    }

    pub fn into_matrix(self) -> CMatrix {
        self.u
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim() {
            return Err(NerError::DimensionMismatch(format!(
                "propagator of dimension {} applied to state of dimension {}",
                self.dim(),
                psi.dim()
            )));
        }
        Ok(StateVector::from_unchecked(&self.u * &psi.amplitudes))
    }

    /// `self · earlier`: apply `earlier` first.
    pub fn then_after(&self, earlier: &Propagator) -> Propagator {
        Propagator { u: &self.u * &earlier.u }
    }
}

/// Integrator settings. `tol` bounds the local error of each accepted step,
/// measured as the largest column-norm difference between one full step
/// and two half steps.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntegratorConfig {
    pub dt_max: f64,
    pub tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt_max: f64::INFINITY, tol: 1e-10 }
    }
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0) || !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(NerError::InvalidParameter(format!(
                "integrator needs dt_max > 0 and tol > 0, got dt_max = {}, tol = {}",
                self.dt_max, self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
}

fn midpoint_step(model: &HamiltonianModel, t: f64, dt: f64) -> CMatrix {
    expm_hermitian(&model.eval(t + 0.5 * dt), dt)
}

fn max_column_norm(m: &CMatrix) -> f64 {
    m.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Evolves the columns of `x` from `t0` to `t1 >= t0`.
pub fn propagate_columns(
    model: &HamiltonianModel,
    x: &CMatrix,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<(CMatrix, IntegrationStats)> {
    cfg.validate()?;
    if x.nrows() != model.dim() {
        return Err(NerError::DimensionMismatch(format!(
            "model of dimension {} applied to {} rows",
            model.dim(),
            x.nrows()
        )));
    }
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(NerError::InvalidParameter(format!("need finite t1 >= t0, got [{t0}, {t1}]")));
    }
    let mut stats = IntegrationStats::default();
    let mut x = x.clone();
    if t1 == t0 {
        return Ok((x, stats));
    }
    if model.is_time_independent() {
        stats.accepted = 1;
        return Ok((expm_hermitian(&model.eval(t0), t1 - t0) * x, stats));
    }

    let mut stops: Vec<f64> = model.breakpoints().iter().copied().filter(|b| *b > t0 && *b < t1).collect();
    stops.push(t1);

    let scale = max_column_norm(&model.eval(t0));
    let mut dt = if scale > 0.0 { 0.1 / scale } else { t1 - t0 };
    dt = dt.min(cfg.dt_max).min(t1 - t0);

    let mut t = t0;
    for end in stops {
        while t < end {
            let remaining = end - t;
            let truncated = dt >= remaining;
            let h = if truncated { remaining } else { dt };
            let full = midpoint_step(model, t, h) * &x;
            let first = midpoint_step(model, t, 0.5 * h) * &x;
            let fine = midpoint_step(model, t + 0.5 * h, 0.5 * h) * first;
            let err = max_column_norm(&(&fine - &full));
            let factor = if err == 0.0 { 2.0 } else { (0.9 * (cfg.tol / err).cbrt()).clamp(0.2, 2.0) };
            if err <= cfg.tol {
                x = fine;
                t = if truncated { end } else { t + h };
                stats.accepted += 1;
                let grown = h * factor;
                dt = if truncated { dt.max(grown) } else { grown };
            } else {
                stats.rejected += 1;
                dt = h * factor;
            }
            dt = dt.min(cfg.dt_max);
            if dt < MIN_STEP {
                return Err(NerError::StepUnderflow { t, dt });
            }
        }
    }
    Ok((x, stats))
}

/// Evolves `psi0` from 0 to `t_final`.
pub fn evolve(
    model: &HamiltonianModel,
    psi0: &StateVector,
    t_final: f64,
    cfg: &IntegratorConfig,
) -> Result<StateVector> {
    evolve_between(model, psi0, 0.0, t_final, cfg)
}

pub fn evolve_between(
    model: &HamiltonianModel,
    psi0: &StateVector,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<StateVector> {
    let x = CMatrix::from_column_slice(psi0.dim(), 1, psi0.amplitudes.as_slice());
    let (x, _) = propagate_columns(model, &x, t0, t1, cfg)?;
    Ok(StateVector::from_unchecked(x.column(0).into_owned()))
}

/// States at each of the sorted, non-negative `times`, starting from `psi0` at `t = 0`.
pub fn evolve_trajectory(
    model: &HamiltonianModel,
    psi0: &StateVector,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<StateVector>> {
    let mut out = Vec::with_capacity(times.len());
    let mut psi = psi0.clone();
    let mut t = 0.0;
    for &next in times {
        if next < t {
            return Err(NerError::InvalidParameter("trajectory times must be sorted and non-negative".into()));
        }
        psi = evolve_between(model, &psi, t, next, cfg)?;
        t = next;
        out.push(psi.clone());
    }
    Ok(out)
}

/// Numerical propagator `U(t1, t0)`.
pub fn numerical_propagator(model: &HamiltonianModel, t0: f64, t1: f64, cfg: &IntegratorConfig) -> Result<Propagator> {
    let id = CMatrix::identity(model.dim(), model.dim());
    let (u, _) = propagate_columns(model, &id, t0, t1, cfg)?;
    Ok(Propagator { u })
}

fn sz_phases(ops: &SpinOperators, angle: f64) -> CMatrix {
    let angles: Vec<f64> = (0..ops.dim()).map(|k| ops.sz[(k, k)].re * angle).collect();
    phase_diag(&angles)
}

/// `exp(+i S_z ω t) ψ_lab`.
pub fn rotating_frame(psi_lab: &StateVector, ops: &SpinOperators, omega: f64, t: f64) -> StateVector {
    StateVector::from_unchecked(sz_phases(ops, -omega * t) * &psi_lab.amplitudes)
}

/// `exp(-i S_z ω t) ψ_rot`.
pub fn lab_frame(psi_rot: &StateVector, ops: &SpinOperators, omega: f64, t: f64) -> StateVector {
    StateVector::from_unchecked(sz_phases(ops, omega * t) * &psi_rot.amplitudes)
}

/// Rotating-frame generator of `h_single`, exact for the circular drive:
/// `(γB0 - ω) S_z + 3Q̃ħ(C + B'E0) S_z^2 + 3Q̃ħAE({Sx,Sz} cos φ + {Sy,Sz} sin φ)`.
pub fn rotating_hamiltonian(
    nucleus: &NucleusParams,
    ops: &SpinOperators,
    coeffs: &EfgCoefficients,
    drive: &DriveParams,
) -> Result<CMatrix> {
    drive.validate()?;
    if drive.keep_dc_terms {
        return Err(NerError::InvalidParameter(
            "the rotating frame is time-independent only without the DC offsets".into(),
        ));
    }
    let mut h = h_lqse(nucleus, ops, coeffs, drive.e0_static, drive.b0)?;
    h -= &ops.sz * Complex64::new(drive.omega, 0.0);
    let a = drive_amplitude(nucleus, coeffs, drive.e_amp);
    h += (ops.drive_x() * Complex64::new(drive.phi.cos(), 0.0) + ops.drive_y() * Complex64::new(drive.phi.sin(), 0.0))
        * Complex64::new(a, 0.0);
    Ok(h)
}

fn check_resonance(omega: f64, resonance: f64) -> Result<()> {
    if (omega - resonance).abs() > RESONANCE_REL_TOL * resonance.abs() {
        return Err(NerError::OffResonance { omega, resonance });
    }
    Ok(())
}

/// Closed-form NER propagator, in both frames.
#[derive(Debug, Clone)]
pub struct NerPropagator {
    pub rotating: Propagator,
    pub lab: Propagator,
}

/// Exact NER propagator for a drive at the bare Zeeman frequency `ω = γ_n B0`.
pub fn analytic_ner_propagator(
    nucleus: &NucleusParams,
    ops: &SpinOperators,
    coeffs: &EfgCoefficients,
    drive: &DriveParams,
    t: f64,
) -> Result<NerPropagator> {
    if drive.e0_static != 0.0 {
        return Err(NerError::InvalidParameter("analytic NER propagator takes no static field".into()));
    }
    check_resonance(drive.omega, nucleus.gamma_n * drive.b0)?;
    let h = rotating_hamiltonian(nucleus, ops, coeffs, drive)?;
    let rotating = Propagator { u: expm_hermitian(&h, t) };
    let lab = Propagator { u: sz_phases(ops, drive.omega * t) * &rotating.u };
    Ok(NerPropagator { rotating, lab })
}

/// `exp(-i θ (σx cos φ + σy sin φ) / 2)`.
pub fn qubit_rotation(theta: f64, phi: f64) -> CMatrix {
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    let i = Complex64::new(0.0, 1.0);
    let off = -i * s;
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, 0.0),
            off * Complex64::from_polar(1.0, -phi),
            off * Complex64::from_polar(1.0, phi),
            Complex64::new(c, 0.0),
        ],
    )
}

/// 2x2 rotation in the subspace `{S, S-1}` for a drive at
/// [`resonance_omega_single`]; rotation angle `Ω_R t`.
pub fn analytic_single_propagator(
    nucleus: &NucleusParams,
    coeffs: &EfgCoefficients,
    drive: &DriveParams,
    t: f64,
) -> Result<Propagator> {
    drive.validate()?;
    check_resonance(drive.omega, resonance_omega_single(nucleus, coeffs, drive.e0_static, drive.b0))?;
    let omega_r = rabi_angular_frequency(nucleus, coeffs.a, drive.e_amp);
    Ok(Propagator { u: qubit_rotation(omega_r * t, drive.phi) })
}

/// Embeds a 2-component qubit state into `{S, S-1}`.
pub fn embed_qubit_state(s: SpinQuantum, qubit: &CVector) -> Result<StateVector> {
    if qubit.len() != 2 {
        return Err(NerError::DimensionMismatch(format!("qubit state has {} components", qubit.len())));
    }
    let mut v = CVector::zeros(s.dim());
    v[0] = qubit[0];
    v[1] = qubit[1];
    StateVector::new(v)
}

/// Population outside `{S, S-1}`.
pub fn leakage_of(psi: &StateVector) -> f64 {
    let p = psi.populations();
    let total: f64 = p.iter().sum();
    (total - p[0] - p.get(1).copied().unwrap_or(0.0)).clamp(0.0, 1.0)
}

fn check_in_subspace(psi0: &StateVector) -> Result<()> {
    if leakage_of(psi0) > NORM_TOL {
        return Err(NerError::InvalidParameter("initial state must lie in the subspace {S, S-1}".into()));
    }
    Ok(())
}

/// `1 -` population left in `{S, S-1}` after evolving under `model`.
pub fn leakage(model: &HamiltonianModel, psi0: &StateVector, t: f64, cfg: &IntegratorConfig) -> Result<f64> {
    check_in_subspace(psi0)?;
    Ok(leakage_of(&evolve(model, psi0, t, cfg)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceReport {
    pub leakage: f64,
    /// `|<expected|ψ(t)>|^2`.
    pub fidelity: f64,
    pub final_state: StateVector,
}

/// Leakage together with the fidelity against `expected`, which must be
/// expressed in the same frame as `model`.
pub fn subspace_report(
    model: &HamiltonianModel,
    psi0: &StateVector,
    t: f64,
    cfg: &IntegratorConfig,
    expected: &StateVector,
) -> Result<SubspaceReport> {
    check_in_subspace(psi0)?;
    let psi = evolve(model, psi0, t, cfg)?;
    if expected.dim() != psi.dim() {
        return Err(NerError::DimensionMismatch("expected state has the wrong dimension".into()));
    }
    Ok(SubspaceReport { leakage: leakage_of(&psi), fidelity: expected.overlap(&psi).powi(2), final_state: psi })
}

/// Expected full-dimensional state after ideal subspace evolution, in the
/// rotating frame (`lab_frame_ops = None`) or the lab frame.
pub fn analytic_subspace_state(
    nucleus: &NucleusParams,
    coeffs: &EfgCoefficients,
    drive: &DriveParams,
    psi0: &StateVector,
    t: f64,
    lab_frame_ops: Option<&SpinOperators>,
) -> Result<StateVector> {
    check_in_subspace(psi0)?;
    let u = analytic_single_propagator(nucleus, coeffs, drive, t)?;
    let q = CVector::from_column_slice(&[psi0.amplitudes[0], psi0.amplitudes[1]]);
    let rot = embed_qubit_state(nucleus.s, &(u.matrix() * q))?;
    Ok(match lab_frame_ops {
        Some(ops) => lab_frame(&rot, ops, drive.omega, t),
        None => rot,
    })
}

/// Closed-form two-nucleus propagator in `{S, S-1} ⊗ {S, S-1}`, in the
/// frame rotating at `params.frame()` for both nuclei.
#[derive(Debug, Clone)]
pub struct FactoredTwoQubit {
    pub u1: CMatrix,
    pub u2: CMatrix,
    pub u12: CMatrix,
    /// Scalar phase `c` with `U = exp(-i c) (u1 ⊗ u2) u12`.
    pub global_phase: f64,
}

impl FactoredTwoQubit {
    pub fn product(&self) -> CMatrix {
        (self.u1.kronecker(&self.u2) * &self.u12) * Complex64::from_polar(1.0, -self.global_phase)
    }
}

/// Accumulated angles of the factored propagator over `[0, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitPhases {
    /// `∫ r1 dt` (coefficient of `s_1z` in the qubit space).
    pub phi1: f64,
    pub phi2: f64,
    /// `∫ 2πJ dt`.
    pub theta: f64,
    pub global: f64,
}

pub fn two_qubit_phases(params: &TwoQubitParams, t: f64) -> Result<TwoQubitPhases> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(NerError::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    let (n1, n2) = (&params.nucleus1, &params.nucleus2);
    let two_s = n1.s.two_s() as f64;
    let a = 0.5 * (two_s - 1.0);
    let omega_ref = params.reference_omega();
    let omega_f = params.frame();
    let j_int = params.j_schedule.integral(t);
    let pi = std::f64::consts::PI;

    let rate1 = (two_s - 1.0) * 3.0 * n1.q_tilde_hbar() * params.b_prime1 * params.e1 + (omega_ref - omega_f);
    let delta2 = (n2.gamma_n - n1.gamma_n) * params.b0
        + 3.0 * (two_s - 1.0) * (n2.q_tilde_hbar() * params.c2 - n1.q_tilde_hbar() * params.c1);
    let rate2 = delta2 + (two_s - 1.0) * 3.0 * n2.q_tilde_hbar() * params.b_prime2 * params.e2 + (omega_ref - omega_f);
    let phi1 = rate1 * t + (two_s - 1.0) * pi * j_int;
    let phi2 = rate2 * t + (two_s - 1.0) * pi * j_int;
    let theta = 2.0 * pi * j_int;

    let per = |n: &NucleusParams, c: f64, bp: f64, e: f64| {
        (n.gamma_n * params.b0 - omega_f) * a + 3.0 * n.q_tilde_hbar() * (c + bp * e) * (a * a + 0.25)
    };
    let static_part = per(n1, params.c1, params.b_prime1, params.e1) + per(n2, params.c2, params.b_prime2, params.e2);
    let global = static_part * t + theta * a * a;
    Ok(TwoQubitPhases { phi1, phi2, theta, global })
}

/// `u1 = exp(-i s_z φ1)`, `u2 = exp(-i s_z φ2)`, `u12 = exp(-i s_1z s_2z θ)`
/// with spin-1/2 `s_z`.
pub fn two_qubit_propagator_factored(params: &TwoQubitParams, t: f64) -> Result<FactoredTwoQubit> {
    let p = two_qubit_phases(params, t)?;
    let u1 = phase_diag(&[0.5 * p.phi1, -0.5 * p.phi1]);
    let u2 = phase_diag(&[0.5 * p.phi2, -0.5 * p.phi2]);
    let q = 0.25 * p.theta;
    let u12 = phase_diag(&[q, -q, -q, q]);
    Ok(FactoredTwoQubit { u1, u2, u12, global_phase: p.global })
}

/// Indices of `{S, S-1} ⊗ {S, S-1}` inside the full product basis.
pub fn qubit_pair_indices(s: SpinQuantum) -> [usize; 4] {
    let d = s.dim();
    [0, 1, d, d + 1]
}

/// Converts a lab-frame two-nucleus propagator over `[0, t]` into the
/// common rotating frame `exp(+i ω (S_1z + S_2z) t)`.
pub fn two_nucleus_to_rotating(u_lab: &CMatrix, s: SpinQuantum, omega: f64, t: f64) -> CMatrix {
    let m: Vec<f64> = s.m_values().collect();
    let mut angles = Vec::with_capacity(m.len() * m.len());
    for a in &m {
        for b in &m {
            angles.push(-(a + b) * omega * t);
        }
    }
    phase_diag(&angles) * u_lab
}

/// Pauli `σ_z / 2` convenience for tests and gates.
pub fn qubit_sz() -> CMatrix {
    half_spin().sz
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{h_ner, h_single, h_two_model, JSchedule, JSegment};
    use crate::linalg::{max_abs, sub_matrix};
    use crate::spinops::make_spin_operators;

    fn nucleus(two_s: i64) -> NucleusParams {
        NucleusParams::new(SpinQuantum::new(two_s).unwrap(), -4.9e-29, 2.0 * std::f64::consts::PI * 5.553e6).unwrap()
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let model = HamiltonianModel::new(3, |_| CMatrix::zeros(3, 3));
        let psi = StateVector::normalized(CVector::from_vec(vec![
            Complex64::new(0.3, 0.1),
            Complex64::new(-0.2, 0.5),
            Complex64::new(0.7, 0.0),
        ]))
        .unwrap();
        let out = evolve(&model, &psi, 1.0, &IntegratorConfig::default()).unwrap();
        assert!((out.amplitudes() - psi.amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn diagonal_phases_exact() {
        let energies = [3.0e4, -1.0e4, 2.5e3, 0.0];
        let h = crate::spinops::real_diag(&energies);
        let model = HamiltonianModel::new(4, move |_| h.clone());
        let psi = StateVector::normalized(CVector::from_element(4, Complex64::new(1.0, 0.0))).unwrap();
        let t = 1.7e-3;
        let out = evolve(&model, &psi, t, &IntegratorConfig::default()).unwrap();
        for (k, e) in energies.iter().enumerate() {
            let expected = Complex64::from_polar(0.5, -e * t);
            assert!((out.amplitudes()[k] - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn integrator_matches_closed_form_rabi() {
        // spin 1/2 in a field rotating at resonance: exact solution known
        let ops = half_spin();
        let (w0, w1) = (2.0e4, 3.0e3);
        let sx = ops.sx.clone();
        let sy = ops.sy.clone();
        let sz = ops.sz.clone();
        let model = HamiltonianModel::new(2, move |t| {
            &sz * Complex64::new(w0, 0.0)
                + &sx * Complex64::new(w1 * (w0 * t).cos(), 0.0)
                + &sy * Complex64::new(w1 * (w0 * t).sin(), 0.0)
        });
        let psi = StateVector::basis(2, 0).unwrap();
        let t = 2.3e-3;
        // local tolerance is per step, so the global error is a few hundred times larger
        let out = evolve(&model, &psi, t, &IntegratorConfig::with_tol(1e-12)).unwrap();
        let p_flip = (0.5 * w1 * t).sin().powi(2);
        assert!((out.populations()[1] - p_flip).abs() < 1e-8, "{} vs {p_flip}", out.populations()[1]);
        assert!((out.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn breakpoints_are_respected() {
        let model = HamiltonianModel::new(1, |t| {
            CMatrix::from_element(1, 1, Complex64::new(if t < 0.3 { 10.0 } else { -4.0 }, 0.0))
        })
        .with_breakpoints(vec![0.3]);
        let psi = StateVector::basis(1, 0).unwrap();
        let out = evolve(&model, &psi, 1.0, &IntegratorConfig::default()).unwrap();
        let expected = Complex64::from_polar(1.0, -(10.0 * 0.3 - 4.0 * 0.7));
        assert!((out.amplitudes()[0] - expected).norm() < 1e-12);
    }

    #[test]
    fn underflow_is_reported() {
        let model = HamiltonianModel::new(2, |t| {
            let ops = half_spin();
            &ops.sx * Complex64::new(1e30 * (1e30 * t).sin(), 0.0) + &ops.sz * Complex64::new(1e30, 0.0)
        });
        let psi = StateVector::basis(2, 0).unwrap();
        let err = evolve(&model, &psi, 1.0, &IntegratorConfig::with_tol(1e-14)).unwrap_err();
        assert!(matches!(err, NerError::StepUnderflow { .. }));
        assert_eq!(err.code(), "integrator_stiffness");
    }

    #[test]
    fn frame_round_trip() {
        let ops = make_spin_operators(SpinQuantum::new(7).unwrap());
        let psi = StateVector::normalized(CVector::from_fn(8, |k, _| Complex64::new(1.0 + k as f64, 0.5 * k as f64)))
            .unwrap();
        let rot = rotating_frame(&psi, &ops, 3.3e6, 1.1e-3);
        let back = lab_frame(&rot, &ops, 3.3e6, 1.1e-3);
        assert!((back.amplitudes() - psi.amplitudes()).norm() < 1e-12);
        assert_eq!(rotating_frame(&psi, &ops, 3.3e6, 0.0), psi);
        let e = StateVector::basis(8, 2).unwrap();
        let r = rotating_frame(&e, &ops, 2.0, 0.7);
        let m = 1.5;
        assert!((r.amplitudes()[2] - Complex64::from_polar(1.0, m * 2.0 * 0.7)).norm() < 1e-15);
    }

    fn resonant_ner(two_s: i64) -> (NucleusParams, EfgCoefficients, DriveParams) {
        let n = nucleus(two_s);
        let coeffs = EfgCoefficients { a: 8e19, b: 0.0, c: -2.0e18, b_prime: 0.0 };
        let b0 = 2.0e-3;
        let drive = DriveParams::new(5e-3, n.gamma_n * b0, 0.3, b0);
        (n, coeffs, drive)
    }

    #[test]
    fn ner_evolve_matches_analytic() {
        let (n, coeffs, drive) = resonant_ner(3);
        let ops = n.operators();
        let model = h_ner(&n, &ops, &coeffs, &drive).unwrap().model;
        let psi = StateVector::basis(4, 0).unwrap();
        let t = 4.0e-4;
        let num = evolve(&model, &psi, t, &IntegratorConfig::default()).unwrap();
        let ana = analytic_ner_propagator(&n, &ops, &coeffs, &drive, t).unwrap();
        let expected = ana.lab.apply(&psi).unwrap();
        assert!(1.0 - num.overlap(&expected) < 1e-8);
        assert!(unitarity_residue(ana.lab.matrix()) < 1e-12);
    }

    #[test]
    fn analytic_ner_rejections_and_trivia() {
        let (n, coeffs, drive) = resonant_ner(3);
        let ops = n.operators();
        let off = DriveParams { omega: drive.omega * 1.001, ..drive };
        assert!(matches!(analytic_ner_propagator(&n, &ops, &coeffs, &off, 1e-3), Err(NerError::OffResonance { .. })));
        let u0 = analytic_ner_propagator(&n, &ops, &coeffs, &drive, 0.0).unwrap();
        assert!(max_abs(&(u0.lab.matrix() - CMatrix::identity(4, 4))) < 1e-15);
        let half = NucleusParams::new(SpinQuantum::half(), 0.0, n.gamma_n).unwrap();
        let u = analytic_ner_propagator(&half, &half.operators(), &coeffs, &drive, 0.37).unwrap();
        assert!(max_abs(&(u.rotating.matrix() - CMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn ner_block_structure_for_three_halves() {
        let (n, coeffs, drive) = resonant_ner(3);
        let ops = n.operators();
        let u = analytic_ner_propagator(&n, &ops, &coeffs, &drive, 7.7e-3).unwrap();
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (3, 1)] {
            assert!(u.lab.matrix()[(i, j)].norm() < 1e-14);
        }
    }

    #[test]
    fn single_propagator_pi_pulse_and_sign() {
        let n = nucleus(7);
        let coeffs = EfgCoefficients { a: 8e19, b: 0.0, c: -3e20, b_prime: 5e9 };
        let (b0, e0) = (0.1, 1e6);
        let omega = resonance_omega_single(&n, &coeffs, e0, b0);
        let e_amp = 1e-3;
        let drive = DriveParams::new(e_amp, omega, 0.0, b0).with_static_field(e0);
        let omega_r = rabi_angular_frequency(&n, coeffs.a, e_amp);
        let t_pi = std::f64::consts::PI / omega_r.abs();
        let u = analytic_single_propagator(&n, &coeffs, &drive, t_pi).unwrap();
        let i = Complex64::new(0.0, 1.0);
        let flipped = u.matrix().column(0).into_owned();
        let expected_sign = if omega_r > 0.0 { -i } else { i };
        assert!((flipped[1] - expected_sign).norm() < 1e-12);
        assert!(flipped[0].norm() < 1e-12);
        let u2 = analytic_single_propagator(&n, &coeffs, &drive, 2.0 * t_pi).unwrap();
        assert!(max_abs(&(u2.matrix() + CMatrix::identity(2, 2))) < 1e-12);
        let off = DriveParams { omega: omega + 1.0e3, ..drive };
        assert!(analytic_single_propagator(&n, &coeffs, &off, t_pi).is_err());
    }

    #[test]
    fn rotating_hamiltonian_restricted_matches_rotation() {
        let n = nucleus(5);
        let ops = n.operators();
        let coeffs = EfgCoefficients { a: 8e19, b: 0.0, c: -3e20, b_prime: 0.0 };
        let b0 = 0.05;
        let omega = resonance_omega_single(&n, &coeffs, 0.0, b0);
        let drive = DriveParams::new(2e-3, omega, 1.1, b0);
        let h = rotating_hamiltonian(&n, &ops, &coeffs, &drive).unwrap();
        let block = sub_matrix(&h, &[0, 1]);
        let shift = block[(0, 0)].re;
        assert!((block[(1, 1)].re - shift).abs() < 1e-6 * shift.abs());
        let omega_r = rabi_angular_frequency(&n, coeffs.a, drive.e_amp);
        let expected = qubit_rotation(omega_r * 1e-3, drive.phi);
        let got = expm_hermitian(&(block - CMatrix::identity(2, 2).scale(shift)), 1e-3);
        assert!(max_abs(&(got - expected)) < 1e-9);
    }

    #[test]
    fn leakage_zero_without_drive_and_reports_fidelity() {
        let n = nucleus(7);
        let ops = n.operators();
        let coeffs = EfgCoefficients { a: 8e19, b: 0.0, c: -3e20, b_prime: 0.0 };
        let b0 = 0.01;
        let omega = resonance_omega_single(&n, &coeffs, 0.0, b0);
        let still = DriveParams::new(0.0, omega, 0.0, b0);
        let model = h_single(&n, &ops, &coeffs, &still).unwrap();
        let psi = StateVector::basis(8, 0).unwrap();
        assert_eq!(leakage(&model, &psi, 1e-3, &IntegratorConfig::default()).unwrap(), 0.0);

        let drive = DriveParams::new(1e-3, omega, 0.0, b0);
        let h_rot = rotating_hamiltonian(&n, &ops, &coeffs, &drive).unwrap();
        let model = HamiltonianModel::constant(h_rot);
        let t = std::f64::consts::PI / rabi_angular_frequency(&n, coeffs.a, drive.e_amp).abs();
        let expected = analytic_subspace_state(&n, &coeffs, &drive, &psi, t, None).unwrap();
        let report = subspace_report(&model, &psi, t, &IntegratorConfig::default(), &expected).unwrap();
        assert!(report.leakage < 1e-4);
        assert!(report.fidelity > 1.0 - 1e-4);
        let outside = StateVector::basis(8, 4).unwrap();
        assert!(leakage(&model, &outside, t, &IntegratorConfig::default()).is_err());
    }

    fn two_qubit_params() -> TwoQubitParams {
        let n1 = nucleus(3);
        let n2 = NucleusParams::new(SpinQuantum::new(3).unwrap(), 3.0e-29, 2.0 * std::f64::consts::PI * 4.1e6).unwrap();
        TwoQubitParams {
            nucleus1: n1,
            nucleus2: n2,
            c1: 1.5e19,
            c2: -2.0e19,
            b_prime1: 4e9,
            b_prime2: 3e9,
            e1: 2e6,
            e2: -1e6,
            j_schedule: JSchedule {
                segments: vec![
                    JSegment { duration: 1.0e-3, j_hz: 120.0 },
                    JSegment { duration: 0.5e-3, j_hz: -40.0 },
                    JSegment { duration: 2.0e-3, j_hz: 300.0 },
                ],
            },
            b0: 0.02,
            frame_omega: None,
        }
    }

    #[test]
    fn factored_two_qubit_matches_full_evolution() {
        let params = two_qubit_params();
        let t = 3.2e-3;
        let model = h_two_model(&params).unwrap();
        let u_lab = numerical_propagator(&model, 0.0, t, &IntegratorConfig::default()).unwrap();
        let u_rot = two_nucleus_to_rotating(u_lab.matrix(), params.nucleus1.s, params.frame(), t);
        let block = sub_matrix(&u_rot, &qubit_pair_indices(params.nucleus1.s));
        let fact = two_qubit_propagator_factored(&params, t).unwrap();
        assert!(max_abs(&(block - fact.product())) < 1e-9);

        let shifted = TwoQubitParams { frame_omega: Some(params.frame() + 2.0e3), ..params.clone() };
        let u_rot = two_nucleus_to_rotating(u_lab.matrix(), shifted.nucleus1.s, shifted.frame(), t);
        let block = sub_matrix(&u_rot, &qubit_pair_indices(shifted.nucleus1.s));
        let fact = two_qubit_propagator_factored(&shifted, t).unwrap();
        assert!(max_abs(&(block - fact.product())) < 1e-9);
    }

    #[test]
    fn coupling_factor_special_cases() {
        let mut params = two_qubit_params();
        params.j_schedule = JSchedule::default();
        let f = two_qubit_propagator_factored(&params, 1e-3).unwrap();
        assert!(max_abs(&(f.u12 - CMatrix::identity(4, 4))) < 1e-15);
        params.j_schedule = JSchedule::constant(250.0, 2e-3);
        let f = two_qubit_propagator_factored(&params, 2e-3).unwrap();
        let q = std::f64::consts::FRAC_PI_4;
        let expected = phase_diag(&[q, -q, -q, q]);
        assert!(max_abs(&(f.u12 - expected)) < 1e-12);
        params.nucleus2 = nucleus(5);
        assert!(two_qubit_propagator_factored(&params, 1e-3).is_err());
    }
}
