//! Nuclear spin Hamiltonians.
//!
//! Every matrix here is `H/ħ` in rad/s acting on the dimensionless spin
//! matrices of [`crate::spinops`]. The quadrupole coupling enters through
//! `Q̃ħ = eQ / (2S(2S-1)ħ)`, which carries units of rad s^-1 per V m^-2.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::efg::{EfgCoefficients, EfgTensor};
use crate::error::{NerError, Result};
use crate::hydrogenic::PhysicalConstants;
use crate::spinops::{make_spin_operators, two_spin_embed, SpinOperators, SpinQuantum};
use crate::CMatrix;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NucleusParams {
    pub s: SpinQuantum,
    /// Quadrupole moment, m^2.
    pub q_moment: f64,
    /// Nuclear gyromagnetic ratio, rad s^-1 T^-1.
    pub gamma_n: f64,
    q_tilde_hbar: f64,
}

impl NucleusParams {
    pub fn new(s: SpinQuantum, q_moment: f64, gamma_n: f64) -> Result<Self> {
        Self::with_constants(s, q_moment, gamma_n, &PhysicalConstants::default())
    }

    pub fn with_constants(s: SpinQuantum, q_moment: f64, gamma_n: f64, k: &PhysicalConstants) -> Result<Self> {
        if !q_moment.is_finite() || !gamma_n.is_finite() {
            return Err(NerError::InvalidParameter("nucleus parameters must be finite".into()));
        }
        let two_s = s.two_s() as f64;
        let q_tilde_hbar = if s.two_s() == 1 {
            if q_moment != 0.0 {
                return Err(NerError::QuadrupoleForSpinHalf(q_moment));
            }
            0.0
        } else {
            k.e_charge * q_moment / (two_s * (two_s - 1.0) * k.hbar)
        };
        Ok(Self { s, q_moment, gamma_n, q_tilde_hbar })
    }

    /// `Q̃ħ = eQ / (2S(2S-1)ħ)`; zero for spin 1/2.
    pub fn q_tilde_hbar(&self) -> f64 {
        self.q_tilde_hbar
    }

    pub fn operators(&self) -> SpinOperators {
        make_spin_operators(self.s)
    }

    fn check_ops(&self, ops: &SpinOperators) -> Result<()> {
        if ops.s != self.s {
            return Err(NerError::DimensionMismatch(format!(
                "operators for S = {} used with nucleus of S = {}",
                ops.s, self.s
            )));
        }
        Ok(())
    }
}

/// Applied electric and magnetic fields for a single nucleus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Rotating-field amplitude `E`, V/m.
    pub e_amp: f64,
    /// Drive angular frequency, rad/s.
    pub omega: f64,
    /// Drive phase, rad.
    pub phi: f64,
    /// Static field `E0` along z, V/m.
    pub e0_static: f64,
    /// Static magnetic field along z, T.
    pub b0: f64,
    /// Keep the `-cos φ`, `-sin φ` offsets of `Ẽ(t)` that are normally dropped.
    #[serde(default)]
    pub keep_dc_terms: bool,
}

impl DriveParams {
    pub fn new(e_amp: f64, omega: f64, phi: f64, b0: f64) -> Self {
        Self { e_amp, omega, phi, e0_static: 0.0, b0, keep_dc_terms: false }
    }

    pub fn with_static_field(mut self, e0: f64) -> Self {
        self.e0_static = e0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.e_amp, self.omega, self.phi, self.e0_static, self.b0].iter().all(|v| v.is_finite());
        if !finite {
            return Err(NerError::InvalidParameter("drive parameters must be finite".into()));
        }
        if self.e_amp < 0.0 {
            return Err(NerError::InvalidParameter(format!("drive amplitude must be >= 0, got {}", self.e_amp)));
        }
        if self.e_amp > 0.0 && !(self.omega > 0.0) {
            return Err(NerError::InvalidParameter(format!("drive frequency must be > 0, got {}", self.omega)));
        }
        Ok(())
    }
}

type Generator = dyn Fn(f64) -> CMatrix + Send + Sync;

/// Time-parameterized Hermitian generator `t -> H(t)/ħ` (rad/s).
#[derive(Clone)]
pub struct HamiltonianModel {
    dim: usize,
    generator: Arc<Generator>,
    breakpoints: Vec<f64>,
    time_independent: bool,
}

impl fmt::Debug for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianModel")
            .field("dim", &self.dim)
            .field("breakpoints", &self.breakpoints)
            .field("time_independent", &self.time_independent)
            .finish()
    }
}

impl HamiltonianModel {
    pub fn new<F>(dim: usize, generator: F) -> Self
    where
        F: Fn(f64) -> CMatrix + Send + Sync + 'static,
    {
        Self { dim, generator: Arc::new(generator), breakpoints: Vec::new(), time_independent: false }
    }

    pub fn constant(h: CMatrix) -> Self {
        let dim = h.nrows();
        Self { dim, generator: Arc::new(move |_| h.clone()), breakpoints: Vec::new(), time_independent: true }
    }

    /// Times where `H(t)` may jump; integrators never step across them.
    pub fn with_breakpoints(mut self, mut breakpoints: Vec<f64>) -> Self {
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breakpoints.dedup();
        self.breakpoints = breakpoints;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64) -> CMatrix {
        (self.generator)(t)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    /// Same generator read at `t + offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        let inner = self.generator.clone();
        Self {
            dim: self.dim,
            generator: Arc::new(move |t| inner(t + offset)),
            breakpoints: self.breakpoints.iter().map(|b| b - offset).collect(),
            time_independent: self.time_independent,
        }
    }
}

/// `-(1/2) Q̃ħ Σ_{αβ} g_{αβ} (S_α S_β + S_β S_α)`.
pub fn h_quadrupole(nucleus: &NucleusParams, ops: &SpinOperators, g: &EfgTensor) -> Result<CMatrix> {
    nucleus.check_ops(ops)?;
    let d = ops.dim();
    let mut h = CMatrix::zeros(d, d);
    let coupling = nucleus.q_tilde_hbar();
    if coupling == 0.0 {
        return Ok(h);
    }
    for a in 0..3 {
        for b in 0..3 {
            let gab = g.g[(a, b)];
            if gab == 0.0 {
                continue;
            }
            let (sa, sb) = (ops.component(a), ops.component(b));
            h += (sa * sb + sb * sa) * re(-0.5 * coupling * gab);
        }
    }
    Ok(h)
}

/// `γ_n Σ_α B_α S_α + H_Q`.
pub fn h_total(nucleus: &NucleusParams, ops: &SpinOperators, b_field: [f64; 3], g: &EfgTensor) -> Result<CMatrix> {
    let mut h = h_quadrupole(nucleus, ops, g)?;
    for (axis, b) in b_field.iter().enumerate() {
        if *b != 0.0 {
            h += ops.component(axis) * re(nucleus.gamma_n * b);
        }
    }
    Ok(h)
}

/// `γ_n B0 S_z + 3Q̃ħ (C + B' E0) S_z^2`, diagonal in the `m` basis.
pub fn h_lqse(
    nucleus: &NucleusParams,
    ops: &SpinOperators,
    coeffs: &EfgCoefficients,
    e0: f64,
    b0: f64,
) -> Result<CMatrix> {
    nucleus.check_ops(ops)?;
    let quad = 3.0 * nucleus.q_tilde_hbar() * (coeffs.c + coeffs.b_prime * e0);
    let zeeman = nucleus.gamma_n * b0;
    let diag: Vec<f64> = ops.s.m_values().map(|m| zeeman * m + quad * m * m).collect();
    Ok(crate::spinops::real_diag(&diag))
}

/// Circularly rotating drive on top of a static part:
/// `H0 + a [(cos(ωt+φ) - dc cos φ) {Sx,Sz} + (sin(ωt+φ) - dc sin φ) {Sy,Sz}]`.
#[derive(Debug, Clone)]
pub struct RotatingDrive {
    pub static_part: CMatrix,
    pub drive_x: CMatrix,
    pub drive_y: CMatrix,
    /// `3 Q̃ħ A E`, rad/s.
    pub amplitude: f64,
    pub omega: f64,
    pub phi: f64,
    pub keep_dc_terms: bool,
}

impl RotatingDrive {
    pub fn eval(&self, t: f64) -> CMatrix {
        if self.amplitude == 0.0 {
            return self.static_part.clone();
        }
        let theta = self.omega * t + self.phi;
        let (mut cx, mut cy) = (theta.cos(), theta.sin());
        if self.keep_dc_terms {
            cx -= self.phi.cos();
            cy -= self.phi.sin();
        }
        let mut h = self.static_part.clone();
        h += &self.drive_x * re(self.amplitude * cx);
        h += &self.drive_y * re(self.amplitude * cy);
        h
    }

    pub fn into_model(self) -> HamiltonianModel {
        let dim = self.static_part.nrows();
        if self.amplitude == 0.0 {
            return HamiltonianModel::constant(self.static_part);
        }
        HamiltonianModel::new(dim, move |t| self.eval(t))
    }
}

/// Drive amplitude `3 Q̃ħ A E` in rad/s (coefficient of the anticommutators).
pub fn drive_amplitude(nucleus: &NucleusParams, coeffs: &EfgCoefficients, e_amp: f64) -> f64 {
    3.0 * nucleus.q_tilde_hbar() * coeffs.a * e_amp
}

fn single_nucleus_drive(
    nucleus: &NucleusParams,
    ops: &SpinOperators,
    coeffs: &EfgCoefficients,
    drive: &DriveParams,
) -> Result<RotatingDrive> {
    drive.validate()?;
    let static_part = h_lqse(nucleus, ops, coeffs, drive.e0_static, drive.b0)?;
    Ok(RotatingDrive {
        static_part,
        drive_x: ops.drive_x(),
        drive_y: ops.drive_y(),
        amplitude: drive_amplitude(nucleus, coeffs, drive.e_amp),
        omega: drive.omega,
        phi: drive.phi,
        keep_dc_terms: drive.keep_dc_terms,
    })
}

/// Result of [`h_ner`]; `drive_vanishes` flags spin 1/2, which has no NER.
#[derive(Debug, Clone)]
pub struct NerModel {
    pub model: HamiltonianModel,
    pub drive: RotatingDrive,
    pub drive_vanishes: bool,
}

/// `γ_n B0 S_z + 3Q̃ħ C S_z^2 + 3Q̃ħ A E [{Sx,Sz} cos(ωt+φ) + {Sy,Sz} sin(ωt+φ)]`.
pub fn h_ner(
    nucleus: &NucleusParams,
    ops: &SpinOperators,
    coeffs: &EfgCoefficients,
    drive: &DriveParams,
) -> Result<NerModel> {
    nucleus.check_ops(ops)?;
    if drive.e0_static != 0.0 {
        return Err(NerError::InvalidParameter(
            "h_ner takes the rotating drive only; use h_single for a static E0".into(),
        ));
    }
    let rd = single_nucleus_drive(nucleus, ops, coeffs, drive)?;
    let drive_vanishes = ops.s.two_s() == 1;
    Ok(NerModel { model: rd.clone().into_model(), drive: rd, drive_vanishes })
}

/// Static Stark control plus rotating drive: the `S_z^2` coefficient
/// becomes `3Q̃ħ (C + B' E0)`.
pub fn h_single(
    nucleus: &NucleusParams,
    ops: &SpinOperators,
    coeffs: &EfgCoefficients,
    drive: &DriveParams,
) -> Result<HamiltonianModel> {
    nucleus.check_ops(ops)?;
    Ok(single_nucleus_drive(nucleus, ops, coeffs, drive)?.into_model())
}

/// `ω = γ_n B0 + 3(2S-1) Q̃ħ (C + B' E0)`: the gap between `m = S` and `m = S-1`.
pub fn resonance_omega_single(nucleus: &NucleusParams, coeffs: &EfgCoefficients, e0: f64, b0: f64) -> f64 {
    let two_s = nucleus.s.two_s() as f64;
    nucleus.gamma_n * b0 + 3.0 * (two_s - 1.0) * nucleus.q_tilde_hbar() * (coeffs.c + coeffs.b_prime * e0)
}

/// Subspace Rabi angular frequency `Ω_R = 3√(2S)(2S-1) Q̃ħ A E` (signed).
pub fn rabi_angular_frequency(nucleus: &NucleusParams, a: f64, e_amp: f64) -> f64 {
    let two_s = nucleus.s.two_s() as f64;
    3.0 * two_s.sqrt() * (two_s - 1.0) * nucleus.q_tilde_hbar() * a * e_amp
}

/// One constant-`J` window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JSegment {
    /// s
    pub duration: f64,
    /// Hz
    pub j_hz: f64,
}

/// Piecewise-constant `J(t)` starting at `t = 0`; zero outside the segments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JSchedule {
    pub segments: Vec<JSegment>,
}

impl JSchedule {
    pub fn constant(j_hz: f64, duration: f64) -> Self {
        Self { segments: vec![JSegment { duration, j_hz }] }
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.segments {
            if !(s.duration >= 0.0) || !s.j_hz.is_finite() {
                return Err(NerError::InvalidParameter(format!("bad J segment {s:?}")));
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn j_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let mut start = 0.0;
        for s in &self.segments {
            if t < start + s.duration {
                return s.j_hz;
            }
            start += s.duration;
        }
        0.0
    }

    /// `∫₀ᵗ J dt'`, exact.
    pub fn integral(&self, t: f64) -> f64 {
        let mut start = 0.0;
        let mut acc = 0.0;
        for s in &self.segments {
            if t <= start {
                break;
            }
            acc += s.j_hz * (t.min(start + s.duration) - start);
            start += s.duration;
        }
        acc
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len());
        let mut t = 0.0;
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }
}

/// Two nuclei with static Stark control and J coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitParams {
    pub nucleus1: NucleusParams,
    pub nucleus2: NucleusParams,
    /// V m^-2
    pub c1: f64,
    pub c2: f64,
    /// m^-1
    pub b_prime1: f64,
    pub b_prime2: f64,
    /// Static control fields, V/m.
    pub e1: f64,
    pub e2: f64,
    pub j_schedule: JSchedule,
    /// T
    pub b0: f64,
    /// Angular frequency of the common rotating frame; `None` selects the
    /// `m = S <-> S-1` resonance of nucleus 1 at zero static field.
    pub frame_omega: Option<f64>,
}

impl TwoQubitParams {
    pub fn validate(&self) -> Result<()> {
        if self.nucleus1.s != self.nucleus2.s {
            return Err(NerError::DimensionMismatch(format!(
                "two-nucleus model needs equal spins, got {} and {}",
                self.nucleus1.s, self.nucleus2.s
            )));
        }
        self.j_schedule.validate()
    }

    pub fn coeffs1(&self) -> EfgCoefficients {
        EfgCoefficients { c: self.c1, b_prime: self.b_prime1, ..Default::default() }
    }

    pub fn coeffs2(&self) -> EfgCoefficients {
        EfgCoefficients { c: self.c2, b_prime: self.b_prime2, ..Default::default() }
    }

    /// `γ_1 B0 + 3(2S-1) Q̃₁ħ C₁`.
    pub fn reference_omega(&self) -> f64 {
        resonance_omega_single(&self.nucleus1, &self.coeffs1(), 0.0, self.b0)
    }

    pub fn frame(&self) -> f64 {
        self.frame_omega.unwrap_or_else(|| self.reference_omega())
    }

    pub fn with_fields(&self, e1: f64, e2: f64, j: JSchedule) -> Self {
        Self { e1, e2, j_schedule: j, ..self.clone() }
    }
}

/// Diagonal of the two-nucleus Hamiltonian in the product basis.
fn h_two_diagonal(params: &TwoQubitParams, j_hz: f64) -> Vec<f64> {
    let s = params.nucleus1.s;
    let per_nucleus = |n: &NucleusParams, c: f64, bp: f64, e: f64| -> Vec<f64> {
        let quad = 3.0 * n.q_tilde_hbar() * (c + bp * e);
        s.m_values().map(|m| n.gamma_n * params.b0 * m + quad * m * m).collect()
    };
    let d1 = per_nucleus(&params.nucleus1, params.c1, params.b_prime1, params.e1);
    let d2 = per_nucleus(&params.nucleus2, params.c2, params.b_prime2, params.e2);
    let m: Vec<f64> = s.m_values().collect();
    let coupling = 2.0 * std::f64::consts::PI * j_hz;
    let mut out = Vec::with_capacity(d1.len() * d2.len());
    for (i, a) in d1.iter().enumerate() {
        for (k, b) in d2.iter().enumerate() {
            out.push(a + b + coupling * m[i] * m[k]);
        }
    }
    out
}

/// Two-nucleus Hamiltonian at time `t`:
/// `Σ_i [γ_i B0 S_iz + 3Q̃_iħ (C_i + B'_i E_i) S_iz^2] + 2πJ(t) S_1z S_2z`.
pub fn h_two(params: &TwoQubitParams, t: f64) -> Result<CMatrix> {
    params.validate()?;
    Ok(crate::spinops::real_diag(&h_two_diagonal(params, params.j_schedule.j_at(t))))
}

/// [`h_two`] as a model, with the J switching times as breakpoints.
pub fn h_two_model(params: &TwoQubitParams) -> Result<HamiltonianModel> {
    params.validate()?;
    let p = params.clone();
    let d = p.nucleus1.s.dim();
    let breaks = p.j_schedule.breakpoints();
    Ok(HamiltonianModel::new(d * d, move |t| crate::spinops::real_diag(&h_two_diagonal(&p, p.j_schedule.j_at(t))))
        .with_breakpoints(breaks))
}

/// `S_1z S_2z` embedded in the product space, for reference checks.
pub fn zz_coupling_operator(s: SpinQuantum) -> Result<CMatrix> {
    let ops = make_spin_operators(s);
    two_spin_embed(&ops.sz, &ops.sz)
}
