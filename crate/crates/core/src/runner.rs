//! Config-driven experiment runner behind the `ner` binary.
//!
//! A run reads one TOML file, executes one subcommand and writes flat files
//! into the output directory. Every section of the config is optional;
//! each subcommand checks for the sections it needs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::{
    analytic_subspace_state, evolve_trajectory, leakage_of, numerical_propagator, qubit_pair_indices, qubit_rotation,
    rotating_hamiltonian, two_nucleus_to_rotating, two_qubit_propagator_factored, IntegratorConfig, StateVector,
    RESONANCE_REL_TOL,
};
use crate::efg::{
    coefficient_a, coefficient_b, coefficient_b_prime, coefficient_c, efg_static, estimate_a_rough, EfgCoefficients,
};
use crate::error::{ErrorClass, NerError, Result};
use crate::gates::{
    cz_matrix, ideal_report, pulse_for_rotation, rotation_report, simulated_report, synthesize_cnot, synthesize_cz,
    target_matrix, GateSchedule, QubitDrive, Segment, SegmentKind, SimulationSpace,
};
use crate::hamiltonians::{
    h_single, h_two_model, rabi_angular_frequency, resonance_omega_single, DriveParams, HamiltonianModel, JSchedule,
    JSegment, NucleusParams, TwoQubitParams,
};
use crate::hydrogenic::{AtomModel, Orbital, PhysicalConstants};
use crate::linalg::{max_abs, sub_matrix};
use crate::performance::{comparison_rows, render_table, reports, TableRow};
use crate::spinops::SpinQuantum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Gate,
    Efg,
    Perf,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Gate => "gate",
            Command::Efg => "efg",
            Command::Perf => "perf",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

impl FromStr for OutputFormat {
    type Err = NerError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            other => Err(NerError::Config(format!("unknown output format `{other}` (csv, json, both)"))),
        }
    }
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub nucleus: Option<NucleusConfig>,
    pub field: Option<FieldConfig>,
    pub efg: Option<EfgConfig>,
    pub pulse: Option<PulseConfig>,
    pub two_qubit: Option<TwoQubitConfig>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub output: OutputSection,
    pub simulate: Option<SimulateSection>,
    pub sweep: Option<SweepSection>,
    pub perf: Option<PerfSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NucleusConfig {
    /// `"7/2"` or `"1"`.
    pub spin: String,
    pub q_moment_m2: f64,
    #[serde(rename = "gamma_rad_s_T")]
    pub gamma_rad_s_t: f64,
}

impl NucleusConfig {
    fn build(&self) -> Result<NucleusParams> {
        let s: SpinQuantum = self.spin.parse()?;
        NucleusParams::new(s, self.q_moment_m2, self.gamma_rad_s_t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmegaSpec {
    Auto,
    Value(f64),
}

impl<'de> Deserialize<'de> for OmegaSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(OmegaSpec::Value(x)),
            Raw::Text(t) if t == "auto" => Ok(OmegaSpec::Auto),
            Raw::Text(t) => {
                Err(serde::de::Error::custom(format!("omega_rad_s must be a number or \"auto\", got `{t}`")))
            }
        }
    }
}

fn default_auto() -> OmegaSpec {
    OmegaSpec::Auto
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(rename = "b0_T")]
    pub b0_t: f64,
    #[serde(rename = "e_amp_V_m", default)]
    pub e_amp_v_m: f64,
    #[serde(default = "default_auto")]
    pub omega_rad_s: OmegaSpec,
    #[serde(default)]
    pub phi_rad: f64,
    #[serde(rename = "e0_V_m", default)]
    pub e0_v_m: f64,
    #[serde(default)]
    pub keep_dc_terms: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum EfgConfig {
    Given {
        a_per_m: f64,
        #[serde(default)]
        b_per_m: f64,
        #[serde(rename = "c_V_m2")]
        c_v_m2: f64,
        #[serde(default)]
        bprime_per_m: f64,
    },
    Hydrogenic(HydrogenicConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydrogenicConfig {
    pub z_atomic: u32,
    pub electrons: Vec<ElectronConfig>,
    #[serde(default = "default_n_prime_max")]
    pub n_prime_max: u32,
    /// Drive frequency for A and B; falls back to a numeric `field.omega_rad_s`.
    pub omega_rad_s: Option<f64>,
    #[serde(rename = "gamma_e_rad_s_T", default)]
    pub gamma_e_rad_s_t: f64,
}

fn default_n_prime_max() -> u32 {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectronConfig {
    pub n: u32,
    pub m: i32,
    /// Pure `|n l m>`; exclusive with `components`.
    pub l: Option<u32>,
    pub components: Option<Vec<ComponentConfig>>,
    /// Effective nuclear charge for this electron.
    pub z: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub l: u32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl ElectronConfig {
    fn build(&self) -> Result<Orbital> {
        let orbital = match (self.l, &self.components) {
            (Some(l), None) => Orbital::pure(self.n, l, self.m)?,
            (None, Some(parts)) => {
                let coeffs: BTreeMap<u32, Complex64> =
                    parts.iter().map(|c| (c.l, Complex64::new(c.re, c.im))).collect();
                Orbital::new(self.n, self.m, coeffs)?
            }
            _ => return Err(NerError::Config("each electron needs exactly one of `l` or `components`".into())),
        };
        Ok(match self.z {
            Some(z) => orbital.with_z(z),
            None => orbital,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub angle_rad: Option<f64>,
    pub duration_s: Option<f64>,
    #[serde(default)]
    pub axis_phi_rad: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoQubitConfig {
    pub nucleus2: NucleusConfig,
    #[serde(rename = "c1_V_m2")]
    pub c1_v_m2: f64,
    #[serde(rename = "c2_V_m2")]
    pub c2_v_m2: f64,
    #[serde(default)]
    pub bprime1_per_m: f64,
    #[serde(default)]
    pub bprime2_per_m: f64,
    #[serde(rename = "e1_V_m", default)]
    pub e1_v_m: f64,
    #[serde(rename = "e2_V_m", default)]
    pub e2_v_m: f64,
    #[serde(rename = "j_Hz")]
    pub j_hz: f64,
    #[serde(default = "default_gate")]
    pub gate: String,
    pub a2_per_m: Option<f64>,
    #[serde(rename = "e_amp2_V_m")]
    pub e_amp2_v_m: Option<f64>,
    /// Piecewise-constant J for the factorization check.
    pub schedule: Option<Vec<JSegmentConfig>>,
    pub frame_omega_rad_s: Option<f64>,
}

fn default_gate() -> String {
    "CZ".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JSegmentConfig {
    pub duration_s: f64,
    #[serde(rename = "j_Hz")]
    pub j_hz: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt_max_s: Option<f64>,
    pub tol: Option<f64>,
}

impl IntegratorSection {
    fn build(&self) -> Result<IntegratorConfig> {
        let mut cfg = IntegratorConfig::default();
        if let Some(dt) = self.dt_max_s {
            cfg.dt_max = dt;
        }
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        cfg.validate().map_err(|e| NerError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub formats: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    #[default]
    Lab,
    Rotating,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub t_final_s: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub frame: Frame,
}

fn default_samples() -> usize {
    101
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(rename = "e_amp_V_m")]
    pub e_amp_v_m: Option<Vec<f64>>,
    #[serde(rename = "b0_T")]
    pub b0_t: Option<Vec<f64>>,
    #[serde(rename = "e0_V_m")]
    pub e0_v_m: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfSection {
    pub rows: Vec<PerfRowConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfRowConfig {
    pub method_label: String,
    pub t2_star_s: f64,
    #[serde(rename = "f_rabi_Hz")]
    pub f_rabi_hz: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| NerError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| NerError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn need<'a, T>(section: &'a Option<T>, name: &str, cmd: Command) -> Result<&'a T> {
        section.as_ref().ok_or_else(|| NerError::Config(format!("`{}` needs a [{name}] section", cmd.name())))
    }

    fn formats(&self) -> Result<Option<OutputFormat>> {
        let Some(list) = &self.output.formats else { return Ok(None) };
        let (mut csv, mut json) = (false, false);
        for f in list {
            match f.parse::<OutputFormat>()? {
                OutputFormat::Csv => csv = true,
                OutputFormat::Json => json = true,
                OutputFormat::Both => (csv, json) = (true, true),
            }
        }
        Ok(Some(match (csv, json) {
            (true, false) => OutputFormat::Csv,
            (false, true) => OutputFormat::Json,
            _ => OutputFormat::Both,
        }))
    }
}

fn coefficients(efg: &EfgConfig, field: Option<&FieldConfig>) -> Result<EfgCoefficients> {
    match efg {
        EfgConfig::Given { a_per_m, b_per_m, c_v_m2, bprime_per_m } => {
            Ok(EfgCoefficients { a: *a_per_m, b: *b_per_m, c: *c_v_m2, b_prime: *bprime_per_m })
        }
        EfgConfig::Hydrogenic(h) => {
            let r = hydrogenic_coefficients(h, field)?;
            Ok(r.coeffs)
        }
    }
}

struct HydrogenicResult {
    coeffs: EfgCoefficients,
    omega: Option<f64>,
    b_prime: crate::efg::BPrimeResult,
}

fn hydrogenic_coefficients(h: &HydrogenicConfig, field: Option<&FieldConfig>) -> Result<HydrogenicResult> {
    let electrons = h.electrons.iter().map(ElectronConfig::build).collect::<Result<Vec<_>>>()?;
    let b0 = field.map(|f| f.b0_t).unwrap_or(0.0);
    let atom = AtomModel::new(h.z_atomic, electrons)?.with_field(h.gamma_e_rad_s_t, b0);
    let omega = h.omega_rad_s.or(match field.map(|f| f.omega_rad_s) {
        Some(OmegaSpec::Value(w)) => Some(w),
        _ => None,
    });
    let (a, b) = match omega {
        Some(w) => (coefficient_a(&atom, w)?, coefficient_b(&atom, w)?),
        None => (0.0, 0.0),
    };
    let c = coefficient_c(&atom)?;
    let b_prime = coefficient_b_prime(&atom, h.n_prime_max)?;
    Ok(HydrogenicResult { coeffs: EfgCoefficients { a, b, c, b_prime: b_prime.value }, omega, b_prime })
}

// ---------------------------------------------------------------- running

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    /// Short human-readable summary for stdout.
    pub message: String,
}

struct Output {
    dir: PathBuf,
    format: OutputFormat,
    files: Vec<PathBuf>,
}

impl Output {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| NerError::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }
}

pub fn run(command: Command, config_path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = ExperimentConfig::load(config_path)?;
    run_config(command, &cfg, opts)
}

pub fn run_config(command: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let format = match opts.format {
        Some(f) => f,
        None => cfg.formats()?.unwrap_or_default(),
    };
    fs::create_dir_all(&dir)?;
    let mut out = Output { dir, format, files: Vec::new() };
    let message = match command {
        Command::Simulate => simulate(cfg, &mut out)?,
        Command::Gate => gate(cfg, &mut out)?,
        Command::Efg => efg(cfg, &mut out)?,
        Command::Perf => perf(cfg, &mut out)?,
        Command::Sweep => sweep(cfg, &mut out)?,
    };
    Ok(RunOutcome { files: out.files, message })
}

/// Process exit status for an error: 2 config, 3 physics, 4 numerical.
pub fn exit_code(err: &NerError) -> i32 {
    match err.class() {
        ErrorClass::Config => 2,
        ErrorClass::Physics => 3,
        ErrorClass::Numerical => 4,
    }
}

pub fn class_name(class: ErrorClass) -> &'static str {
    match class {
        ErrorClass::Config => "config",
        ErrorClass::Physics => "physics",
        ErrorClass::Numerical => "numerical",
    }
}

/// `{"error": {"code", "class", "message"}}`.
pub fn error_envelope(err: &NerError) -> String {
    json!({
        "error": {
            "code": err.code(),
            "class": class_name(err.class()),
            "message": err.to_string(),
        }
    })
    .to_string()
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

// ---------------------------------------------------------------- simulate

struct SingleSetup {
    nucleus: NucleusParams,
    coeffs: EfgCoefficients,
    drive: DriveParams,
    resonance: f64,
}

fn single_setup(cfg: &ExperimentConfig, cmd: Command) -> Result<SingleSetup> {
    let nucleus = ExperimentConfig::need(&cfg.nucleus, "nucleus", cmd)?.build()?;
    let field = ExperimentConfig::need(&cfg.field, "field", cmd)?;
    let coeffs = coefficients(ExperimentConfig::need(&cfg.efg, "efg", cmd)?, Some(field))?;
    let resonance = resonance_omega_single(&nucleus, &coeffs, field.e0_v_m, field.b0_t);
    let omega = match field.omega_rad_s {
        OmegaSpec::Auto => resonance,
        OmegaSpec::Value(w) => w,
    };
    let drive = DriveParams {
        e_amp: field.e_amp_v_m,
        omega,
        phi: field.phi_rad,
        e0_static: field.e0_v_m,
        b0: field.b0_t,
        keep_dc_terms: field.keep_dc_terms,
    };
    drive.validate()?;
    if drive.e_amp > 0.0 && nucleus.s.two_s() == 1 {
        return Err(NerError::NoDrive("a spin 1/2 nucleus cannot be driven electrically".into()));
    }
    Ok(SingleSetup { nucleus, coeffs, drive, resonance })
}

fn on_resonance(setup: &SingleSetup) -> bool {
    (setup.drive.omega - setup.resonance).abs() <= RESONANCE_REL_TOL * setup.resonance.abs()
}

/// Rotation angle and duration requested by `[pulse]`.
fn pulse_request(pulse: &PulseConfig, omega_r: f64) -> Result<(f64, f64)> {
    match (pulse.angle_rad, pulse.duration_s) {
        (Some(angle), None) => {
            if omega_r == 0.0 {
                return Err(NerError::NoDrive("drive amplitude or A vanishes".into()));
            }
            Ok((angle, angle.rem_euclid(std::f64::consts::TAU) / omega_r.abs()))
        }
        (None, Some(d)) => {
            if !(d >= 0.0) {
                return Err(NerError::Config(format!("pulse.duration_s must be >= 0, got {d}")));
            }
            Ok((omega_r.abs() * d, d))
        }
        _ => Err(NerError::Config("[pulse] needs exactly one of angle_rad or duration_s".into())),
    }
}

struct Trajectory {
    times: Vec<f64>,
    populations: Vec<Vec<f64>>,
    fidelity: Vec<f64>,
    leakage: Vec<f64>,
}

fn simulate_core(
    setup: &SingleSetup,
    t_final: f64,
    samples: usize,
    frame: Frame,
    icfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if samples < 2 {
        return Err(NerError::Config("simulate.samples must be >= 2".into()));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(NerError::Config(format!("simulation time must be finite and >= 0, got {t_final}")));
    }
    let ops = setup.nucleus.operators();
    let model = match frame {
        Frame::Lab => h_single(&setup.nucleus, &ops, &setup.coeffs, &setup.drive)?,
        Frame::Rotating => {
            HamiltonianModel::constant(rotating_hamiltonian(&setup.nucleus, &ops, &setup.coeffs, &setup.drive)?)
        }
    };
    let psi0 = StateVector::basis(ops.dim(), 0)?;
    let times: Vec<f64> = (0..samples).map(|k| t_final * k as f64 / (samples - 1) as f64).collect();
    let states = evolve_trajectory(&model, &psi0, &times, icfg)?;
    let comparable = on_resonance(setup) && !setup.drive.keep_dc_terms;
    let mut fidelity = Vec::with_capacity(samples);
    for (t, psi) in times.iter().zip(&states) {
        let f = if comparable {
            let frame_ops = matches!(frame, Frame::Lab).then_some(&ops);
            let expected = analytic_subspace_state(&setup.nucleus, &setup.coeffs, &setup.drive, &psi0, *t, frame_ops)?;
            expected.overlap(psi).powi(2)
        } else {
            f64::NAN
        };
        fidelity.push(f);
    }
    Ok(Trajectory {
        leakage: states.iter().map(leakage_of).collect(),
        populations: states.iter().map(|s| s.populations()).collect(),
        fidelity,
        times,
    })
}

fn sim_duration(cfg: &ExperimentConfig, setup: &SingleSetup) -> Result<f64> {
    if let Some(t) = cfg.simulate.as_ref().and_then(|s| s.t_final_s) {
        return Ok(t);
    }
    if let Some(p) = &cfg.pulse {
        let omega_r = rabi_angular_frequency(&setup.nucleus, setup.coeffs.a, setup.drive.e_amp);
        return Ok(pulse_request(p, omega_r)?.1);
    }
    Err(NerError::Config("`simulate` needs simulate.t_final_s or a [pulse] section".into()))
}

fn trajectory_csv(s: SpinQuantum, tr: &Trajectory) -> String {
    let mut out = String::from("t_s");
    for k in 0..s.dim() {
        let _ = write!(out, ",p_m{}", s.m_label(k));
    }
    out.push_str(",fidelity,leakage\n");
    for (i, t) in tr.times.iter().enumerate() {
        out.push_str(&fmt_num(*t));
        for p in &tr.populations[i] {
            out.push(',');
            out.push_str(&fmt_num(*p));
        }
        let _ = writeln!(out, ",{},{}", fmt_num(tr.fidelity[i]), fmt_num(tr.leakage[i]));
    }
    out
}

fn simulate(cfg: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let setup = single_setup(cfg, Command::Simulate)?;
    let icfg = cfg.integrator.build()?;
    let t_final = sim_duration(cfg, &setup)?;
    let section = cfg.simulate.clone().unwrap_or(SimulateSection { t_final_s: None, samples: 101, frame: Frame::Lab });
    let tr = simulate_core(&setup, t_final, section.samples, section.frame, &icfg)?;
    let s = setup.nucleus.s;
    if out.format.csv() {
        out.write("trajectory.csv", &trajectory_csv(s, &tr))?;
    }
    if out.format.json() {
        let labels: Vec<String> = (0..s.dim()).map(|k| s.m_label(k)).collect();
        let rows: Vec<Value> = tr
            .times
            .iter()
            .enumerate()
            .map(|(i, t)| {
                json!({
                    "t_s": t,
                    "populations": tr.populations[i],
                    "fidelity": json_num(tr.fidelity[i]),
                    "leakage": tr.leakage[i],
                })
            })
            .collect();
        out.write_json("trajectory.json", &json!({ "m_labels": labels, "rows": rows }))?;
    }
    let last = tr.times.len() - 1;
    let max_leak = tr.leakage.iter().copied().fold(0.0, f64::max);
    let max_norm_dev = tr.populations.iter().map(|p| (p.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let omega_r = rabi_angular_frequency(&setup.nucleus, setup.coeffs.a, setup.drive.e_amp);
    let summary = json!({
        "subcommand": "simulate",
        "spin": s.to_string(),
        "frame": match section.frame { Frame::Lab => "lab", Frame::Rotating => "rotating" },
        "omega_rad_s": setup.drive.omega,
        "resonance_rad_s": setup.resonance,
        "on_resonance": on_resonance(&setup),
        "rabi_frequency_hz": omega_r.abs() / std::f64::consts::TAU,
        "t_final_s": t_final,
        "samples": tr.times.len(),
        "final_populations": tr.populations[last],
        "final_fidelity": json_num(tr.fidelity[last]),
        "max_leakage": max_leak,
        "max_population_sum_deviation": max_norm_dev,
    });
    out.write_json("summary.json", &summary)?;
    Ok(format!(
        "simulated {} samples to t = {t_final:.6e} s; final p(m=S) = {:.6}, max leakage = {max_leak:.3e}",
        tr.times.len(),
        tr.populations[last][0]
    ))
}

// ---------------------------------------------------------------- gate

fn two_qubit_params(cfg: &ExperimentConfig, tq: &TwoQubitConfig) -> Result<TwoQubitParams> {
    let nucleus1 = ExperimentConfig::need(&cfg.nucleus, "nucleus", Command::Gate)?.build()?;
    let field = ExperimentConfig::need(&cfg.field, "field", Command::Gate)?;
    let j_schedule = JSchedule {
        segments: tq.schedule.iter().flatten().map(|s| JSegment { duration: s.duration_s, j_hz: s.j_hz }).collect(),
    };
    let params = TwoQubitParams {
        nucleus1,
        nucleus2: tq.nucleus2.build()?,
        c1: tq.c1_v_m2,
        c2: tq.c2_v_m2,
        b_prime1: tq.bprime1_per_m,
        b_prime2: tq.bprime2_per_m,
        e1: tq.e1_v_m,
        e2: tq.e2_v_m,
        j_schedule,
        b0: field.b0_t,
        frame_omega: tq.frame_omega_rad_s,
    };
    params.validate()?;
    Ok(params)
}

fn gate(cfg: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let icfg = cfg.integrator.build()?;
    if let Some(tq) = &cfg.two_qubit {
        return two_qubit_gate(cfg, tq, &icfg, out);
    }
    let setup = single_setup(cfg, Command::Gate)?;
    let pulse_cfg = ExperimentConfig::need(&cfg.pulse, "pulse", Command::Gate)?;
    let omega_r = rabi_angular_frequency(&setup.nucleus, setup.coeffs.a, setup.drive.e_amp);
    let (angle, duration) = pulse_request(pulse_cfg, omega_r)?;
    let mut pulse = pulse_for_rotation(
        &setup.nucleus,
        &setup.coeffs,
        setup.drive.b0,
        setup.drive.e0_static,
        setup.drive.e_amp,
        pulse_cfg.axis_phi_rad,
        angle,
    )?;
    pulse.duration = duration;
    pulse.omega = setup.drive.omega;
    let drive = pulse.drive(setup.drive.b0, setup.drive.e0_static);
    let target = qubit_rotation(angle, pulse_cfg.axis_phi_rad);
    let analytic = rotation_report(&setup.nucleus, &setup.coeffs, &drive, duration, &target, None)?;
    let full = rotation_report(&setup.nucleus, &setup.coeffs, &drive, duration, &target, Some(&icfg))?;
    let schedule = GateSchedule {
        target: "ROTATION".into(),
        frame_omega: pulse.omega,
        segments: vec![Segment {
            kind: SegmentKind::Drive1,
            duration,
            e1: setup.drive.e0_static,
            e2: 0.0,
            j_hz: 0.0,
            pulse: Some(pulse),
            rabi_rad_s: omega_r,
        }],
    };
    out.write_json("schedule.json", &schedule)?;
    out.write_json(
        "report.json",
        &json!({
            "subcommand": "gate",
            "target": "ROTATION",
            "angle_rad": angle,
            "axis_phi_rad": pulse_cfg.axis_phi_rad,
            "duration_s": duration,
            "rabi_frequency_hz": omega_r.abs() / std::f64::consts::TAU,
            "analytic": analytic,
            "full_dimensional": full,
        }),
    )?;
    Ok(format!(
        "rotation by {angle:.6} rad: duration {:.6} us, fidelity {:.12} (analytic), {:.12} (full, leakage {:.3e})",
        duration * 1e6,
        analytic.fidelity,
        full.fidelity,
        full.leakage
    ))
}

fn two_qubit_gate(
    cfg: &ExperimentConfig,
    tq: &TwoQubitConfig,
    icfg: &IntegratorConfig,
    out: &mut Output,
) -> Result<String> {
    let params = two_qubit_params(cfg, tq)?;
    let target =
        target_matrix(&tq.gate).ok_or_else(|| NerError::Config(format!("unknown gate `{}` (CZ, CNOT)", tq.gate)))?;
    let schedule = match tq.gate.as_str() {
        "CZ" => synthesize_cz(&params, tq.j_hz)?,
        _ => {
            let (Some(a), Some(e_amp)) = (tq.a2_per_m, tq.e_amp2_v_m) else {
                return Err(NerError::Config("CNOT needs two_qubit.a2_per_m and two_qubit.e_amp2_V_m".into()));
            };
            synthesize_cnot(&params, tq.j_hz, &QubitDrive { a, e_amp })?
        }
    };
    let ideal = ideal_report(&params, &schedule, &target)?;
    let subspace = simulated_report(&params, &schedule, &target, SimulationSpace::Subspace, icfg)?;
    let full = if tq.gate == "CZ" {
        Some(simulated_report(&params, &schedule, &cz_matrix(), SimulationSpace::Full, icfg)?)
    } else {
        None
    };
    let factorization = if params.j_schedule.segments.is_empty() {
        Value::Null
    } else {
        let t = params.j_schedule.total_duration();
        let model = h_two_model(&params)?;
        let u_lab = numerical_propagator(&model, 0.0, t, icfg)?;
        let u_rot = two_nucleus_to_rotating(u_lab.matrix(), params.nucleus1.s, params.frame(), t);
        let block = sub_matrix(&u_rot, &qubit_pair_indices(params.nucleus1.s));
        let fact = two_qubit_propagator_factored(&params, t)?;
        json!({ "duration_s": t, "max_entry_deviation": max_abs(&(block - fact.product())) })
    };
    out.write_json("schedule.json", &schedule)?;
    out.write_json(
        "report.json",
        &json!({
            "subcommand": "gate",
            "target": tq.gate,
            "duration_s": schedule.total_duration(),
            "ideal": ideal,
            "simulated_subspace": subspace,
            "simulated_full": full,
            "factorization_check": factorization,
        }),
    )?;
    Ok(format!(
        "{}: {} segments, duration {:.6e} s, fidelity {:.12} (ideal), {:.12} (simulated)",
        tq.gate,
        schedule.segments.len(),
        schedule.total_duration(),
        ideal.fidelity,
        subspace.fidelity
    ))
}

// ---------------------------------------------------------------- efg

fn efg(cfg: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let efg = ExperimentConfig::need(&cfg.efg, "efg", Command::Efg)?;
    let field = cfg.field.as_ref();
    let e0 = field.map(|f| f.e0_v_m).unwrap_or(0.0);
    let (coeffs, meta) = match efg {
        EfgConfig::Given { .. } => (coefficients(efg, field)?, json!({ "mode": "given" })),
        EfgConfig::Hydrogenic(h) => {
            let r = hydrogenic_coefficients(h, field)?;
            let rough = match r.omega {
                Some(w) => json_num(estimate_a_rough(&PhysicalConstants::default(), w)?),
                None => Value::Null,
            };
            (
                r.coeffs,
                json!({
                    "mode": "hydrogenic",
                    "omega_rad_s": r.omega,
                    "a_rough_per_m": rough,
                    "b_prime_convergence": r.b_prime,
                }),
            )
        }
    };
    let g = efg_static(&coeffs, e0);
    let gm: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| g.g[(i, j)]).collect()).collect();
    out.write_json(
        "efg.json",
        &json!({
            "subcommand": "efg",
            "coefficients": coeffs,
            "metadata": meta,
            "static_tensor": { "e0_V_m": e0, "g_V_m2": gm, "traceless_symmetric": g.satisfies_gauss_law(1e-12) },
        }),
    )?;
    Ok(format!(
        "A = {:.6e} /m, B = {:.6e} /m, C = {:.6e} V/m^2, B' = {:.6e} /m",
        coeffs.a, coeffs.b, coeffs.c, coeffs.b_prime
    ))
}

// ---------------------------------------------------------------- perf

fn perf(cfg: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let rows = match &cfg.perf {
        Some(p) => p
            .rows
            .iter()
            .map(|r| TableRow { method_label: r.method_label.clone(), t2_star_s: r.t2_star_s, f_rabi_hz: r.f_rabi_hz })
            .collect(),
        None => comparison_rows()?,
    };
    let reps = reports(&rows)?;
    let text = render_table(&reps);
    out.write("perf.txt", &text)?;
    let rows_json: Vec<Value> = reps
        .iter()
        .map(|r| {
            json!({
                "method_label": r.method_label,
                "t2_star_s": r.t2_star,
                "f_rabi_hz": r.f_rabi,
                "n_flips": r.n_flips,
                "n_flips_rounded": r.n_flips_rounded(),
            })
        })
        .collect();
    out.write_json("perf.json", &json!({ "subcommand": "perf", "rows": rows_json }))?;
    Ok(text)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    index: usize,
    e_amp_v_m: f64,
    b0_t: f64,
    e0_v_m: f64,
    status: String,
    p_top: f64,
    p_second: f64,
    max_leakage: f64,
    fidelity: f64,
    message: String,
}

fn sweep(cfg: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let field = ExperimentConfig::need(&cfg.field, "field", Command::Sweep)?;
    let grid = ExperimentConfig::need(&cfg.sweep, "sweep", Command::Sweep)?;
    let icfg = cfg.integrator.build()?;
    let pick = |v: &Option<Vec<f64>>, base: f64, name: &str| -> Result<Vec<f64>> {
        match v {
            Some(list) if list.is_empty() => Err(NerError::Config(format!("sweep.{name} is empty"))),
            Some(list) => Ok(list.clone()),
            None => Ok(vec![base]),
        }
    };
    let e_amps = pick(&grid.e_amp_v_m, field.e_amp_v_m, "e_amp_V_m")?;
    let b0s = pick(&grid.b0_t, field.b0_t, "b0_T")?;
    let e0s = pick(&grid.e0_v_m, field.e0_v_m, "e0_V_m")?;
    let mut points = Vec::with_capacity(e_amps.len() * b0s.len() * e0s.len());
    for &e in &e_amps {
        for &b in &b0s {
            for &z in &e0s {
                points.push((e, b, z));
            }
        }
    }
    let section =
        cfg.simulate.clone().unwrap_or(SimulateSection { t_final_s: None, samples: 2, frame: Frame::Rotating });
    let rows: Vec<SweepRow> = points
        .par_iter()
        .enumerate()
        .map(|(index, &(e_amp, b0, e0))| {
            let mut point = cfg.clone();
            if let Some(f) = point.field.as_mut() {
                f.e_amp_v_m = e_amp;
                f.b0_t = b0;
                f.e0_v_m = e0;
            }
            let result = single_setup(&point, Command::Sweep).and_then(|setup| {
                let t = sim_duration(&point, &setup)?;
                simulate_core(&setup, t, section.samples.max(2), section.frame, &icfg)
            });
            match result {
                Ok(tr) => {
                    let last = tr.times.len() - 1;
                    SweepRow {
                        index,
                        e_amp_v_m: e_amp,
                        b0_t: b0,
                        e0_v_m: e0,
                        status: "ok".into(),
                        p_top: tr.populations[last][0],
                        p_second: tr.populations[last].get(1).copied().unwrap_or(f64::NAN),
                        max_leakage: tr.leakage.iter().copied().fold(0.0, f64::max),
                        fidelity: tr.fidelity[last],
                        message: String::new(),
                    }
                }
                Err(err) => SweepRow {
                    index,
                    e_amp_v_m: e_amp,
                    b0_t: b0,
                    e0_v_m: e0,
                    status: err.code().into(),
                    p_top: f64::NAN,
                    p_second: f64::NAN,
                    max_leakage: f64::NAN,
                    fidelity: f64::NAN,
                    message: err.to_string(),
                },
            }
        })
        .collect();
    if out.format.csv() {
        let mut text = String::from("index,e_amp_V_m,b0_T,e0_V_m,status,p_top,p_second,max_leakage,fidelity\n");
        for r in &rows {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{},{},{}",
                r.index,
                fmt_num(r.e_amp_v_m),
                fmt_num(r.b0_t),
                fmt_num(r.e0_v_m),
                r.status,
                fmt_num(r.p_top),
                fmt_num(r.p_second),
                fmt_num(r.max_leakage),
                fmt_num(r.fidelity)
            );
        }
        out.write("sweep.csv", &text)?;
    }
    if out.format.json() {
        let rows_json: Vec<Value> = rows
            .iter()
            .map(|r| {
                json!({
                    "index": r.index,
                    "e_amp_V_m": r.e_amp_v_m,
                    "b0_T": r.b0_t,
                    "e0_V_m": r.e0_v_m,
                    "status": r.status,
                    "p_top": json_num(r.p_top),
                    "p_second": json_num(r.p_second),
                    "max_leakage": json_num(r.max_leakage),
                    "fidelity": json_num(r.fidelity),
                    "message": r.message,
                })
            })
            .collect();
        out.write_json("sweep.json", &json!({ "subcommand": "sweep", "rows": rows_json }))?;
    }
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    Ok(format!("swept {} grid points ({failed} failed)", rows.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[nucleus]
spin = "3/2"
q_moment_m2 = -4.9e-29
gamma_rad_s_T = 3.489e7

[field]
b0_T = 0.002
e_amp_V_m = 5e-3
omega_rad_s = "auto"

[efg]
mode = "given"
a_per_m = 8e19
c_V_m2 = -2e18

[simulate]
t_final_s = 2e-4
samples = 5
frame = "rotating"
"#;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert!(matches!(cfg.field.as_ref().unwrap().omega_rad_s, OmegaSpec::Auto));
        let bad = format!("{BASE}\n[output]\nfoo = 1\n");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        let bad_efg = BASE.replace("c_V_m2 = -2e18", "c_V_m2 = -2e18\nextra = 3");
        assert!(ExperimentConfig::from_toml(&bad_efg).is_err());
        let bad_omega = BASE.replace("\"auto\"", "\"fast\"");
        assert!(ExperimentConfig::from_toml(&bad_omega).is_err());
    }

    #[test]
    fn simulate_writes_normalized_csv() {
        let dir = std::env::temp_dir().join(format!("ner-runner-{}", std::process::id()));
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        let opts = RunOptions { out_dir: Some(dir.clone()), format: Some(OutputFormat::Csv) };
        run_config(Command::Simulate, &cfg, &opts).unwrap();
        let text = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t_s,p_m3/2,p_m1/2,p_m-1/2,p_m-3/2,fidelity,leakage");
        for line in lines {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            let total: f64 = v[1..5].iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(v[5] > 1.0 - 1e-9);
        }
        assert!(dir.join("summary.json").exists());
        assert!(!dir.join("trajectory.json").exists());
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn error_envelope_classes() {
        let err = NerError::StepUnderflow { t: 0.0, dt: 1e-19 };
        let v: Value = serde_json::from_str(&error_envelope(&err)).unwrap();
        assert_eq!(v["error"]["code"], "integrator_stiffness");
        assert_eq!(v["error"]["class"], "numerical");
        assert_eq!(exit_code(&err), 4);
        assert_eq!(exit_code(&NerError::NoDrive("x".into())), 3);
        let spin_half = BASE.replace("\"3/2\"", "\"1/2\"").replace("q_moment_m2 = -4.9e-29", "q_moment_m2 = 0.0");
        let cfg = ExperimentConfig::from_toml(&spin_half).unwrap();
        let err = run_config(
            Command::Simulate,
            &cfg,
            &RunOptions { out_dir: Some(std::env::temp_dir().join("ner-runner-half")), format: None },
        )
        .unwrap_err();
        assert_eq!(exit_code(&err), 3);
    }
}
