//! Rabi-rate scaling and the number of coherent flips `N_f = T2* · f_R`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{NerError, Result};
use crate::hamiltonians::NucleusParams;
use crate::hydrogenic::PhysicalConstants;

/// Measured Rabi frequency of the reference experiment, Hz.
pub const REFERENCE_F_RABI_HZ: f64 = 684.2;
/// Drive voltage of the reference experiment, V.
pub const REFERENCE_V_RF: f64 = 0.020;
/// Reachable drive voltage, V.
pub const IMPROVED_V_RF: f64 = 4.0;
/// Coherence time of the reference experiment, s.
pub const REFERENCE_T2_STAR_S: f64 = 92e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    /// s
    pub t2_star: f64,
    /// Hz
    pub f_rabi: f64,
    pub n_flips: f64,
    pub method_label: String,
}

impl PerformanceReport {
    pub fn new(method_label: impl Into<String>, t2_star: f64, f_rabi: f64) -> Result<Self> {
        Ok(Self { t2_star, f_rabi, n_flips: number_of_flips(t2_star, f_rabi)?, method_label: method_label.into() })
    }

    /// `N_f` rounded to two decimals.
    pub fn n_flips_rounded(&self) -> f64 {
        (self.n_flips * 100.0).round() / 100.0
    }
}

/// `k_R = |3eQA / (2π √(2S) ħ)|`, Hz per V/m.
pub fn k_rabi(nucleus: &NucleusParams, a_coeff: f64) -> Result<f64> {
    k_rabi_with(nucleus, a_coeff, &PhysicalConstants::default())
}

pub fn k_rabi_with(nucleus: &NucleusParams, a_coeff: f64, k: &PhysicalConstants) -> Result<f64> {
    if nucleus.s.two_s() < 2 {
        return Err(NerError::NoDrive("spin 1/2 has no quadrupole coupling".into()));
    }
    let two_s = nucleus.s.two_s() as f64;
    Ok((3.0 * k.e_charge * nucleus.q_moment * a_coeff / (2.0 * PI * two_s.sqrt() * k.hbar)).abs())
}

/// Rabi frequency at a new drive voltage: `f · v_new / v_ref`.
pub fn scale_by_voltage(f_rabi: f64, v_ref: f64, v_new: f64) -> Result<f64> {
    if !(v_ref > 0.0) {
        return Err(NerError::InvalidParameter(format!("reference voltage must be > 0, got {v_ref}")));
    }
    Ok(f_rabi * (v_new / v_ref))
}

pub fn number_of_flips(t2_star: f64, f_rabi: f64) -> Result<f64> {
    if !(t2_star >= 0.0) || !(f_rabi >= 0.0) {
        return Err(NerError::InvalidParameter(format!("T2* and f_R must be >= 0, got {t2_star} s and {f_rabi} Hz")));
    }
    Ok(t2_star * f_rabi)
}

/// One input row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method_label: String,
    pub t2_star_s: f64,
    pub f_rabi_hz: f64,
}

/// Published hyperfine-Stark rows plus the NER row, whose Rabi frequency is
/// the reference value scaled from 20 mV to 4 V.
pub fn comparison_rows() -> Result<Vec<TableRow>> {
    let f_ner = scale_by_voltage(REFERENCE_F_RABI_HZ, REFERENCE_V_RF, IMPROVED_V_RF)?;
    Ok(vec![
        TableRow { method_label: "ENMHSE (Tb)".into(), t2_star_s: 0.064e-3, f_rabi_hz: 180.8e3 },
        TableRow { method_label: "ENMHSE (P)".into(), t2_star_s: 0.97e-3, f_rabi_hz: 5e3 },
        TableRow { method_label: "NER (Sb)".into(), t2_star_s: REFERENCE_T2_STAR_S, f_rabi_hz: f_ner },
    ])
}

pub fn reports(rows: &[TableRow]) -> Result<Vec<PerformanceReport>> {
    rows.iter().map(|r| PerformanceReport::new(r.method_label.clone(), r.t2_star_s, r.f_rabi_hz)).collect()
}

/// Aligned text table: method, T2* in ms, f_R in kHz, N_f to two decimals.
pub fn render_table(reports: &[PerformanceReport]) -> String {
    let width = reports.iter().map(|r| r.method_label.len()).max().unwrap_or(0).max("method".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>10}  {:>10}  {:>12}", "method", "T2*/ms", "f_R/kHz", "N_f");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:>10}  {:>10}  {:>12.2}",
            r.method_label,
            trim(r.t2_star * 1e3),
            trim(r.f_rabi * 1e-3),
            r.n_flips_rounded()
        );
    }
    out
}

fn trim(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}
