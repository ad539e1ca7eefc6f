//! Number of coherent flips for hyperfine-Stark control and for NER at 4 V.

use std::f64::consts::TAU;

use ner::hamiltonians::NucleusParams;
use ner::performance::{
    comparison_rows, k_rabi, render_table, reports, scale_by_voltage, IMPROVED_V_RF, REFERENCE_F_RABI_HZ,
    REFERENCE_V_RF,
};
use ner::spinops::SpinQuantum;

fn main() -> ner::Result<()> {
    let sb = NucleusParams::new(SpinQuantum::new(7)?, -4.9e-29, TAU * 5.553e6)?;
    let k = k_rabi(&sb, 8e19)?;
    println!("k_R = {:.4e} Hz per V/m; f_R = 684.2 Hz needs E = {:.3e} V/m", k, REFERENCE_F_RABI_HZ / k);
    println!(
        "f_R at {IMPROVED_V_RF} V instead of {} mV: {} Hz\n",
        REFERENCE_V_RF * 1e3,
        scale_by_voltage(REFERENCE_F_RABI_HZ, REFERENCE_V_RF, IMPROVED_V_RF)?
    );
    print!("{}", render_table(&reports(&comparison_rows()?)?));
    Ok(())
}
