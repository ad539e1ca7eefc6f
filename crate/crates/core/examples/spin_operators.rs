//! Spin matrices, the quadrupole drive operators and the qubit subspace.

use ner::spinops::{make_spin_operators, project_qubit_subspace, SpinQuantum};

fn main() -> ner::Result<()> {
    for text in ["1/2", "1", "3/2", "7/2"] {
        let s: SpinQuantum = text.parse()?;
        let ops = make_spin_operators(s);
        let m: Vec<String> = (0..s.dim()).map(|k| s.m_label(k)).collect();
        let dx = ops.drive_x();
        // matrix elements of {Sx, Sz} between neighbouring m levels
        let links: Vec<String> = (0..s.dim() - 1).map(|k| format!("{:.3}", dx[(k, k + 1)].re)).collect();
        println!("S = {s}: m = [{}]", m.join(", "));
        println!("  <m|{{Sx,Sz}}|m-1> = [{}]", links.join(", "));
        if s.two_s() >= 2 {
            let p = project_qubit_subspace(s);
            println!("  {{S, S-1}} block of Sz = {:.1} + sigma_z/2 (shift {})", p.shift, p.shift);
        }
    }
    Ok(())
}
