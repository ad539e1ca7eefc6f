//! Drives the config runner from code: every bundled config, written to a
//! temporary directory.

use std::path::Path;

use ner::runner::{run, Command, RunOptions};

fn main() -> ner::Result<()> {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let out = std::env::temp_dir().join("ner-config-runner");
    let jobs = [
        (Command::Simulate, "sb_rabi.toml"),
        (Command::Gate, "sb_pi_pulse.toml"),
        (Command::Gate, "cz.toml"),
        (Command::Gate, "cnot.toml"),
        (Command::Efg, "efg_hydrogen_stark.toml"),
        (Command::Perf, "perf.toml"),
        (Command::Sweep, "sweep.toml"),
    ];
    for (command, file) in jobs {
        let opts = RunOptions { out_dir: Some(out.join(file.trim_end_matches(".toml"))), format: None };
        let outcome = run(command, &configs.join(file), &opts)?;
        println!("{} {file}: {}", command.name(), outcome.message.lines().next().unwrap_or(""));
    }
    println!("outputs under {}", out.display());
    Ok(())
}
