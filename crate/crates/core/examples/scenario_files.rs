//! Loads a bundled scenario and runs a command on it without touching disk.

use std::path::Path;

use histkit::cli::{execute, Command};
use histkit::scenario::parse_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/energy_window.toml");
    let scenario = parse_scenario(&path)?;
    let out = execute(Command::Probabilities, &scenario).map_err(|f| format!("{f:?}"))?;
    print!("{}", out.report.render());
    for (name, table) in &out.tables {
        println!("--- {name}");
        print!("{}", table.render());
    }
    Ok(())
}
