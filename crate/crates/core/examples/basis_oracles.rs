//! Run the independent oracle battery: closed-form matrix elements against
//! quadrature, dense against matrix-free Hamiltonians, FD derivatives of the
//! wavefield, and the continuity equation for both guidance laws.

use qedbohm::config::ScenarioConfig;
use qedbohm::oracles::{all_pass, oracle_battery};

fn main() -> qedbohm::Result<()> {
    let results = oracle_battery(&ScenarioConfig::default(), None)?;
    for r in &results {
        let tag = if r.informational {
            "info"
        } else if r.pass {
            "ok"
        } else {
            "FAIL"
        };
        println!("{tag:>4}  {:<56} {:.2e}", r.name, r.value);
    }
    println!("all gated oracles pass: {}", all_pass(&results));
    Ok(())
}
