//! Size of the terms dropped from the minimal-coupling Hamiltonian: the A²
//! diagonal shift, the dipole self-energy and the direct electron–electron
//! exchange rate compared with the photon-mediated Rabi rate.

use qedbohm::basis::Bases;
use qedbohm::config::ScenarioConfig;
use qedbohm::hamiltonian::correction_report;

fn main() {
    let cfg = ScenarioConfig::default();
    let r = correction_report(&cfg, &Bases::new(&cfg));
    println!("ħω_c                      {:.5} eV", r.photon_energy);
    println!(
        "A² shift                  {:.3e} eV ({:.2e} ħω_c)",
        r.diag_shift_quadratic,
        r.diag_shift_quadratic / r.photon_energy
    );
    println!(
        "dipole self-energy        {:.3e} eV ({:.2e} ħω_c)",
        r.diag_shift_dipole,
        r.diag_shift_dipole / r.photon_energy
    );
    println!("Ω_xx                      {:.3e} rad/fs", r.omega_xx);
    println!("τ_xx/τ_R (single-electron) {:.3}", r.tau_ratio);
    println!("Ω_R/Ω_xx (collective)     {:.3}", r.collective_ratio);
    println!("negligible                {}", r.negligible);
}
