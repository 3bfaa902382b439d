//! Run parameters, the internal unit system, and scenario-file parsing.
//!
//! Internal units are eV, fs and nm throughout. Scenario files are flat
//! `key = value` text with `#` comments; keys are exactly the field names
//! of [`ScenarioConfig`].

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Reduced Planck constant [eV·fs].
pub const HBAR: f64 = 0.658_211_956_9;
/// Electron rest energy [eV].
pub const ELECTRON_REST_ENERGY: f64 = 510_998.95;
/// Speed of light [nm/fs].
pub const SPEED_OF_LIGHT: f64 = 299.792_458;
/// Free electron mass [eV·fs²/nm²].
pub const M0: f64 = ELECTRON_REST_ENERGY / (SPEED_OF_LIGHT * SPEED_OF_LIGHT);

/// The two fixed constants of the internal unit system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitSystem {
    pub hbar: f64,
    pub m0: f64,
}

pub const UNITS: UnitSystem = UnitSystem { hbar: HBAR, m0: M0 };

/// Which velocity field drives the trajectories.
///
/// `Local` is the textbook current `ħ/m Im(Φ*∇Φ)` plus the pointer-coupling
/// currents. In a truncated basis the dipole coupling `αq(x−L/2)` is no
/// longer a multiplication operator, so `Local` does not transport `|Φ|²`
/// exactly. `Conserving` adds the current of the truncated coupling, which
/// restores exact continuity for the simulated dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GuidanceLaw {
    Local,
    Conserving,
}

impl GuidanceLaw {
    pub fn name(self) -> &'static str {
        match self {
            GuidanceLaw::Local => "local",
            GuidanceLaw::Conserving => "conserving",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    /// Well width L [nm], same for both electrons.
    pub well_length: f64,
    /// m_e / m_0.
    pub effective_mass_ratio: f64,
    /// ω_c [rad/fs].
    pub cavity_omega: f64,
    /// α [eV/nm].
    pub coupling_alpha: f64,
    pub n_electron_levels: usize,
    pub n_photon_levels: usize,
    /// Pointer modes run over l = −𝓛..𝓛.
    pub pointer_truncation: usize,
    /// L_y = L_z [nm].
    pub pointer_box_length: f64,
    /// m_y / m_e.
    pub pointer_mass_ratio: f64,
    /// σ_k of the Gaussian pointer packet, in modes.
    pub pointer_packet_width_modes: f64,
    /// μ₀ [nm/eV/fs].
    pub meas_strength: f64,
    /// t₀ [fs].
    pub meas_center_time: f64,
    /// σ_μ [fs].
    pub meas_width: f64,
    pub sim_duration: f64,
    pub dt_coeff: f64,
    pub dt_traj: f64,
    /// Interval between exported samples [fs].
    pub output_cadence: f64,
    pub n_trajectories: usize,
    pub rng_seed: u64,
    pub measurement_enabled: bool,
    pub guidance: GuidanceLaw,
}

impl Default for ScenarioConfig {
    /// Parameter set of the measured two-detector scenario.
    fn default() -> Self {
        ScenarioConfig {
            well_length: 16.0,
            effective_mass_ratio: 0.042,
            cavity_omega: 0.1594,
            coupling_alpha: 6.24e-3,
            n_electron_levels: 2,
            n_photon_levels: 2,
            pointer_truncation: 10,
            pointer_box_length: 1000.0,
            pointer_mass_ratio: 1.0,
            pointer_packet_width_modes: 10f64.sqrt(),
            meas_strength: 200.0,
            meas_center_time: 57.49,
            meas_width: 2.0,
            sim_duration: 115.0,
            dt_coeff: 0.0575,
            dt_traj: 0.115,
            output_cadence: 0.575,
            n_trajectories: 1000,
            rng_seed: 20_250_611,
            measurement_enabled: true,
            guidance: GuidanceLaw::Conserving,
        }
    }
}

/// Every recognised scenario key, in canonical order.
pub const KEYS: &[&str] = &[
    "well_length",
    "effective_mass_ratio",
    "cavity_omega",
    "coupling_alpha",
    "n_electron_levels",
    "n_photon_levels",
    "pointer_truncation",
    "pointer_box_length",
    "pointer_mass_ratio",
    "pointer_packet_width_modes",
    "meas_strength",
    "meas_center_time",
    "meas_width",
    "sim_duration",
    "dt_coeff",
    "dt_traj",
    "output_cadence",
    "n_trajectories",
    "rng_seed",
    "measurement_enabled",
    "guidance",
];

impl ScenarioConfig {
    pub fn measured() -> Self {
        Self::default()
    }

    /// Same physics without pointers, run over four Rabi periods.
    pub fn unmeasured() -> Self {
        ScenarioConfig {
            measurement_enabled: false,
            sim_duration: 460.0,
            ..Self::default()
        }
    }

    /// Electron effective mass [eV·fs²/nm²].
    pub fn electron_mass(&self) -> f64 {
        self.effective_mass_ratio * M0
    }

    pub fn pointer_mass(&self) -> f64 {
        self.pointer_mass_ratio * self.electron_mass()
    }

    /// Initial spatial width of the pointer packet, L_y / (2π σ_k).
    pub fn pointer_sigma0(&self) -> f64 {
        self.pointer_box_length / (2.0 * PI * self.pointer_packet_width_modes)
    }

    /// Pointer truncation actually used: pointers collapse to the single
    /// l = 0 mode when measurement is off.
    pub fn effective_pointer_truncation(&self) -> usize {
        if self.measurement_enabled {
            self.pointer_truncation
        } else {
            0
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.to_path_buf())
            } else {
                Error::Io(e)
            }
        })?;
        Self::parse(&text)
    }

    /// Parse scenario text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("duplicate key `{key}`"),
                });
            }
            cfg.set(key, value.trim()).map_err(|e| match e {
                Error::Parse { reason, .. } => Error::Parse { line: i + 1, reason },
                other => other,
            })?;
            seen.push(key.to_string());
        }
        Ok(cfg)
    }

    /// Apply one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| Error::Parse {
            line: 0,
            reason: format!("override `{assignment}` is not of the form key=value"),
        })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn f(key: &str, v: &str) -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::Parse {
                line: 0,
                reason: format!("`{key}`: `{v}` is not a number"),
            })
        }
        fn u(key: &str, v: &str) -> Result<usize> {
            v.parse::<usize>().map_err(|_| Error::Parse {
                line: 0,
                reason: format!("`{key}`: `{v}` is not a non-negative integer"),
            })
        }
        match key {
            "well_length" => self.well_length = f(key, value)?,
            "effective_mass_ratio" => self.effective_mass_ratio = f(key, value)?,
            "cavity_omega" => self.cavity_omega = f(key, value)?,
            "coupling_alpha" => self.coupling_alpha = f(key, value)?,
            "n_electron_levels" => self.n_electron_levels = u(key, value)?,
            "n_photon_levels" => self.n_photon_levels = u(key, value)?,
            "pointer_truncation" => self.pointer_truncation = u(key, value)?,
            "pointer_box_length" => self.pointer_box_length = f(key, value)?,
            "pointer_mass_ratio" => self.pointer_mass_ratio = f(key, value)?,
            "pointer_packet_width_modes" => self.pointer_packet_width_modes = f(key, value)?,
            "meas_strength" => self.meas_strength = f(key, value)?,
            "meas_center_time" => self.meas_center_time = f(key, value)?,
            "meas_width" => self.meas_width = f(key, value)?,
            "sim_duration" => self.sim_duration = f(key, value)?,
            "dt_coeff" => self.dt_coeff = f(key, value)?,
            "dt_traj" => self.dt_traj = f(key, value)?,
            "output_cadence" => self.output_cadence = f(key, value)?,
            "n_trajectories" => self.n_trajectories = u(key, value)?,
            "rng_seed" => {
                self.rng_seed = value.parse::<u64>().map_err(|_| Error::Parse {
                    line: 0,
                    reason: format!("`rng_seed`: `{value}` is not a 64-bit unsigned integer"),
                })?
            }
            "measurement_enabled" => {
                self.measurement_enabled = match value {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(Error::Parse {
                            line: 0,
                            reason: format!("`measurement_enabled`: `{value}` is not true/false"),
                        })
                    }
                }
            }
            "guidance" => {
                self.guidance = match value {
                    "local" => GuidanceLaw::Local,
                    "conserving" => GuidanceLaw::Conserving,
                    _ => {
                        return Err(Error::Parse {
                            line: 0,
                            reason: format!("`guidance`: `{value}` is not local/conserving"),
                        })
                    }
                }
            }
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Canonical scenario text; parses back to an identical config.
    pub fn to_scenario_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("well_length", format!("{:?}", self.well_length));
        kv("effective_mass_ratio", format!("{:?}", self.effective_mass_ratio));
        kv("cavity_omega", format!("{:?}", self.cavity_omega));
        kv("coupling_alpha", format!("{:?}", self.coupling_alpha));
        kv("n_electron_levels", self.n_electron_levels.to_string());
        kv("n_photon_levels", self.n_photon_levels.to_string());
        kv("pointer_truncation", self.pointer_truncation.to_string());
        kv("pointer_box_length", format!("{:?}", self.pointer_box_length));
        kv("pointer_mass_ratio", format!("{:?}", self.pointer_mass_ratio));
        kv("pointer_packet_width_modes", format!("{:?}", self.pointer_packet_width_modes));
        kv("meas_strength", format!("{:?}", self.meas_strength));
        kv("meas_center_time", format!("{:?}", self.meas_center_time));
        kv("meas_width", format!("{:?}", self.meas_width));
        kv("sim_duration", format!("{:?}", self.sim_duration));
        kv("dt_coeff", format!("{:?}", self.dt_coeff));
        kv("dt_traj", format!("{:?}", self.dt_traj));
        kv("output_cadence", format!("{:?}", self.output_cadence));
        kv("n_trajectories", self.n_trajectories.to_string());
        kv("rng_seed", self.rng_seed.to_string());
        kv("measurement_enabled", self.measurement_enabled.to_string());
        kv("guidance", self.guidance.name().to_string());
        s
    }

    /// SHA-256 of the canonical scenario text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_scenario_string().as_bytes()))
    }

    /// Validate, turning hard errors into `Err`.
    pub fn validated(self) -> Result<(Self, ValidationReport)> {
        let report = validate(&self);
        if let Some((key, reason)) = report.errors.first() {
            return Err(Error::InvalidParameter {
                key,
                reason: reason.clone(),
            });
        }
        Ok((self, report))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    /// Hard errors: (key, reason).
    pub errors: Vec<(&'static str, String)>,
    pub warnings: Vec<String>,
    /// |E₁ − E₀ − ħω_c| / ħω_c.
    pub resonance_detuning: f64,
    /// τ_d = 2 m_y σ₀² / ħ [fs].
    pub dispersion_time: f64,
    pub sigma0: f64,
    /// Packet width at T_sim [nm].
    pub sigma_final: f64,
    /// √(ħ T_sim / 2 m_y) [nm].
    pub diffusion_length: f64,
    /// L_y / σ(T_sim).
    pub box_ratio: f64,
    /// σ(T_sim) / √(ħ T_sim / 2 m_y).
    pub width_ratio: f64,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

const RESONANCE_TOLERANCE: f64 = 0.01;
const HIERARCHY_RATIO: f64 = 10.0;

pub fn validate(cfg: &ScenarioConfig) -> ValidationReport {
    let mut errors: Vec<(&'static str, String)> = Vec::new();
    let positive = [
        ("well_length", cfg.well_length),
        ("effective_mass_ratio", cfg.effective_mass_ratio),
        ("cavity_omega", cfg.cavity_omega),
        ("coupling_alpha", cfg.coupling_alpha),
        ("pointer_box_length", cfg.pointer_box_length),
        ("pointer_mass_ratio", cfg.pointer_mass_ratio),
        ("pointer_packet_width_modes", cfg.pointer_packet_width_modes),
        ("meas_strength", cfg.meas_strength),
        ("meas_center_time", cfg.meas_center_time),
        ("meas_width", cfg.meas_width),
        ("sim_duration", cfg.sim_duration),
        ("dt_coeff", cfg.dt_coeff),
        ("dt_traj", cfg.dt_traj),
        ("output_cadence", cfg.output_cadence),
    ];
    for (key, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            errors.push((key, format!("must be positive and finite, got {v}")));
        }
    }
    let counts = [
        ("n_electron_levels", cfg.n_electron_levels),
        ("n_photon_levels", cfg.n_photon_levels),
        ("pointer_truncation", cfg.pointer_truncation),
        ("n_trajectories", cfg.n_trajectories),
    ];
    for (key, v) in counts {
        if v == 0 {
            errors.push((key, "must be at least 1".into()));
        }
    }
    if errors.is_empty() {
        if cfg.dt_coeff > cfg.dt_traj {
            errors.push(("dt_coeff", "must not exceed dt_traj".into()));
        } else if !is_multiple(cfg.dt_traj, cfg.dt_coeff) {
            errors.push(("dt_traj", "must be an integer multiple of dt_coeff".into()));
        }
        if !is_multiple(cfg.output_cadence, cfg.dt_traj) {
            errors.push(("output_cadence", "must be an integer multiple of dt_traj".into()));
        }
        if cfg.output_cadence > cfg.sim_duration {
            errors.push(("output_cadence", "must not exceed sim_duration".into()));
        }
    }

    let hbar = HBAR;
    let me = cfg.electron_mass();
    let gap = 3.0 * PI * PI * hbar * hbar / (2.0 * me * cfg.well_length.powi(2));
    let photon = hbar * cfg.cavity_omega;
    let resonance_detuning = ((gap - photon) / photon).abs();
    let mut warnings = Vec::new();
    if !(resonance_detuning <= RESONANCE_TOLERANCE) {
        warnings.push(format!(
            "resonance: E1-E0 = {gap:.5} eV vs hbar*omega_c = {photon:.5} eV (detuning {:.2}%)",
            100.0 * resonance_detuning
        ));
    }

    let my = cfg.pointer_mass();
    let sigma0 = cfg.pointer_sigma0();
    let dispersion_time = 2.0 * my * sigma0 * sigma0 / hbar;
    let sigma_final = sigma0 * (1.0 + (cfg.sim_duration / dispersion_time).powi(2)).sqrt();
    let diffusion_length = (hbar * cfg.sim_duration / (2.0 * my)).sqrt();
    let box_ratio = cfg.pointer_box_length / sigma_final;
    let width_ratio = sigma_final / diffusion_length;
    if cfg.measurement_enabled {
        if !(box_ratio >= HIERARCHY_RATIO) {
            warnings.push(format!("pointer hierarchy: L_y/sigma(T) = {box_ratio:.2} < {HIERARCHY_RATIO}"));
        }
        if !(width_ratio >= HIERARCHY_RATIO) {
            warnings.push(format!(
                "pointer hierarchy: sigma(T)/sqrt(hbar T/2m) = {width_ratio:.2} < {HIERARCHY_RATIO}"
            ));
        }
        if cfg.pointer_packet_width_modes > 2.0 * cfg.pointer_truncation as f64 {
            warnings.push("pointer packet wider than the truncated mode range".into());
        }
    }

    ValidationReport {
        errors,
        warnings,
        resonance_detuning,
        dispersion_time,
        sigma0,
        sigma_final,
        diffusion_length,
        box_ratio,
        width_ratio,
    }
}

fn is_multiple(big: f64, small: f64) -> bool {
    let r = big / small;
    (r - r.round()).abs() < 1e-9 * r.max(1.0) && r.round() >= 1.0
}

/// (Ω_R [rad/fs], T_R [fs]) for the two-electron symmetric coupling.
///
/// Ω_R = 2√2 (α/ħ) |⟨φ₀|x|φ₁⟩| |⟨ψ₀|q|ψ₁⟩|: the vacuum Rabi frequency 2g
/// of one emitter, enhanced by √N for N = 2.
pub fn rabi_estimate(cfg: &ScenarioConfig) -> (f64, f64) {
    let x01 = 16.0 * cfg.well_length / (9.0 * PI * PI);
    let q01 = std::f64::consts::FRAC_1_SQRT_2;
    let omega = 2.0 * 2f64.sqrt() * cfg.coupling_alpha / HBAR * x01 * q01;
    (omega, 2.0 * PI / omega)
}
