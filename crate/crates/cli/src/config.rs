//! Run and sweep configuration: TOML schema, validation, and the resolved
//! manifest echo.
//!
//! Units: `omega` sets the time unit (presets use ω = 1 and specify the
//! exchange rate as `gamma_over_omega`); angles are radians; `freq_sigma`
//! is the absolute standard deviation of the per-atom frequencies in the
//! same units as `omega`.
//!
//! Seed derivation: one run seed fans out to independent sampling streams
//! with fixed offsets (+1 electron y-tilts, +2 electron z-tilts, +3 nuclear
//! y-tilts, +4 nuclear z-tilts, +5 frequencies, +6 coupling), so a manifest
//! re-ingestion reproduces the run bit for bit.

use serde::{Deserialize, Serialize};

/// Which dynamical model a run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Full per-atom moment equations (9 components per atom).
    Bloch,
    /// Closed-form synchronized (single-frequency) solution.
    Meanfield,
    /// Reduced strong-exchange model (6 components per atom).
    Tops,
    /// Per-atom density matrices with collisional coupling.
    Master,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Bloch => "bloch",
            Engine::Meanfield => "meanfield",
            Engine::Tops => "tops",
            Engine::Master => "master",
        }
    }
}

/// How pairwise collision weights are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// All-to-all p = 1/N (the synchronized-ensemble pattern).
    #[default]
    Uniform,
    /// Seeded random doubly stochastic weights.
    Random,
}

/// One simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub engine: Engine,
    #[serde(default)]
    pub seed: u64,
    pub physics: Physics,
    pub numerics: Numerics,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Physical parameters and initial-state distributions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    /// Nuclear spin quantum number I (non-negative half-integer).
    #[serde(default = "default_nuclear_i")]
    pub nuclear_i: f64,
    /// Nominal hyperfine angular frequency ω (the time unit).
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Absolute total exchange rate Γ. Exactly one of `gamma` /
    /// `gamma_over_omega` must be set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Exchange rate as the dimensionless ratio Γ/ω.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_over_omega: Option<f64>,
    /// Atom count N (meanfield requires 1).
    #[serde(default = "default_n_atoms")]
    pub n_atoms: usize,
    /// Inverse spin temperature β of the prepared state (≥ 0).
    #[serde(default)]
    pub beta: f64,
    /// Electron tilt about y: Normal(mean, sigma), radians.
    #[serde(default)]
    pub theta_y_mean: f64,
    #[serde(default)]
    pub theta_y_sigma: f64,
    /// Electron tilt about z.
    #[serde(default)]
    pub theta_z_mean: f64,
    #[serde(default)]
    pub theta_z_sigma: f64,
    /// Nuclear tilt about y.
    #[serde(default)]
    pub phi_y_mean: f64,
    #[serde(default)]
    pub phi_y_sigma: f64,
    /// Nuclear tilt about z.
    #[serde(default)]
    pub phi_z_mean: f64,
    #[serde(default)]
    pub phi_z_sigma: f64,
    /// Standard deviation of the per-atom frequencies ω_n (0 = identical).
    #[serde(default)]
    pub freq_sigma: f64,
    #[serde(default)]
    pub coupling: Coupling,
    /// Doubly-stochastic residual tolerance for random coupling.
    #[serde(default = "default_coupling_tol")]
    pub coupling_tol: f64,
}

/// Integration window and tolerances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub t_end: f64,
    pub sample_dt: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

/// Post-processing switches.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    /// Fit damped exponentials to the ensemble-mean ⟨S_x⟩ series.
    #[serde(default = "default_true")]
    pub extract_modes: bool,
    /// Maximum model order of the fit.
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    /// Discard samples before this time from the fit (skips fast
    /// transients so the slow modes dominate the window).
    #[serde(default)]
    pub fit_start: f64,
    /// Track the electron-spin synchronization spread (ignored for
    /// single-atom runs, where the metric is vacuous).
    #[serde(default = "default_true")]
    pub sync_metric: bool,
    /// Spread level reported as "synchronized" in the analysis summary.
    #[serde(default = "default_sync_threshold")]
    pub sync_threshold: f64,
}

impl Default for Analysis {
    fn default() -> Self {
        Self {
            extract_modes: true,
            max_order: default_max_order(),
            fit_start: 0.0,
            sync_metric: true,
            sync_threshold: default_sync_threshold(),
        }
    }
}

/// Artifact naming and verbosity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// File-name prefix for the emitted artifacts.
    #[serde(default = "default_prefix")]
    pub prefix: String,
    /// Emit per-atom trajectory columns (means are always emitted first).
    #[serde(default = "default_true")]
    pub per_atom: bool,
    /// Master engine only: dump density-matrix snapshots as JSON.
    #[serde(default)]
    pub densities: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            prefix: default_prefix(),
            per_atom: true,
            densities: false,
        }
    }
}

fn default_nuclear_i() -> f64 {
    1.5
}
fn default_omega() -> f64 {
    1.0
}
fn default_n_atoms() -> usize {
    1
}
fn default_coupling_tol() -> f64 {
    1e-10
}
fn default_rtol() -> f64 {
    1e-9
}
fn default_atol() -> f64 {
    1e-12
}
fn default_true() -> bool {
    true
}
fn default_max_order() -> usize {
    6
}
fn default_sync_threshold() -> f64 {
    0.1
}
fn default_prefix() -> String {
    "run".into()
}

impl RunConfig {
    /// Parse from TOML text.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("run config: {e}"))
    }

    /// Validate all fields and return the resolved absolute exchange rate.
    pub fn validate(&self) -> Result<f64, String> {
        let p = &self.physics;
        if !(p.omega > 0.0) || !p.omega.is_finite() {
            return Err(format!(
                "physics.omega must be positive and finite, got {}",
                p.omega
            ));
        }
        let gamma = match (p.gamma, p.gamma_over_omega) {
            (Some(_), Some(_)) => {
                return Err(
                    "physics.gamma and physics.gamma_over_omega are mutually exclusive; \
                     set exactly one"
                        .into(),
                )
            }
            (None, None) => {
                return Err("set one of physics.gamma or physics.gamma_over_omega".into())
            }
            (Some(g), None) => g,
            (None, Some(r)) => r * p.omega,
        };
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(format!(
                "resolved exchange rate must be positive and finite, got {gamma}"
            ));
        }
        if p.nuclear_i < 0.0 || (2.0 * p.nuclear_i).fract() != 0.0 {
            return Err(format!(
                "physics.nuclear_i must be a non-negative half-integer, got {}",
                p.nuclear_i
            ));
        }
        if p.n_atoms == 0 {
            return Err("physics.n_atoms must be at least 1".into());
        }
        if p.beta < 0.0 || !p.beta.is_finite() {
            return Err(format!("physics.beta must be >= 0, got {}", p.beta));
        }
        for (name, v) in [
            ("theta_y_sigma", p.theta_y_sigma),
            ("theta_z_sigma", p.theta_z_sigma),
            ("phi_y_sigma", p.phi_y_sigma),
            ("phi_z_sigma", p.phi_z_sigma),
            ("freq_sigma", p.freq_sigma),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(format!("physics.{name} must be >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("theta_y_mean", p.theta_y_mean),
            ("theta_z_mean", p.theta_z_mean),
            ("phi_y_mean", p.phi_y_mean),
            ("phi_z_mean", p.phi_z_mean),
        ] {
            if !v.is_finite() {
                return Err(format!("physics.{name} must be finite, got {v}"));
            }
        }
        if p.coupling == Coupling::Random && p.n_atoms < 2 {
            return Err("physics.coupling = \"random\" needs n_atoms >= 2".into());
        }
        if !(p.coupling_tol > 0.0) {
            return Err(format!(
                "physics.coupling_tol must be positive, got {}",
                p.coupling_tol
            ));
        }
        match self.engine {
            Engine::Meanfield => {
                if p.n_atoms != 1 {
                    return Err(
                        "engine = \"meanfield\" is the synchronized single-state solution; \
                         set physics.n_atoms = 1"
                            .into(),
                    );
                }
            }
            Engine::Master => {
                let dim = 2.0 * (2.0 * p.nuclear_i + 1.0);
                if dim > 8.0 {
                    return Err(format!(
                        "engine = \"master\" supports nuclear_i <= 3/2 \
                         (product dimension {dim} exceeds 8)"
                    ));
                }
            }
            Engine::Bloch | Engine::Tops => {}
        }
        let n = &self.numerics;
        if !(n.t_end > 0.0) || !n.t_end.is_finite() {
            return Err(format!("numerics.t_end must be positive, got {}", n.t_end));
        }
        if !(n.sample_dt > 0.0) || n.sample_dt > n.t_end {
            return Err(format!(
                "numerics.sample_dt must lie in (0, t_end], got {}",
                n.sample_dt
            ));
        }
        if !(n.rtol > 0.0) || !(n.atol > 0.0) {
            return Err("numerics.rtol and numerics.atol must be positive".into());
        }
        let a = &self.analysis;
        if a.max_order == 0 {
            return Err("analysis.max_order must be at least 1".into());
        }
        if a.fit_start < 0.0 || a.fit_start >= n.t_end {
            return Err(format!(
                "analysis.fit_start must lie in [0, t_end), got {}",
                a.fit_start
            ));
        }
        if !(a.sync_threshold > 0.0) {
            return Err(format!(
                "analysis.sync_threshold must be positive, got {}",
                a.sync_threshold
            ));
        }
        if self.output.prefix.is_empty() {
            return Err("output.prefix must not be empty".into());
        }
        Ok(gamma)
    }

    /// The config echoed into the manifest: exchange rate resolved to its
    /// absolute value so re-ingestion reproduces the identical run.
    pub fn resolved(&self) -> Result<RunConfig, String> {
        let gamma = self.validate()?;
        let mut out = self.clone();
        out.physics.gamma = Some(gamma);
        out.physics.gamma_over_omega = None;
        Ok(out)
    }

    /// Serialize as manifest TOML.
    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string_pretty(self).map_err(|e| format!("manifest serialization: {e}"))
    }
}

/// A one-axis parameter scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub sweep: SweepSpec,
    pub base: RunConfig,
}

/// The scan axis and grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Numeric scalar field to vary; one of: omega, gamma,
    /// gamma_over_omega, beta, freq_sigma, n_atoms, theta_y_mean,
    /// theta_z_mean, phi_y_mean, phi_z_mean, t_end, sample_dt.
    pub axis: String,
    pub values: Vec<f64>,
    /// Worker threads (0 = one per core).
    #[serde(default)]
    pub workers: usize,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("sweep config: {e}"))
    }

    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string_pretty(self).map_err(|e| format!("manifest serialization: {e}"))
    }
}

/// Set `axis` to `value` on a run config. Axis names mirror the TOML
/// field paths.
pub fn apply_axis(cfg: &mut RunConfig, axis: &str, value: f64) -> Result<(), String> {
    if !value.is_finite() {
        return Err(format!("axis value must be finite, got {value}"));
    }
    match axis {
        "omega" => cfg.physics.omega = value,
        "gamma" => {
            cfg.physics.gamma = Some(value);
            cfg.physics.gamma_over_omega = None;
        }
        "gamma_over_omega" => {
            cfg.physics.gamma_over_omega = Some(value);
            cfg.physics.gamma = None;
        }
        "beta" => cfg.physics.beta = value,
        "freq_sigma" => cfg.physics.freq_sigma = value,
        "theta_y_mean" => cfg.physics.theta_y_mean = value,
        "theta_z_mean" => cfg.physics.theta_z_mean = value,
        "phi_y_mean" => cfg.physics.phi_y_mean = value,
        "phi_z_mean" => cfg.physics.phi_z_mean = value,
        "t_end" => cfg.numerics.t_end = value,
        "sample_dt" => cfg.numerics.sample_dt = value,
        "n_atoms" => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(format!("n_atoms axis values must be positive integers, got {value}"));
            }
            cfg.physics.n_atoms = value as usize;
        }
        other => {
            return Err(format!(
                "unknown sweep axis '{other}' (must be a numeric scalar field)"
            ))
        }
    }
    Ok(())
}
