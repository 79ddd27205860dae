//! Single-run orchestration: prepare the seeded ensemble, integrate the
//! selected engine, and assemble the trajectory table, analysis report,
//! and manifest echo.
//!
//! CSV layout (fixed, regression-stable): `t` first, ensemble means next
//! (`mean_*`), then the synchronization spread when enabled, then per-atom
//! columns (`atom{k}_*`) when enabled. Engines share the mean-column
//! vocabulary: `s`/`i`/`a` components for the moment and density-matrix
//! engines, `s`/`f` for the reduced model, bare `s` for the closed form.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{Complex, DMatrix, Vector3};
use serde::Serialize;

use spinsync_core::modes::SyncMetric;
use spinsync_core::ops::SpinTriple;
use spinsync_core::{bloch, init, master, meanfield, modes, ops, tops};
use spinsync_core::{
    BlochParams, CouplingMatrix, DensityMatrixState, EnsembleBlochState, Error as CoreError,
    FrequencySpread, MeanFieldParams, ProductOperators, TiltAngles, TopsState,
};

use crate::config::{Analysis, Coupling, Engine, RunConfig};
use crate::output::Table;

/// Failure class, mapped onto process exit codes (validation = 1,
/// numerical = 2).
#[derive(Debug)]
pub enum RunError {
    Validation(String),
    Numerical(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Validation(m) => write!(f, "validation: {m}"),
            RunError::Numerical(m) => write!(f, "numerical: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::InvalidSpin(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::InvalidConfig(_) => RunError::Validation(e.to_string()),
            CoreError::SinkhornNonConvergence { .. }
            | CoreError::StepSizeUnderflow { .. }
            | CoreError::NonFiniteState { .. } => RunError::Numerical(e.to_string()),
        }
    }
}

/// Seed-stream offsets for the independent sampling draws of one run.
const SEED_THETA_Y: u64 = 1;
const SEED_THETA_Z: u64 = 2;
const SEED_PHI_Y: u64 = 3;
const SEED_PHI_Z: u64 = 4;
const SEED_FREQ: u64 = 5;
const SEED_COUPLING: u64 = 6;

/// The seeded ensemble every engine starts from.
pub struct Prepared {
    pub ops: ProductOperators,
    pub rhos: Vec<DMatrix<Complex<f64>>>,
    pub params: BlochParams,
    pub bloch0: EnsembleBlochState,
    pub gamma: f64,
    pub f_mag_initial: f64,
}

/// Build the per-atom density matrices, coupling, and frequencies for a
/// validated config.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared, RunError> {
    let gamma = cfg.validate().map_err(RunError::Validation)?;
    let p = &cfg.physics;
    let n = p.n_atoms;
    let ops = ops::product_operators(p.nuclear_i)?;
    let temp = init::SpinTempConfig::new(p.beta, p.nuclear_i)?;
    let rho0 = init::spin_temperature_state(&temp)?;

    let ty = init::sample_angles(p.theta_y_mean, p.theta_y_sigma, n, cfg.seed.wrapping_add(SEED_THETA_Y));
    let tz = init::sample_angles(p.theta_z_mean, p.theta_z_sigma, n, cfg.seed.wrapping_add(SEED_THETA_Z));
    let py = init::sample_angles(p.phi_y_mean, p.phi_y_sigma, n, cfg.seed.wrapping_add(SEED_PHI_Y));
    let pz = init::sample_angles(p.phi_z_mean, p.phi_z_sigma, n, cfg.seed.wrapping_add(SEED_PHI_Z));
    let rhos = (0..n)
        .map(|k| {
            let angles = TiltAngles {
                theta_y: ty[k],
                theta_z: tz[k],
                phi_y: py[k],
                phi_z: pz[k],
            };
            init::tilt_state(&rho0, &angles, &ops)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let freqs = if p.freq_sigma > 0.0 {
        FrequencySpread::sample(p.omega, p.freq_sigma, n, cfg.seed.wrapping_add(SEED_FREQ))?
    } else {
        FrequencySpread::uniform(p.omega, n)?
    };
    let coupling = match p.coupling {
        Coupling::Uniform => CouplingMatrix::uniform(n, gamma)?,
        Coupling::Random => {
            init::doubly_stochastic(n, cfg.seed.wrapping_add(SEED_COUPLING), p.coupling_tol)?
                .with_gamma(gamma)
        }
    };
    let params = BlochParams::new(coupling, freqs)?;
    let bloch0 = init::bloch_state_from_density(&rhos, &ops)?;
    let f_mag_initial = bloch0.means().f().norm();
    Ok(Prepared {
        ops,
        rhos,
        params,
        bloch0,
        gamma,
        f_mag_initial,
    })
}

/// One damped-exponential term of the fit.
#[derive(Debug, Clone, Serialize)]
pub struct ModeJson {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub amp_re: f64,
    pub amp_im: f64,
    pub residual: f64,
}

/// Mode-fit summary on the ensemble-mean ⟨S_x⟩ series.
#[derive(Debug, Clone, Serialize)]
pub struct ModeReport {
    pub series: String,
    pub fit_start: f64,
    pub sample_dt: f64,
    pub samples: usize,
    /// −Re λ of the dominant (largest-amplitude, non-offset) mode.
    pub dominant_r: f64,
    /// |Im λ| of the same mode.
    pub dominant_omega: f64,
    pub modes: Vec<ModeJson>,
}

/// Synchronization-spread summary.
#[derive(Debug, Clone, Serialize)]
pub struct SyncReport {
    pub threshold: f64,
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_spread: f64,
    pub min: f64,
    /// First sample time at which the spread drops below `threshold`.
    pub time_below_threshold: Option<f64>,
}

/// Drift of the conserved mean total spin along the trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct Conservation {
    pub f_initial: [f64; 3],
    pub max_drift: f64,
}

/// Density-matrix health along a master-engine trajectory (requires
/// retained snapshots).
#[derive(Debug, Clone, Serialize)]
pub struct MasterAudit {
    pub trace_drift_max: f64,
    pub hermiticity_max: f64,
    pub min_eigenvalue: f64,
}

/// Closed-form engine extras: the six predicted eigenvalues/amplitudes.
#[derive(Debug, Clone, Serialize)]
pub struct ExactModeJson {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub amp_re: f64,
    pub amp_im: f64,
}

/// The analysis JSON document.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub engine: &'static str,
    pub seed: u64,
    pub omega: f64,
    pub gamma: f64,
    pub n_atoms: usize,
    /// |mean total spin| of the prepared ensemble.
    pub f_mag_initial: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conservation: Option<Conservation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sync: Option<SyncReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<ModeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_modes: Option<Vec<ExactModeJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_audit: Option<MasterAudit>,
}

/// Everything a run produces, ready for serialization.
pub struct RunOutput {
    pub manifest: RunConfig,
    pub table: Table,
    pub analysis: AnalysisReport,
    pub densities_json: Option<String>,
}

impl RunOutput {
    pub fn analysis_json(&self) -> String {
        serde_json::to_string_pretty(&self.analysis).expect("analysis serializes")
    }

    pub fn manifest_toml(&self) -> Result<String, RunError> {
        self.manifest.to_toml().map_err(RunError::Validation)
    }
}

/// Execute one run end to end (no file I/O).
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    let manifest = cfg.resolved().map_err(RunError::Validation)?;
    let prep = prepare(&manifest)?;
    match manifest.engine {
        Engine::Bloch => run_bloch(&manifest, &prep),
        Engine::Tops => run_tops(&manifest, &prep),
        Engine::Master => run_master(&manifest, &prep),
        Engine::Meanfield => run_meanfield(&manifest, &prep),
    }
}

/// Fit damped exponentials to `series` from `fit_start` on.
fn fit_report(
    times: &[f64],
    series: &[f64],
    a: &Analysis,
    sample_dt: f64,
) -> Result<Option<ModeReport>, RunError> {
    if !a.extract_modes {
        return Ok(None);
    }
    let start = times
        .iter()
        .position(|&t| t >= a.fit_start - 1e-12)
        .unwrap_or(0);
    let window = &series[start..];
    if window.len() < 4 * a.max_order {
        return Err(RunError::Validation(format!(
            "mode fit window holds {} samples but needs at least {}; \
             lower analysis.fit_start or analysis.max_order, or extend t_end",
            window.len(),
            4 * a.max_order
        )));
    }
    let fitted = modes::extract_modes(window, sample_dt, a.max_order)?;
    let (dominant_r, dominant_omega) = modes::dominant_mode(window, sample_dt, a.max_order)?;
    Ok(Some(ModeReport {
        series: "mean_s_x".into(),
        fit_start: times[start],
        sample_dt,
        samples: window.len(),
        dominant_r,
        dominant_omega,
        modes: fitted
            .iter()
            .map(|m| ModeJson {
                lambda_re: m.lambda.re,
                lambda_im: m.lambda.im,
                amp_re: m.amplitude.re,
                amp_im: m.amplitude.im,
                residual: m.residual,
            })
            .collect(),
    }))
}

fn sync_report(metrics: &[SyncMetric<f64>], threshold: f64) -> Option<SyncReport> {
    let first = metrics.first()?;
    let last = metrics.last()?;
    let min = metrics.iter().map(|m| m.spread).fold(f64::INFINITY, f64::min);
    let time_below = metrics
        .iter()
        .find(|m| m.spread < threshold)
        .map(|m| m.t);
    Some(SyncReport {
        threshold,
        initial: first.spread,
        final_spread: last.spread,
        min,
        time_below_threshold: time_below,
    })
}

fn conservation_report(f_series: &[Vector3<f64>]) -> Option<Conservation> {
    let f0 = *f_series.first()?;
    let max_drift = f_series
        .iter()
        .map(|f| (f - f0).norm())
        .fold(0.0, f64::max);
    Some(Conservation {
        f_initial: [f0.x, f0.y, f0.z],
        max_drift,
    })
}

fn triple_header(prefix: &str) -> Vec<String> {
    ["s_x", "s_y", "s_z", "i_x", "i_y", "i_z", "a_x", "a_y", "a_z"]
        .iter()
        .map(|c| format!("{prefix}{c}"))
        .collect()
}

fn push_triple(row: &mut Vec<f64>, t: &SpinTriple<f64>) {
    for k in 0..3 {
        row.push(t.s[k]);
    }
    for k in 0..3 {
        row.push(t.ivec[k]);
    }
    for k in 0..3 {
        row.push(t.a[k]);
    }
}

fn base_report(cfg: &RunConfig, prep: &Prepared) -> AnalysisReport {
    AnalysisReport {
        engine: cfg.engine.name(),
        seed: cfg.seed,
        omega: cfg.physics.omega,
        gamma: prep.gamma,
        n_atoms: cfg.physics.n_atoms,
        f_mag_initial: prep.f_mag_initial,
        conservation: None,
        sync: None,
        modes: None,
        exact_modes: None,
        master_audit: None,
    }
}

fn run_bloch(cfg: &RunConfig, prep: &Prepared) -> Result<RunOutput, RunError> {
    let n = cfg.numerics.clone();
    let traj = bloch::integrate(
        &prep.bloch0,
        &prep.params,
        n.t_end,
        n.sample_dt,
        n.rtol,
        n.atol,
    )?;
    let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
    let means: Vec<SpinTriple<f64>> = traj.iter().map(|s| s.means()).collect();
    let with_sync = cfg.analysis.sync_metric && cfg.physics.n_atoms >= 2;
    let sync = if with_sync {
        Some(modes::sync_spread(&traj)?)
    } else {
        None
    };

    let mut header = vec!["t".to_string()];
    header.extend(triple_header("mean_"));
    if sync.is_some() {
        header.push("sync_spread".into());
    }
    if cfg.output.per_atom {
        for k in 0..cfg.physics.n_atoms {
            header.extend(triple_header(&format!("atom{k}_")));
        }
    }
    let mut table = Table::new(header);
    for (i, st) in traj.iter().enumerate() {
        let mut row = Vec::with_capacity(table.header.len());
        row.push(st.t);
        push_triple(&mut row, &means[i]);
        if let Some(s) = &sync {
            row.push(s[i].spread);
        }
        if cfg.output.per_atom {
            for a in &st.atoms {
                push_triple(&mut row, a);
            }
        }
        table.push(row);
    }

    let series: Vec<f64> = means.iter().map(|m| m.s.x).collect();
    let f_series: Vec<Vector3<f64>> = traj.iter().map(bloch::total_spin).collect();
    let mut analysis = base_report(cfg, prep);
    analysis.conservation = conservation_report(&f_series);
    analysis.sync = sync
        .as_deref()
        .and_then(|m| sync_report(m, cfg.analysis.sync_threshold));
    analysis.modes = fit_report(&times, &series, &cfg.analysis, n.sample_dt)?;
    Ok(RunOutput {
        manifest: cfg.clone(),
        table,
        analysis,
        densities_json: None,
    })
}

fn run_tops(cfg: &RunConfig, prep: &Prepared) -> Result<RunOutput, RunError> {
    let n = cfg.numerics.clone();
    let state0 = TopsState::from_bloch(&prep.bloch0);
    let traj = tops::integrate(
        &state0,
        &prep.params,
        n.t_end,
        n.sample_dt,
        n.rtol,
        n.atol,
    )?;
    let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
    let with_sync = cfg.analysis.sync_metric && cfg.physics.n_atoms >= 2;

    let mut header = vec!["t".to_string()];
    for c in ["s_x", "s_y", "s_z", "f_x", "f_y", "f_z"] {
        header.push(format!("mean_{c}"));
    }
    if with_sync {
        header.push("sync_spread".into());
    }
    if cfg.output.per_atom {
        for k in 0..cfg.physics.n_atoms {
            for c in ["s_x", "s_y", "s_z", "f_x", "f_y", "f_z"] {
                header.push(format!("atom{k}_{c}"));
            }
        }
    }
    let mut table = Table::new(header);
    let mut series = Vec::with_capacity(traj.len());
    let mut f_series = Vec::with_capacity(traj.len());
    let mut sync_metrics = Vec::new();
    for st in &traj {
        let (s_mean, f_mean) = st.means();
        series.push(s_mean.x);
        f_series.push(f_mean);
        let mut row = Vec::with_capacity(table.header.len());
        row.push(st.t);
        for k in 0..3 {
            row.push(s_mean[k]);
        }
        for k in 0..3 {
            row.push(f_mean[k]);
        }
        if with_sync {
            let spread = modes::spread_of(&st.s);
            sync_metrics.push(SyncMetric { t: st.t, spread });
            row.push(spread);
        }
        if cfg.output.per_atom {
            for k in 0..st.len() {
                for c in 0..3 {
                    row.push(st.s[k][c]);
                }
                for c in 0..3 {
                    row.push(st.f[k][c]);
                }
            }
        }
        table.push(row);
    }

    let mut analysis = base_report(cfg, prep);
    analysis.conservation = conservation_report(&f_series);
    analysis.sync = sync_report(&sync_metrics, cfg.analysis.sync_threshold);
    analysis.modes = fit_report(&times, &series, &cfg.analysis, n.sample_dt)?;
    Ok(RunOutput {
        manifest: cfg.clone(),
        table,
        analysis,
        densities_json: None,
    })
}

fn run_master(cfg: &RunConfig, prep: &Prepared) -> Result<RunOutput, RunError> {
    let n = cfg.numerics.clone();
    let state0 = DensityMatrixState::new(prep.rhos.clone(), &prep.ops)?;
    let keep = cfg.output.densities;
    let traj = master::integrate_master(
        &state0,
        &prep.params,
        &prep.ops,
        n.t_end,
        n.sample_dt,
        n.rtol,
        n.atol,
        keep,
    )?;
    let with_sync = cfg.analysis.sync_metric && cfg.physics.n_atoms >= 2;

    let mut header = vec!["t".to_string()];
    header.extend(triple_header("mean_"));
    if with_sync {
        header.push("sync_spread".into());
    }
    if cfg.output.per_atom {
        for k in 0..cfg.physics.n_atoms {
            header.extend(triple_header(&format!("atom{k}_")));
        }
    }
    let mut table = Table::new(header);
    let mut sync_metrics = Vec::new();
    for (i, t) in traj.times.iter().enumerate() {
        let mut row = Vec::with_capacity(table.header.len());
        row.push(*t);
        push_triple(&mut row, &traj.means[i]);
        if with_sync {
            let spins: Vec<Vector3<f64>> = traj.observables[i].iter().map(|o| o.s).collect();
            let spread = modes::spread_of(&spins);
            sync_metrics.push(SyncMetric { t: *t, spread });
            row.push(spread);
        }
        if cfg.output.per_atom {
            for o in &traj.observables[i] {
                push_triple(&mut row, o);
            }
        }
        table.push(row);
    }

    let series: Vec<f64> = traj.means.iter().map(|m| m.s.x).collect();
    let f_series: Vec<Vector3<f64>> = traj.means.iter().map(|m| m.f()).collect();
    let mut analysis = base_report(cfg, prep);
    analysis.conservation = conservation_report(&f_series);
    analysis.sync = sync_report(&sync_metrics, cfg.analysis.sync_threshold);
    analysis.modes = fit_report(&traj.times, &series, &cfg.analysis, n.sample_dt)?;

    let mut densities_json = None;
    if let Some(snaps) = &traj.densities {
        analysis.master_audit = Some(MasterAudit {
            trace_drift_max: snaps.iter().map(|s| s.trace_defect()).fold(0.0, f64::max),
            hermiticity_max: snaps
                .iter()
                .map(|s| s.hermiticity_defect())
                .fold(0.0, f64::max),
            min_eigenvalue: snaps
                .iter()
                .map(|s| s.min_eigenvalue())
                .fold(f64::INFINITY, f64::min),
        });
        densities_json = Some(densities_to_json(&traj.times, snaps));
    }

    Ok(RunOutput {
        manifest: cfg.clone(),
        table,
        analysis,
        densities_json,
    })
}

/// Density snapshots as JSON: per sample, per atom, row-major matrix
/// entries with interleaved re/im parts.
fn densities_to_json(times: &[f64], snaps: &[DensityMatrixState]) -> String {
    #[derive(Serialize)]
    struct Dump<'a> {
        dim: usize,
        n_atoms: usize,
        layout: &'static str,
        times: &'a [f64],
        snapshots: Vec<Vec<f64>>,
    }
    let dump = Dump {
        dim: snaps.first().map_or(0, |s| s.dim()),
        n_atoms: snaps.first().map_or(0, |s| s.len()),
        layout: "per atom, row-major, re/im interleaved",
        times,
        snapshots: snaps
            .iter()
            .map(|s| s.to_flat().iter().copied().collect())
            .collect(),
    };
    serde_json::to_string(&dump).expect("densities serialize")
}

fn run_meanfield(cfg: &RunConfig, prep: &Prepared) -> Result<RunOutput, RunError> {
    let n = cfg.numerics.clone();
    let atom = &prep.bloch0.atoms[0];
    let f = atom.f();
    let f_mag = f.norm();
    let f_dir = if f_mag > 0.0 {
        f / f_mag
    } else {
        Vector3::z()
    };
    let params = MeanFieldParams::new(cfg.physics.omega, prep.gamma, f_mag, f_dir)?;
    let mut t_grid = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * n.sample_dt;
        if t > n.t_end + 1e-12 {
            break;
        }
        t_grid.push(t);
        k += 1;
    }
    let sol = meanfield::meanfield_solution(&atom.s, &atom.a, &params, &t_grid);
    let decomposition = meanfield::mode_decomposition(&atom.s, &atom.a, &params);

    let mut table = Table::new(vec![
        "t".into(),
        "s_x".into(),
        "s_y".into(),
        "s_z".into(),
    ]);
    for (i, t) in t_grid.iter().enumerate() {
        table.push(vec![*t, sol[i].x, sol[i].y, sol[i].z]);
    }

    let series: Vec<f64> = sol.iter().map(|v| v.x).collect();
    let mut analysis = base_report(cfg, prep);
    analysis.modes = fit_report(&t_grid, &series, &cfg.analysis, n.sample_dt)?;
    analysis.exact_modes = Some(
        decomposition
            .lambdas
            .iter()
            .zip(&decomposition.amps)
            .map(|(l, a)| ExactModeJson {
                lambda_re: l.re,
                lambda_im: l.im,
                amp_re: a.re,
                amp_im: a.im,
            })
            .collect(),
    );
    Ok(RunOutput {
        manifest: cfg.clone(),
        table,
        analysis,
        densities_json: None,
    })
}

/// Paths of the artifacts one run writes.
pub struct ArtifactPaths {
    pub trajectory: PathBuf,
    pub analysis: PathBuf,
    pub manifest: PathBuf,
    pub densities: Option<PathBuf>,
}

/// Serialize a run's artifacts under `dir` using the configured prefix.
pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<ArtifactPaths, RunError> {
    let prefix = &out.manifest.output.prefix;
    let io_err = |e: std::io::Error| RunError::Validation(format!("writing artifacts: {e}"));
    let trajectory = crate::output::write_text(
        dir,
        &format!("{prefix}_trajectory.csv"),
        &out.table.to_csv(),
    )
    .map_err(io_err)?;
    let analysis = crate::output::write_text(
        dir,
        &format!("{prefix}_analysis.json"),
        &out.analysis_json(),
    )
    .map_err(io_err)?;
    let manifest = crate::output::write_text(
        dir,
        &format!("{prefix}_manifest.toml"),
        &out.manifest_toml()?,
    )
    .map_err(io_err)?;
    let densities = match &out.densities_json {
        Some(json) => Some(
            crate::output::write_text(dir, &format!("{prefix}_densities.json"), json)
                .map_err(io_err)?,
        ),
        None => None,
    };
    Ok(ArtifactPaths {
        trajectory,
        analysis,
        manifest,
        densities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use approx::assert_abs_diff_eq;

    fn small_run(engine: &str, extra: &str) -> RunConfig {
        RunConfig::from_toml(&format!(
            r#"
engine = "{engine}"
seed = 11
[physics]
nuclear_i = 0.5
gamma_over_omega = 5.0
n_atoms = 3
beta = 0.8
theta_y_mean = 0.6
theta_y_sigma = 0.1
{extra}
[numerics]
t_end = 6.0
sample_dt = 0.05
rtol = 1e-9
atol = 1e-12
[analysis]
max_order = 4
"#
        ))
        .unwrap()
    }

    #[test]
    fn bloch_run_produces_consistent_artifacts() {
        let cfg = small_run("bloch", "");
        let out = execute(&cfg).unwrap();
        // t + 9 means + sync + 3 atoms x 9
        assert_eq!(out.table.header.len(), 1 + 9 + 1 + 27);
        assert_eq!(out.table.header[0], "t");
        assert_eq!(out.table.header[1], "mean_s_x");
        assert_eq!(out.table.rows.len(), 121);
        let cons = out.analysis.conservation.as_ref().unwrap();
        assert!(cons.max_drift < 1e-10, "drift {}", cons.max_drift);
        assert!(out.analysis.modes.is_some());
        assert!(out.analysis.sync.is_some());
        assert!(out.analysis.f_mag_initial > 0.0);
    }

    #[test]
    fn master_matches_bloch_means_for_spin_half() {
        let cfg_b = small_run("bloch", "");
        let cfg_m = small_run("master", "");
        let b = execute(&cfg_b).unwrap();
        let m = execute(&cfg_m).unwrap();
        assert_eq!(b.table.rows.len(), m.table.rows.len());
        for (rb, rm) in b.table.rows.iter().zip(&m.table.rows) {
            for k in 0..10 {
                assert_abs_diff_eq!(rb[k], rm[k], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn meanfield_run_emits_exact_modes() {
        let cfg = RunConfig::from_toml(
            r#"
engine = "meanfield"
[physics]
nuclear_i = 0.5
gamma_over_omega = 40.0
beta = 1.2
theta_y_mean = 0.7853981633974483
[numerics]
t_end = 60.0
sample_dt = 0.2
[analysis]
fit_start = 1.0
"#,
        )
        .unwrap();
        let out = execute(&cfg).unwrap();
        assert_eq!(out.table.header, vec!["t", "s_x", "s_y", "s_z"]);
        let exact = out.analysis.exact_modes.as_ref().unwrap();
        assert_eq!(exact.len(), 6);
        let fit = out.analysis.modes.as_ref().unwrap();
        // Electron-only tilt leaves |<F>| = 0.496; the surviving mode
        // oscillates near omega |<F>|.
        assert!(
            (fit.dominant_omega - 0.496).abs() < 0.02,
            "dominant_omega {}",
            fit.dominant_omega
        );
        assert!(fit.dominant_r > 0.0);
        assert!(out.analysis.sync.is_none());
        assert!(out.analysis.conservation.is_none());
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let cfg = small_run("tops", "");
        let a = execute(&cfg).unwrap();
        let b = execute(&cfg).unwrap();
        assert_eq!(a.table.to_csv(), b.table.to_csv());
        assert_eq!(a.analysis_json(), b.analysis_json());
        assert_eq!(a.manifest_toml().unwrap(), b.manifest_toml().unwrap());
    }

    #[test]
    fn manifest_reingestion_reproduces_the_run() {
        let cfg = small_run("bloch", "");
        let out = execute(&cfg).unwrap();
        let text = out.manifest_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        let out2 = execute(&back).unwrap();
        assert_eq!(out.table.to_csv(), out2.table.to_csv());
    }

    #[test]
    fn densities_dump_only_on_request() {
        let mut cfg = small_run("master", "");
        cfg.numerics.t_end = 1.0;
        let out = execute(&cfg).unwrap();
        assert!(out.densities_json.is_none());
        assert!(out.analysis.master_audit.is_none());
        cfg.output.densities = true;
        let out = execute(&cfg).unwrap();
        let audit = out.analysis.master_audit.as_ref().unwrap();
        assert!(audit.trace_drift_max < 1e-9);
        assert!(audit.min_eigenvalue > -1e-9);
        assert!(out.densities_json.is_some());
    }
}
