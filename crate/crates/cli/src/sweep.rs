//! One-axis parameter scans: run each grid point through the single-run
//! pipeline on a worker pool and collect a deterministic summary table.
//!
//! Points are independent and single-threaded; the pool only distributes
//! whole points, and results are collected in grid order, so the summary
//! CSV is identical for any worker count. A point that fails records its
//! error in its own row instead of aborting the scan.

use rayon::prelude::*;

use crate::config::{apply_axis, SweepConfig};
use crate::runner::{self, RunError};

/// Per-point scalar summary pulled from the run analysis.
#[derive(Debug, Clone)]
pub struct PointSummary {
    pub f_mag_initial: f64,
    pub dominant_r: f64,
    pub dominant_omega: f64,
    pub residual: f64,
}

/// One grid point: its axis value and either a summary or an error.
#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub value: f64,
    pub summary: Result<PointSummary, String>,
}

/// Run the scan. `workers_override` (from `--workers`) takes precedence
/// over the config; 0 means one thread per core.
pub fn execute(
    cfg: &SweepConfig,
    workers_override: Option<usize>,
) -> Result<Vec<PointOutcome>, RunError> {
    cfg.base.validate().map_err(RunError::Validation)?;
    // Surface a bad axis name before spending any integration time.
    let mut probe = cfg.base.clone();
    apply_axis(&mut probe, &cfg.sweep.axis, 1.0).map_err(RunError::Validation)?;
    if cfg.sweep.values.iter().any(|v| !v.is_finite()) {
        return Err(RunError::Validation(
            "sweep.values must all be finite".into(),
        ));
    }

    let mut values = cfg.sweep.values.clone();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));

    let run_point = |&value: &f64| -> PointOutcome {
        let summary = point_summary(cfg, value);
        PointOutcome { value, summary }
    };

    let workers = workers_override.unwrap_or(cfg.sweep.workers);
    let outcomes = if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| RunError::Validation(format!("worker pool: {e}")))?;
        pool.install(|| values.par_iter().map(run_point).collect())
    } else {
        values.par_iter().map(run_point).collect()
    };
    Ok(outcomes)
}

fn point_summary(cfg: &SweepConfig, value: f64) -> Result<PointSummary, String> {
    let mut point = cfg.base.clone();
    apply_axis(&mut point, &cfg.sweep.axis, value)?;
    // The summary columns come from the mode fit, so it is not optional
    // on scan points.
    point.analysis.extract_modes = true;
    let out = runner::execute(&point).map_err(|e| e.to_string())?;
    let modes = out
        .analysis
        .modes
        .as_ref()
        .ok_or_else(|| "mode extraction produced no report".to_string())?;
    Ok(PointSummary {
        f_mag_initial: out.analysis.f_mag_initial,
        dominant_r: modes.dominant_r,
        dominant_omega: modes.dominant_omega,
        residual: modes.modes.first().map_or(0.0, |m| m.residual),
    })
}

/// Render the summary CSV. Error messages are flattened onto one line
/// with commas replaced so the row count always matches the grid.
pub fn summary_csv(axis: &str, outcomes: &[PointOutcome]) -> String {
    let mut out = format!(
        "{axis},status,f_mag_initial,dominant_r,dominant_omega,residual,error\n"
    );
    for o in outcomes {
        match &o.summary {
            Ok(s) => {
                out.push_str(&format!(
                    "{},ok,{},{},{},{},\n",
                    o.value, s.f_mag_initial, s.dominant_r, s.dominant_omega, s.residual
                ));
            }
            Err(e) => {
                let msg: String = e
                    .chars()
                    .map(|c| match c {
                        ',' | '\n' | '\r' => ';',
                        c => c,
                    })
                    .collect();
                out.push_str(&format!("{},error,,,,,{msg}\n", o.value));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SweepConfig;

    fn tiny_sweep(values: &str) -> SweepConfig {
        SweepConfig::from_toml(&format!(
            r#"
[sweep]
axis = "gamma_over_omega"
values = {values}

[base]
engine = "meanfield"
seed = 4
[base.physics]
nuclear_i = 0.5
gamma_over_omega = 1.0
beta = 1.0
theta_y_mean = 0.5
[base.numerics]
t_end = 40.0
sample_dt = 0.2
[base.analysis]
fit_start = 1.0
max_order = 6
"#
        ))
        .unwrap()
    }

    #[test]
    fn points_come_back_sorted_and_summarized() {
        let cfg = tiny_sweep("[30.0, 10.0]");
        let rows = execute(&cfg, Some(2)).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].value < rows[1].value);
        for row in &rows {
            let s = row.summary.as_ref().unwrap();
            assert!(s.dominant_r > 0.0);
            assert!(s.f_mag_initial > 0.0);
        }
        // Stronger exchange relaxes the surviving mode more slowly.
        let r10 = rows[0].summary.as_ref().unwrap().dominant_r;
        let r30 = rows[1].summary.as_ref().unwrap().dominant_r;
        assert!(r30 < r10, "R(30)={r30} !< R(10)={r10}");
    }

    #[test]
    fn worker_count_does_not_change_the_csv() {
        let cfg = tiny_sweep("[10.0, 20.0, 30.0]");
        let a = summary_csv("gamma_over_omega", &execute(&cfg, Some(1)).unwrap());
        let b = summary_csv("gamma_over_omega", &execute(&cfg, Some(3)).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 4);
        assert!(a.starts_with("gamma_over_omega,status,"));
    }

    #[test]
    fn empty_grid_yields_header_only() {
        let cfg = tiny_sweep("[]");
        let rows = execute(&cfg, None).unwrap();
        assert!(rows.is_empty());
        let csv = summary_csv("gamma_over_omega", &rows);
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn failing_point_is_recorded_in_row() {
        let mut cfg = tiny_sweep("[10.0, -1.0]");
        cfg.sweep.axis = "beta".into();
        let rows = execute(&cfg, None).unwrap();
        assert_eq!(rows.len(), 2);
        let err = rows[0].summary.as_ref().unwrap_err();
        assert!(err.contains("beta"), "unexpected message: {err}");
        assert!(rows[1].summary.is_ok());
        let csv = summary_csv("beta", &rows);
        assert!(csv.contains(",error,"));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn bad_axis_is_rejected_up_front() {
        let mut cfg = tiny_sweep("[1.0]");
        cfg.sweep.axis = "bogus".into();
        let err = execute(&cfg, None).unwrap_err();
        assert!(matches!(err, RunError::Validation(_)));
    }
}
