//! Budget subcommand: evaluate the vapor relaxation calculator at a
//! design point and emit a JSON report plus a human-readable table.
//!
//! The config file is optional — with no file the built-in design-point
//! constants are used. Overrides go under `[vapor]` (same field names and
//! units as the constants registry); `[pump]` adds a steady-state
//! polarization estimate and `[pulse]` a fast-burst tip-geometry check.

use serde::{Deserialize, Serialize};

use spinsync_core::budget::{
    default_constants, polarization_from_pumping, pulse_excitation, relaxation_budget,
    Temperature, VaporConfig,
};

use crate::runner::RunError;

/// The budget TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetFile {
    #[serde(default)]
    pub vapor: VaporOverrides,
    pub pump: Option<PumpSpec>,
    pub pulse: Option<PulseSpec>,
}

/// Optional overrides of the vapor design point. Temperature may be given
/// in kelvin or Celsius (not both).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaporOverrides {
    pub n_k: Option<f64>,
    pub n_n2: Option<f64>,
    pub temperature_k: Option<f64>,
    pub temperature_c: Option<f64>,
    pub l: Option<f64>,
    pub d: Option<f64>,
    pub q: Option<f64>,
    pub v_bar: Option<f64>,
    pub v_bar_buff: Option<f64>,
    pub sigma_se: Option<f64>,
    pub sigma_kk: Option<f64>,
    pub sigma_buff: Option<f64>,
    pub dimer_fraction: Option<f64>,
    pub de_s: Option<f64>,
    pub de_t: Option<f64>,
    pub k_t: Option<f64>,
    pub tau_c_inv: Option<f64>,
    pub alpha_s: Option<f64>,
    pub alpha_t: Option<f64>,
    pub omega_q: Option<f64>,
    pub c_j: Option<f64>,
    pub tau_r_inv: Option<f64>,
    pub sigma_v_kk2: Option<f64>,
    pub omega_hf: Option<f64>,
}

/// Pumping rate for the steady-state polarization estimate.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    /// Optical pumping rate, 1/s.
    pub r_p: f64,
}

/// Transverse-burst geometry check.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    /// Burst bandwidth as a multiple of the hyperfine frequency.
    pub omega_b_over_omega_hf: f64,
    /// Gyromagnetic ratio, Hz/G (frequency units, converted internally).
    pub g_s: f64,
    /// Transverse field amplitude, G.
    pub b_perp: f64,
}

impl BudgetFile {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("budget config: {e}"))
    }
}

impl VaporOverrides {
    /// The resolved vapor config: defaults with these overrides applied.
    pub fn apply(&self) -> Result<VaporConfig, String> {
        let mut cfg = VaporConfig::default();
        match (self.temperature_k, self.temperature_c) {
            (Some(_), Some(_)) => {
                return Err(
                    "vapor.temperature_k and vapor.temperature_c are mutually exclusive".into(),
                )
            }
            (Some(k), None) => cfg.temperature_k = Temperature::Kelvin(k).kelvin(),
            (None, Some(c)) => cfg.temperature_k = Temperature::Celsius(c).kelvin(),
            (None, None) => {}
        }
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        set!(
            n_k, n_n2, l, d, q, v_bar, v_bar_buff, sigma_se, sigma_kk, sigma_buff,
            dimer_fraction, de_s, de_t, k_t, tau_c_inv, alpha_s, alpha_t, omega_q, c_j,
            tau_r_inv, sigma_v_kk2, omega_hf
        );
        Ok(cfg)
    }
}

/// The resolved inputs echoed into the report.
#[derive(Debug, Clone, Serialize)]
pub struct VaporEcho {
    pub n_k: f64,
    pub n_n2: f64,
    pub temperature_k: f64,
    pub l: f64,
    pub d: f64,
    pub q: f64,
    pub v_bar: f64,
    pub v_bar_buff: f64,
    pub sigma_se: f64,
    pub sigma_kk: f64,
    pub sigma_buff: f64,
    pub dimer_fraction: f64,
    pub de_s: f64,
    pub de_t: f64,
    pub k_t: f64,
    pub tau_c_inv: f64,
    pub alpha_s: f64,
    pub alpha_t: f64,
    pub omega_q: f64,
    pub c_j: f64,
    pub tau_r_inv: f64,
    pub sigma_v_kk2: f64,
    pub omega_hf: f64,
}

impl From<&VaporConfig> for VaporEcho {
    fn from(c: &VaporConfig) -> Self {
        VaporEcho {
            n_k: c.n_k,
            n_n2: c.n_n2,
            temperature_k: c.temperature_k,
            l: c.l,
            d: c.d,
            q: c.q,
            v_bar: c.v_bar,
            v_bar_buff: c.v_bar_buff,
            sigma_se: c.sigma_se,
            sigma_kk: c.sigma_kk,
            sigma_buff: c.sigma_buff,
            dimer_fraction: c.dimer_fraction,
            de_s: c.de_s,
            de_t: c.de_t,
            k_t: c.k_t,
            tau_c_inv: c.tau_c_inv,
            alpha_s: c.alpha_s,
            alpha_t: c.alpha_t,
            omega_q: c.omega_q,
            c_j: c.c_j,
            tau_r_inv: c.tau_r_inv,
            sigma_v_kk2: c.sigma_v_kk2,
            omega_hf: c.omega_hf,
        }
    }
}

/// One rate line of the report.
#[derive(Debug, Clone, Serialize)]
pub struct RateJson {
    pub name: &'static str,
    pub value: f64,
    pub units: &'static str,
    pub formula: &'static str,
    pub note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantJson {
    pub name: &'static str,
    pub value: f64,
    pub units: &'static str,
    pub provenance: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolarizationJson {
    pub r_p: f64,
    pub r_sd: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PulseJson {
    pub omega_b: f64,
    pub omega_hf: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub excites_hyperfine: bool,
}

/// The budget JSON document.
#[derive(Debug, Clone, Serialize)]
pub struct BudgetReport {
    /// Resolved inputs (defaults plus overrides).
    pub config: VaporEcho,
    /// The default-constant registry with provenance notes.
    pub default_constants: Vec<ConstantJson>,
    pub rates: Vec<RateJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polarization: Option<PolarizationJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseJson>,
}

/// Evaluate the budget for a parsed config file.
pub fn execute(file: &BudgetFile) -> Result<BudgetReport, RunError> {
    let cfg = file.vapor.apply().map_err(RunError::Validation)?;
    let budget = relaxation_budget(&cfg)?;

    let rates = vec![
        RateJson {
            name: "r_se",
            value: budget.r_se,
            units: "1/s",
            formula: "n_k * sigma_se * v_bar",
            note: "binary spin exchange; conserves total spin, so it couples rather than destroys",
        },
        RateJson {
            name: "r_wall",
            value: budget.r_wall,
            units: "1/s",
            formula: "4 * pi^2 * q * d / l^2",
            note: "diffusion of the slowest cell mode to fully depolarizing walls",
        },
        RateJson {
            name: "r_kk_binary",
            value: budget.r_kk_binary,
            units: "1/s",
            formula: "n_k * sigma_kk * v_bar",
            note: "alkali-alkali spin destruction in binary collisions",
        },
        RateJson {
            name: "r_kk_triplet",
            value: budget.r_kk_triplet,
            units: "1/s",
            formula: "alpha_t * tau_c_inv * k_t * n_k",
            note: "triplet-dimer channel; alpha_t = 1 is the full-loss worst case",
        },
        RateJson {
            name: "r_s",
            value: budget.r_s,
            units: "1/s",
            formula: "alpha_s * dimer_fraction * tau_c_inv * exp(-de_s / (k_b * t))",
            note: "singlet-dimer break-up channel; alpha_s = 1 is the full-loss worst case",
        },
        RateJson {
            name: "r_buff",
            value: budget.r_buff,
            units: "1/s",
            formula: "n_n2 * sigma_buff * v_bar_buff",
            note: "spin rotation in buffer-gas collisions",
        },
        RateJson {
            name: "r_ce",
            value: budget.r_ce,
            units: "1/s",
            formula: "dimer_fraction * n_k * sigma_v_kk2",
            note: "chemical exchange through singlet dimers; adds to exchange, not destruction",
        },
        RateJson {
            name: "r_nuclear_singlet",
            value: budget.r_nuclear_singlet,
            units: "1/s",
            formula: "(2/3 * omega_q^2 + c_j^2) / tau_r_inv",
            note: "motionally narrowed nuclear relaxation inside the singlet dimer",
        },
        RateJson {
            name: "r_sd",
            value: budget.r_sd,
            units: "1/s",
            formula: "r_wall + r_kk_binary + r_kk_triplet + r_s + r_buff",
            note: "total electron spin destruction entering the polarization balance",
        },
        RateJson {
            name: "n_threshold",
            value: budget.n_threshold,
            units: "1/cm^3",
            formula: "omega_hf / (sigma_se * v_bar)",
            note: "density at which the exchange rate reaches the hyperfine frequency",
        },
    ];

    let polarization = file.pump.as_ref().map(|p| {
        let value = polarization_from_pumping(p.r_p, budget.r_sd);
        PolarizationJson {
            r_p: p.r_p,
            r_sd: budget.r_sd,
            value,
        }
    });

    let pulse = match &file.pulse {
        Some(p) => {
            let omega_b = p.omega_b_over_omega_hf * cfg.omega_hf;
            let g = pulse_excitation(omega_b, cfg.omega_hf, p.g_s, p.b_perp)?;
            Some(PulseJson {
                omega_b,
                omega_hf: cfg.omega_hf,
                azimuth: g.azimuth,
                elevation: g.elevation,
                excites_hyperfine: g.excites,
            })
        }
        None => None,
    };

    Ok(BudgetReport {
        config: VaporEcho::from(&cfg),
        default_constants: default_constants()
            .iter()
            .map(|c| ConstantJson {
                name: c.name,
                value: c.value,
                units: c.units,
                provenance: c.provenance,
            })
            .collect(),
        rates,
        polarization,
        pulse,
    })
}

impl BudgetReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable table for stdout.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "vapor design point: n_k = {:.3e} 1/cm^3, T = {:.2} K\n\n",
            self.config.n_k, self.config.temperature_k
        ));
        out.push_str(&format!(
            "{:<20} {:>14}  {:<8} {}\n",
            "rate", "value", "units", "note"
        ));
        for r in &self.rates {
            out.push_str(&format!(
                "{:<20} {:>14.6e}  {:<8} {}\n",
                r.name, r.value, r.units, r.note
            ));
        }
        if let Some(p) = &self.polarization {
            out.push_str(&format!(
                "\nsteady-state polarization at r_p = {:.3e} 1/s: {:.6}\n",
                p.r_p, p.value
            ));
        }
        if let Some(p) = &self.pulse {
            out.push_str(&format!(
                "\npulse: omega_b/omega_hf = {:.3}, tip azimuth = {:.6} rad, \
                 elevation = {:.6} rad, excites hyperfine: {}\n",
                p.omega_b / p.omega_hf,
                p.azimuth,
                p.elevation,
                p.excites_hyperfine
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_file_reproduces_design_point() {
        let report = execute(&BudgetFile::default()).unwrap();
        let get = |name: &str| {
            report
                .rates
                .iter()
                .find(|r| r.name == name)
                .unwrap()
                .value
        };
        assert!((get("r_se") - 2.55e9).abs() < 1e3);
        assert!((get("r_sd") - 5.835487684369323e6).abs() < 1.0);
        assert!((get("n_threshold") - 5.319763560078716e17).abs() < 1e9);
        assert!(report.polarization.is_none());
        assert!(report.pulse.is_none());
        assert_eq!(report.default_constants.len(), 23);
    }

    #[test]
    fn overrides_and_sections_parse() {
        let file = BudgetFile::from_toml(
            r#"
[vapor]
temperature_c = 620.0
n_k = 1.7e18

[pump]
r_p = 1.0e9

[pulse]
omega_b_over_omega_hf = 5.0
g_s = 2.8e6
b_perp = 0.01
"#,
        )
        .unwrap();
        let report = execute(&file).unwrap();
        assert!((report.config.temperature_k - 893.15).abs() < 1e-9);
        let p = report.polarization.as_ref().unwrap();
        assert_eq!(p.value, 0.5 * p.r_p / (p.r_p + p.r_sd));
        assert!(p.value > 0.49 && p.value < 0.4999, "value {}", p.value);
        let pulse = report.pulse.as_ref().unwrap();
        assert!(pulse.excites_hyperfine);
        assert!(pulse.azimuth > 0.0 && pulse.elevation > 0.0);
        let table = report.render_table();
        assert!(table.contains("r_sd"));
        assert!(table.contains("polarization"));
    }

    #[test]
    fn temperature_forms_are_mutually_exclusive() {
        let file = BudgetFile::from_toml(
            r#"
[vapor]
temperature_k = 900.0
temperature_c = 620.0
"#,
        )
        .unwrap();
        assert!(matches!(
            execute(&file),
            Err(RunError::Validation(_))
        ));
    }

    #[test]
    fn unknown_vapor_field_is_rejected() {
        assert!(BudgetFile::from_toml("[vapor]\nbogus = 1.0\n").is_err());
    }

    #[test]
    fn json_is_deterministic() {
        let a = execute(&BudgetFile::default()).unwrap().to_json();
        let b = execute(&BudgetFile::default()).unwrap().to_json();
        assert_eq!(a, b);
        assert!(a.contains("provenance"));
    }
}
