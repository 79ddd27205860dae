//! Vapor design-point calculator: spin-destruction budget, density
//! thresholds, pumping polarization, and magnetic-pulse excitation
//! geometry for a hot, dense potassium cell with N₂ buffer gas.
//!
//! This module is deliberately `f64`-only: it is a unit-ful calculator
//! over physical constants (cm, s, eV, K, G), not scalar-generic math.
//! Unit conventions: densities cm⁻³, lengths cm, velocities cm/s, cross
//! sections cm², rates s⁻¹, energies eV, magnetic fields G, gyromagnetic
//! ratios Hz/G, angular frequencies rad/s.
//!
//! Every default constant carries a provenance note (measured, estimated
//! from potentials, or worst-case bound) because the budget mixes all
//! three kinds of evidence; the notes survive into the CLI's JSON output.

use crate::error::{Error, Result};

/// Boltzmann constant in eV/K (CODATA 2018, exact).
pub const BOLTZMANN_EV_PER_K: f64 = 8.617333262e-5;

/// Temperature with explicit unit tagging (the roadmap quotes °C, the
/// formulas need K).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Kelvin(f64),
    Celsius(f64),
}

impl Temperature {
    /// Absolute temperature in kelvin.
    pub fn kelvin(self) -> f64 {
        match self {
            Temperature::Kelvin(t) => t,
            Temperature::Celsius(t) => t + 273.15,
        }
    }
}

/// Input constants for the relaxation budget. Construct with
/// [`VaporConfig::default`] and override fields as needed.
#[derive(Debug, Clone, PartialEq)]
pub struct VaporConfig {
    /// Alkali number density n_K (cm⁻³).
    pub n_k: f64,
    /// Buffer-gas (N₂) number density (cm⁻³).
    pub n_n2: f64,
    /// Cell temperature (K); use [`Temperature`] to convert from °C.
    pub temperature_k: f64,
    /// Cell length L (cm).
    pub l: f64,
    /// Diffusion coefficient D of the alkali in the buffer gas (cm²/s).
    pub d: f64,
    /// Nuclear slowing-down factor Q (6 for I = 3/2).
    pub q: f64,
    /// Mean alkali–alkali thermal velocity v̄ (cm/s).
    pub v_bar: f64,
    /// Mean alkali–buffer thermal velocity v̄′ (cm/s).
    pub v_bar_buff: f64,
    /// Spin-exchange cross section σ_SE (cm²).
    pub sigma_se: f64,
    /// Alkali–alkali spin-destruction cross section σ_KK (cm²).
    pub sigma_kk: f64,
    /// Alkali–buffer spin-rotation cross section σ′ (cm²).
    pub sigma_buff: f64,
    /// Singlet dimer-to-monomer ratio n_K2/n_K.
    pub dimer_fraction: f64,
    /// Singlet dimer binding energy De^(S) (eV).
    pub de_s: f64,
    /// Triplet dimer binding energy De^(T) (eV); documentation input — the
    /// triplet channel enters through the equilibrium coefficient `k_t`.
    pub de_t: f64,
    /// Triplet chemical-equilibrium coefficient K_T (cm³).
    pub k_t: f64,
    /// Hard-sphere dimer–buffer collision rate τ_c⁻¹ (s⁻¹).
    pub tau_c_inv: f64,
    /// Coherence fraction lost per singlet dissociation, α_S ∈ [0, 1].
    pub alpha_s: f64,
    /// Coherence fraction lost per triplet lifetime, α_T ∈ [0, 1].
    pub alpha_t: f64,
    /// Quadrupole interaction strength Ω_q (s⁻¹) inside the singlet dimer.
    pub omega_q: f64,
    /// Spin-rotation strength c·√⟨J²⟩ (s⁻¹) inside the singlet dimer.
    pub c_j: f64,
    /// Molecular reorientation rate τ_R⁻¹ (s⁻¹).
    pub tau_r_inv: f64,
    /// Chemical-exchange rate coefficient (σv̄)_{K–K₂} (cm³/s).
    pub sigma_v_kk2: f64,
    /// Hyperfine angular frequency ω (rad/s) used for the density
    /// threshold (default: the 127 MHz splitting of ⁴¹K).
    pub omega_hf: f64,
}

impl Default for VaporConfig {
    fn default() -> Self {
        Self {
            n_k: 1.7e18,
            n_n2: 2.5e19,
            temperature_k: Temperature::Celsius(620.0).kelvin(),
            l: 0.01,
            d: 0.4,
            q: 6.0,
            v_bar: 1e5,
            v_bar_buff: 1.3e5,
            sigma_se: 1.5e-14,
            sigma_kk: 1e-18,
            sigma_buff: 1e-21,
            dimer_fraction: 0.035,
            de_s: 0.55,
            de_t: 0.032,
            k_t: 3e-23,
            tau_c_inv: 6e10,
            alpha_s: 1.0,
            alpha_t: 1.0,
            omega_q: 1.9e5,
            c_j: 3.5e4,
            tau_r_inv: 6e9,
            sigma_v_kk2: 1.5e-9,
            omega_hf: 2.0 * std::f64::consts::PI * 127e6,
        }
    }
}

impl VaporConfig {
    /// Check positivity and fraction bounds.
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("n_k", self.n_k),
            ("n_n2", self.n_n2),
            ("temperature_k", self.temperature_k),
            ("l", self.l),
            ("d", self.d),
            ("q", self.q),
            ("v_bar", self.v_bar),
            ("v_bar_buff", self.v_bar_buff),
            ("sigma_se", self.sigma_se),
            ("sigma_kk", self.sigma_kk),
            ("sigma_buff", self.sigma_buff),
            ("de_s", self.de_s),
            ("de_t", self.de_t),
            ("k_t", self.k_t),
            ("tau_c_inv", self.tau_c_inv),
            ("omega_q", self.omega_q),
            ("c_j", self.c_j),
            ("tau_r_inv", self.tau_r_inv),
            ("sigma_v_kk2", self.sigma_v_kk2),
            ("omega_hf", self.omega_hf),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let fractions = [
            ("dimer_fraction", self.dimer_fraction),
            ("alpha_s", self.alpha_s),
            ("alpha_t", self.alpha_t),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Thermal energy k_B·T in eV.
    pub fn kbt_ev(&self) -> f64 {
        BOLTZMANN_EV_PER_K * self.temperature_k
    }
}

/// Computed relaxation rates (s⁻¹) and the strong-interaction density
/// threshold (cm⁻³).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetResult {
    /// Spin-exchange rate n_K·σ_SE·v̄.
    pub r_se: f64,
    /// Wall loss of the least-decaying diffusion mode, 4π²QD/L².
    pub r_wall: f64,
    /// Binary alkali–alkali spin destruction n_K·σ_KK·v̄.
    pub r_kk_binary: f64,
    /// Triplet-dimer spin destruction α_T·τ_c⁻¹·K_T·n_K.
    pub r_kk_triplet: f64,
    /// Singlet-dimer dissociation loss α_S·(n_K2/n_K)·τ_c⁻¹·e^(−De_S/kT).
    pub r_s: f64,
    /// Buffer-gas spin rotation n_N2·σ′·v̄′.
    pub r_buff: f64,
    /// Chemical exchange with singlet dimers n_K2·(σv̄)_{K–K₂}; adds to
    /// spin exchange, not to destruction.
    pub r_ce: f64,
    /// Nuclear relaxation inside the singlet dimer,
    /// (⅔Ω_q² + (c√⟨J²⟩)²)/τ_R⁻¹.
    pub r_nuclear_singlet: f64,
    /// Total spin destruction: r_wall + (r_kk_binary + r_kk_triplet) +
    /// r_s + r_buff.
    pub r_sd: f64,
    /// Density where the exchange rate reaches the hyperfine frequency.
    pub n_threshold: f64,
}

/// Alkali density at which the spin-exchange rate reaches the angular
/// frequency ω: n = ω/(σ_SE·v̄). ω = 0 is allowed (threshold 0).
pub fn density_threshold(omega: f64, sigma_se: f64, v_bar: f64) -> Result<f64> {
    if !(sigma_se > 0.0) || !(v_bar > 0.0) || omega < 0.0 || !omega.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "need sigma_se > 0, v_bar > 0, omega >= 0; got {sigma_se}, {v_bar}, {omega}"
        )));
    }
    Ok(omega / (sigma_se * v_bar))
}

/// Evaluate every rate of the budget from the configuration.
pub fn relaxation_budget(cfg: &VaporConfig) -> Result<BudgetResult> {
    cfg.validate()?;
    let r_se = cfg.n_k * cfg.sigma_se * cfg.v_bar;
    let r_wall = 4.0 * std::f64::consts::PI.powi(2) * cfg.q * cfg.d / (cfg.l * cfg.l);
    let r_kk_binary = cfg.n_k * cfg.sigma_kk * cfg.v_bar;
    let r_kk_triplet = cfg.alpha_t * cfg.tau_c_inv * cfg.k_t * cfg.n_k;
    let r_s = cfg.alpha_s * cfg.dimer_fraction * cfg.tau_c_inv * (-cfg.de_s / cfg.kbt_ev()).exp();
    let r_buff = cfg.n_n2 * cfg.sigma_buff * cfg.v_bar_buff;
    let r_ce = cfg.dimer_fraction * cfg.n_k * cfg.sigma_v_kk2;
    let r_nuclear_singlet =
        (2.0 / 3.0 * cfg.omega_q * cfg.omega_q + cfg.c_j * cfg.c_j) / cfg.tau_r_inv;
    let r_sd = r_wall + (r_kk_binary + r_kk_triplet) + r_s + r_buff;
    let n_threshold = density_threshold(cfg.omega_hf, cfg.sigma_se, cfg.v_bar)?;
    Ok(BudgetResult {
        r_se,
        r_wall,
        r_kk_binary,
        r_kk_triplet,
        r_s,
        r_buff,
        r_ce,
        r_nuclear_singlet,
        r_sd,
        n_threshold,
    })
}

/// Steady-state electron polarization |⟨S⟩| = ½·R_P/(R_P + R_SD) under
/// optical pumping at rate R_P against spin destruction R_SD. Both rates
/// zero returns 0.
pub fn polarization_from_pumping(r_p: f64, r_sd: f64) -> f64 {
    assert!(
        r_p >= 0.0 && r_sd >= 0.0 && r_p.is_finite() && r_sd.is_finite(),
        "pumping and destruction rates must be non-negative"
    );
    if r_p == 0.0 {
        return 0.0;
    }
    0.5 * r_p / (r_p + r_sd)
}

/// Geometry of the hyperfine excitation produced by one transverse sine
/// burst B_⊥·sin(ω_B·t), 0 ≤ t ≤ 2π/ω_B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseGeometry {
    /// Azimuthal tip ≈ ω_hf/ω_B (rad).
    pub azimuth: f64,
    /// Elevation tip ≈ ¼·(2π·g_s·B_⊥)/ω_B (rad).
    pub elevation: f64,
    /// Whether the burst excites hyperfine coherence at all: requires
    /// ω_B > ω_hf (slower bursts are adiabatic — the nuclear spin follows
    /// the electron and the state returns to where it started).
    pub excites: bool,
}

/// Estimate the excitation geometry of a single transverse sine burst.
/// `g_s` is the electron gyromagnetic ratio in Hz/G, `b_perp` in G.
pub fn pulse_excitation(omega_b: f64, omega_hf: f64, g_s: f64, b_perp: f64) -> Result<PulseGeometry> {
    if !(omega_b > 0.0) || !(omega_hf > 0.0) || g_s < 0.0 || b_perp < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "need omega_b > 0, omega_hf > 0, g_s >= 0, b_perp >= 0; got {omega_b}, {omega_hf}, {g_s}, {b_perp}"
        )));
    }
    Ok(PulseGeometry {
        azimuth: omega_hf / omega_b,
        elevation: 0.25 * (2.0 * std::f64::consts::PI * g_s * b_perp) / omega_b,
        excites: omega_b > omega_hf,
    })
}

/// One documented constant of the default design point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDoc {
    pub name: &'static str,
    pub value: f64,
    pub units: &'static str,
    /// Evidentiary status: measured, estimated, or worst-case bound.
    pub provenance: &'static str,
}

/// The default design-point constants with provenance notes, for report
/// output.
pub fn default_constants() -> Vec<ConstantDoc> {
    let c = VaporConfig::default();
    vec![
        ConstantDoc { name: "n_k", value: c.n_k, units: "cm^-3", provenance: "design target: saturated potassium density at the operating temperature" },
        ConstantDoc { name: "n_n2", value: c.n_n2, units: "cm^-3", provenance: "design choice: ~1 amagat of N2 buffer gas" },
        ConstantDoc { name: "temperature_k", value: c.temperature_k, units: "K", provenance: "design choice: 620 C operating point" },
        ConstantDoc { name: "l", value: c.l, units: "cm", provenance: "design choice: 100 um microfabricated cell" },
        ConstantDoc { name: "d", value: c.d, units: "cm^2/s", provenance: "measured: alkali diffusion in 1 amagat N2" },
        ConstantDoc { name: "q", value: c.q, units: "1", provenance: "derived: nuclear slowing-down factor for I = 3/2" },
        ConstantDoc { name: "v_bar", value: c.v_bar, units: "cm/s", provenance: "estimated: mean K-K thermal velocity at the operating temperature" },
        ConstantDoc { name: "v_bar_buff", value: c.v_bar_buff, units: "cm/s", provenance: "estimated: mean K-N2 thermal velocity at the operating temperature" },
        ConstantDoc { name: "sigma_se", value: c.sigma_se, units: "cm^2", provenance: "measured: alkali spin-exchange cross section" },
        ConstantDoc { name: "sigma_kk", value: c.sigma_kk, units: "cm^2", provenance: "measured at low temperature; order-of-magnitude (theory predicts ~10x smaller), no known temperature dependence" },
        ConstantDoc { name: "sigma_buff", value: c.sigma_buff, units: "cm^2", provenance: "estimated: K-N2 spin-rotation cross section at the operating temperature (T^3.7 scaling applied)" },
        ConstantDoc { name: "dimer_fraction", value: c.dimer_fraction, units: "1", provenance: "estimated from vapor-pressure data (3.5%); potential-based equilibrium gives 5%" },
        ConstantDoc { name: "de_s", value: c.de_s, units: "eV", provenance: "measured: singlet dimer binding energy" },
        ConstantDoc { name: "de_t", value: c.de_t, units: "eV", provenance: "computed from molecular potentials: triplet binding energy (< kbT)" },
        ConstantDoc { name: "k_t", value: c.k_t, units: "cm^3", provenance: "computed from molecular potentials: triplet chemical-equilibrium coefficient" },
        ConstantDoc { name: "tau_c_inv", value: c.tau_c_inv, units: "1/s", provenance: "estimated: hard-sphere dimer-N2 collision rate (third-body)" },
        ConstantDoc { name: "alpha_s", value: c.alpha_s, units: "1", provenance: "worst-case bound: full coherence loss per singlet dissociation" },
        ConstantDoc { name: "alpha_t", value: c.alpha_t, units: "1", provenance: "worst-case bound: full coherence loss per triplet lifetime" },
        ConstantDoc { name: "omega_q", value: c.omega_q, units: "1/s", provenance: "measured: nuclear quadrupole strength in the singlet dimer" },
        ConstantDoc { name: "c_j", value: c.c_j, units: "1/s", provenance: "measured: nuclear spin-rotation strength in the singlet dimer" },
        ConstantDoc { name: "tau_r_inv", value: c.tau_r_inv, units: "1/s", provenance: "estimated: reorientation rate, roughly equally split between N2 collisions and chemical exchange" },
        ConstantDoc { name: "sigma_v_kk2", value: c.sigma_v_kk2, units: "cm^3/s", provenance: "measured (on a heavier alkali dimer): chemical-exchange rate coefficient" },
        ConstantDoc { name: "omega_hf", value: c.omega_hf, units: "rad/s", provenance: "measured: 127 MHz hyperfine splitting of the chosen isotope" },
    ]
}
