//! Initial states and interaction parameters for the ensemble engines.
//!
//! Provides spin-temperature density matrices, tilt rotations that inject
//! transverse electron polarization and hyperfine coherence, Gaussian angle
//! and frequency sampling, and random doubly stochastic coupling matrices
//! (Sinkhorn–Knopp normalized, zero-diagonal, symmetrized by default).
//!
//! All stochastic operations take an explicit seed and are deterministic
//! under it, so runs are reproducible bit-for-bit.

use nalgebra::{Complex, DMatrix};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::bloch::EnsembleBlochState;
use crate::error::{Error, Result};
use crate::ops::{observables, two_j, unitary_exp_i, ProductOperators};
use crate::real::Real;

/// Parameters of a spin-temperature state ρ = exp(−β F_z)/Z.
///
/// β ≥ 0 is the dimensionless inverse spin temperature; `z` is the partition
/// function Σ exp(−β m_F) over the product basis, computed at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinTempConfig<T: Real> {
    /// Inverse spin-temperature parameter (dimensionless, ≥ 0).
    pub beta: T,
    /// Nuclear spin quantum number I (non-negative half-integer).
    pub nuclear_i: T,
    /// Partition function Z = Σ_{m_S,m_I} exp(−β(m_S + m_I)).
    pub z: T,
}

impl<T: Real> SpinTempConfig<T> {
    /// Validate parameters and precompute the normalization Z.
    pub fn new(beta: T, nuclear_i: T) -> Result<Self> {
        if beta < T::zero() || !beta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "spin-temperature beta must be finite and >= 0, got {beta}"
            )));
        }
        let tj = two_j(nuclear_i)?;
        let dim_n = tj + 1;
        let mut z = T::zero();
        for e in 0..2usize {
            let m_s = T::lit(0.5) - T::from_usize(e).expect("index");
            for k in 0..dim_n {
                let m_i = nuclear_i - T::from_usize(k).expect("index");
                z += (-beta * (m_s + m_i)).exp();
            }
        }
        Ok(Self {
            beta,
            nuclear_i,
            z,
        })
    }

    /// Product-space dimension 2(2I+1).
    pub fn dim(&self) -> usize {
        let tj = two_j(self.nuclear_i).expect("validated at construction");
        2 * (tj + 1)
    }
}

/// Rotation angles of the state-preparation unitary
/// U = e^{iθ_z S_z} e^{iθ_y S_y} e^{iφ_z I_z} e^{iφ_y I_y}.
///
/// θ act on the electron spin, φ on the nucleus; all in radians. Note the
/// conjugation ρ → UρU† with this phase convention rotates Bloch vectors by
/// the *negative* angle about each axis (a z-aligned ⟨S⟩ acquires
/// ⟨S_x⟩ = −sin θ_y · ⟨S_z⟩).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TiltAngles<T: Real> {
    pub theta_y: T,
    pub theta_z: T,
    pub phi_y: T,
    pub phi_z: T,
}

impl<T: Real> TiltAngles<T> {
    /// The identity rotation.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Electron-only tilt about y.
    pub fn electron_y(theta_y: T) -> Self {
        Self {
            theta_y,
            ..Self::default()
        }
    }

    fn all_finite(&self) -> bool {
        self.theta_y.is_finite()
            && self.theta_z.is_finite()
            && self.phi_y.is_finite()
            && self.phi_z.is_finite()
    }
}

/// Pairwise exchange rates Γ_mn = Γ·p_mn with p doubly stochastic.
///
/// Rows and columns of `p` sum to 1, so the total exchange rate experienced
/// by each atom is exactly Γ; the uniform matrix p_mn = 1/N recovers the
/// all-to-all rate Γ/N per pair used by the mean-field comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix<T: Real> {
    /// Number of atoms N.
    pub n_atoms: usize,
    /// Overall exchange-rate scale Γ (1/time).
    pub gamma: T,
    /// N×N doubly stochastic weight matrix.
    pub p: DMatrix<T>,
}

impl<T: Real> CouplingMatrix<T> {
    /// Uniform all-to-all coupling p_mn = 1/N (including the diagonal);
    /// the exact mean-field configuration Γ_mn = Γ/N.
    pub fn uniform(n_atoms: usize, gamma: T) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidConfig("atom count must be >= 1".into()));
        }
        let w = T::one() / T::from_usize(n_atoms).expect("count");
        Ok(Self {
            n_atoms,
            gamma,
            p: DMatrix::from_element(n_atoms, n_atoms, w),
        })
    }

    /// Replace the rate scale, keeping the stochastic weights.
    pub fn with_gamma(mut self, gamma: T) -> Self {
        self.gamma = gamma;
        self
    }

    /// Dense rate matrix Γ_mn = Γ·p_mn.
    pub fn rates(&self) -> DMatrix<T> {
        &self.p * self.gamma
    }

    /// Largest deviation of any row or column sum of `p` from one.
    pub fn stochasticity_residual(&self) -> T {
        let n = self.n_atoms;
        let mut worst = T::zero();
        for k in 0..n {
            let mut row = T::zero();
            let mut col = T::zero();
            for j in 0..n {
                row += self.p[(k, j)];
                col += self.p[(j, k)];
            }
            worst = worst.max((row - T::one()).abs());
            worst = worst.max((col - T::one()).abs());
        }
        worst
    }
}

/// Sampling options for [`doubly_stochastic_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingOptions {
    /// Force p_nn = 0 (no self-collisions). Default true.
    pub zero_diagonal: bool,
    /// Symmetrize p ← (p + pᵀ)/2 after normalization (mutual collision
    /// rates). Default true.
    pub symmetrize: bool,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            zero_diagonal: true,
            symmetrize: true,
        }
    }
}

const SINKHORN_MAX_ITERS: usize = 20_000;

/// Alternately normalize rows and columns until both sum to 1 within `tol`.
fn sinkhorn<T: Real>(m: &mut DMatrix<T>, tol: T) -> Result<()> {
    let n = m.nrows();
    let mut residual = T::one();
    for _ in 0..SINKHORN_MAX_ITERS {
        for r in 0..n {
            let s: T = (0..n).map(|c| m[(r, c)]).fold(T::zero(), |a, v| a + v);
            if s <= T::zero() {
                return Err(Error::SinkhornNonConvergence {
                    iterations: 0,
                    residual: f64::INFINITY,
                });
            }
            for c in 0..n {
                m[(r, c)] /= s;
            }
        }
        for c in 0..n {
            let s: T = (0..n).map(|r| m[(r, c)]).fold(T::zero(), |a, v| a + v);
            if s <= T::zero() {
                return Err(Error::SinkhornNonConvergence {
                    iterations: 0,
                    residual: f64::INFINITY,
                });
            }
            for r in 0..n {
                m[(r, c)] /= s;
            }
        }
        // Columns are exact after the column pass; only rows can deviate.
        residual = T::zero();
        for r in 0..n {
            let s: T = (0..n).map(|c| m[(r, c)]).fold(T::zero(), |a, v| a + v);
            residual = residual.max((s - T::one()).abs());
        }
        if residual < tol {
            return Ok(());
        }
    }
    Err(Error::SinkhornNonConvergence {
        iterations: SINKHORN_MAX_ITERS,
        residual: residual.as_f64(),
    })
}

/// Random doubly stochastic coupling weights with the default options
/// (zero diagonal, symmetrized). Unit rate scale; set Γ with
/// [`CouplingMatrix::with_gamma`].
pub fn doubly_stochastic<T: Real>(
    n_atoms: usize,
    seed: u64,
    tol: T,
) -> Result<CouplingMatrix<T>> {
    doubly_stochastic_with(n_atoms, seed, tol, CouplingOptions::default())
}

/// Random doubly stochastic coupling weights.
///
/// Off-diagonal entries start uniform in (0.1, 1) — bounded away from zero
/// so Sinkhorn–Knopp converges for every sample — then rows/columns are
/// normalized, optionally symmetrized (which preserves both sum constraints
/// exactly), and re-normalized to wash out rounding.
pub fn doubly_stochastic_with<T: Real>(
    n_atoms: usize,
    seed: u64,
    tol: T,
    opts: CouplingOptions,
) -> Result<CouplingMatrix<T>> {
    if n_atoms < 2 {
        return Err(Error::InvalidConfig(
            "doubly stochastic sampling needs at least 2 atoms".into(),
        ));
    }
    if tol <= T::zero() {
        return Err(Error::InvalidConfig("tolerance must be > 0".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let lo = T::lit(0.1);
    let hi = T::lit(1.0);
    let mut p = DMatrix::from_fn(n_atoms, n_atoms, |r, c| {
        if opts.zero_diagonal && r == c {
            T::zero()
        } else {
            rng.random_range(lo..hi)
        }
    });
    // Normalize down to near the roundoff floor so the engines' conservation
    // laws hold at the 1e-13 level, not merely at the user-facing `tol`.
    let inner_tol = (tol * T::lit(1e-4)).max(T::eps() * T::lit(32.0));
    sinkhorn(&mut p, inner_tol)?;
    if opts.symmetrize {
        p = (&p + p.transpose()) * T::lit(0.5);
        sinkhorn(&mut p, inner_tol)?;
    }
    let coupling = CouplingMatrix {
        n_atoms,
        gamma: T::one(),
        p,
    };
    let residual = coupling.stochasticity_residual();
    if residual > tol {
        return Err(Error::SinkhornNonConvergence {
            iterations: SINKHORN_MAX_ITERS,
            residual: residual.as_f64(),
        });
    }
    Ok(coupling)
}

/// Per-atom hyperfine frequencies ω_n around a nominal ω.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySpread<T: Real> {
    /// Nominal hyperfine angular frequency ω.
    pub omega: T,
    /// Per-atom frequencies ω_n (all > 0).
    pub omega_n: Vec<T>,
    /// Inhomogeneous width [Σ_n (ω_n − ω)²]^{1/2} (root-sum-square
    /// deviation from the nominal frequency).
    pub delta_omega: T,
}

impl<T: Real> FrequencySpread<T> {
    /// All atoms exactly at the nominal frequency.
    pub fn uniform(omega: T, n_atoms: usize) -> Result<Self> {
        if omega <= T::zero() || !omega.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "nominal frequency must be finite and > 0, got {omega}"
            )));
        }
        Ok(Self {
            omega,
            omega_n: vec![omega; n_atoms],
            delta_omega: T::zero(),
        })
    }

    /// Sample ω_n from Normal(ω, σ), redrawing any non-positive value
    /// (vanishingly rare for physical spreads σ ≪ ω). Deterministic under
    /// the seed.
    pub fn sample(omega: T, sigma: T, n_atoms: usize, seed: u64) -> Result<Self> {
        if omega <= T::zero() || !omega.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "nominal frequency must be finite and > 0, got {omega}"
            )));
        }
        if sigma < T::zero() || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "frequency spread must be finite and >= 0, got {sigma}"
            )));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut omega_n = Vec::with_capacity(n_atoms);
        for _ in 0..n_atoms {
            let mut w = omega + sigma * T::standard_normal(&mut rng);
            let mut guard = 0;
            while w <= T::zero() {
                w = omega + sigma * T::standard_normal(&mut rng);
                guard += 1;
                if guard > 1000 {
                    return Err(Error::InvalidConfig(
                        "frequency spread too large: cannot draw positive frequencies"
                            .into(),
                    ));
                }
            }
            omega_n.push(w);
        }
        let mut sq = T::zero();
        for &w in &omega_n {
            let d = w - omega;
            sq += d * d;
        }
        Ok(Self {
            omega,
            omega_n,
            delta_omega: sq.sqrt(),
        })
    }

    /// Atom count.
    pub fn len(&self) -> usize {
        self.omega_n.len()
    }

    /// True when no atoms are present.
    pub fn is_empty(&self) -> bool {
        self.omega_n.is_empty()
    }
}

/// Spin-temperature density matrix ρ = exp(−β F_z)/Z, diagonal in the
/// product basis (F_z = S_z + I_z is diagonal there), with descending-m
/// ordering matching [`crate::ops::product_operators`].
pub fn spin_temperature_state<T: Real>(
    cfg: &SpinTempConfig<T>,
) -> Result<DMatrix<Complex<T>>> {
    let tj = two_j(cfg.nuclear_i)?;
    let dim_n = tj + 1;
    let dim = 2 * dim_n;
    let mut rho = DMatrix::from_element(dim, dim, Complex::new(T::zero(), T::zero()));
    for e in 0..2usize {
        let m_s = T::lit(0.5) - T::from_usize(e).expect("index");
        for k in 0..dim_n {
            let m_i = cfg.nuclear_i - T::from_usize(k).expect("index");
            let idx = e * dim_n + k;
            let w = (-cfg.beta * (m_s + m_i)).exp() / cfg.z;
            rho[(idx, idx)] = Complex::new(w, T::zero());
        }
    }
    Ok(rho)
}

/// Conjugate ρ by the preparation unitary
/// U = e^{iθ_z S_z} e^{iθ_y S_y} e^{iφ_z I_z} e^{iφ_y I_y}.
///
/// Zero-angle factors are skipped, so the identity tilt returns ρ bit-for-bit.
pub fn tilt_state<T: Real>(
    rho: &DMatrix<Complex<T>>,
    angles: &TiltAngles<T>,
    ops: &ProductOperators<T>,
) -> Result<DMatrix<Complex<T>>> {
    if rho.nrows() != ops.dim || rho.ncols() != ops.dim {
        return Err(Error::DimensionMismatch {
            expected: ops.dim,
            got: rho.nrows(),
        });
    }
    if !angles.all_finite() {
        return Err(Error::InvalidConfig("tilt angles must be finite".into()));
    }
    // Factors applied right-to-left onto ρ; fold U as a product instead.
    let factors: [(&DMatrix<Complex<T>>, T); 4] = [
        (&ops.s[2], angles.theta_z),
        (&ops.s[1], angles.theta_y),
        (&ops.i[2], angles.phi_z),
        (&ops.i[1], angles.phi_y),
    ];
    let mut u: Option<DMatrix<Complex<T>>> = None;
    for (gen, angle) in factors {
        if angle == T::zero() {
            continue;
        }
        let f = unitary_exp_i(gen, angle);
        u = Some(match u {
            Some(acc) => acc * f,
            None => f,
        });
    }
    match u {
        Some(u) => Ok(&u * rho * u.adjoint()),
        None => Ok(rho.clone()),
    }
}

/// Draw `n` angles from Normal(μ, σ). σ = 0 returns `n` copies of μ.
/// Deterministic under the seed.
pub fn sample_angles<T: Real>(mu: T, sigma: T, n: usize, seed: u64) -> Vec<T> {
    assert!(
        sigma >= T::zero() && sigma.is_finite() && mu.is_finite(),
        "angle distribution parameters must be finite with sigma >= 0"
    );
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| mu + sigma * T::standard_normal(&mut rng))
        .collect()
}

/// Extract per-atom (⟨S⟩, ⟨I⟩, ⟨A⟩) triples from density matrices to form
/// the initial condition of the ensemble Bloch engine (t = 0).
pub fn bloch_state_from_density<T: Real>(
    rhos: &[DMatrix<Complex<T>>],
    ops: &ProductOperators<T>,
) -> Result<EnsembleBlochState<T>> {
    let atoms = rhos
        .iter()
        .map(|rho| observables(rho, ops))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleBlochState {
        t: T::zero(),
        atoms,
    })
}
