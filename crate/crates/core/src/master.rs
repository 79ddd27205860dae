//! Density-matrix engine: the quantum master equation that the moment
//! engines approximate.
//!
//! Each atom carries a density matrix on the electron ⊗ nucleus product
//! space (dimension 2(2I+1)) evolving under hyperfine precession plus
//! binary spin-exchange collisions,
//!
//! ```text
//! dρ_n/dt = i ω_n [S·I, ρ_n]
//!         + Σ_m Γ_mn ( −¾ ρ_n + Σ_k S_k ρ_n S_k
//!                      + ⟨S⟩_m · (ρ_n S + S ρ_n − 2i S×ρ_n S) )
//! ```
//!
//! with `(S×ρS)_k = Σ_ij ε_kij S_i ρ S_j` and `⟨S⟩_m = Tr(ρ_m S)`. The
//! `⟨S⟩_m` drive makes the equation nonlinear: atoms are coupled only
//! through the exchange-weighted mean electron spin. The map preserves
//! each trace exactly, keeps ρ Hermitian, and conserves the ensemble-mean
//! total spin when the rate matrix is doubly stochastic. For I = 1/2 the
//! single-atom observables (S, I, A) close on themselves, so this engine
//! and the moment engine agree to integrator accuracy; for I ≥ 3/2 it is
//! the reference dynamics.
//!
//! The hyperfine sign fixes the precession handedness. It is chosen so
//! that the commutator projections are exactly the moment equations of
//! the ensemble engine under this crate's conventions (A = S×I with
//! dS/dt = +ωA): d⟨S⟩ = ω⟨A⟩ + exchange, d⟨I⟩ = −ω⟨A⟩, and
//! d⟨A⟩ = −(ω/2)(⟨S⟩−⟨I⟩) − Γ⟨A⟩ + W×⟨I⟩. The opposite sign generates
//! the mirror trajectory (S_y → −S_y): identical decay rates, envelopes,
//! and |frequencies|, reversed precession sense.
//!
//! The integrator state embeds every matrix in a flat real vector
//! (re/im interleaved, row-major, atoms consecutive). Matrices are small
//! (dimension ≤ 8 for the alkali nuclear spins of interest), so the
//! right-hand side uses direct dense products. Positivity is monitored,
//! never enforced: [`DensityMatrixState::min_eigenvalue`] reports the most
//! negative eigenvalue so callers can flag drift beyond tolerance.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Vector3};

use crate::bloch::BlochParams;
use crate::error::{Error, Result};
use crate::init::{CouplingMatrix, FrequencySpread};
use crate::integrate::{integrate_sampled, OdeOptions};
use crate::ops::{
    hyperfine_hamiltonian, observables, trace_product, two_j, ProductOperators, SpinTriple,
};
use crate::real::Real;

/// Largest tolerated |ρ − ρ†| entry.
fn hermiticity_tol<T: Real>() -> T {
    T::lit(1e-10).max(T::eps() * T::lit(256.0))
}

/// Largest tolerated |Tr ρ − 1|.
fn trace_tol<T: Real>() -> T {
    T::lit(1e-9).max(T::eps() * T::lit(1024.0))
}

/// Per-atom density matrices at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrixState<T: Real> {
    /// Time stamp.
    pub t: T,
    /// Nuclear spin I (half-integer); fixes the dimension 2(2I+1).
    pub nuclear_i: T,
    /// One matrix per atom, all of the same dimension.
    pub rhos: Vec<DMatrix<Complex<T>>>,
}

impl<T: Real> DensityMatrixState<T> {
    /// Validated construction at t = 0. Every matrix must match the
    /// operator dimension, be Hermitian to 1e-10, and have unit trace to
    /// 1e-9.
    pub fn new(rhos: Vec<DMatrix<Complex<T>>>, ops: &ProductOperators<T>) -> Result<Self> {
        let state = Self {
            t: T::zero(),
            nuclear_i: ops.nuclear_i,
            rhos,
        };
        state.validate()?;
        Ok(state)
    }

    /// `n` copies of the same matrix (identically prepared ensemble).
    pub fn replicated(
        n_atoms: usize,
        rho: &DMatrix<Complex<T>>,
        ops: &ProductOperators<T>,
    ) -> Result<Self> {
        Self::new(vec![rho.clone(); n_atoms], ops)
    }

    /// Atom count.
    pub fn len(&self) -> usize {
        self.rhos.len()
    }

    /// True when there are no atoms.
    pub fn is_empty(&self) -> bool {
        self.rhos.is_empty()
    }

    /// Hilbert-space dimension 2(2I+1).
    pub fn dim(&self) -> usize {
        self.rhos.first().map_or(0, |r| r.nrows())
    }

    /// Check shapes, finiteness, Hermiticity, and traces.
    pub fn validate(&self) -> Result<()> {
        let dim = 2 * (two_j(self.nuclear_i)? + 1);
        if self.rhos.is_empty() {
            return Err(Error::InvalidConfig("atom count must be >= 1".into()));
        }
        for rho in &self.rhos {
            if rho.nrows() != dim || rho.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: rho.nrows(),
                });
            }
            if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFiniteState { t: self.t.as_f64() });
            }
        }
        let herm = self.hermiticity_defect();
        if herm > hermiticity_tol::<T>() {
            return Err(Error::InvalidConfig(format!(
                "density matrix is not Hermitian (defect {herm})"
            )));
        }
        let tr = self.trace_defect();
        if tr > trace_tol::<T>() {
            return Err(Error::InvalidConfig(format!(
                "density matrix trace deviates from one by {tr}"
            )));
        }
        Ok(())
    }

    /// Largest |ρ_rc − conj(ρ_cr)| over all atoms.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for rho in &self.rhos {
            for r in 0..rho.nrows() {
                for c in 0..rho.ncols() {
                    let d = rho[(r, c)] - rho[(c, r)].conj();
                    worst = worst.max(d.modulus());
                }
            }
        }
        worst
    }

    /// Largest |Tr ρ − 1| over all atoms.
    pub fn trace_defect(&self) -> T {
        self.rhos.iter().fold(T::zero(), |w, rho| {
            let tr = rho.trace();
            w.max((tr.re - T::one()).abs().max(tr.im.abs()))
        })
    }

    /// Most negative eigenvalue over all atoms (positivity monitor; an
    /// exact density matrix has none below zero).
    pub fn min_eigenvalue(&self) -> T {
        let mut min = T::zero();
        for rho in &self.rhos {
            let eig = rho.clone().symmetric_eigen();
            for &lam in eig.eigenvalues.iter() {
                min = min.min(lam);
            }
        }
        min
    }

    /// Per-atom (⟨S⟩, ⟨I⟩, ⟨A⟩).
    pub fn observables(&self, ops: &ProductOperators<T>) -> Result<Vec<SpinTriple<T>>> {
        self.rhos.iter().map(|rho| observables(rho, ops)).collect()
    }

    /// Ensemble-mean (⟨S⟩, ⟨I⟩, ⟨A⟩).
    pub fn means(&self, ops: &ProductOperators<T>) -> Result<SpinTriple<T>> {
        Ok(mean_triples(&self.observables(ops)?))
    }

    /// Flat real embedding: per atom, row-major (re, im) pairs.
    pub fn to_flat(&self) -> DVector<T> {
        let d = self.dim();
        let block = 2 * d * d;
        let mut y = DVector::zeros(block * self.len());
        for (k, rho) in self.rhos.iter().enumerate() {
            pack_into(rho, &mut y.as_mut_slice()[k * block..(k + 1) * block]);
        }
        y
    }

    /// Inverse of [`Self::to_flat`] (no validation; integrator-internal).
    pub fn from_flat(t: T, nuclear_i: T, y: &DVector<T>, dim: usize, n_atoms: usize) -> Self {
        let block = 2 * dim * dim;
        let mut rhos = Vec::with_capacity(n_atoms);
        for k in 0..n_atoms {
            let mut rho = DMatrix::zeros(dim, dim);
            unpack_from(&y.as_slice()[k * block..(k + 1) * block], &mut rho);
            rhos.push(rho);
        }
        Self { t, nuclear_i, rhos }
    }
}

/// Mean of per-atom observable triples.
pub fn mean_triples<T: Real>(atoms: &[SpinTriple<T>]) -> SpinTriple<T> {
    let mut acc = SpinTriple::zero();
    for a in atoms {
        acc.s += a.s;
        acc.ivec += a.ivec;
        acc.a += a.a;
    }
    let inv = T::one() / T::from_usize(atoms.len().max(1)).expect("count");
    SpinTriple {
        s: acc.s * inv,
        ivec: acc.ivec * inv,
        a: acc.a * inv,
    }
}

fn pack_into<T: Real>(rho: &DMatrix<Complex<T>>, out: &mut [T]) {
    let d = rho.nrows();
    let mut k = 0;
    for r in 0..d {
        for c in 0..d {
            let z = rho[(r, c)];
            out[k] = z.re;
            out[k + 1] = z.im;
            k += 2;
        }
    }
}

fn unpack_from<T: Real>(y: &[T], rho: &mut DMatrix<Complex<T>>) {
    let d = rho.nrows();
    let mut k = 0;
    for r in 0..d {
        for c in 0..d {
            rho[(r, c)] = Complex::new(y[k], y[k + 1]);
            k += 2;
        }
    }
}

/// Precomputed coefficients and scratch for the flat-vector right-hand side.
struct MasterWorkspace<T: Real> {
    n: usize,
    dim: usize,
    omega: Vec<T>,
    /// Γ_mn, indexed (source m, target n).
    rates: DMatrix<T>,
    /// Σ_m Γ_mn per target atom.
    rate_in: Vec<T>,
    /// S·I (unit frequency).
    h: DMatrix<Complex<T>>,
    s: [DMatrix<Complex<T>>; 3],
    /// Unpacked per-atom matrices, refreshed on every evaluation.
    rho: Vec<DMatrix<Complex<T>>>,
    /// ⟨S⟩_m per atom, refreshed on every evaluation.
    means: Vec<Vector3<T>>,
}

impl<T: Real> MasterWorkspace<T> {
    fn new(params: &BlochParams<T>, ops: &ProductOperators<T>) -> Self {
        let n = params.n_atoms();
        let rates = params.coupling.rates();
        let rate_in = (0..n)
            .map(|c| (0..n).fold(T::zero(), |acc, r| acc + rates[(r, c)]))
            .collect();
        Self {
            n,
            dim: ops.dim,
            omega: params.freqs.omega_n.clone(),
            rates,
            rate_in,
            h: hyperfine_hamiltonian(T::one(), ops),
            s: ops.s.clone(),
            rho: vec![DMatrix::zeros(ops.dim, ops.dim); n],
            means: vec![Vector3::zeros(); n],
        }
    }

    /// dy = RHS(y) in the flat embedding.
    fn eval(&mut self, y: &DVector<T>, dy: &mut DVector<T>) {
        let block = 2 * self.dim * self.dim;
        for m in 0..self.n {
            unpack_from(&y.as_slice()[m * block..(m + 1) * block], &mut self.rho[m]);
            self.means[m] = Vector3::new(
                trace_product(&self.rho[m], &self.s[0]).re,
                trace_product(&self.rho[m], &self.s[1]).re,
                trace_product(&self.rho[m], &self.s[2]).re,
            );
        }
        for a in 0..self.n {
            let rho = &self.rho[a];
            // Exchange-weighted mean electron spin driving atom a.
            let mut g = Vector3::zeros();
            for m in 0..self.n {
                g += self.means[m] * self.rates[(m, a)];
            }
            let gin = self.rate_in[a];
            let cg = [
                Complex::new(g.x, T::zero()),
                Complex::new(g.y, T::zero()),
                Complex::new(g.z, T::zero()),
            ];

            // M_k = ρ S_k and P_k = S_k ρ feed every collision term.
            let m0 = rho * &self.s[0];
            let m1 = rho * &self.s[1];
            let m2 = rho * &self.s[2];
            let p0 = &self.s[0] * rho;
            let p1 = &self.s[1] * rho;
            let p2 = &self.s[2] * rho;

            let iso = &self.s[0] * &m0 + &self.s[1] * &m1 + &self.s[2] * &m2;
            // (S×ρS)_k = ε_kij S_i ρ S_j, contracted with the drive vector.
            let cross = (&self.s[1] * &m2 - &self.s[2] * &m1) * cg[0]
                + (&self.s[2] * &m0 - &self.s[0] * &m2) * cg[1]
                + (&self.s[0] * &m1 - &self.s[1] * &m0) * cg[2];
            let comm = &self.h * rho - rho * &self.h;

            // +iω[S·I, ρ]: the handedness under which the commutator
            // projections reproduce the moment engine (see module docs).
            let drho = comm * Complex::new(T::zero(), self.omega[a])
                + (iso - rho * Complex::new(T::lit(0.75), T::zero()))
                    * Complex::new(gin, T::zero())
                + (&m0 + &p0) * cg[0]
                + (&m1 + &p1) * cg[1]
                + (&m2 + &p2) * cg[2]
                + cross * Complex::new(T::zero(), -T::lit(2.0));

            pack_into(&drho, &mut dy.as_mut_slice()[a * block..(a + 1) * block]);
        }
    }
}

fn check_counts<T: Real>(
    state: &DensityMatrixState<T>,
    params: &BlochParams<T>,
    ops: &ProductOperators<T>,
) -> Result<()> {
    state.validate()?;
    if state.len() != params.n_atoms() {
        return Err(Error::DimensionMismatch {
            expected: params.n_atoms(),
            got: state.len(),
        });
    }
    if state.dim() != ops.dim {
        return Err(Error::DimensionMismatch {
            expected: ops.dim,
            got: state.dim(),
        });
    }
    Ok(())
}

/// Time derivative of every atom's density matrix.
///
/// Errors on shape mismatches and on input that is non-Hermitian or badly
/// normalized beyond tolerance.
pub fn master_rhs<T: Real>(
    state: &DensityMatrixState<T>,
    params: &BlochParams<T>,
    ops: &ProductOperators<T>,
) -> Result<Vec<DMatrix<Complex<T>>>> {
    check_counts(state, params, ops)?;
    let y = state.to_flat();
    let mut dy = DVector::zeros(y.len());
    let mut ws = MasterWorkspace::new(params, ops);
    ws.eval(&y, &mut dy);
    Ok(
        DensityMatrixState::from_flat(state.t, state.nuclear_i, &dy, ops.dim, state.len())
            .rhos,
    )
}

/// Uniformly sampled observable trajectory of the master equation.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterTrajectory<T: Real> {
    /// Sample times.
    pub times: Vec<T>,
    /// Per sample, per atom (⟨S⟩, ⟨I⟩, ⟨A⟩).
    pub observables: Vec<Vec<SpinTriple<T>>>,
    /// Per sample, ensemble means of the same.
    pub means: Vec<SpinTriple<T>>,
    /// Full density matrices, retained on request.
    pub densities: Option<Vec<DensityMatrixState<T>>>,
}

/// Integrate the ensemble of density matrices from `state0` to `t_end`,
/// sampling every `sample_dt`. Set `keep_densities` to retain the matrices
/// themselves (for positivity/trace audits or state dumps) in addition to
/// the observables.
#[allow(clippy::too_many_arguments)]
pub fn integrate_master<T: Real>(
    state0: &DensityMatrixState<T>,
    params: &BlochParams<T>,
    ops: &ProductOperators<T>,
    t_end: T,
    sample_dt: T,
    rtol: T,
    atol: T,
    keep_densities: bool,
) -> Result<MasterTrajectory<T>> {
    check_counts(state0, params, ops)?;
    let opts = OdeOptions::new(rtol, atol)?;
    let (n, dim) = (state0.len(), state0.dim());
    let mut ws = MasterWorkspace::new(params, ops);
    let sampled = integrate_sampled(
        move |_t, y, dy| ws.eval(y, dy),
        state0.to_flat(),
        state0.t,
        t_end,
        sample_dt,
        &opts,
    )?;
    let mut traj = MasterTrajectory {
        times: sampled.times.clone(),
        observables: Vec::with_capacity(sampled.states.len()),
        means: Vec::with_capacity(sampled.states.len()),
        densities: keep_densities.then(Vec::new),
    };
    for (k, y) in sampled.states.iter().enumerate() {
        let st = DensityMatrixState::from_flat(sampled.times[k], state0.nuclear_i, y, dim, n);
        let obs = st.observables(ops)?;
        traj.means.push(mean_triples(&obs));
        traj.observables.push(obs);
        if let Some(dv) = &mut traj.densities {
            dv.push(st);
        }
    }
    Ok(traj)
}

/// Synchronized (mean-field) reduction: one density matrix whose exchange
/// drive is its own ⟨S⟩, i.e. a single self-coupled atom with total rate Γ.
/// This is the configuration every identically prepared uniform ensemble
/// collapses onto, at any atom count.
#[allow(clippy::too_many_arguments)]
pub fn mean_field_mode<T: Real>(
    rho0: &DMatrix<Complex<T>>,
    omega: T,
    gamma: T,
    ops: &ProductOperators<T>,
    t_end: T,
    sample_dt: T,
    rtol: T,
    atol: T,
) -> Result<MasterTrajectory<T>> {
    let coupling = CouplingMatrix::uniform(1, gamma)?;
    let freqs = FrequencySpread::uniform(omega, 1)?;
    let params = BlochParams::new(coupling, freqs)?;
    let state0 = DensityMatrixState::new(vec![rho0.clone()], ops)?;
    integrate_master(&state0, &params, ops, t_end, sample_dt, rtol, atol, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::integrate as bloch_integrate;
    use crate::init::{
        bloch_state_from_density, doubly_stochastic, sample_angles, spin_temperature_state,
        tilt_state, SpinTempConfig, TiltAngles,
    };
    use crate::meanfield::{meanfield_solution, MeanFieldParams};
    use crate::ops::product_operators;
    use rand::{Rng, RngExt, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn mixed(dim: usize) -> DMatrix<Complex<f64>> {
        DMatrix::from_diagonal_element(dim, dim, Complex::new(1.0 / dim as f64, 0.0))
    }

    /// Random positive-definite Hermitian unit-trace matrix.
    fn random_density(dim: usize, rng: &mut impl Rng) -> DMatrix<Complex<f64>> {
        let g = DMatrix::from_fn(dim, dim, |_, _| {
            Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let h = &g * g.adjoint();
        let tr = h.trace().re;
        h / Complex::new(tr, 0.0)
    }

    fn max_matrix_abs(m: &DMatrix<Complex<f64>>) -> f64 {
        m.iter().fold(0.0f64, |w, z| w.max(z.norm()))
    }

    fn tilted_spin_temp(
        beta: f64,
        nuclear_i: f64,
        theta_y: f64,
        ops: &ProductOperators<f64>,
    ) -> DMatrix<Complex<f64>> {
        let cfg = SpinTempConfig::new(beta, nuclear_i).unwrap();
        let rho = spin_temperature_state(&cfg).unwrap();
        tilt_state(&rho, &TiltAngles::electron_y(theta_y), ops).unwrap()
    }

    fn params_uniform(n: usize, gamma: f64, omega: f64) -> BlochParams<f64> {
        BlochParams::new(
            CouplingMatrix::uniform(n, gamma).unwrap(),
            FrequencySpread::uniform(omega, n).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn maximally_mixed_ensemble_is_a_fixed_point() {
        // β = 0 (unpolarized) is exactly the maximally mixed state; it must
        // be stationary under both the derivative and the integrator.
        let ops = product_operators(1.5).unwrap();
        let coupling = doubly_stochastic(2, 4, 1e-12).unwrap().with_gamma(8.0);
        let params = BlochParams::new(
            coupling,
            FrequencySpread::uniform(1.0, 2).unwrap(),
        )
        .unwrap();
        let state = DensityMatrixState::replicated(2, &mixed(8), &ops).unwrap();
        for drho in master_rhs(&state, &params, &ops).unwrap() {
            assert!(max_matrix_abs(&drho) < 1e-14);
        }
        let traj =
            integrate_master(&state, &params, &ops, 1.0, 0.5, 1e-9, 1e-12, false).unwrap();
        for mean in &traj.means {
            assert!(mean.s.norm() < 1e-12);
            assert!(mean.ivec.norm() < 1e-12);
            assert!(mean.a.norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_is_traceless_and_hermitian_for_random_states() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for nuclear_i in [0.5, 1.5] {
            let ops = product_operators(nuclear_i).unwrap();
            let n = 3;
            let coupling = doubly_stochastic(n, 9, 1e-12).unwrap().with_gamma(3.0);
            let freqs = FrequencySpread::sample(1.0, 0.05, n, 2).unwrap();
            let params = BlochParams::new(coupling, freqs).unwrap();
            let rhos: Vec<_> = (0..n).map(|_| random_density(ops.dim, &mut rng)).collect();
            let state = DensityMatrixState::new(rhos, &ops).unwrap();
            for drho in master_rhs(&state, &params, &ops).unwrap() {
                assert!(drho.trace().norm() < 1e-12, "trace not preserved");
                let defect = max_matrix_abs(&(&drho - drho.adjoint()));
                assert!(defect < 1e-12, "derivative not Hermitian: {defect}");
            }
        }
    }

    #[test]
    fn hyperfine_beat_of_an_up_down_product_state() {
        // |↑e ↓n⟩ splits evenly across the two total-spin manifolds, whose
        // splitting is exactly ω: ⟨S_z⟩(t) = ½ cos ωt, ⟨I_z⟩ = −⟨S_z⟩.
        let ops = product_operators(0.5).unwrap();
        let mut rho = DMatrix::zeros(4, 4);
        rho[(1, 1)] = Complex::new(1.0, 0.0);
        let omega = 1.0;
        let traj =
            mean_field_mode(&rho, omega, 0.0, &ops, 10.0, 0.5, 1e-10, 1e-13).unwrap();
        for (k, &t) in traj.times.iter().enumerate() {
            let m = &traj.means[k];
            let expect = 0.5 * (omega * t).cos();
            assert!((m.s.z - expect).abs() < 1e-8, "t={t}: {} vs {expect}", m.s.z);
            assert!((m.ivec.z + expect).abs() < 1e-8);
            assert!(m.s.x.abs() < 1e-9 && m.s.y.abs() < 1e-9);
        }
    }

    #[test]
    fn matches_moment_engine_for_spin_half_product_states() {
        // For I = 1/2 the (S, I, A) moments close exactly, so both engines
        // must produce the same trajectory from the same product states.
        let ops = product_operators(0.5).unwrap();
        let n = 4;
        let tilts = sample_angles(std::f64::consts::FRAC_PI_4, 0.3, n, 3);
        let rhos: Vec<_> = tilts
            .iter()
            .map(|&th| tilted_spin_temp(0.8, 0.5, th, &ops))
            .collect();
        let coupling = doubly_stochastic(n, 11, 1e-12).unwrap().with_gamma(5.0);
        let freqs = FrequencySpread::sample(1.0, 0.02, n, 7).unwrap();
        let params = BlochParams::new(coupling, freqs).unwrap();

        let mstate = DensityMatrixState::new(rhos.clone(), &ops).unwrap();
        let mtraj =
            integrate_master(&mstate, &params, &ops, 8.0, 0.25, 1e-10, 1e-13, false).unwrap();

        let bstate = bloch_state_from_density(&rhos, &ops).unwrap();
        let btraj = bloch_integrate(&bstate, &params, 8.0, 0.25, 1e-10, 1e-13).unwrap();

        assert_eq!(mtraj.times.len(), btraj.len());
        let mut worst = 0.0f64;
        for (k, bst) in btraj.iter().enumerate() {
            for (ma, ba) in mtraj.observables[k].iter().zip(&bst.atoms) {
                worst = worst
                    .max((ma.s - ba.s).amax())
                    .max((ma.ivec - ba.ivec).amax())
                    .max((ma.a - ba.a).amax());
            }
        }
        assert!(worst < 1e-6, "engines disagree by {worst}");
    }

    #[test]
    fn conserves_mean_total_spin_trace_and_positivity() {
        let ops = product_operators(1.5).unwrap();
        let n = 3;
        let tilts = sample_angles(std::f64::consts::FRAC_PI_3, 0.2, n, 6);
        let rhos: Vec<_> = tilts
            .iter()
            .map(|&th| tilted_spin_temp(0.9, 1.5, th, &ops))
            .collect();
        let coupling = doubly_stochastic(n, 13, 1e-12).unwrap().with_gamma(20.0);
        let freqs = FrequencySpread::uniform(1.0, n).unwrap();
        let params = BlochParams::new(coupling, freqs).unwrap();
        let state = DensityMatrixState::new(rhos, &ops).unwrap();
        let f0 = state.means(&ops).unwrap().f();

        let traj =
            integrate_master(&state, &params, &ops, 5.0, 0.25, 1e-10, 1e-13, true).unwrap();
        let densities = traj.densities.as_ref().unwrap();
        for (k, mean) in traj.means.iter().enumerate() {
            assert!((mean.f() - f0).amax() < 1e-8, "mean F drifts");
            let st = &densities[k];
            assert!(st.trace_defect() < 1e-9);
            assert!(st.hermiticity_defect() < 1e-10);
            assert!(st.min_eigenvalue() > -1e-7);
        }
    }

    #[test]
    fn mean_field_mode_matches_identical_atom_ensemble() {
        // Identically prepared atoms under uniform coupling stay identical,
        // so the single self-coupled matrix reproduces the N-atom run.
        let ops = product_operators(1.5).unwrap();
        let rho = tilted_spin_temp(0.9, 1.5, std::f64::consts::FRAC_PI_3, &ops);
        let mf = mean_field_mode(&rho, 1.0, 30.0, &ops, 6.0, 0.2, 1e-10, 1e-13).unwrap();

        let n = 3;
        let params = params_uniform(n, 30.0, 1.0);
        let state = DensityMatrixState::replicated(n, &rho, &ops).unwrap();
        let full =
            integrate_master(&state, &params, &ops, 6.0, 0.2, 1e-10, 1e-13, false).unwrap();

        let mut worst = 0.0f64;
        for (k, m) in mf.means.iter().enumerate() {
            let f = &full.means[k];
            worst = worst
                .max((m.s - f.s).amax())
                .max((m.ivec - f.ivec).amax())
                .max((m.a - f.a).amax());
        }
        assert!(worst < 1e-8, "reduction disagrees by {worst}");
    }

    #[test]
    fn mean_field_density_dynamics_match_two_mode_closed_form() {
        // I = 1/2 synchronized dynamics admit a two-mode-per-component
        // closed form; the density engine must land on it.
        let ops = product_operators(0.5).unwrap();
        let rho = tilted_spin_temp(1.2, 0.5, std::f64::consts::FRAC_PI_3, &ops);
        let triple = observables(&rho, &ops).unwrap();
        let (omega, gamma) = (1.0, 40.0);

        let traj = mean_field_mode(&rho, omega, gamma, &ops, 12.0, 0.25, 1e-10, 1e-13).unwrap();

        let f = triple.f();
        let p = MeanFieldParams::new(omega, gamma, f.norm(), f).unwrap();
        let closed = meanfield_solution(&triple.s, &triple.a, &p, &traj.times);
        let mut worst = 0.0f64;
        for (k, s) in closed.iter().enumerate() {
            worst = worst.max((traj.means[k].s - s).amax());
        }
        assert!(worst < 1e-6, "closed form disagrees by {worst}");
    }

    #[test]
    fn synchronization_frequency_grows_with_polarization() {
        // In the strong-exchange regime the surviving precession runs at
        // the effective rate ω|⟨F⟩|, so higher spin temperature polarization
        // must produce more zero crossings over a fixed window.
        let ops = product_operators(1.5).unwrap();
        let crossings = |beta: f64| -> usize {
            let rho = tilted_spin_temp(beta, 1.5, std::f64::consts::FRAC_PI_2, &ops);
            let traj = mean_field_mode(&rho, 1.0, 60.0, &ops, 40.0, 0.1, 1e-9, 1e-12).unwrap();
            let xs: Vec<f64> = traj.means.iter().map(|m| m.s.x).collect();
            xs.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
        };
        let slow = crossings(0.3);
        let fast = crossings(1.5);
        assert!(
            fast > slow,
            "crossings did not grow with polarization: {slow} vs {fast}"
        );
    }

    #[test]
    fn coherence_survives_strong_exchange() {
        // Naive exchange damping e^{−Γt} would erase the transverse spin by
        // t ≳ 1/Γ; synchronization keeps it alive out to t ~ Γ/ω².
        let ops = product_operators(1.5).unwrap();
        let rho = tilted_spin_temp(1.2, 1.5, std::f64::consts::FRAC_PI_2, &ops);
        let gamma = 60.0;
        let traj = mean_field_mode(&rho, 1.0, gamma, &ops, 30.0, 0.1, 1e-9, 1e-12).unwrap();
        let amp0 = observables(&rho, &ops).unwrap().s.norm();
        let late_peak = traj
            .times
            .iter()
            .zip(&traj.means)
            .filter(|(t, _)| **t > 20.0)
            .fold(0.0f64, |w, (_, m)| w.max(m.s.xy().norm()));
        assert!(
            late_peak > 0.3 * amp0,
            "transverse spin gone by t ≫ 1/Γ: {late_peak} vs initial {amp0}"
        );
    }

    #[test]
    fn rejects_invalid_states_and_mismatched_shapes() {
        let ops = product_operators(0.5).unwrap();
        let mut bad = mixed(4);
        bad[(0, 1)] = Complex::new(0.0, 0.1);
        assert!(DensityMatrixState::new(vec![bad], &ops).is_err());

        let scaled = mixed(4) * Complex::new(0.9, 0.0);
        assert!(DensityMatrixState::new(vec![scaled], &ops).is_err());

        let state = DensityMatrixState::replicated(2, &mixed(4), &ops).unwrap();
        let params = params_uniform(3, 1.0, 1.0);
        assert!(master_rhs(&state, &params, &ops).is_err());

        let ops8 = product_operators(1.5).unwrap();
        let params2 = params_uniform(2, 1.0, 1.0);
        assert!(master_rhs(&state, &params2, &ops8).is_err());
    }

    #[test]
    fn flat_embedding_roundtrips() {
        let ops = product_operators(1.5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let rhos: Vec<_> = (0..3).map(|_| random_density(8, &mut rng)).collect();
        let state = DensityMatrixState::new(rhos, &ops).unwrap();
        let back =
            DensityMatrixState::from_flat(state.t, state.nuclear_i, &state.to_flat(), 8, 3);
        for (a, b) in state.rhos.iter().zip(&back.rhos) {
            assert_eq!(a, b);
        }
    }
}
