//! Many-body Bloch engine: 9N coupled equations for the per-atom electron
//! spin ⟨S_n⟩, nuclear spin ⟨I_n⟩, and hyperfine coherence ⟨A_n⟩.
//!
//! The evolution couples hyperfine precession at per-atom frequencies ω_n to
//! pairwise electron spin exchange at rates Γ_mn:
//!
//! ```text
//! dS_n/dt =  ω_n A_n + Σ_m Γ_mn (S_m − S_n)
//! dI_n/dt = −ω_n A_n
//! dA_n/dt = −(ω_n/2)(S_n − I_n) − Σ_m Γ_mn A_n + Σ_m Γ_mn S_m × I_n
//! ```
//!
//! The mean total spin F̄ = (1/N) Σ_n (S_n + I_n) is conserved exactly at
//! the right-hand-side level for any doubly stochastic coupling; along
//! trajectories its drift is bounded by integrator roundoff because
//! Runge–Kutta methods preserve linear invariants.
//!
//! Flat state layout (integrator interoperability): atom n occupies the
//! 9 slots starting at 9n, ordered [Sx, Sy, Sz, Ix, Iy, Iz, Ax, Ay, Az].

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::init::{CouplingMatrix, FrequencySpread};
use crate::integrate::{integrate_sampled, OdeOptions};
use crate::ops::SpinTriple;
use crate::real::Real;

/// Per-atom spin triples at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleBlochState<T: Real> {
    /// Time of this snapshot.
    pub t: T,
    /// One (⟨S⟩, ⟨I⟩, ⟨A⟩) triple per atom.
    pub atoms: Vec<SpinTriple<T>>,
}

impl<T: Real> EnsembleBlochState<T> {
    /// State with all atoms holding the same triple.
    pub fn replicated(n_atoms: usize, triple: SpinTriple<T>) -> Self {
        Self {
            t: T::zero(),
            atoms: vec![triple; n_atoms],
        }
    }

    /// Atom count.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    /// True when no atoms are present.
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Pack into the flat 9N layout.
    pub fn to_flat(&self) -> DVector<T> {
        let mut y = DVector::zeros(9 * self.atoms.len());
        for (n, a) in self.atoms.iter().enumerate() {
            let b = 9 * n;
            for k in 0..3 {
                y[b + k] = a.s[k];
                y[b + 3 + k] = a.ivec[k];
                y[b + 6 + k] = a.a[k];
            }
        }
        y
    }

    /// Unpack from the flat 9N layout.
    pub fn from_flat(t: T, y: &DVector<T>) -> Self {
        assert!(y.len() % 9 == 0, "flat Bloch state length must be 9N");
        let atoms = (0..y.len() / 9)
            .map(|n| {
                let b = 9 * n;
                SpinTriple {
                    s: Vector3::new(y[b], y[b + 1], y[b + 2]),
                    ivec: Vector3::new(y[b + 3], y[b + 4], y[b + 5]),
                    a: Vector3::new(y[b + 6], y[b + 7], y[b + 8]),
                }
            })
            .collect();
        Self { t, atoms }
    }

    /// Ensemble means (⟨S̄⟩, ⟨Ī⟩, ⟨Ā⟩).
    pub fn means(&self) -> SpinTriple<T> {
        let n = T::from_usize(self.atoms.len().max(1)).expect("count");
        let mut m = SpinTriple::zero();
        for a in &self.atoms {
            m.s += a.s;
            m.ivec += a.ivec;
            m.a += a.a;
        }
        m.s /= n;
        m.ivec /= n;
        m.a /= n;
        m
    }
}

/// Coefficients of the Bloch equations: exchange rates and per-atom
/// hyperfine frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochParams<T: Real> {
    pub coupling: CouplingMatrix<T>,
    pub freqs: FrequencySpread<T>,
}

impl<T: Real> BlochParams<T> {
    /// Validate mutual consistency (atom counts must agree).
    pub fn new(coupling: CouplingMatrix<T>, freqs: FrequencySpread<T>) -> Result<Self> {
        if coupling.n_atoms != freqs.len() {
            return Err(Error::DimensionMismatch {
                expected: coupling.n_atoms,
                got: freqs.len(),
            });
        }
        Ok(Self { coupling, freqs })
    }

    /// Atom count N.
    pub fn n_atoms(&self) -> usize {
        self.coupling.n_atoms
    }
}

/// Precomputed dense coefficients for the hot loop.
struct RhsWorkspace<T: Real> {
    n: usize,
    omega: Vec<T>,
    /// Γ_mn, indexed (source m, target n).
    rates: DMatrix<T>,
    /// Σ_m Γ_mn per target atom n.
    rate_in: Vec<T>,
    /// Scratch: exchange-weighted mean spin W_n = Σ_m Γ_mn S_m.
    wsx: Vec<T>,
    wsy: Vec<T>,
    wsz: Vec<T>,
}

impl<T: Real> RhsWorkspace<T> {
    fn new(params: &BlochParams<T>) -> Self {
        let n = params.n_atoms();
        let rates = params.coupling.rates();
        let rate_in = (0..n)
            .map(|c| (0..n).fold(T::zero(), |acc, r| acc + rates[(r, c)]))
            .collect();
        Self {
            n,
            omega: params.freqs.omega_n.clone(),
            rates,
            rate_in,
            wsx: vec![T::zero(); n],
            wsy: vec![T::zero(); n],
            wsz: vec![T::zero(); n],
        }
    }

    /// dy = RHS(y) in the flat 9N layout.
    fn eval(&mut self, y: &DVector<T>, dy: &mut DVector<T>) {
        let n = self.n;
        // W_n = Σ_m Γ_mn S_m (weighted by source index m down each column).
        for c in 0..n {
            let mut ax = T::zero();
            let mut ay = T::zero();
            let mut az = T::zero();
            for r in 0..n {
                let g = self.rates[(r, c)];
                let b = 9 * r;
                ax += g * y[b];
                ay += g * y[b + 1];
                az += g * y[b + 2];
            }
            self.wsx[c] = ax;
            self.wsy[c] = ay;
            self.wsz[c] = az;
        }
        let half = T::lit(0.5);
        for k in 0..n {
            let b = 9 * k;
            let w = self.omega[k];
            let gin = self.rate_in[k];
            let (sx, sy, sz) = (y[b], y[b + 1], y[b + 2]);
            let (ix, iy, iz) = (y[b + 3], y[b + 4], y[b + 5]);
            let (axc, ayc, azc) = (y[b + 6], y[b + 7], y[b + 8]);
            let (wx, wy, wz) = (self.wsx[k], self.wsy[k], self.wsz[k]);

            // dS = ω A + (W − Γ_in S)
            dy[b] = w * axc + wx - gin * sx;
            dy[b + 1] = w * ayc + wy - gin * sy;
            dy[b + 2] = w * azc + wz - gin * sz;
            // dI = −ω A
            dy[b + 3] = -w * axc;
            dy[b + 4] = -w * ayc;
            dy[b + 5] = -w * azc;
            // dA = −(ω/2)(S − I) − Γ_in A + W × I
            dy[b + 6] = -w * half * (sx - ix) - gin * axc + (wy * iz - wz * iy);
            dy[b + 7] = -w * half * (sy - iy) - gin * ayc + (wz * ix - wx * iz);
            dy[b + 8] = -w * half * (sz - iz) - gin * azc + (wx * iy - wy * ix);
        }
    }
}

/// Time derivative of every atom's (S, I, A) triple.
///
/// Errors on non-finite input or an atom-count mismatch with `params`.
pub fn bloch_rhs<T: Real>(
    state: &EnsembleBlochState<T>,
    params: &BlochParams<T>,
) -> Result<Vec<SpinTriple<T>>> {
    if state.len() != params.n_atoms() {
        return Err(Error::DimensionMismatch {
            expected: params.n_atoms(),
            got: state.len(),
        });
    }
    let y = state.to_flat();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: state.t.as_f64() });
    }
    let mut ws = RhsWorkspace::new(params);
    let mut dy = DVector::zeros(y.len());
    ws.eval(&y, &mut dy);
    Ok(EnsembleBlochState::from_flat(state.t, &dy).atoms)
}

/// Integrate the ensemble from `state0` to `t_end`, sampling every
/// `sample_dt`. Adaptive stepping handles the two-timescale stiffness of
/// strong coupling (fast scale Γ, slow decays ω²/Γ).
pub fn integrate<T: Real>(
    state0: &EnsembleBlochState<T>,
    params: &BlochParams<T>,
    t_end: T,
    sample_dt: T,
    rtol: T,
    atol: T,
) -> Result<Vec<EnsembleBlochState<T>>> {
    if state0.len() != params.n_atoms() {
        return Err(Error::DimensionMismatch {
            expected: params.n_atoms(),
            got: state0.len(),
        });
    }
    let mut ws = RhsWorkspace::new(params);
    let opts = OdeOptions::new(rtol, atol)?;
    let out = integrate_sampled(
        |_t, y, dy| ws.eval(y, dy),
        state0.to_flat(),
        state0.t,
        t_end,
        sample_dt,
        &opts,
    )?;
    Ok(out
        .times
        .iter()
        .zip(&out.states)
        .map(|(&t, y)| EnsembleBlochState::from_flat(t, y))
        .collect())
}

/// Mean total spin F̄ = (1/N) Σ_n (S_n + I_n), the conserved quantity of
/// the exchange dynamics (mean-per-atom convention).
pub fn total_spin<T: Real>(state: &EnsembleBlochState<T>) -> Vector3<T> {
    if state.is_empty() {
        return Vector3::zeros();
    }
    let n = T::from_usize(state.len()).expect("count");
    let mut f = Vector3::zeros();
    for a in &state.atoms {
        f += a.f();
    }
    f / n
}
