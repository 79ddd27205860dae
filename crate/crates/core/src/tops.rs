//! Reduced "coupled tops" engine for the strong-exchange regime.
//!
//! When exchange dominates precession (Γ ≫ ω), the hyperfine coherence
//! follows the spins adiabatically and each atom reduces to a pair of
//! vectors (S_n, F_n):
//!
//! ```text
//! dF_n/dt = Σ_m Γ_mn (S_m − S_n)
//! dS_n/dt = Σ_m Γ_mn (S_m − S_n) + ω_n S_n × F_n − (ω_n²/Γ_n)(S_n − F_n/2)
//! ```
//!
//! with Γ_n = Σ_m Γ_mn the total exchange rate seen by atom n. The
//! precession term is written S_n × F_n so that the reduced flow matches the
//! adiabatic limit of the full 9N engine (eliminating the coherence from the
//! first-order equations produces + ω S×F; writing the torque as F×S flips
//! the precession sense relative to that engine).
//!
//! The reduction drops a torque correction of relative order ω/Γ, so this
//! engine is an approximation: it is validated against the full Bloch engine
//! (never the reverse) and over-damps the slow precessing mode by a factor
//! 1/(1−|F|²) — acceptable at the few-percent level in its validity regime.
//!
//! The synchronized ensemble precesses about the effective mean field
//! Ω = (1/N) Σ_n ω_n F_n.
//!
//! Flat state layout: atom n occupies the 6 slots starting at 6n, ordered
//! [Sx, Sy, Sz, Fx, Fy, Fz].

use nalgebra::{DVector, Vector3};

use crate::bloch::{BlochParams, EnsembleBlochState};
use crate::error::{Error, Result};
use crate::init::FrequencySpread;
use crate::integrate::{integrate_sampled, OdeOptions};
use crate::real::Real;

/// Per-atom (S_n, F_n) pairs at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TopsState<T: Real> {
    /// Time of this snapshot.
    pub t: T,
    /// Electron spins S_n.
    pub s: Vec<Vector3<T>>,
    /// Total spins F_n.
    pub f: Vec<Vector3<T>>,
}

/// Time derivatives of a [`TopsState`], same indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct TopsDerivative<T: Real> {
    pub ds: Vec<Vector3<T>>,
    pub df: Vec<Vector3<T>>,
}

impl<T: Real> TopsState<T> {
    /// Project a full Bloch state down to (S_n, F_n = S_n + I_n); the
    /// hyperfine coherence is discarded (enslaved in this model).
    pub fn from_bloch(state: &EnsembleBlochState<T>) -> Self {
        Self {
            t: state.t,
            s: state.atoms.iter().map(|a| a.s).collect(),
            f: state.atoms.iter().map(|a| a.f()).collect(),
        }
    }

    /// Atom count.
    pub fn len(&self) -> usize {
        self.s.len()
    }

    /// True when no atoms are present.
    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Ensemble means (S̄, F̄).
    pub fn means(&self) -> (Vector3<T>, Vector3<T>) {
        let n = T::from_usize(self.len().max(1)).expect("count");
        let mut s = Vector3::zeros();
        let mut f = Vector3::zeros();
        for k in 0..self.len() {
            s += self.s[k];
            f += self.f[k];
        }
        (s / n, f / n)
    }

    /// Pack into the flat 6N layout.
    pub fn to_flat(&self) -> DVector<T> {
        let mut y = DVector::zeros(6 * self.len());
        for k in 0..self.len() {
            let b = 6 * k;
            for c in 0..3 {
                y[b + c] = self.s[k][c];
                y[b + 3 + c] = self.f[k][c];
            }
        }
        y
    }

    /// Unpack from the flat 6N layout.
    pub fn from_flat(t: T, y: &DVector<T>) -> Self {
        assert!(y.len() % 6 == 0, "flat tops state length must be 6N");
        let n = y.len() / 6;
        let mut s = Vec::with_capacity(n);
        let mut f = Vec::with_capacity(n);
        for k in 0..n {
            let b = 6 * k;
            s.push(Vector3::new(y[b], y[b + 1], y[b + 2]));
            f.push(Vector3::new(y[b + 3], y[b + 4], y[b + 5]));
        }
        Self { t, s, f }
    }
}

/// The effective mean field Ω = (1/N) Σ_n ω_n F_n about which the
/// synchronized ensemble precesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveField<T: Real> {
    /// The field vector (angular-frequency units).
    pub omega: Vector3<T>,
    /// |Ω|.
    pub magnitude: T,
}

/// Arithmetic mean of ω_n F_n. Errors if list lengths differ.
pub fn effective_field<T: Real>(
    freqs: &FrequencySpread<T>,
    f_list: &[Vector3<T>],
) -> Result<EffectiveField<T>> {
    if freqs.len() != f_list.len() {
        return Err(Error::DimensionMismatch {
            expected: freqs.len(),
            got: f_list.len(),
        });
    }
    let n = T::from_usize(f_list.len().max(1)).expect("count");
    let mut acc = Vector3::zeros();
    for (w, f) in freqs.omega_n.iter().zip(f_list) {
        acc += f * *w;
    }
    let omega = acc / n;
    Ok(EffectiveField {
        omega,
        magnitude: omega.norm(),
    })
}

struct TopsWorkspace<T: Real> {
    n: usize,
    omega: Vec<T>,
    rates: nalgebra::DMatrix<T>,
    /// ω_n²/Γ_n, the per-atom contraction rate toward F_n/2.
    contraction: Vec<T>,
    rate_in: Vec<T>,
    wsx: Vec<T>,
    wsy: Vec<T>,
    wsz: Vec<T>,
}

impl<T: Real> TopsWorkspace<T> {
    fn new(params: &BlochParams<T>) -> Result<Self> {
        let n = params.n_atoms();
        let rates = params.coupling.rates();
        let rate_in: Vec<T> = (0..n)
            .map(|c| (0..n).fold(T::zero(), |acc, r| acc + rates[(r, c)]))
            .collect();
        let mut contraction = Vec::with_capacity(n);
        for k in 0..n {
            if rate_in[k] <= T::zero() {
                return Err(Error::InvalidConfig(format!(
                    "tops reduction needs a positive total exchange rate; atom {k} has none"
                )));
            }
            let w = params.freqs.omega_n[k];
            contraction.push(w * w / rate_in[k]);
        }
        Ok(Self {
            n,
            omega: params.freqs.omega_n.clone(),
            rates,
            contraction,
            rate_in,
            wsx: vec![T::zero(); n],
            wsy: vec![T::zero(); n],
            wsz: vec![T::zero(); n],
        })
    }

    fn eval(&mut self, y: &DVector<T>, dy: &mut DVector<T>) {
        let n = self.n;
        for c in 0..n {
            let mut ax = T::zero();
            let mut ay = T::zero();
            let mut az = T::zero();
            for r in 0..n {
                let g = self.rates[(r, c)];
                let b = 6 * r;
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
            let b = 6 * k;
            let w = self.omega[k];
            let kap = self.contraction[k];
            let gin = self.rate_in[k];
            let (sx, sy, sz) = (y[b], y[b + 1], y[b + 2]);
            let (fx, fy, fz) = (y[b + 3], y[b + 4], y[b + 5]);
            // Exchange drive Σ_m Γ_mn (S_m − S_n), shared by dS and dF.
            let ex = self.wsx[k] - gin * sx;
            let ey = self.wsy[k] - gin * sy;
            let ez = self.wsz[k] - gin * sz;
            // dS = exchange + ω S×F − κ (S − F/2)
            dy[b] = ex + w * (sy * fz - sz * fy) - kap * (sx - half * fx);
            dy[b + 1] = ey + w * (sz * fx - sx * fz) - kap * (sy - half * fy);
            dy[b + 2] = ez + w * (sx * fy - sy * fx) - kap * (sz - half * fz);
            // dF = exchange
            dy[b + 3] = ex;
            dy[b + 4] = ey;
            dy[b + 5] = ez;
        }
    }
}

/// Time derivative of the reduced state. Errors if sizes mismatch, any atom
/// has zero total exchange rate (the reduction divides by Γ_n), or the state
/// is non-finite.
pub fn tops_rhs<T: Real>(
    state: &TopsState<T>,
    params: &BlochParams<T>,
) -> Result<TopsDerivative<T>> {
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
    let mut ws = TopsWorkspace::new(params)?;
    let mut dy = DVector::zeros(y.len());
    ws.eval(&y, &mut dy);
    let d = TopsState::from_flat(state.t, &dy);
    Ok(TopsDerivative { ds: d.s, df: d.f })
}

/// Integrate the reduced ensemble from `state0` to `t_end`, sampling every
/// `sample_dt` (same adaptive integrator contract as the full engine).
pub fn integrate<T: Real>(
    state0: &TopsState<T>,
    params: &BlochParams<T>,
    t_end: T,
    sample_dt: T,
    rtol: T,
    atol: T,
) -> Result<Vec<TopsState<T>>> {
    if state0.len() != params.n_atoms() {
        return Err(Error::DimensionMismatch {
            expected: params.n_atoms(),
            got: state0.len(),
        });
    }
    let mut ws = TopsWorkspace::new(params)?;
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
        .map(|(&t, y)| TopsState::from_flat(t, y))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::CouplingMatrix;
    use approx::assert_abs_diff_eq;

    fn uniform_params(n: usize, gamma: f64, omega: f64) -> BlochParams<f64> {
        BlochParams::new(
            CouplingMatrix::uniform(n, gamma).unwrap(),
            FrequencySpread::uniform(omega, n).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn synchronized_equilibrium_is_a_fixed_point() {
        let f = Vector3::new(0.0, 0.0, 0.4);
        let state = TopsState {
            t: 0.0,
            s: vec![f * 0.5; 5],
            f: vec![f; 5],
        };
        let params = uniform_params(5, 10.0, 1.0);
        let d = tops_rhs(&state, &params).unwrap();
        for k in 0..5 {
            // S×F with S ∥ F vanishes; S − F/2 = 0; exchange cancels.
            assert!(d.ds[k].norm() < 1e-15);
            assert!(d.df[k].norm() < 1e-15);
        }
    }

    #[test]
    fn synchronized_spins_freeze_the_total_spins() {
        // Identical S_n with arbitrary unequal F_n: dF_n/dt = 0 exactly.
        let s = Vector3::new(0.1, -0.2, 0.05);
        let state = TopsState {
            t: 0.0,
            s: vec![s; 4],
            f: vec![
                Vector3::new(0.3, 0.0, 0.1),
                Vector3::new(-0.1, 0.2, 0.4),
                Vector3::new(0.0, 0.0, -0.3),
                Vector3::new(0.2, 0.2, 0.2),
            ],
        };
        let params = uniform_params(4, 7.0, 1.0);
        let d = tops_rhs(&state, &params).unwrap();
        for k in 0..4 {
            assert_eq!(d.df[k], Vector3::zeros(), "dF must vanish exactly");
        }
    }

    #[test]
    fn single_top_matches_damped_precession_oracle() {
        // Closed form: transverse part rotates x → (x cos + y sin) at rate
        // ω|F| while contracting at κ = ω²/Γ; longitudinal part relaxes to
        // F/2 at the same κ.
        let omega = 1.0;
        let gamma = 50.0;
        let fmag = 0.5;
        let s0 = Vector3::new(0.3, 0.1, 0.4);
        let f = Vector3::new(0.0, 0.0, fmag);
        let state0 = TopsState {
            t: 0.0,
            s: vec![s0],
            f: vec![f],
        };
        let params = uniform_params(1, gamma, omega);
        let traj = integrate(&state0, &params, 30.0, 1.5, 1e-10, 1e-13).unwrap();
        let kappa = omega * omega / gamma;
        let rot = omega * fmag;
        for snap in &traj {
            let t = snap.t;
            let env = (-kappa * t).exp();
            let (c, s) = ((rot * t).cos(), (rot * t).sin());
            let want = Vector3::new(
                env * (s0.x * c + s0.y * s),
                env * (-s0.x * s + s0.y * c),
                0.5 * fmag + (s0.z - 0.5 * fmag) * env,
            );
            assert!(
                (snap.s[0] - want).norm() < 1e-8,
                "single-top mismatch at t={t}: {:?} vs {:?}",
                snap.s[0],
                want
            );
            assert!((snap.f[0] - f).norm() < 1e-12, "F must stay fixed for N=1");
        }
    }

    #[test]
    fn effective_field_is_the_frequency_weighted_mean() {
        let freqs = FrequencySpread::uniform(2.0_f64, 3).unwrap();
        let zeros = vec![Vector3::zeros(); 3];
        let field = effective_field(&freqs, &zeros).unwrap();
        assert_eq!(field.magnitude, 0.0);

        let f = Vector3::new(0.1, 0.0, 0.3);
        let field = effective_field(&freqs, &vec![f; 3]).unwrap();
        assert!((field.omega - f * 2.0).norm() < 1e-15);
        assert_abs_diff_eq!(field.magnitude, (f * 2.0).norm(), epsilon = 1e-15);

        // Mixed frequencies and spins: plain arithmetic mean.
        let freqs = FrequencySpread {
            omega: 1.0,
            omega_n: vec![1.0, 3.0],
            delta_omega: 2.0,
        };
        let fs = [Vector3::new(0.2, 0.0, 0.0), Vector3::new(0.0, 0.0, 0.4)];
        let field = effective_field(&freqs, &fs).unwrap();
        assert!((field.omega - Vector3::new(0.1, 0.0, 0.6)).norm() < 1e-15);

        // Bound |Ω| ≤ max ω_n · max |F_n|.
        assert!(field.magnitude <= 3.0 * 0.4 + 1e-15);
        assert!(effective_field(&freqs, &zeros).is_err());
    }

    #[test]
    fn rejects_zero_exchange_rate() {
        let state = TopsState {
            t: 0.0,
            s: vec![Vector3::new(0.1, 0.0, 0.0)],
            f: vec![Vector3::new(0.0, 0.0, 0.5)],
        };
        let params = uniform_params(1, 0.0, 1.0);
        assert!(
            tops_rhs(&state, &params).is_err(),
            "Γ_n = 0 divides by zero and must be rejected"
        );
    }

    #[test]
    fn reduced_engine_tracks_full_engine_in_strong_exchange() {
        // Strong-exchange validity: small synchronized-regime ensemble,
        // Γ/ω = 100; the reduced mean ⟨S_x⟩(t) must stay within 5% of the
        // full 9N engine (sup-norm, relative to the peak amplitude) out to
        // several slow decay times.
        use crate::init::{
            bloch_state_from_density, doubly_stochastic, sample_angles,
            spin_temperature_state, tilt_state, SpinTempConfig, TiltAngles,
        };
        use crate::ops::product_operators;

        let n = 12;
        let omega = 1.0;
        let gamma = 100.0;
        let ops = product_operators(0.5_f64).unwrap();
        let cfg = SpinTempConfig::new(0.73, 0.5).unwrap();
        let rho0 = spin_temperature_state(&cfg).unwrap();
        let thetas = sample_angles(std::f64::consts::FRAC_PI_3, std::f64::consts::PI / 15.0, n, 5);
        let rhos: Vec<_> = thetas
            .iter()
            .map(|&th| tilt_state(&rho0, &TiltAngles::electron_y(th), &ops).unwrap())
            .collect();
        let state0 = bloch_state_from_density(&rhos, &ops).unwrap();

        let coupling = doubly_stochastic(n, 8, 1e-10).unwrap().with_gamma(gamma);
        let freqs = FrequencySpread::sample(omega, omega / 50.0, n, 9).unwrap();
        let params = BlochParams::new(coupling, freqs).unwrap();

        let t_end = 300.0;
        let dt = 2.0;
        let full = crate::bloch::integrate(&state0, &params, t_end, dt, 1e-9, 1e-12)
            .unwrap();
        let reduced = integrate(
            &TopsState::from_bloch(&state0),
            &params,
            t_end,
            dt,
            1e-9,
            1e-12,
        )
        .unwrap();

        let full_sx: Vec<f64> = full.iter().map(|s| s.means().s.x).collect();
        let red_sx: Vec<f64> = reduced.iter().map(|s| s.means().0.x).collect();
        let peak = full_sx.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(peak > 1e-3, "test setup must produce transverse spin");
        let worst = full_sx
            .iter()
            .zip(&red_sx)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(
            worst / peak < 0.05,
            "reduced engine deviates by {:.2}% of peak",
            100.0 * worst / peak
        );
    }

    #[test]
    fn flat_roundtrip_and_projection() {
        use crate::ops::SpinTriple;
        let bloch = EnsembleBlochState {
            t: 1.5,
            atoms: vec![SpinTriple {
                s: Vector3::new(0.1, 0.2, 0.3),
                ivec: Vector3::new(-0.1, 0.0, 0.2),
                a: Vector3::new(9.0, 9.0, 9.0), // must be ignored
            }],
        };
        let tops = TopsState::from_bloch(&bloch);
        assert_eq!(tops.f[0], Vector3::new(0.0, 0.2, 0.5));
        let back = TopsState::from_flat(tops.t, &tops.to_flat());
        assert_eq!(tops, back);
    }
}
