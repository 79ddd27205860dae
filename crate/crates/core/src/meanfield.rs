//! Closed-form mean-field dynamics of the synchronized ensemble.
//!
//! When all atoms share one frequency ω, exchange at total rate Γ, and a
//! common state, the electron spin obeys a linear second-order system
//!
//! ```text
//! S̈ + Γ Ṡ + ω²(S − F/2) − Γω (S × F) = 0
//! ```
//!
//! in the frame whose ẑ axis points along the conserved total spin F. Its
//! spherical components decouple: with s_± = (S_x ∓ i S_y)/√2 and s_0 = S_z,
//! each satisfies λ² + Γλ + ω² − q·iΓω|F| = 0 (q = 0, ±1), giving six
//! complex eigenvalues in three families,
//!
//! ```text
//! λ^0_{1,2} = (−Γ ± √(Γ² − 4ω²)) / 2
//! λ^±_{1,2} = (−Γ ± √(Γ² ± 4iΓω|F| − 4ω²)) / 2   (principal square root)
//! ```
//!
//! and the solution ⟨S_q⟩(t) = ⟨F_q⟩/2 + Σ_i a_i^q e^{λ_i^q t}. Branch
//! convention: λ_1 is the root with the larger real part (the slow,
//! line-narrowed mode), which keeps the labeling stable across rate sweeps.
//!
//! The low- and high-rate asymptotes are reproduced with the family labels
//! of their printed closed forms. Note those labels pair the fast branch of
//! the ± families with the opposite precession sign relative to the exact
//! larger-real-part convention, so asymptote-vs-exact comparisons must match
//! nearest eigenvalues as *sets* (see [`pair_nearest`]), not by label.

use nalgebra::{Complex, ComplexField, Vector3};

use crate::error::{Error, Result};
use crate::real::Real;

/// Parameters of the synchronized mean-field model (electron spin 1/2
/// coupled to nuclear spin 1/2; |F| ∈ [0, 1]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldParams<T: Real> {
    /// Hyperfine angular frequency ω ≥ 0.
    pub omega: T,
    /// Total spin-exchange rate Γ ≥ 0.
    pub gamma: T,
    /// Magnitude of the conserved total spin, 0 ≤ |F| ≤ 1.
    pub f_mag: T,
    /// Direction of F; defines the local ẑ axis (normalized at
    /// construction; irrelevant when f_mag = 0).
    pub f_dir: Vector3<T>,
}

impl<T: Real> MeanFieldParams<T> {
    /// Validate and normalize the field direction.
    pub fn new(omega: T, gamma: T, f_mag: T, f_dir: Vector3<T>) -> Result<Self> {
        if omega < T::zero() || gamma < T::zero() || !omega.is_finite() || !gamma.is_finite()
        {
            return Err(Error::InvalidConfig(format!(
                "rates must be finite and >= 0, got omega={omega} gamma={gamma}"
            )));
        }
        if f_mag < T::zero() || f_mag > T::one() {
            return Err(Error::InvalidConfig(format!(
                "|F| must lie in [0, 1], got {f_mag}"
            )));
        }
        let norm = f_dir.norm();
        let f_dir = if norm > T::lit(1e-12) {
            f_dir / norm
        } else if f_mag == T::zero() {
            Vector3::new(T::zero(), T::zero(), T::one())
        } else {
            return Err(Error::InvalidConfig(
                "F direction must be a nonzero vector when |F| > 0".into(),
            ));
        };
        Ok(Self {
            omega,
            gamma,
            f_mag,
            f_dir,
        })
    }

    /// Convenience constructor with F along the lab ẑ axis.
    pub fn aligned_z(omega: T, gamma: T, f_mag: T) -> Result<Self> {
        Self::new(
            omega,
            gamma,
            f_mag,
            Vector3::new(T::zero(), T::zero(), T::one()),
        )
    }

    /// The conserved total-spin vector F = |F|·F̂.
    pub fn f_vector(&self) -> Vector3<T> {
        self.f_dir * self.f_mag
    }
}

/// Eigenvalues, mode amplitudes, and constant offsets of the mean-field
/// solution.
///
/// Array order is `[λ^0_1, λ^0_2, λ^+_1, λ^+_2, λ^−_1, λ^−_2]` with `amps`
/// aligned index-by-index and `offset = [⟨F_0⟩/2, ⟨F_+⟩/2, ⟨F_−⟩/2]` per
/// spherical component (only the 0 component is nonzero in the F-aligned
/// frame). When a family is degenerate (`degenerate[q]` true, at Γ = 2ω for
/// the 0 family), its two `amps` slots hold the (a, b) coefficients of the
/// confluent solution (a + b·t)e^{λt} instead of two exponential weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet<T: Real> {
    pub lambdas: [Complex<T>; 6],
    pub amps: [Complex<T>; 6],
    pub offset: [Complex<T>; 3],
    pub degenerate: [bool; 3],
}

fn family_pair<T: Real>(omega: T, gamma: T, f_mag: T, q: i8) -> (Complex<T>, Complex<T>) {
    let re = gamma * gamma - T::lit(4.0) * omega * omega;
    let im = T::from_i8(q).expect("small int") * T::lit(4.0) * gamma * omega * f_mag;
    let root = Complex::new(re, im).sqrt();
    let half = Complex::new(T::lit(0.5), T::zero());
    let neg_g = Complex::new(-gamma, T::zero());
    ((neg_g + root) * half, (neg_g - root) * half)
}

/// The six exact eigenvalues in the order
/// `[λ^0_1, λ^0_2, λ^+_1, λ^+_2, λ^−_1, λ^−_2]`; within each family λ_1 has
/// the larger real part (principal square root).
pub fn exact_eigenvalues<T: Real>(p: &MeanFieldParams<T>) -> [Complex<T>; 6] {
    let (z1, z2) = family_pair(p.omega, p.gamma, p.f_mag, 0);
    let (p1, p2) = family_pair(p.omega, p.gamma, p.f_mag, 1);
    let (m1, m2) = family_pair(p.omega, p.gamma, p.f_mag, -1);
    [z1, z2, p1, p2, m1, m2]
}

/// Weak-exchange asymptote (Γ ≪ ω):
/// λ^0_{1,2} = ±iω − Γ/2, λ^±_1 = ±iω − (1−|F|)Γ/2,
/// λ^±_2 = ±iω − (1+|F|)Γ/2. Same array order as [`exact_eigenvalues`];
/// compare against exact values set-wise (the ±-family fast-branch labels
/// carry the opposite precession sign).
pub fn low_density_asymptote<T: Real>(p: &MeanFieldParams<T>) -> [Complex<T>; 6] {
    let half = T::lit(0.5);
    let w = p.omega;
    let g = p.gamma;
    let f = p.f_mag;
    let slow = -(T::one() - f) * g * half;
    let fast = -(T::one() + f) * g * half;
    [
        Complex::new(-g * half, w),
        Complex::new(-g * half, -w),
        Complex::new(slow, w),
        Complex::new(fast, w),
        Complex::new(slow, -w),
        Complex::new(fast, -w),
    ]
}

/// Strong-exchange asymptote (Γ ≫ ω): the four labeled closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighDensityAsymptote<T: Real> {
    /// λ^0_1 = −ω²/Γ: the non-precessing clock mode; its vanishing
    /// imaginary part is the "clock stops ticking" regime.
    pub zero_slow: Complex<T>,
    /// λ^0_2 = −Γ.
    pub zero_fast: Complex<T>,
    /// λ^±_1 = ±iω|F| − (1−|F|²)ω²/Γ: the line-narrowed precessing pair.
    pub pm_slow: [Complex<T>; 2],
    /// λ^±_2 = ±iω|F| − Γ.
    pub pm_fast: [Complex<T>; 2],
}

impl<T: Real> HighDensityAsymptote<T> {
    /// Flatten to the canonical six-slot order
    /// `[λ^0_1, λ^0_2, λ^+_1, λ^+_2, λ^−_1, λ^−_2]`. As with the weak-
    /// exchange forms, the ± fast-branch labels anti-align with the exact
    /// larger-real-part convention; compare sets via [`pair_nearest`].
    pub fn six(&self) -> [Complex<T>; 6] {
        [
            self.zero_slow,
            self.zero_fast,
            self.pm_slow[0],
            self.pm_fast[0],
            self.pm_slow[1],
            self.pm_fast[1],
        ]
    }
}

/// Strong-exchange (Γ ≫ ω) eigenvalue asymptotes. Division by Γ is taken
/// as written; callers are responsible for staying in the intended regime
/// (Γ = 0 yields infinities).
pub fn high_density_asymptote<T: Real>(p: &MeanFieldParams<T>) -> HighDensityAsymptote<T> {
    let w = p.omega;
    let g = p.gamma;
    let f = p.f_mag;
    let serf = -w * w / g;
    let hyper_serf = -(T::one() - f * f) * w * w / g;
    let wf = w * f;
    HighDensityAsymptote {
        zero_slow: Complex::new(serf, T::zero()),
        zero_fast: Complex::new(-g, T::zero()),
        pm_slow: [Complex::new(hyper_serf, wf), Complex::new(hyper_serf, -wf)],
        pm_fast: [Complex::new(-g, wf), Complex::new(-g, -wf)],
    }
}

/// Greedy nearest-pair matching between two equal-length eigenvalue sets,
/// globally smallest distance first. Returns (index in `a`, index in `b`,
/// distance) per pair. Used to compare eigenvalue sets whose family labels
/// differ (asymptote vs exact, extracted vs analytic).
pub fn pair_nearest<T: Real>(
    a: &[Complex<T>],
    b: &[Complex<T>],
) -> Vec<(usize, usize, T)> {
    assert_eq!(a.len(), b.len(), "eigenvalue sets must have equal size");
    let n = a.len();
    let mut edges = Vec::with_capacity(n * n);
    for (i, za) in a.iter().enumerate() {
        for (j, zb) in b.iter().enumerate() {
            edges.push((i, j, (za - zb).modulus()));
        }
    }
    edges.sort_by(|x, y| x.2.partial_cmp(&y.2).expect("finite distances"));
    let mut used_a = vec![false; n];
    let mut used_b = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for (i, j, d) in edges {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, d));
            if out.len() == n {
                break;
            }
        }
    }
    out
}

/// Orthonormal frame with e3 along the total spin.
struct Frame<T: Real> {
    e1: Vector3<T>,
    e2: Vector3<T>,
    e3: Vector3<T>,
}

impl<T: Real> Frame<T> {
    fn aligned_with(f_dir: Vector3<T>) -> Self {
        let e3 = f_dir;
        // Seed with the lab axis least aligned with e3.
        let seed = if e3.x.abs() < T::lit(0.9) {
            Vector3::new(T::one(), T::zero(), T::zero())
        } else {
            Vector3::new(T::zero(), T::one(), T::zero())
        };
        let e1 = (seed - e3 * seed.dot(&e3)).normalize();
        let e2 = e3.cross(&e1);
        Self { e1, e2, e3 }
    }

    fn to_frame(&self, v: &Vector3<T>) -> Vector3<T> {
        Vector3::new(self.e1.dot(v), self.e2.dot(v), self.e3.dot(v))
    }

    fn from_frame(&self, v: &Vector3<T>) -> Vector3<T> {
        self.e1 * v.x + self.e2 * v.y + self.e3 * v.z
    }
}

/// Relative threshold below which two eigenvalues are treated as one
/// double root (confluent solution). Wide enough to keep the amplitude
/// formulas away from catastrophic cancellation, narrow enough that the
/// confluent approximation error (∝ |Δλ·t|²) stays below 1e-9 over the
/// trajectories of interest.
fn degeneracy_threshold<T: Real>(l1: Complex<T>, l2: Complex<T>) -> T {
    T::lit(1e-7) * T::one().max(l1.modulus()).max(l2.modulus())
}

/// Amplitudes of x(t) = off + a₁e^{λ₁t} + a₂e^{λ₂t} (or the confluent
/// (a₁ + a₂t)e^{λ̄t}) from x(0) and ẋ(0).
fn scalar_amplitudes<T: Real>(
    x0: Complex<T>,
    v0: Complex<T>,
    off: Complex<T>,
    l1: Complex<T>,
    l2: Complex<T>,
) -> (Complex<T>, Complex<T>, bool) {
    let dx = x0 - off;
    if (l1 - l2).modulus() <= degeneracy_threshold(l1, l2) {
        let lbar = (l1 + l2) * Complex::new(T::lit(0.5), T::zero());
        (dx, v0 - lbar * dx, true)
    } else {
        let a1 = (v0 - l2 * dx) / (l1 - l2);
        (a1, dx - a1, false)
    }
}

fn scalar_eval<T: Real>(
    t: T,
    off: Complex<T>,
    l1: Complex<T>,
    l2: Complex<T>,
    a1: Complex<T>,
    a2: Complex<T>,
    degenerate: bool,
) -> Complex<T> {
    let tc = Complex::new(t, T::zero());
    if degenerate {
        let lbar = (l1 + l2) * Complex::new(T::lit(0.5), T::zero());
        off + (a1 + a2 * tc) * (lbar * tc).exp()
    } else {
        off + a1 * (l1 * tc).exp() + a2 * (l2 * tc).exp()
    }
}

/// Decompose the initial condition (⟨S⟩(0) = s0, d⟨S⟩/dt(0) = ω·a0) into
/// the six modes. The first-derivative mapping ω·a0 follows from the
/// first-order equations in the synchronized limit, where dS/dt = ωA.
pub fn mode_decomposition<T: Real>(
    s0: &Vector3<T>,
    a0: &Vector3<T>,
    p: &MeanFieldParams<T>,
) -> ModeSet<T> {
    let frame = Frame::aligned_with(p.f_dir);
    let s = frame.to_frame(s0);
    let v = frame.to_frame(a0) * p.omega;
    let lambdas = exact_eigenvalues(p);
    let half = T::lit(0.5);
    let inv_sqrt2 = T::lit(std::f64::consts::FRAC_1_SQRT_2);

    // q = 0 component.
    let off0 = Complex::new(p.f_mag * half, T::zero());
    let (a1_0, a2_0, d0) = scalar_amplitudes(
        Complex::new(s.z, T::zero()),
        Complex::new(v.z, T::zero()),
        off0,
        lambdas[0],
        lambdas[1],
    );
    // q = + component: s_+ = (S_x − iS_y)/√2.
    let zero = Complex::new(T::zero(), T::zero());
    let x0p = Complex::new(s.x * inv_sqrt2, -s.y * inv_sqrt2);
    let v0p = Complex::new(v.x * inv_sqrt2, -v.y * inv_sqrt2);
    let (a1_p, a2_p, dp) = scalar_amplitudes(x0p, v0p, zero, lambdas[2], lambdas[3]);
    // q = − component is the conjugate for real spin vectors.
    let (a1_m, a2_m, dm) = (a1_p.conj(), a2_p.conj(), dp);

    ModeSet {
        lambdas,
        amps: [a1_0, a2_0, a1_p, a2_p, a1_m, a2_m],
        offset: [off0, zero, zero],
        degenerate: [d0, dp, dm],
    }
}

/// Closed-form ⟨S⟩(t) on the given time grid for initial spin `s0` and
/// hyperfine coherence `a0` (lab frame).
pub fn meanfield_solution<T: Real>(
    s0: &Vector3<T>,
    a0: &Vector3<T>,
    p: &MeanFieldParams<T>,
    t_grid: &[T],
) -> Vec<Vector3<T>> {
    let frame = Frame::aligned_with(p.f_dir);
    let modes = mode_decomposition(s0, a0, p);
    let sqrt2 = T::lit(std::f64::consts::SQRT_2);
    t_grid
        .iter()
        .map(|&t| {
            let s_z = scalar_eval(
                t,
                modes.offset[0],
                modes.lambdas[0],
                modes.lambdas[1],
                modes.amps[0],
                modes.amps[1],
                modes.degenerate[0],
            );
            let s_p = scalar_eval(
                t,
                modes.offset[1],
                modes.lambdas[2],
                modes.lambdas[3],
                modes.amps[2],
                modes.amps[3],
                modes.degenerate[1],
            );
            // S_x = √2·Re s_+, S_y = −√2·Im s_+ (s_− is the conjugate).
            let v = Vector3::new(sqrt2 * s_p.re, -sqrt2 * s_p.im, s_z.re);
            frame.from_frame(&v)
        })
        .collect()
}
