//! Angular-momentum operator algebra and observable extraction.
//!
//! Builds spin matrices for arbitrary half-integer j, assembles the
//! electron⊗nucleus product-space operators, the hyperfine Hamiltonian
//! ω S·I, and extracts the (⟨S⟩, ⟨I⟩, ⟨A⟩) observable triple from density
//! matrices, where A = S×I is the hyperfine-coherence vector.
//!
//! Basis convention: product basis |m_S⟩⊗|m_I⟩ with magnetic quantum numbers
//! in descending order (electron index is the slow index). All engines and
//! serialized density matrices use this ordering.

use nalgebra::{Complex, DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::real::Real;

/// Spin operators (jx, jy, jz) for a single angular momentum j.
///
/// Matrices are complex, Hermitian, of dimension 2j+1, in dimensionless spin
/// units (ħ = 1), with basis states ordered by descending m.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularMomentumSet<T: Real> {
    /// Half-integer spin quantum number.
    pub j: T,
    pub jx: DMatrix<Complex<T>>,
    pub jy: DMatrix<Complex<T>>,
    pub jz: DMatrix<Complex<T>>,
}

/// Electron (S = 1/2) and nuclear (I) spin operators on the product space,
/// together with the hyperfine-coherence operators A = S×I.
///
/// `s`, `i`, `a` hold the x, y, z components in index order 0, 1, 2.
/// (A)_k = Σ_{ij} ε_{kij} S_i I_j is Hermitian as written because electron
/// and nuclear operators commute; no extra symmetrization is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductOperators<T: Real> {
    /// Nuclear spin quantum number I.
    pub nuclear_i: T,
    /// Product-space dimension 2(2I+1).
    pub dim: usize,
    /// Electron spin components [Sx, Sy, Sz] on the product space.
    pub s: [DMatrix<Complex<T>>; 3],
    /// Nuclear spin components [Ix, Iy, Iz] on the product space.
    pub i: [DMatrix<Complex<T>>; 3],
    /// Hyperfine coherence components [(S×I)x, (S×I)y, (S×I)z].
    pub a: [DMatrix<Complex<T>>; 3],
}

/// Expectation values (⟨S⟩, ⟨I⟩, ⟨A⟩) of one atom; the dynamical variables
/// of the ensemble Bloch equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinTriple<T: Real> {
    /// Electron spin expectation ⟨S⟩.
    pub s: Vector3<T>,
    /// Nuclear spin expectation ⟨I⟩.
    pub ivec: Vector3<T>,
    /// Hyperfine coherence expectation ⟨A⟩ = ⟨S×I⟩.
    pub a: Vector3<T>,
}

impl<T: Real> SpinTriple<T> {
    /// Zero triple.
    pub fn zero() -> Self {
        Self {
            s: Vector3::zeros(),
            ivec: Vector3::zeros(),
            a: Vector3::zeros(),
        }
    }

    /// Total spin ⟨F⟩ = ⟨S⟩ + ⟨I⟩ of this atom.
    pub fn f(&self) -> Vector3<T> {
        self.s + self.ivec
    }
}

/// Validate that `j` is a non-negative half-integer and return 2j as usize.
pub(crate) fn two_j<T: Real>(j: T) -> Result<usize> {
    let twice = j + j;
    let rounded = twice.round();
    if j < T::zero() || (twice - rounded).abs() > T::lit(1e-9) {
        return Err(Error::InvalidSpin(j.as_f64()));
    }
    Ok(rounded
        .to_usize()
        .ok_or(Error::InvalidSpin(j.as_f64()))?)
}

/// Construct spin matrices for angular momentum `j` by the ladder-operator
/// recipe: J₊|j,m⟩ = √(j(j+1) − m(m+1)) |j,m+1⟩, jx = (J₊+J₋)/2,
/// jy = (J₊−J₋)/2i, jz = diag(j, j−1, …, −j).
///
/// Errors if `j` is not a non-negative half-integer. Construction is
/// deterministic: identical `j` yields bit-identical matrices.
pub fn spin_matrices<T: Real>(j: T) -> Result<AngularMomentumSet<T>> {
    let tj = two_j(j)?;
    let dim = tj + 1;
    let zero = Complex::new(T::zero(), T::zero());

    let mut jz = DMatrix::from_element(dim, dim, zero);
    let mut jp = DMatrix::from_element(dim, dim, zero);
    for k in 0..dim {
        // m runs from +j (k = 0) down to −j (k = dim−1).
        let m = j - T::from_usize(k).expect("small index");
        jz[(k, k)] = Complex::new(m, T::zero());
        if k > 0 {
            // ⟨m+1|J₊|m⟩ with m+1 at row k−1.
            let amp = (j * (j + T::one()) - m * (m + T::one())).sqrt();
            jp[(k - 1, k)] = Complex::new(amp, T::zero());
        }
    }
    let jm = jp.adjoint();
    let half = Complex::new(T::lit(0.5), T::zero());
    let half_over_i = Complex::new(T::zero(), -T::lit(0.5)); // 1/(2i)
    let jx = (&jp + &jm) * half;
    let jy = (&jp - &jm) * half_over_i;
    Ok(AngularMomentumSet { j, jx, jy, jz })
}

/// Identity matrix of the given dimension over Complex<T>.
fn eye<T: Real>(dim: usize) -> DMatrix<Complex<T>> {
    DMatrix::from_diagonal_element(dim, dim, Complex::new(T::one(), T::zero()))
}

/// Build the product-space operators for electron spin 1/2 and nuclear spin
/// `nuclear_i` (any non-negative half-integer; the physical cases here are
/// 1/2 and 3/2).
pub fn product_operators<T: Real>(nuclear_i: T) -> Result<ProductOperators<T>> {
    let s_half = spin_matrices(T::lit(0.5))?;
    let nuc = spin_matrices(nuclear_i)?;
    let dim_n = nuc.jz.nrows();
    let dim = 2 * dim_n;

    let lift_s = |m: &DMatrix<Complex<T>>| m.kronecker(&eye::<T>(dim_n));
    let lift_i = |m: &DMatrix<Complex<T>>| eye::<T>(2).kronecker(m);

    let s = [lift_s(&s_half.jx), lift_s(&s_half.jy), lift_s(&s_half.jz)];
    let i = [lift_i(&nuc.jx), lift_i(&nuc.jy), lift_i(&nuc.jz)];
    // (S×I)_k = Σ ε_kij S_i I_j; Hermitian because [S_a, I_b] = 0.
    let a = [
        &s[1] * &i[2] - &s[2] * &i[1],
        &s[2] * &i[0] - &s[0] * &i[2],
        &s[0] * &i[1] - &s[1] * &i[0],
    ];
    Ok(ProductOperators {
        nuclear_i,
        dim,
        s,
        i,
        a,
    })
}

/// Hyperfine Hamiltonian ω S·I on the product space.
///
/// Eigenvalues are ω·[F(F+1) − S(S+1) − I(I+1)]/2 on each total-spin-F
/// manifold; ω = 0 gives the zero operator.
pub fn hyperfine_hamiltonian<T: Real>(
    omega: T,
    ops: &ProductOperators<T>,
) -> DMatrix<Complex<T>> {
    assert!(omega >= T::zero(), "hyperfine frequency must be non-negative");
    let w = Complex::new(omega, T::zero());
    (&ops.s[0] * &ops.i[0] + &ops.s[1] * &ops.i[1] + &ops.s[2] * &ops.i[2]) * w
}

/// Tr(ρ·op) computed without forming the product matrix.
pub(crate) fn trace_product<T: Real>(
    rho: &DMatrix<Complex<T>>,
    op: &DMatrix<Complex<T>>,
) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for r in 0..rho.nrows() {
        for c in 0..rho.ncols() {
            acc += rho[(r, c)] * op[(c, r)];
        }
    }
    acc
}

/// Expectation values (⟨S⟩, ⟨I⟩, ⟨A⟩) of a density matrix.
///
/// `rho` must be Hermitian with unit trace (caller's contract); the
/// imaginary parts of the expectations are then zero up to rounding and are
/// dropped. Errors if the dimension does not match `ops`.
pub fn observables<T: Real>(
    rho: &DMatrix<Complex<T>>,
    ops: &ProductOperators<T>,
) -> Result<SpinTriple<T>> {
    if rho.nrows() != ops.dim || rho.ncols() != ops.dim {
        return Err(Error::DimensionMismatch {
            expected: ops.dim,
            got: rho.nrows(),
        });
    }
    let expect = |set: &[DMatrix<Complex<T>>; 3]| {
        Vector3::new(
            trace_product(rho, &set[0]).re,
            trace_product(rho, &set[1]).re,
            trace_product(rho, &set[2]).re,
        )
    };
    Ok(SpinTriple {
        s: expect(&ops.s),
        ivec: expect(&ops.i),
        a: expect(&ops.a),
    })
}

/// e^{i·angle·H} for Hermitian H, via eigendecomposition (exact for the
/// rotation generators used by the state initializers).
pub(crate) fn unitary_exp_i<T: Real>(
    h: &DMatrix<Complex<T>>,
    angle: T,
) -> DMatrix<Complex<T>> {
    let eig = h.clone().symmetric_eigen();
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&lam| {
            let phi = angle * lam;
            Complex::new(phi.cos(), phi.sin())
        }),
    );
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&phases) * v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn max_abs<T: Real>(m: &DMatrix<Complex<T>>) -> f64 {
        m.iter()
            .map(|z| z.norm_sqr().sqrt().as_f64())
            .fold(0.0, f64::max)
    }

    fn commutator<T: Real>(
        a: &DMatrix<Complex<T>>,
        b: &DMatrix<Complex<T>>,
    ) -> DMatrix<Complex<T>> {
        a * b - b * a
    }

    #[test]
    fn spin_half_defining_representation() {
        let set = spin_matrices(0.5_f64).unwrap();
        assert_eq!(set.jz[(0, 0)], Complex::new(0.5, 0.0));
        assert_eq!(set.jz[(1, 1)], Complex::new(-0.5, 0.0));
        assert_eq!(set.jx[(0, 1)], Complex::new(0.5, 0.0));
        assert_eq!(set.jy[(0, 1)], Complex::new(0.0, -0.5));
    }

    #[test]
    fn spin_three_half_diagonal() {
        let set = spin_matrices(1.5_f64).unwrap();
        let expect = [1.5, 0.5, -0.5, -1.5];
        for (k, want) in expect.iter().enumerate() {
            assert_abs_diff_eq!(set.jz[(k, k)].re, want, epsilon = 0.0);
        }
    }

    #[test]
    fn commutation_relations_hold() {
        for j in [0.5_f64, 1.0, 1.5, 2.5] {
            let set = spin_matrices(j).unwrap();
            let i_unit = Complex::new(0.0, 1.0);
            let r1 = commutator(&set.jx, &set.jy) - &set.jz * i_unit;
            let r2 = commutator(&set.jy, &set.jz) - &set.jx * i_unit;
            let r3 = commutator(&set.jz, &set.jx) - &set.jy * i_unit;
            assert!(max_abs(&r1) < 1e-12, "xy commutator residual at j={j}");
            assert!(max_abs(&r2) < 1e-12, "yz commutator residual at j={j}");
            assert!(max_abs(&r3) < 1e-12, "zx commutator residual at j={j}");
        }
    }

    #[test]
    fn casimir_and_hermiticity() {
        for j in [0.5_f64, 1.5] {
            let set = spin_matrices(j).unwrap();
            let dim = set.jz.nrows();
            let j2 = &set.jx * &set.jx + &set.jy * &set.jy + &set.jz * &set.jz;
            let expect = DMatrix::from_diagonal_element(
                dim,
                dim,
                Complex::new(j * (j + 1.0), 0.0),
            );
            assert!(max_abs(&(j2 - expect)) < 1e-12);
            for m in [&set.jx, &set.jy, &set.jz] {
                assert!(max_abs(&(m - m.adjoint())) < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_half_integer_spin() {
        assert!(spin_matrices(0.3_f64).is_err());
        assert!(spin_matrices(-0.5_f64).is_err());
        assert!(spin_matrices(0.5000001_f64).is_err());
    }

    #[test]
    fn construction_is_deterministic() {
        let a = spin_matrices(1.5_f64).unwrap();
        let b = spin_matrices(1.5_f64).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn product_operators_commute_across_subsystems() {
        for nuc in [0.5_f64, 1.5] {
            let ops = product_operators(nuc).unwrap();
            assert_eq!(ops.dim, if nuc == 0.5 { 4 } else { 8 });
            for sk in &ops.s {
                for ik in &ops.i {
                    assert!(max_abs(&commutator(sk, ik)) < 1e-12);
                }
            }
            // A components Hermitian without explicit symmetrization.
            for ak in &ops.a {
                assert!(max_abs(&(ak - ak.adjoint())) < 1e-12);
            }
        }
    }

    #[test]
    fn hyperfine_eigenvalues_follow_manifold_formula() {
        // Frozen from (F(F+1) − S(S+1) − I(I+1))/2:
        //   I = 1/2: +1/4 (×3), −3/4 (×1); splitting 1·ω.
        //   I = 3/2: +3/4 (×5), −5/4 (×3); splitting 2·ω.
        let cases: [(f64, Vec<f64>); 2] = [
            (0.5, vec![-0.75, 0.25, 0.25, 0.25]),
            (1.5, vec![-1.25, -1.25, -1.25, 0.75, 0.75, 0.75, 0.75, 0.75]),
        ];
        for (nuc, want) in cases {
            let ops = product_operators(nuc).unwrap();
            let h = hyperfine_hamiltonian(1.0, &ops);
            let mut eigs: Vec<f64> =
                h.symmetric_eigen().eigenvalues.iter().copied().collect();
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (got, want) in eigs.iter().zip(&want) {
                assert_abs_diff_eq!(got, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_frequency_gives_zero_hamiltonian() {
        let ops = product_operators(0.5_f64).unwrap();
        let h = hyperfine_hamiltonian(0.0, &ops);
        assert!(max_abs(&h) == 0.0);
    }

    #[test]
    fn observables_of_maximally_mixed_state_vanish() {
        let ops = product_operators(1.5_f64).unwrap();
        let dim = ops.dim;
        let rho = DMatrix::from_diagonal_element(
            dim,
            dim,
            Complex::new(1.0 / dim as f64, 0.0),
        );
        let triple = observables(&rho, &ops).unwrap();
        assert!(triple.s.norm() < 1e-14);
        assert!(triple.ivec.norm() < 1e-14);
        assert!(triple.a.norm() < 1e-14);
    }

    #[test]
    fn observables_of_stretched_state() {
        // |electron ↑, nucleus ↑⟩ is the first basis vector (descending m).
        let ops = product_operators(0.5_f64).unwrap();
        let mut rho = DMatrix::from_element(4, 4, Complex::new(0.0, 0.0));
        rho[(0, 0)] = Complex::new(1.0, 0.0);
        let triple = observables(&rho, &ops).unwrap();
        assert_abs_diff_eq!(triple.s.z, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(triple.ivec.z, 0.5, epsilon = 1e-14);
        assert!(triple.a.norm() < 1e-14);
        assert_abs_diff_eq!(triple.f().z, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn observables_rejects_dimension_mismatch() {
        let ops = product_operators(0.5_f64).unwrap();
        let rho = DMatrix::from_diagonal_element(8, 8, Complex::new(0.125, 0.0));
        assert!(observables(&rho, &ops).is_err());
    }

    #[test]
    fn spin_expectation_bounded_for_random_densities() {
        // Random Hermitian PSD trace-1 matrices: |⟨S⟩| ≤ 1/2, |⟨I⟩| ≤ I.
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let ops = product_operators(1.5_f64).unwrap();
        let dim = ops.dim;
        for _ in 0..20 {
            let g = DMatrix::from_fn(dim, dim, |_, _| {
                Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let psd = &g * g.adjoint();
            let rho = &psd / Complex::new(psd.trace().re, 0.0);
            let t = observables(&rho, &ops).unwrap();
            assert!(t.s.norm() <= 0.5 + 1e-12);
            assert!(t.ivec.norm() <= 1.5 + 1e-12);
        }
    }

    #[test]
    fn unitary_exp_is_unitary_and_rotates() {
        let ops = product_operators(0.5_f64).unwrap();
        let theta = std::f64::consts::PI / 8.0;
        let u = unitary_exp_i(&ops.s[1], theta);
        let id = u.adjoint() * &u;
        let eye = DMatrix::from_diagonal_element(4, 4, Complex::new(1.0, 0.0));
        assert!(max_abs(&(id - eye)) < 1e-12);
    }

    #[test]
    fn generic_scalar_f32_smoke() {
        let set = spin_matrices(0.5_f32).unwrap();
        assert_eq!(set.jz[(0, 0)].re, 0.5_f32);
        let ops = product_operators(0.5_f32).unwrap();
        assert_eq!(ops.dim, 4);
    }
}
