//! Constant-coefficient real (1,1)-forms and their exact wedge algebra.
//!
//! A Hermitian n x n matrix A stands for the form omega_A = i sum_jk A_jk
//! dz_j wedge dzbar_k. The identity matrix stands for the Kahler form
//! beta = i ddbar |z|^2, and every wedge product of n such forms is a multiple
//! of beta^n. `wedge_coefficient` returns that multiple, normalised so the
//! all-identity input yields exactly 1.
//!
//! The coefficient is the mixed discriminant of the padded matrix list,
//! computed by polarizing det over a {0,1} inclusion-exclusion sum. The
//! polynomial t -> det(t_1 B_1 + ... + t_n B_n) is homogeneous of degree n in
//! n variables, so the finite-difference sum is exact: every monomial that
//! misses a variable cancels, and what survives is multilinear.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error)]
pub enum FormsError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix deviates from Hermitian symmetry by {deviation:.3e} relative")]
    NotHermitian { deviation: f64 },
    #[error("form has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("wedge of {k} factors does not fit in dimension {n}")]
    DegreeTooLarge { k: usize, n: usize },
}

/// A constant real (1,1)-form, stored as its Hermitian coefficient matrix.
///
/// Construction symmetrises the input by averaging with its conjugate
/// transpose, so stored entries always satisfy A = A* to rounding; inputs that
/// are not even approximately Hermitian are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianForm {
    entries: DMatrix<C64>,
}

impl HermitianForm {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self, FormsError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(FormsError::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let adjoint = matrix.adjoint();
        let scale = matrix.iter().map(|c| c.norm()).fold(1.0_f64, f64::max);
        let deviation = (&matrix - &adjoint)
            .iter()
            .map(|c| c.norm())
            .fold(0.0_f64, f64::max)
            / scale;
        if deviation > 1e-6 {
            return Err(FormsError::NotHermitian { deviation });
        }
        let entries = (matrix + adjoint).map(|c| 0.5 * c);
        Ok(Self { entries })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut entries = DMatrix::zeros(n, n);
        for (j, d) in diag.iter().enumerate() {
            entries[(j, j)] = C64::new(*d, 0.0);
        }
        Self { entries }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn entry(&self, j: usize, k: usize) -> C64 {
        self.entries[(j, k)]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            entries: self.entries.map(|e| e * c),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, FormsError> {
        if self.n() != other.n() {
            return Err(FormsError::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        Ok(Self {
            entries: &self.entries + &other.entries,
        })
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|j| self.entries[(j, j)].re).sum()
    }

    /// Real eigenvalues in ascending order.
    ///
    /// Computed on the real symmetric embedding [[X, -Y], [Y, X]] of
    /// A = X + iY, whose spectrum is that of A with every eigenvalue doubled.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n();
        if n == 0 {
            return Vec::new();
        }
        let mut embed = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for j in 0..n {
            for k in 0..n {
                let a = self.entries[(j, k)];
                embed[(j, k)] = a.re;
                embed[(j, n + k)] = -a.im;
                embed[(n + j, k)] = a.im;
                embed[(n + j, n + k)] = a.re;
            }
        }
        let eig = embed.symmetric_eigen();
        let mut all: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Doubled spectrum: keep one member of each adjacent pair.
        all.into_iter().step_by(2).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Positive semidefiniteness up to `tolerance`: smallest eigenvalue
    /// at least -tolerance.
    pub fn is_positive(&self, tolerance: f64) -> bool {
        self.min_eigenvalue() >= -tolerance
    }
}

/// Determinant with partial pivoting; closed forms for the sizes that occur
/// in hot loops.
fn det_complex(m: &DMatrix<C64>) -> C64 {
    let n = m.nrows();
    match n {
        0 => C64::new(1.0, 0.0),
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => {
            let mut a = m.clone();
            let mut det = C64::new(1.0, 0.0);
            for col in 0..n {
                let mut pivot = col;
                let mut best = a[(col, col)].norm();
                for row in col + 1..n {
                    let v = a[(row, col)].norm();
                    if v > best {
                        best = v;
                        pivot = row;
                    }
                }
                if best == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                if pivot != col {
                    a.swap_rows(pivot, col);
                    det = -det;
                }
                let d = a[(col, col)];
                det *= d;
                for row in col + 1..n {
                    let f = a[(row, col)] / d;
                    for k in col..n {
                        let v = a[(col, k)];
                        a[(row, k)] -= f * v;
                    }
                }
            }
            det
        }
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Coefficient c with omega_1 wedge ... wedge omega_k wedge beta^(n-k)
/// = c beta^n.
///
/// The list is padded with n-k identity factors and the mixed discriminant is
/// read off by inclusion-exclusion: subsets of the k given forms are
/// enumerated explicitly while the identity padding collapses to a binomial
/// sum over the multiple of the identity that is added. An empty list is the
/// pure beta^n case with coefficient 1.
pub fn wedge_coefficient(forms: &[&HermitianForm], n: usize) -> Result<f64, FormsError> {
    let k = forms.len();
    if k > n {
        return Err(FormsError::DegreeTooLarge { k, n });
    }
    for f in forms {
        if f.n() != n {
            return Err(FormsError::DimensionMismatch {
                expected: n,
                found: f.n(),
            });
        }
    }
    if k == 0 {
        return Ok(1.0);
    }
    let pads = n - k;
    let mut total = C64::new(0.0, 0.0);
    for subset in 0u32..(1u32 << k) {
        let mut base = DMatrix::<C64>::zeros(n, n);
        let mut picked = 0usize;
        for (i, f) in forms.iter().enumerate() {
            if subset & (1 << i) != 0 {
                base += f.matrix();
                picked += 1;
            }
        }
        for j in 0..=pads {
            let mut m = base.clone();
            for d in 0..n {
                m[(d, d)] += C64::new(j as f64, 0.0);
            }
            let sign = if (n - picked - j) % 2 == 0 { 1.0 } else { -1.0 };
            total += det_complex(&m) * sign * binomial(pads, j);
        }
    }
    Ok(total.re / factorial(n))
}

/// Trace density of omega_A against beta: the c with
/// omega_A wedge beta^(n-1) = c beta^n, which equals tr(A) / n.
pub fn trace_density(form: &HermitianForm) -> f64 {
    form.trace() / form.n() as f64
}

pub mod reference {
    //! Brute-force exterior-algebra evaluation of the same wedge coefficient.
    //!
    //! Expands the product over all index choices: omega_1 wedge ... wedge
    //! omega_n picks an entry A^(l)_{sigma(l), tau(l)} for a pair of
    //! permutations and accumulates sgn(sigma) sgn(tau) times the product.
    //! O((n!)^2) and independent of the determinant-polarization route above;
    //! intended for cross-checking at small n.

    use super::{factorial, FormsError, HermitianForm};
    use itertools::Itertools;
    use num_complex::Complex64 as C64;

    fn permutation_sign(perm: &[usize]) -> f64 {
        let mut inversions = 0;
        for i in 0..perm.len() {
            for j in i + 1..perm.len() {
                if perm[i] > perm[j] {
                    inversions += 1;
                }
            }
        }
        if inversions % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn wedge_coefficient(forms: &[&HermitianForm], n: usize) -> Result<f64, FormsError> {
        if forms.len() > n {
            return Err(FormsError::DegreeTooLarge {
                k: forms.len(),
                n,
            });
        }
        for f in forms {
            if f.n() != n {
                return Err(FormsError::DimensionMismatch {
                    expected: n,
                    found: f.n(),
                });
            }
        }
        let identity = HermitianForm::identity(n);
        let padded: Vec<&HermitianForm> = forms
            .iter()
            .copied()
            .chain(std::iter::repeat(&identity).take(n - forms.len()))
            .collect();
        let indices: Vec<usize> = (0..n).collect();
        let mut total = C64::new(0.0, 0.0);
        for sigma in indices.iter().copied().permutations(n) {
            let sign_sigma = permutation_sign(&sigma);
            for tau in indices.iter().copied().permutations(n) {
                let sign_tau = permutation_sign(&tau);
                let mut prod = C64::new(sign_sigma * sign_tau, 0.0);
                for (l, form) in padded.iter().enumerate() {
                    prod *= form.entry(sigma[l], tau[l]);
                }
                total += prod;
            }
        }
        Ok(total.re / factorial(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn all_identity_wedge_is_one() {
        for n in 1..=4 {
            let id = HermitianForm::identity(n);
            let forms: Vec<&HermitianForm> = (0..n).map(|_| &id).collect();
            let c = wedge_coefficient(&forms, n).unwrap();
            assert!((c - 1.0).abs() < 1e-12, "n={n}: got {c}");
        }
    }

    #[test]
    fn empty_wedge_is_pure_beta_power() {
        assert_eq!(wedge_coefficient(&[], 3).unwrap(), 1.0);
    }

    #[test]
    fn complementary_projections_give_half() {
        let a = HermitianForm::from_diagonal(&[1.0, 0.0]);
        let b = HermitianForm::from_diagonal(&[0.0, 1.0]);
        let c = wedge_coefficient(&[&a, &b], 2).unwrap();
        assert!((c - 0.5).abs() < 1e-12, "got {c}");
    }

    #[test]
    fn single_diagonal_factor_gives_mean_of_entries() {
        let a = HermitianForm::from_diagonal(&[0.3, 1.7, -0.4]);
        let c = wedge_coefficient(&[&a], 3).unwrap();
        let expected = (0.3 + 1.7 - 0.4) / 3.0;
        assert!((c - expected).abs() < 1e-12, "got {c}");
    }

    #[test]
    fn repeated_rank_one_factor_collapses() {
        let a = HermitianForm::from_diagonal(&[1.0, 0.0]);
        let c = wedge_coefficient(&[&a, &a], 2).unwrap();
        assert!(c.abs() < 1e-12, "got {c}");
    }

    #[test]
    fn projection_padded_with_identities() {
        // Rank-two projection in C^3: coefficient tr/3 = 2/3.
        let p = HermitianForm::from_diagonal(&[1.0, 1.0, 0.0]);
        let c = wedge_coefficient(&[&p], 3).unwrap();
        assert!((c - 2.0 / 3.0).abs() < 1e-12, "got {c}");
    }

    #[test]
    fn wedge_rejects_too_many_factors() {
        let id = HermitianForm::identity(2);
        let forms = [&id, &id, &id];
        assert!(matches!(
            wedge_coefficient(&forms, 2),
            Err(FormsError::DegreeTooLarge { k: 3, n: 2 })
        ));
    }

    #[test]
    fn wedge_rejects_mismatched_dimension() {
        let a = HermitianForm::identity(2);
        let b = HermitianForm::identity(3);
        assert!(matches!(
            wedge_coefficient(&[&a, &b], 2),
            Err(FormsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn construction_symmetrises_and_guards() {
        let slightly_off = dmatrix![
            c(1.0, 0.0), c(0.5, 0.3);
            c(0.5, -0.3 + 1e-9), c(2.0, 0.0)
        ];
        let form = HermitianForm::new(slightly_off).unwrap();
        let m = form.matrix();
        let dev = (m - m.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0_f64, f64::max);
        assert!(dev < 1e-12);

        let wildly_off = dmatrix![
            c(1.0, 0.0), c(5.0, 0.0);
            c(-5.0, 0.0), c(2.0, 0.0)
        ];
        assert!(matches!(
            HermitianForm::new(wildly_off),
            Err(FormsError::NotHermitian { .. })
        ));
    }

    #[test]
    fn eigenvalues_of_small_hermitian_matrices() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let a = HermitianForm::new(dmatrix![
            c(2.0, 0.0), c(0.0, 1.0);
            c(0.0, -1.0), c(2.0, 0.0)
        ])
        .unwrap();
        let eig = a.eigenvalues();
        assert!((eig[0] - 1.0).abs() < 1e-10 && (eig[1] - 3.0).abs() < 1e-10);
        assert!(a.is_positive(1e-10));

        // [[1, 2i], [-2i, 1]] has eigenvalues -1 and 3.
        let b = HermitianForm::new(dmatrix![
            c(1.0, 0.0), c(0.0, 2.0);
            c(0.0, -2.0), c(1.0, 0.0)
        ])
        .unwrap();
        assert!(!b.is_positive(1e-10));
        assert!((b.min_eigenvalue() + 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_form_is_positive_with_tolerance() {
        let z = HermitianForm::zero(3);
        assert!(z.is_positive(0.0));
        assert_eq!(trace_density(&z), 0.0);
    }

    #[test]
    fn trace_density_examples() {
        let a = HermitianForm::from_diagonal(&[2.0, 0.0]);
        assert!((trace_density(&a) - 1.0).abs() < 1e-12);
        let id = HermitianForm::identity(3);
        assert!((trace_density(&id) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_exterior_algebra_reference_on_fixed_tuples() {
        let a = HermitianForm::new(dmatrix![
            c(1.2, 0.0), c(0.4, -0.7);
            c(0.4, 0.7), c(-0.3, 0.0)
        ])
        .unwrap();
        let b = HermitianForm::new(dmatrix![
            c(0.5, 0.0), c(-1.1, 0.2);
            c(-1.1, -0.2), c(2.0, 0.0)
        ])
        .unwrap();
        for forms in [vec![&a], vec![&b], vec![&a, &b], vec![&b, &b]] {
            let fast = wedge_coefficient(&forms, 2).unwrap();
            let slow = reference::wedge_coefficient(&forms, 2).unwrap();
            assert!(
                (fast - slow).abs() <= 1e-10 * slow.abs().max(1.0),
                "fast {fast} vs reference {slow}"
            );
        }

        let p = HermitianForm::new(dmatrix![
            c(0.9, 0.0), c(0.1, 0.6), c(0.0, -0.2);
            c(0.1, -0.6), c(1.4, 0.0), c(0.3, 0.0);
            c(0.0, 0.2), c(0.3, 0.0), c(0.2, 0.0)
        ])
        .unwrap();
        let fast = wedge_coefficient(&[&p, &p], 3).unwrap();
        let slow = reference::wedge_coefficient(&[&p, &p], 3).unwrap();
        assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1.0));
    }

    #[test]
    fn determinant_pivoting_matches_closed_form() {
        let m = dmatrix![
            c(0.0, 0.0), c(2.0, 1.0), c(0.3, 0.0), c(0.0, -1.0);
            c(1.0, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.7, 0.2);
            c(0.0, 0.5), c(0.0, 0.0), c(1.5, 0.0), c(0.0, 0.0);
            c(0.2, 0.0), c(0.0, 0.3), c(0.0, 0.0), c(1.0, 0.0)
        ];
        // Laplace expansion cross-check via the n<=3 closed forms.
        let direct = det_complex(&m);
        let mut laplace = C64::new(0.0, 0.0);
        for col in 0..4 {
            let minor = m.clone().remove_row(0).remove_column(col);
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            laplace += m[(0, col)] * det_complex(&minor) * sign;
        }
        assert!((direct - laplace).norm() < 1e-12);
    }
}
