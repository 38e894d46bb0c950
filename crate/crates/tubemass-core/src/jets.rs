//! Second-order jets of real-valued functions on C^n.
//!
//! A jet carries the value, the complex gradient (df/dz_1, .., df/dz_n) and
//! the mixed Hessian (d^2 f / dz_j dzbar_k). Derivative convention:
//! d/dz = (d/dx - i d/dy)/2, so the mixed Hessian of |z|^2 is the identity
//! and i ddbar f is the (1,1)-form with coefficient matrix hess(f).
//!
//! Fields are expression trees over real-coefficient polynomials in the real
//! coordinates (x_1..x_n, y_1..y_n), closed under sums, products, squares,
//! square roots, logarithms and the smooth max used to splice tube weights
//! with their convex cutoffs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::forms::HermitianForm;

pub type C64 = Complex64;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("square root evaluated at non-positive value {value:.6e}; derivative is singular there")]
    SqrtDomain { value: f64 },
    #[error("logarithm evaluated at non-positive value {value:.6e}")]
    LnDomain { value: f64 },
    #[error("field over {expected} real variables evaluated at a point with {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("polynomial term has {found} exponents, expected {expected}")]
    BadTerm { expected: usize, found: usize },
    #[error("empty sum has no dimension")]
    EmptySum,
}

/// Value, complex gradient, and mixed Hessian of a real-valued function at a
/// point of C^n.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub value: f64,
    pub grad: DVector<C64>,
    pub hess: HermitianForm,
}

impl Jet2 {
    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            value,
            grad: DVector::zeros(n),
            hess: HermitianForm::zero(n),
        }
    }

    pub fn dimension(&self) -> usize {
        self.grad.len()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            value: c * self.value,
            grad: self.grad.map(|g| g * c),
            hess: self.hess.scale(c),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            value: self.value + other.value,
            grad: &self.grad + &other.grad,
            hess: self.hess.add(&other.hess).expect("jet dimensions agree"),
        }
    }
}

fn hermitian_from_matrix(m: DMatrix<C64>) -> HermitianForm {
    HermitianForm::new(m).expect("Hermitian by construction")
}

/// ga gb* + gb ga*, the Hermitian rank-two outer product from the product
/// rule.
fn symmetric_outer(ga: &DVector<C64>, gb: &DVector<C64>) -> DMatrix<C64> {
    let n = ga.len();
    DMatrix::from_fn(n, n, |j, k| {
        ga[j] * gb[k].conj() + gb[j] * ga[k].conj()
    })
}

/// Product rule for jets of real-valued functions:
/// hess(ab) = a hess(b) + b hess(a) + grad(a) grad(b)* + grad(b) grad(a)*.
pub fn jet_product(a: &Jet2, b: &Jet2) -> Jet2 {
    let mut m = a.hess.matrix().map(|v| v * b.value);
    m += b.hess.matrix().map(|v| v * a.value);
    m += symmetric_outer(&a.grad, &b.grad);
    Jet2 {
        value: a.value * b.value,
        grad: a.grad.map(|g| g * b.value) + b.grad.map(|g| g * a.value),
        hess: hermitian_from_matrix(m),
    }
}

/// A scalar C^2 map evaluated at a point: g, g', g''.
#[derive(Debug, Clone, Copy)]
pub struct ChainRule {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Chain rule: hess(g o f) = g' hess(f) + g'' grad(f) grad(f)*.
pub fn jet_chain(g: ChainRule, inner: &Jet2) -> Jet2 {
    let mut m = inner.hess.matrix().map(|v| v * g.d1);
    let n = inner.dimension();
    for j in 0..n {
        for k in 0..n {
            m[(j, k)] += inner.grad[j] * inner.grad[k].conj() * g.d2;
        }
    }
    Jet2 {
        value: g.value,
        grad: inner.grad.map(|v| v * g.d1),
        hess: hermitian_from_matrix(m),
    }
}

pub fn jet_square(inner: &Jet2) -> Jet2 {
    jet_chain(
        ChainRule {
            value: inner.value * inner.value,
            d1: 2.0 * inner.value,
            d2: 2.0,
        },
        inner,
    )
}

pub fn jet_sqrt(inner: &Jet2) -> Result<Jet2, FieldError> {
    let v = inner.value;
    if v <= 0.0 {
        return Err(FieldError::SqrtDomain { value: v });
    }
    let s = v.sqrt();
    Ok(jet_chain(
        ChainRule {
            value: s,
            d1: 0.5 / s,
            d2: -0.25 / (v * s),
        },
        inner,
    ))
}

pub fn jet_ln(inner: &Jet2) -> Result<Jet2, FieldError> {
    let v = inner.value;
    if v <= 0.0 {
        return Err(FieldError::LnDomain { value: v });
    }
    Ok(jet_chain(
        ChainRule {
            value: v.ln(),
            d1: 1.0 / v,
            d2: -1.0 / (v * v),
        },
        inner,
    ))
}

/// Smooth maximum (a + b + sqrt((a-b)^2 + eps^2)) / 2.
///
/// Within eps of the true max everywhere, equal to a + eps/2 when a = b, and
/// psh-preserving: for psh arguments the output Hessian stays positive
/// semidefinite because the combination is convex and nondecreasing in (a, b).
pub fn smooth_max(a: &Jet2, b: &Jet2, eps: f64) -> Jet2 {
    let diff = a.add(&b.scale(-1.0));
    let q = jet_square(&diff);
    let shifted = Jet2 {
        value: q.value + eps * eps,
        grad: q.grad.clone(),
        hess: q.hess.clone(),
    };
    let root = jet_sqrt(&shifted).expect("strictly positive by the eps shift");
    a.add(b).add(&root).scale(0.5)
}

/// One monomial: coefficient times a product of powers of the 2n real
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub exps: Vec<u32>,
    pub coeff: f64,
}

/// Real-coefficient polynomial in the real coordinates (x_1..x_n, y_1..y_n).
#[derive(Debug, Clone, PartialEq)]
pub struct RealPoly {
    nvars: usize,
    terms: Vec<Term>,
}

impl RealPoly {
    pub fn new(nvars: usize, terms: Vec<Term>) -> Result<Self, FieldError> {
        let mut merged: Vec<Term> = Vec::new();
        for t in terms {
            if t.exps.len() != nvars {
                return Err(FieldError::BadTerm {
                    expected: nvars,
                    found: t.exps.len(),
                });
            }
            match merged.iter_mut().find(|m| m.exps == t.exps) {
                Some(m) => m.coeff += t.coeff,
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        Ok(Self {
            nvars,
            terms: merged,
        })
    }

    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: Vec::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::new(
            nvars,
            vec![Term {
                exps: vec![0; nvars],
                coeff: c,
            }],
        )
        .unwrap()
    }

    /// The coordinate monomial for real variable `index`.
    pub fn coordinate(nvars: usize, index: usize) -> Self {
        let mut exps = vec![0; nvars];
        exps[index] = 1;
        Self::new(nvars, vec![Term { exps, coeff: 1.0 }]).unwrap()
    }

    /// x_j as a field on C^n (variables ordered x_1..x_n, y_1..y_n).
    pub fn x_coord(n: usize, j: usize) -> Self {
        Self::coordinate(2 * n, j)
    }

    /// y_j as a field on C^n.
    pub fn y_coord(n: usize, j: usize) -> Self {
        Self::coordinate(2 * n, n + j)
    }

    /// |z|^2 = sum x_j^2 + y_j^2.
    pub fn abs_z_squared(n: usize) -> Self {
        let terms = (0..2 * n)
            .map(|i| {
                let mut exps = vec![0; 2 * n];
                exps[i] = 2;
                Term { exps, coeff: 1.0 }
            })
            .collect();
        Self::new(2 * n, terms).unwrap()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.exps.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.clone());
        Self::new(self.nvars, terms).unwrap()
    }

    pub fn scale(&self, c: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                exps: t.exps.clone(),
                coeff: c * t.coeff,
            })
            .collect();
        Self::new(self.nvars, terms).unwrap()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                let exps = a
                    .exps
                    .iter()
                    .zip(&b.exps)
                    .map(|(u, v)| u + v)
                    .collect();
                terms.push(Term {
                    exps,
                    coeff: a.coeff * b.coeff,
                });
            }
        }
        Self::new(self.nvars, terms).unwrap()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.exps
                        .iter()
                        .zip(x)
                        .map(|(&e, &v)| v.powi(e as i32))
                        .product::<f64>()
            })
            .sum()
    }

    /// Value, real gradient and real Hessian, all exact.
    pub fn real_jet(&self, x: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
        let nv = self.nvars;
        let mut value = 0.0;
        let mut grad = vec![0.0; nv];
        let mut hess = DMatrix::zeros(nv, nv);
        for t in &self.terms {
            let mono: Vec<f64> = t.exps.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).collect();
            let full: f64 = mono.iter().product();
            value += t.coeff * full;
            for j in 0..nv {
                let ej = t.exps[j];
                if ej == 0 {
                    continue;
                }
                let dj = ej as f64 * x[j].powi(ej as i32 - 1);
                let rest_j: f64 = (0..nv).filter(|&i| i != j).map(|i| mono[i]).product();
                grad[j] += t.coeff * dj * rest_j;
                for k in j..nv {
                    let contrib = if k == j {
                        if ej < 2 {
                            continue;
                        }
                        let djj = (ej * (ej - 1)) as f64 * x[j].powi(ej as i32 - 2);
                        t.coeff * djj * rest_j
                    } else {
                        let ek = t.exps[k];
                        if ek == 0 {
                            continue;
                        }
                        let dk = ek as f64 * x[k].powi(ek as i32 - 1);
                        let rest: f64 = (0..nv)
                            .filter(|&i| i != j && i != k)
                            .map(|i| mono[i])
                            .product();
                        t.coeff * dj * dk * rest
                    };
                    hess[(j, k)] += contrib;
                    if k != j {
                        hess[(k, j)] += contrib;
                    }
                }
            }
        }
        (value, grad, hess)
    }
}

/// Convert a real gradient over (x, y) into the complex gradient
/// (d/dz = (d/dx - i d/dy)/2).
pub fn complex_gradient(real_grad: &[f64]) -> DVector<C64> {
    let n = real_grad.len() / 2;
    DVector::from_fn(n, |j, _| {
        C64::new(0.5 * real_grad[j], -0.5 * real_grad[n + j])
    })
}

/// Convert a real Hessian over (x, y) into the mixed complex Hessian
/// d^2/dz_j dzbar_k.
pub fn complex_hessian(real_hess: &DMatrix<f64>) -> HermitianForm {
    let n = real_hess.nrows() / 2;
    let m = DMatrix::from_fn(n, n, |j, k| {
        let re = 0.25 * (real_hess[(j, k)] + real_hess[(n + j, n + k)]);
        let im = 0.25 * (real_hess[(j, n + k)] - real_hess[(n + j, k)]);
        C64::new(re, im)
    });
    hermitian_from_matrix(m)
}

pub fn real_coords(z: &[C64]) -> Vec<f64> {
    let n = z.len();
    let mut x = vec![0.0; 2 * n];
    for (j, zj) in z.iter().enumerate() {
        x[j] = zj.re;
        x[n + j] = zj.im;
    }
    x
}

/// Inverse of [`real_coords`]: (x_1..x_n, y_1..y_n) back to points of C^n.
pub fn complex_coords(x: &[f64]) -> Vec<C64> {
    let n = x.len() / 2;
    (0..n).map(|j| C64::new(x[j], x[n + j])).collect()
}

/// Real-valued field on C^n: polynomials in the real coordinates closed under
/// the combinators needed by tube weights and potentials.
#[derive(Debug, Clone)]
pub enum ScalarField {
    Poly(RealPoly),
    Sum(Vec<ScalarField>),
    Scale(f64, Box<ScalarField>),
    Product(Box<ScalarField>, Box<ScalarField>),
    Square(Box<ScalarField>),
    Sqrt(Box<ScalarField>),
    Ln(Box<ScalarField>),
    SmoothMax(Box<ScalarField>, Box<ScalarField>, f64),
}

impl ScalarField {
    pub fn nvars(&self) -> usize {
        match self {
            ScalarField::Poly(p) => p.nvars(),
            ScalarField::Sum(fs) => fs.first().map(|f| f.nvars()).unwrap_or(0),
            ScalarField::Scale(_, f) => f.nvars(),
            ScalarField::Product(a, _) => a.nvars(),
            ScalarField::Square(f) | ScalarField::Sqrt(f) | ScalarField::Ln(f) => f.nvars(),
            ScalarField::SmoothMax(a, _, _) => a.nvars(),
        }
    }

    /// Complex dimension n of the underlying C^n.
    pub fn complex_dim(&self) -> usize {
        self.nvars() / 2
    }

    /// Plain value, cheaper than a full jet. sqrt(0) is allowed here; it only
    /// fails when differentiated.
    pub fn value_real(&self, x: &[f64]) -> Result<f64, FieldError> {
        match self {
            ScalarField::Poly(p) => {
                if x.len() != p.nvars() {
                    return Err(FieldError::DimensionMismatch {
                        expected: p.nvars(),
                        found: x.len(),
                    });
                }
                Ok(p.value(x))
            }
            ScalarField::Sum(fs) => {
                if fs.is_empty() {
                    return Err(FieldError::EmptySum);
                }
                let mut v = 0.0;
                for f in fs {
                    v += f.value_real(x)?;
                }
                Ok(v)
            }
            ScalarField::Scale(c, f) => Ok(c * f.value_real(x)?),
            ScalarField::Product(a, b) => Ok(a.value_real(x)? * b.value_real(x)?),
            ScalarField::Square(f) => {
                let v = f.value_real(x)?;
                Ok(v * v)
            }
            ScalarField::Sqrt(f) => {
                let v = f.value_real(x)?;
                if v < 0.0 {
                    return Err(FieldError::SqrtDomain { value: v });
                }
                Ok(v.sqrt())
            }
            ScalarField::Ln(f) => {
                let v = f.value_real(x)?;
                if v <= 0.0 {
                    return Err(FieldError::LnDomain { value: v });
                }
                Ok(v.ln())
            }
            ScalarField::SmoothMax(a, b, eps) => {
                let va = a.value_real(x)?;
                let vb = b.value_real(x)?;
                Ok(0.5 * (va + vb + ((va - vb).powi(2) + eps * eps).sqrt()))
            }
        }
    }

    pub fn value(&self, z: &[C64]) -> Result<f64, FieldError> {
        self.value_real(&real_coords(z))
    }

    pub fn jet_real(&self, x: &[f64]) -> Result<Jet2, FieldError> {
        match self {
            ScalarField::Poly(p) => {
                if x.len() != p.nvars() {
                    return Err(FieldError::DimensionMismatch {
                        expected: p.nvars(),
                        found: x.len(),
                    });
                }
                let (value, rgrad, rhess) = p.real_jet(x);
                Ok(Jet2 {
                    value,
                    grad: complex_gradient(&rgrad),
                    hess: complex_hessian(&rhess),
                })
            }
            ScalarField::Sum(fs) => {
                if fs.is_empty() {
                    return Err(FieldError::EmptySum);
                }
                let mut acc = fs[0].jet_real(x)?;
                for f in &fs[1..] {
                    acc = acc.add(&f.jet_real(x)?);
                }
                Ok(acc)
            }
            ScalarField::Scale(c, f) => Ok(f.jet_real(x)?.scale(*c)),
            ScalarField::Product(a, b) => Ok(jet_product(&a.jet_real(x)?, &b.jet_real(x)?)),
            ScalarField::Square(f) => Ok(jet_square(&f.jet_real(x)?)),
            ScalarField::Sqrt(f) => jet_sqrt(&f.jet_real(x)?),
            ScalarField::Ln(f) => jet_ln(&f.jet_real(x)?),
            ScalarField::SmoothMax(a, b, eps) => {
                Ok(smooth_max(&a.jet_real(x)?, &b.jet_real(x)?, *eps))
            }
        }
    }

    /// Full second-order jet at z.
    pub fn jet(&self, z: &[C64]) -> Result<Jet2, FieldError> {
        self.jet_real(&real_coords(z))
    }
}

pub mod finite_difference {
    //! Central finite differences over the real coordinates, the independent
    //! check for every analytic jet. Step h gives O(h^2) truncation.

    use super::*;

    pub fn fd_jet<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Jet2 {
        let nv = x.len();
        let eval = |offsets: &[(usize, f64)]| {
            let mut p = x.to_vec();
            for &(i, d) in offsets {
                p[i] += d;
            }
            f(&p)
        };
        let center = f(x);
        let mut rgrad = vec![0.0; nv];
        let mut rhess = DMatrix::zeros(nv, nv);
        for a in 0..nv {
            rgrad[a] = (eval(&[(a, h)]) - eval(&[(a, -h)])) / (2.0 * h);
            rhess[(a, a)] = (eval(&[(a, h)]) - 2.0 * center + eval(&[(a, -h)])) / (h * h);
            for b in a + 1..nv {
                let v = (eval(&[(a, h), (b, h)]) - eval(&[(a, h), (b, -h)])
                    - eval(&[(a, -h), (b, h)])
                    + eval(&[(a, -h), (b, -h)]))
                    / (4.0 * h * h);
                rhess[(a, b)] = v;
                rhess[(b, a)] = v;
            }
        }
        Jet2 {
            value: center,
            grad: complex_gradient(&rgrad),
            hess: complex_hessian(&rhess),
        }
    }

    /// Largest relative deviation between an analytic jet and its
    /// finite-difference counterpart, over value, gradient and Hessian.
    pub fn jet_deviation(analytic: &Jet2, fd: &Jet2) -> f64 {
        let mut scale = analytic.value.abs();
        for g in analytic.grad.iter() {
            scale = scale.max(g.norm());
        }
        for h in analytic.hess.matrix().iter() {
            scale = scale.max(h.norm());
        }
        let scale = scale.max(1.0);
        let mut dev = (analytic.value - fd.value).abs();
        for (a, b) in analytic.grad.iter().zip(fd.grad.iter()) {
            dev = dev.max((a - b).norm());
        }
        for (a, b) in analytic
            .hess
            .matrix()
            .iter()
            .zip(fd.hess.matrix().iter())
        {
            dev = dev.max((a - b).norm());
        }
        dev / scale
    }
}
