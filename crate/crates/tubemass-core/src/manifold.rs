//! Real submanifolds of C^n given by defining systems rho_1 = .. = rho_m = 0,
//! with optional parametric charts, plus the convex bodies in R^n used as
//! degenerate tube cores.
//!
//! Generating means the complex differentials d rho_j / d z are linearly
//! independent over C along M; the report records the smallest squared
//! singular value of that m x n matrix as delta_min, the quantitative version
//! of the condition.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::forms::HermitianForm;
use crate::jets::{complex_coords, real_coords, FieldError, Jet2, RealPoly, ScalarField};
use crate::sampling;

pub type C64 = Complex64;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error("defining system needs between 1 and 2n functions, got {m} with n = {n}")]
    BadCodimension { m: usize, n: usize },
    #[error("rho_{index} depends on {found} real variables, expected {expected}")]
    RhoDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("chart maps {found} real coordinates, expected {expected}")]
    ChartAmbient { expected: usize, found: usize },
    #[error("chart has {found} parameters, expected {expected} for codimension {m}")]
    ChartDimension {
        expected: usize,
        found: usize,
        m: usize,
    },
    #[error("chart parameter index {index} out of range for dimension {dim}")]
    ChartParamIndex { index: usize, dim: usize },
    #[error("chart does not satisfy rho_{index} = 0: residual {residual:.3e} on the sample grid")]
    ChartInconsistent { index: usize, residual: f64 },
    #[error("distance to a curved system requires a chart for seeding")]
    NoChart,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// One real coordinate of a chart, as a function of the parameters.
#[derive(Debug, Clone)]
pub enum CoordMap {
    /// The parameter itself.
    Param(usize),
    Fixed(f64),
    Poly(RealPoly),
    /// amp * cos(freq * u_param + phase), for charts of circles and tori.
    Cos {
        param: usize,
        amp: f64,
        freq: f64,
        phase: f64,
    },
    Sin {
        param: usize,
        amp: f64,
        freq: f64,
        phase: f64,
    },
}

impl CoordMap {
    fn value(&self, u: &[f64]) -> f64 {
        match self {
            CoordMap::Param(i) => u[*i],
            CoordMap::Fixed(c) => *c,
            CoordMap::Poly(p) => p.value(u),
            CoordMap::Cos {
                param,
                amp,
                freq,
                phase,
            } => amp * (freq * u[*param] + phase).cos(),
            CoordMap::Sin {
                param,
                amp,
                freq,
                phase,
            } => amp * (freq * u[*param] + phase).sin(),
        }
    }

    fn partial(&self, u: &[f64], wrt: usize) -> f64 {
        match self {
            CoordMap::Param(i) => {
                if *i == wrt {
                    1.0
                } else {
                    0.0
                }
            }
            CoordMap::Fixed(_) => 0.0,
            CoordMap::Poly(p) => {
                let (_, grad, _) = p.real_jet(u);
                grad[wrt]
            }
            CoordMap::Cos {
                param,
                amp,
                freq,
                phase,
            } => {
                if *param == wrt {
                    -amp * freq * (freq * u[*param] + phase).sin()
                } else {
                    0.0
                }
            }
            CoordMap::Sin {
                param,
                amp,
                freq,
                phase,
            } => {
                if *param == wrt {
                    amp * freq * (freq * u[*param] + phase).cos()
                } else {
                    0.0
                }
            }
        }
    }

    fn max_param(&self) -> Option<usize> {
        match self {
            CoordMap::Param(i) => Some(*i),
            CoordMap::Fixed(_) => None,
            CoordMap::Poly(p) => {
                if p.nvars() == 0 {
                    None
                } else {
                    Some(p.nvars() - 1)
                }
            }
            CoordMap::Cos { param, .. } | CoordMap::Sin { param, .. } => Some(*param),
        }
    }
}

/// Parametrization u in a box of R^d mapping onto a patch of the manifold,
/// coordinates ordered (x_1..x_n, y_1..y_n).
#[derive(Debug, Clone)]
pub struct Chart {
    pub bounds: Vec<(f64, f64)>,
    pub coords: Vec<CoordMap>,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn ambient_real_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn map(&self, u: &[f64]) -> Vec<f64> {
        self.coords.iter().map(|c| c.value(u)).collect()
    }

    pub fn map_z(&self, u: &[f64]) -> Vec<C64> {
        complex_coords(&self.map(u))
    }

    /// 2n x d Jacobian of the parametrization.
    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.coords.len(), self.dim(), |row, col| {
            self.coords[row].partial(u, col)
        })
    }

    /// sqrt(det(J^T J)), the surface measure density against du.
    pub fn gram_weight(&self, u: &[f64]) -> f64 {
        let j = self.jacobian(u);
        let g = j.transpose() * j;
        g.determinant().max(0.0).sqrt()
    }

    pub fn box_volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// True when every coordinate is a parameter or a constant, so the patch
    /// is an axis-aligned affine slice with unit surface density.
    pub fn is_flat(&self) -> bool {
        self.coords
            .iter()
            .all(|c| matches!(c, CoordMap::Param(_) | CoordMap::Fixed(_)))
    }

    /// For a flat chart, which ambient real coordinates are free (paired with
    /// their parameter index) and which are pinned.
    pub fn flat_split(&self) -> Option<FlatSplit> {
        if !self.is_flat() {
            return None;
        }
        let mut free = Vec::new();
        let mut fixed = Vec::new();
        for (i, c) in self.coords.iter().enumerate() {
            match c {
                CoordMap::Param(p) => free.push((i, *p)),
                CoordMap::Fixed(v) => fixed.push((i, *v)),
                _ => unreachable!(),
            }
        }
        Some(FlatSplit { free, fixed })
    }

    /// Midpoint grid with `per_axis` cells along every parameter axis.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|&(lo, hi)| {
                let step = (hi - lo) / per_axis as f64;
                (0..per_axis).map(|i| lo + (i as f64 + 0.5) * step).collect()
            })
            .collect();
        axes.iter()
            .map(|axis| axis.iter().copied())
            .multi_cartesian_product()
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FlatSplit {
    /// (ambient real coordinate, parameter index).
    pub free: Vec<(usize, usize)>,
    /// (ambient real coordinate, pinned value).
    pub fixed: Vec<(usize, f64)>,
}

/// A point of the manifold with its quadrature or Monte Carlo weight against
/// surface measure.
#[derive(Debug, Clone)]
pub struct SurfacePoint {
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<C64>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct GeneratingReport {
    pub generating: bool,
    /// Smallest squared singular value of the complex differential matrix
    /// over the sampled points.
    pub delta_min: f64,
    pub min_rank: usize,
    pub points_checked: usize,
}

#[derive(Debug, Clone)]
pub struct DistanceResult {
    pub distance: f64,
    /// Nearest point found on the manifold, in real coordinates.
    pub foot: Vec<f64>,
    /// Set when the projection iteration failed and the value fell back to a
    /// coarse parameter grid.
    pub reduced_accuracy: bool,
}

/// M = {rho_1 = .. = rho_m = 0} in C^n.
#[derive(Debug, Clone)]
pub struct DefiningSystem {
    n: usize,
    rho: Vec<ScalarField>,
    pub domain_radius: f64,
    chart: Option<Chart>,
    /// (A, b) with rho(x) = A x - b when every defining function is affine.
    affine: Option<(DMatrix<f64>, DVector<f64>)>,
}

fn extract_affine(n: usize, rho: &[ScalarField]) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let mut a = DMatrix::zeros(rho.len(), 2 * n);
    let mut b = DVector::zeros(rho.len());
    for (j, field) in rho.iter().enumerate() {
        let ScalarField::Poly(p) = field else {
            return None;
        };
        if p.total_degree() > 1 {
            return None;
        }
        let mut any_linear = false;
        for term in p.terms() {
            let degree: u32 = term.exps.iter().sum();
            if degree == 0 {
                b[j] -= term.coeff;
            } else {
                let var = term.exps.iter().position(|&e| e == 1).unwrap();
                a[(j, var)] += term.coeff;
                any_linear = true;
            }
        }
        if !any_linear {
            return None;
        }
    }
    Some((a, b))
}

impl DefiningSystem {
    pub fn new(
        n: usize,
        rho: Vec<ScalarField>,
        domain_radius: f64,
        chart: Option<Chart>,
    ) -> Result<Self, ManifoldError> {
        let m = rho.len();
        if m == 0 || m > 2 * n {
            return Err(ManifoldError::BadCodimension { m, n });
        }
        for (index, field) in rho.iter().enumerate() {
            if field.nvars() != 2 * n {
                return Err(ManifoldError::RhoDimension {
                    index,
                    expected: 2 * n,
                    found: field.nvars(),
                });
            }
        }
        if let Some(chart) = &chart {
            if chart.ambient_real_dim() != 2 * n {
                return Err(ManifoldError::ChartAmbient {
                    expected: 2 * n,
                    found: chart.ambient_real_dim(),
                });
            }
            let d = 2 * n - m;
            if chart.dim() != d {
                return Err(ManifoldError::ChartDimension {
                    expected: d,
                    found: chart.dim(),
                    m,
                });
            }
            for coord in &chart.coords {
                if let Some(mp) = coord.max_param() {
                    if mp >= d {
                        return Err(ManifoldError::ChartParamIndex { index: mp, dim: d });
                    }
                }
            }
            // The chart must actually lie on {rho = 0}.
            let per_axis = match d {
                1 => 33,
                2 => 9,
                3 => 6,
                _ => 4,
            };
            for u in chart.grid(per_axis) {
                let x = chart.map(&u);
                for (index, field) in rho.iter().enumerate() {
                    let residual = field.value_real(&x)?.abs();
                    if residual > 1e-7 {
                        return Err(ManifoldError::ChartInconsistent { index, residual });
                    }
                }
            }
        }
        let affine = extract_affine(n, &rho);
        Ok(Self {
            n,
            rho,
            domain_radius,
            chart,
            affine,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Real codimension of M.
    pub fn codim(&self) -> usize {
        self.rho.len()
    }

    /// Real dimension of M.
    pub fn real_dim(&self) -> usize {
        2 * self.n - self.rho.len()
    }

    pub fn rho(&self) -> &[ScalarField] {
        &self.rho
    }

    pub fn chart(&self) -> Option<&Chart> {
        self.chart.as_ref()
    }

    pub fn is_affine(&self) -> bool {
        self.affine.is_some()
    }

    pub fn rho_values(&self, x: &[f64]) -> Result<Vec<f64>, ManifoldError> {
        self.rho
            .iter()
            .map(|f| f.value_real(x).map_err(ManifoldError::from))
            .collect()
    }

    pub fn rho_jets(&self, z: &[C64]) -> Result<Vec<Jet2>, ManifoldError> {
        self.rho
            .iter()
            .map(|f| f.jet(z).map_err(ManifoldError::from))
            .collect()
    }

    /// Values and real m x 2n Jacobian of the defining functions.
    fn rho_jacobian(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>), ManifoldError> {
        let m = self.codim();
        let n = self.n;
        let mut values = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, 2 * n);
        for (j, field) in self.rho.iter().enumerate() {
            let jet = field.jet_real(x)?;
            values[j] = jet.value;
            // d/dz = (d/dx - i d/dy)/2 inverts to dx = 2 Re, dy = -2 Im.
            for k in 0..n {
                jac[(j, k)] = 2.0 * jet.grad[k].re;
                jac[(j, n + k)] = -2.0 * jet.grad[k].im;
            }
        }
        Ok((values, jac))
    }

    /// m x n matrix of complex differentials (d rho_j / d z_k).
    pub fn complex_differential(&self, z: &[C64]) -> Result<DMatrix<C64>, ManifoldError> {
        let jets = self.rho_jets(z)?;
        let m = self.codim();
        Ok(DMatrix::from_fn(m, self.n, |j, k| jets[j].grad[k]))
    }

    /// Rank over C of the differential matrix and its smallest squared
    /// singular value.
    pub fn generating_rank(&self, z: &[C64]) -> Result<(usize, f64), ManifoldError> {
        let d = self.complex_differential(z)?;
        let gram = &d * d.adjoint();
        let form = HermitianForm::new(gram).expect("Gram matrix is Hermitian");
        let eigs = form.eigenvalues();
        let top = eigs.last().copied().unwrap_or(0.0).max(1e-300);
        let tol = top * 1e-12;
        let rank = eigs.iter().filter(|&&l| l > tol).count();
        let smallest = eigs.first().copied().unwrap_or(0.0).max(0.0);
        Ok((rank, smallest))
    }

    /// Checks full rank of the complex differentials over the given points.
    pub fn generating_report(&self, points: &[Vec<C64>]) -> Result<GeneratingReport, ManifoldError> {
        let m = self.codim();
        let mut delta_min = f64::INFINITY;
        let mut min_rank = usize::MAX;
        for z in points {
            let (rank, smallest) = self.generating_rank(z)?;
            min_rank = min_rank.min(rank);
            delta_min = delta_min.min(smallest);
        }
        Ok(GeneratingReport {
            generating: min_rank == m && m <= self.n,
            delta_min,
            min_rank: if points.is_empty() { 0 } else { min_rank },
            points_checked: points.len(),
        })
    }

    /// Uniform Monte Carlo sample of the chart patch, weighted by surface
    /// measure so that sums of weight * f estimate the surface integral.
    pub fn sample_surface(
        &self,
        count: usize,
        seed: u64,
    ) -> Result<Vec<SurfacePoint>, ManifoldError> {
        let chart = self.chart.as_ref().ok_or(ManifoldError::NoChart)?;
        let volume = chart.box_volume();
        let mut rng = sampling::rng_for(seed, 0);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let u = sampling::sample_box(&mut rng, &chart.bounds);
            let x = chart.map(&u);
            let weight = chart.gram_weight(&u) * volume / count as f64;
            out.push(SurfacePoint {
                z: complex_coords(&x),
                x,
                u,
                weight,
            });
        }
        Ok(out)
    }

    /// Midpoint quadrature of the chart patch against surface measure.
    pub fn surface_quadrature(&self, per_axis: usize) -> Result<Vec<SurfacePoint>, ManifoldError> {
        let chart = self.chart.as_ref().ok_or(ManifoldError::NoChart)?;
        let cell = chart.box_volume() / (per_axis as f64).powi(chart.dim() as i32);
        Ok(chart
            .grid(per_axis)
            .into_iter()
            .map(|u| {
                let x = chart.map(&u);
                let weight = chart.gram_weight(&u) * cell;
                SurfacePoint {
                    z: complex_coords(&x),
                    x,
                    u,
                    weight,
                }
            })
            .collect())
    }

    /// Euclidean distance from z to M.
    pub fn distance(&self, z: &[C64]) -> Result<DistanceResult, ManifoldError> {
        self.distance_real(&real_coords(z))
    }

    pub fn distance_real(&self, x: &[f64]) -> Result<DistanceResult, ManifoldError> {
        if let Some((a, b)) = &self.affine {
            let xv = DVector::from_column_slice(x);
            let residual = a * &xv - b;
            let aat = a * a.transpose();
            let lambda = aat
                .clone()
                .cholesky()
                .map(|c| c.solve(&residual))
                .unwrap_or_else(|| aat.lu().solve(&residual).unwrap_or(residual.clone()));
            let normal = a.transpose() * lambda;
            let foot = &xv - &normal;
            return Ok(DistanceResult {
                distance: normal.norm(),
                foot: foot.as_slice().to_vec(),
                reduced_accuracy: false,
            });
        }
        let chart = self.chart.as_ref().ok_or(ManifoldError::NoChart)?;
        let per_axis = match chart.dim() {
            1 => 33,
            2 => 9,
            3 => 5,
            _ => 4,
        };
        let xv = DVector::from_column_slice(x);
        let mut candidates: Vec<(f64, Vec<f64>)> = chart
            .grid(per_axis)
            .into_iter()
            .map(|u| {
                let p = chart.map(&u);
                let d2 = p
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d2, p)
            })
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best: Option<(f64, DVector<f64>, bool)> = None;
        for (_, seed) in candidates.iter().take(3) {
            if let Some((foot, converged)) =
                self.refine_foot(&xv, DVector::from_column_slice(seed))?
            {
                let d = (&xv - &foot).norm();
                if best.as_ref().map_or(true, |(bd, _, _)| d < *bd) {
                    best = Some((d, foot, converged));
                }
            }
        }
        match best {
            Some((distance, foot, converged)) => Ok(DistanceResult {
                distance,
                foot: foot.as_slice().to_vec(),
                reduced_accuracy: !converged,
            }),
            None => {
                let (d2, p) = candidates.into_iter().next().expect("grid is nonempty");
                Ok(DistanceResult {
                    distance: d2.sqrt(),
                    foot: p,
                    reduced_accuracy: true,
                })
            }
        }
    }

    /// Newton steps normal to the level sets until rho = 0.
    fn pull_to_manifold(&self, p: &mut DVector<f64>) -> Result<bool, ManifoldError> {
        for _ in 0..12 {
            let (values, jac) = self.rho_jacobian(p.as_slice())?;
            if values.norm() < 1e-12 {
                return Ok(true);
            }
            let jjt = &jac * jac.transpose();
            let Some(chol) = jjt.cholesky() else {
                return Ok(false);
            };
            let lambda = chol.solve(&values);
            *p -= jac.transpose() * lambda;
        }
        let (values, _) = self.rho_jacobian(p.as_slice())?;
        Ok(values.norm() < 1e-9)
    }

    /// Alternating tangential descent and normal pullback from one seed.
    fn refine_foot(
        &self,
        x: &DVector<f64>,
        seed: DVector<f64>,
    ) -> Result<Option<(DVector<f64>, bool)>, ManifoldError> {
        let mut p = seed;
        if !self.pull_to_manifold(&mut p)? {
            return Ok(None);
        }
        let scale = 1.0 + x.norm();
        for _ in 0..60 {
            let (_, jac) = self.rho_jacobian(p.as_slice())?;
            let r = x - &p;
            let jjt = &jac * jac.transpose();
            let Some(chol) = jjt.cholesky() else {
                return Ok(Some((p, false)));
            };
            let lambda = chol.solve(&(&jac * &r));
            let tangential = &r - jac.transpose() * lambda;
            if tangential.norm() < 1e-10 * scale {
                return Ok(Some((p, true)));
            }
            let current = r.norm();
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..10 {
                let mut candidate = &p + &tangential * step;
                if self.pull_to_manifold(&mut candidate)?
                    && (x - &candidate).norm() <= current + 1e-12 * scale
                {
                    p = candidate;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                return Ok(Some((p, false)));
            }
        }
        Ok(Some((p, false)))
    }
}

/// Compact convex sets in R^n, embedded in C^n as {y = 0} cores.
#[derive(Debug, Clone)]
pub enum ConvexBody {
    Point(Vec<f64>),
    Box(Vec<(f64, f64)>),
    Segment { a: Vec<f64>, b: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl ConvexBody {
    pub fn n(&self) -> usize {
        match self {
            ConvexBody::Point(p) => p.len(),
            ConvexBody::Box(b) => b.len(),
            ConvexBody::Segment { a, .. } => a.len(),
            ConvexBody::Ball { center, .. } => center.len(),
        }
    }

    /// Distance within R^n from a real point to the body.
    pub fn distance_real_part(&self, x: &[f64]) -> f64 {
        match self {
            ConvexBody::Point(p) => x
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            ConvexBody::Box(bounds) => x
                .iter()
                .zip(bounds)
                .map(|(&v, &(lo, hi))| {
                    let c = v.clamp(lo, hi);
                    (v - c) * (v - c)
                })
                .sum::<f64>()
                .sqrt(),
            ConvexBody::Segment { a, b } => {
                let mut dot = 0.0;
                let mut len2 = 0.0;
                for i in 0..a.len() {
                    let dir = b[i] - a[i];
                    dot += (x[i] - a[i]) * dir;
                    len2 += dir * dir;
                }
                let t = if len2 > 0.0 {
                    (dot / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (0..a.len())
                    .map(|i| {
                        let c = a[i] + t * (b[i] - a[i]);
                        (x[i] - c) * (x[i] - c)
                    })
                    .sum::<f64>()
                    .sqrt()
            }
            ConvexBody::Ball { center, radius } => {
                let d = center
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                (d - radius).max(0.0)
            }
        }
    }

    /// Distance in C^n: the real part sees the body, the imaginary part is
    /// orthogonal to the copy of R^n containing it.
    pub fn distance(&self, z: &[C64]) -> f64 {
        let dx = self.distance_real_part(&z.iter().map(|v| v.re).collect::<Vec<_>>());
        let dy2 = z.iter().map(|v| v.im * v.im).sum::<f64>();
        (dx * dx + dy2).sqrt()
    }

    /// Axis-aligned bounding box in R^n.
    pub fn support_box(&self) -> Vec<(f64, f64)> {
        match self {
            ConvexBody::Point(p) => p.iter().map(|&v| (v, v)).collect(),
            ConvexBody::Box(b) => b.clone(),
            ConvexBody::Segment { a, b } => a
                .iter()
                .zip(b)
                .map(|(&u, &v)| (u.min(v), u.max(v)))
                .collect(),
            ConvexBody::Ball { center, radius } => {
                center.iter().map(|&c| (c - radius, c + radius)).collect()
            }
        }
    }
}
