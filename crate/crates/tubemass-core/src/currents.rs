//! Positive closed (1,1)-currents and their trace masses over bounded
//! regions.
//!
//! Three kinds of current are supported: divisors of holomorphic polynomials
//! (integration over the zero set, estimated by a coarea identity), smooth
//! currents i ddbar u for a twice differentiable u, and holomorphic curves
//! given parametrically (quadrature of the pullback area). Masses are trace
//! masses: the current wedged with beta^(n-1)/(n-1)!, where beta is the
//! standard Kaehler form. Against Lebesgue measure this puts a factor 2^n on
//! tr(hess u) for smooth currents and a factor kappa(n) = 2^(n-1) on surface
//! area for divisors.

use num_complex::Complex64;
use thiserror::Error;

use crate::jets::{real_coords, FieldError, RealPoly, ScalarField, Term};
use crate::manifold::{ConvexBody, DefiningSystem, ManifoldError};
use crate::sampling::{self, BatchStats};

pub type C64 = Complex64;

#[derive(Debug, Error)]
pub enum CurrentsError {
    #[error("holomorphic term has {found} exponents, expected {expected}")]
    BadTerm { expected: usize, found: usize },
    #[error("modulus expansion left an imaginary residue {residue:.3e}")]
    ImaginaryResidue { residue: f64 },
    #[error("region has no finite bounding box; add a clip ball or a chart")]
    UnboundedRegion,
    #[error("curve components must be single-variable polynomials")]
    CurveArity,
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Trace mass of a divisor per unit of (2n-2)-dimensional surface measure.
pub fn kappa(n: usize) -> f64 {
    2f64.powi(n as i32 - 1)
}

/// Polynomial in z_1..z_n with complex coefficients.
#[derive(Debug, Clone)]
pub struct HoloPoly {
    nvars: usize,
    terms: Vec<(Vec<u32>, C64)>,
}

impl HoloPoly {
    pub fn new(nvars: usize, terms: Vec<(Vec<u32>, C64)>) -> Result<Self, CurrentsError> {
        let mut merged: Vec<(Vec<u32>, C64)> = Vec::new();
        for (exps, coeff) in terms {
            if exps.len() != nvars {
                return Err(CurrentsError::BadTerm {
                    expected: nvars,
                    found: exps.len(),
                });
            }
            match merged.iter_mut().find(|(e, _)| *e == exps) {
                Some((_, c)) => *c += coeff,
                None => merged.push((exps, coeff)),
            }
        }
        merged.retain(|(_, c)| c.norm() != 0.0);
        Ok(Self {
            nvars,
            terms: merged,
        })
    }

    pub fn coordinate(nvars: usize, j: usize) -> Self {
        let mut exps = vec![0; nvars];
        exps[j] = 1;
        Self::new(nvars, vec![(exps, C64::new(1.0, 0.0))]).unwrap()
    }

    pub fn constant(nvars: usize, c: C64) -> Self {
        Self::new(nvars, vec![(vec![0; nvars], c)]).unwrap()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[(Vec<u32>, C64)] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(e, _)| e.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.clone());
        Self::new(self.nvars, terms).unwrap()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::new(
            self.nvars,
            self.terms
                .iter()
                .map(|(e, v)| (e.clone(), c * v))
                .collect(),
        )
        .unwrap()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps = ea.iter().zip(eb).map(|(u, v)| u + v).collect();
                terms.push((exps, ca * cb));
            }
        }
        Self::new(self.nvars, terms).unwrap()
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|(exps, c)| {
                c * exps
                    .iter()
                    .zip(z)
                    .map(|(&e, &v)| v.powu(e))
                    .product::<C64>()
            })
            .sum()
    }

    pub fn partial(&self, j: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[j] > 0)
            .map(|(e, c)| {
                let mut exps = e.clone();
                exps[j] -= 1;
                (exps, c * e[j] as f64)
            })
            .collect();
        Self::new(self.nvars, terms).unwrap()
    }

    pub fn grad(&self, z: &[C64]) -> Vec<C64> {
        (0..self.nvars)
            .map(|j| {
                self.terms
                    .iter()
                    .filter(|(e, _)| e[j] > 0)
                    .map(|(e, c)| {
                        let mut prod = c * e[j] as f64;
                        for (k, (&ek, &zk)) in e.iter().zip(z).enumerate() {
                            let power = if k == j { ek - 1 } else { ek };
                            prod *= zk.powu(power);
                        }
                        prod
                    })
                    .sum()
            })
            .collect()
    }

    /// Squared Euclidean norm of the complex gradient, the coarea density of
    /// the level sets.
    pub fn grad_norm_squared(&self, z: &[C64]) -> f64 {
        self.grad(z).iter().map(|g| g.norm_sqr()).sum()
    }

    /// Upper bound for the gradient norm over a real-coordinate box, from
    /// coefficient magnitudes. Certifies the Lipschitz constant of |f| there.
    pub fn grad_bound(&self, bbox: &[(f64, f64)]) -> f64 {
        let n = self.nvars;
        let radius: Vec<f64> = (0..n)
            .map(|k| {
                let rx = bbox[k].0.abs().max(bbox[k].1.abs());
                let ry = bbox[n + k].0.abs().max(bbox[n + k].1.abs());
                (rx * rx + ry * ry).sqrt()
            })
            .collect();
        let mut sum_sq = 0.0;
        for j in 0..n {
            let mut lj = 0.0;
            for (e, c) in &self.terms {
                if e[j] == 0 {
                    continue;
                }
                let mut bound = c.norm() * e[j] as f64;
                for (k, &ek) in e.iter().enumerate() {
                    let power = if k == j { ek - 1 } else { ek };
                    bound *= radius[k].powi(power as i32);
                }
                lj += bound;
            }
            sum_sq += lj * lj;
        }
        sum_sq.sqrt()
    }

    /// |f|^2 as a real polynomial in (x_1..x_n, y_1..y_n).
    pub fn modulus_squared(&self) -> Result<RealPoly, CurrentsError> {
        let n = self.nvars;
        // Expand f over the real coordinates with complex coefficients.
        let expanded = self.expand_real();
        // Multiply by the conjugate expansion; variables are real so
        // conjugation only touches coefficients.
        let mut product: Vec<(Vec<u32>, C64)> = Vec::new();
        for (ea, ca) in &expanded {
            for (eb, cb) in &expanded {
                let exps: Vec<u32> = ea.iter().zip(eb).map(|(u, v)| u + v).collect();
                let coeff = ca * cb.conj();
                match product.iter_mut().find(|(e, _)| *e == exps) {
                    Some((_, c)) => *c += coeff,
                    None => product.push((exps, coeff)),
                }
            }
        }
        let scale = product
            .iter()
            .map(|(_, c)| c.norm())
            .fold(1.0f64, f64::max);
        let mut terms = Vec::new();
        for (exps, c) in product {
            if c.im.abs() > 1e-10 * scale {
                return Err(CurrentsError::ImaginaryResidue { residue: c.im });
            }
            if c.re != 0.0 {
                terms.push(Term {
                    exps,
                    coeff: c.re,
                });
            }
        }
        Ok(RealPoly::new(2 * n, terms).expect("exponent lengths are 2n"))
    }

    /// Expansion of f into monomials of the 2n real coordinates, substituting
    /// z_j = x_j + i y_j.
    fn expand_real(&self) -> Vec<(Vec<u32>, C64)> {
        let n = self.nvars;
        let mut out: Vec<(Vec<u32>, C64)> = Vec::new();
        for (exps, coeff) in &self.terms {
            // Monomials of one term accumulate coordinate by coordinate.
            let mut partial: Vec<(Vec<u32>, C64)> = vec![(vec![0u32; 2 * n], *coeff)];
            for (j, &ej) in exps.iter().enumerate() {
                if ej == 0 {
                    continue;
                }
                let mut next = Vec::new();
                for (e_base, c_base) in &partial {
                    // (x_j + i y_j)^ej by the binomial theorem.
                    let mut binom = 1.0f64;
                    for b in 0..=ej {
                        let i_pow = match b % 4 {
                            0 => C64::new(1.0, 0.0),
                            1 => C64::new(0.0, 1.0),
                            2 => C64::new(-1.0, 0.0),
                            _ => C64::new(0.0, -1.0),
                        };
                        let mut e = e_base.clone();
                        e[j] += ej - b;
                        e[n + j] += b;
                        next.push((e, c_base * binom * i_pow));
                        binom = binom * (ej - b) as f64 / (b + 1) as f64;
                    }
                }
                partial = next;
            }
            for (e, c) in partial {
                match out.iter_mut().find(|(oe, _)| *oe == e) {
                    Some((_, oc)) => *oc += c,
                    None => out.push((e, c)),
                }
            }
        }
        out
    }
}

/// log|f| as a scalar field, i.e. (1/2) ln |f|^2. Pluriharmonic off the zero
/// set; its i ddbar is the divisor current.
pub fn log_abs_field(f: &HoloPoly) -> Result<ScalarField, CurrentsError> {
    Ok(ScalarField::Scale(
        0.5,
        Box::new(ScalarField::Ln(Box::new(ScalarField::Poly(
            f.modulus_squared()?,
        )))),
    ))
}

/// Pointwise trace density of i ddbar u against Lebesgue measure.
pub fn trace_density_smooth(u: &ScalarField, z: &[C64]) -> Result<f64, CurrentsError> {
    let jet = u.jet(z)?;
    Ok(2f64.powi(z.len() as i32) * jet.hess.trace())
}

#[derive(Debug, Clone)]
pub struct ClipBall {
    pub center: Vec<C64>,
    pub radius: f64,
}

/// What a tube is drawn around.
#[derive(Debug, Clone)]
pub enum TubeCore {
    Manifold(std::sync::Arc<DefiningSystem>),
    Convex(ConvexBody),
}

impl TubeCore {
    pub fn distance(&self, z: &[C64]) -> Result<f64, CurrentsError> {
        match self {
            TubeCore::Manifold(ds) => Ok(ds.distance(z)?.distance),
            TubeCore::Convex(body) => Ok(body.distance(z)),
        }
    }
}

/// Bounded integration region in C^n.
#[derive(Debug, Clone)]
pub enum Region {
    Ball { center: Vec<C64>, radius: f64 },
    Tube {
        core: TubeCore,
        thickness: f64,
        clip: Option<ClipBall>,
    },
}

fn ball_bbox(center: &[C64], radius: f64) -> Vec<(f64, f64)> {
    let x = real_coords(center);
    x.iter().map(|&c| (c - radius, c + radius)).collect()
}

impl Region {
    pub fn n(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Tube { core, .. } => match core {
                TubeCore::Manifold(ds) => ds.n(),
                TubeCore::Convex(body) => body.n(),
            },
        }
    }

    pub fn contains(&self, z: &[C64]) -> Result<bool, CurrentsError> {
        match self {
            Region::Ball { center, radius } => {
                let d2: f64 = z
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum();
                Ok(d2 < radius * radius)
            }
            Region::Tube {
                core,
                thickness,
                clip,
            } => {
                if let Some(c) = clip {
                    let d2: f64 = z
                        .iter()
                        .zip(&c.center)
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum();
                    if d2 >= c.radius * c.radius {
                        return Ok(false);
                    }
                }
                Ok(core.distance(z)? < *thickness)
            }
        }
    }

    /// Conservative cell test: distances to balls, bodies and manifolds are
    /// 1-Lipschitz, so a cell whose center is farther than the threshold plus
    /// half the diagonal cannot meet the region.
    pub fn may_intersect(&self, cell_center: &[C64], half_diagonal: f64) -> Result<bool, CurrentsError> {
        match self {
            Region::Ball { center, radius } => {
                let d: f64 = cell_center
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                Ok(d < radius + half_diagonal)
            }
            Region::Tube {
                core,
                thickness,
                clip,
            } => {
                if let Some(c) = clip {
                    let d: f64 = cell_center
                        .iter()
                        .zip(&c.center)
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    if d >= c.radius + half_diagonal {
                        return Ok(false);
                    }
                }
                Ok(core.distance(cell_center)? < *thickness + half_diagonal)
            }
        }
    }

    /// Axis-aligned real-coordinate bounding box. Tubes over charted curved
    /// cores pad a coarse image box; flat and convex cores are exact.
    pub fn bounding_box(&self) -> Result<Vec<(f64, f64)>, CurrentsError> {
        match self {
            Region::Ball { center, radius } => Ok(ball_bbox(center, *radius)),
            Region::Tube {
                core,
                thickness,
                clip,
            } => {
                let t = *thickness;
                let core_box: Option<Vec<(f64, f64)>> = match core {
                    TubeCore::Convex(body) => {
                        let n = body.n();
                        let mut b: Vec<(f64, f64)> = body
                            .support_box()
                            .into_iter()
                            .map(|(lo, hi)| (lo - t, hi + t))
                            .collect();
                        b.extend(std::iter::repeat((-t, t)).take(n));
                        Some(b)
                    }
                    TubeCore::Manifold(ds) => ds.chart().map(|chart| {
                        let mut lo = vec![f64::INFINITY; chart.ambient_real_dim()];
                        let mut hi = vec![f64::NEG_INFINITY; chart.ambient_real_dim()];
                        for u in chart.grid(9) {
                            for (i, v) in chart.map(&u).into_iter().enumerate() {
                                lo[i] = lo[i].min(v);
                                hi[i] = hi[i].max(v);
                            }
                        }
                        let pad: f64 = if chart.is_flat() {
                            t
                        } else {
                            // Slack for curvature the coarse grid misses.
                            let diam = lo
                                .iter()
                                .zip(&hi)
                                .map(|(a, b)| (b - a).powi(2))
                                .sum::<f64>()
                                .sqrt();
                            t + 0.1 * diam
                        };
                        lo.into_iter()
                            .zip(hi)
                            .map(|(a, b)| (a - pad, b + pad))
                            .collect()
                    }),
                };
                let clip_box = clip.as_ref().map(|c| ball_bbox(&c.center, c.radius));
                match (core_box, clip_box) {
                    (Some(a), Some(b)) => Ok(a
                        .into_iter()
                        .zip(b)
                        .map(|((alo, ahi), (blo, bhi))| (alo.max(blo), ahi.min(bhi)))
                        .collect()),
                    (Some(a), None) => Ok(a),
                    (None, Some(b)) => Ok(b),
                    (None, None) => Err(CurrentsError::UnboundedRegion),
                }
            }
        }
    }
}

/// Monte Carlo mass value with its uncertainty.
#[derive(Debug, Clone)]
pub struct MassEstimate {
    pub value: f64,
    pub standard_error: f64,
    /// Samples that landed on the support of the integrand.
    pub hits: u64,
    pub flags: Vec<String>,
}

const BATCHES: usize = 32;

/// Trace mass of the divisor of f inside the region, by the coarea identity
/// area = (1 / pi eps^2) int_{|f| < eps} |grad f|^2, restricted to cells that
/// could meet both the region and the tube {|f| < eps} (certified by a
/// Lipschitz bound, so no contribution is ever filtered away).
pub fn divisor_mass(
    f: &HoloPoly,
    region: &Region,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<MassEstimate, CurrentsError> {
    let n = region.n();
    let bbox = region.bounding_box()?;
    let dim = 2 * n;
    let per_axis: usize = match dim {
        0..=4 => 16,
        6 => 6,
        _ => 3,
    };
    let n_cells_total: usize = per_axis.pow(dim as u32);
    let widths: Vec<f64> = bbox.iter().map(|(lo, hi)| (hi - lo) / per_axis as f64).collect();
    let half_diag = 0.5 * widths.iter().map(|w| w * w).sum::<f64>().sqrt();
    let lip = f.grad_bound(&bbox);

    let cell_bounds = |index: usize| -> Vec<(f64, f64)> {
        let mut rest = index;
        let mut b = Vec::with_capacity(dim);
        for d in 0..dim {
            let i = rest % per_axis;
            rest /= per_axis;
            let lo = bbox[d].0 + i as f64 * widths[d];
            b.push((lo, lo + widths[d]));
        }
        b
    };

    let mut survivors = Vec::new();
    for index in 0..n_cells_total {
        let b = cell_bounds(index);
        let center_x: Vec<f64> = b.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        let center_z = crate::jets::complex_coords(&center_x);
        if !region.may_intersect(&center_z, half_diag)? {
            continue;
        }
        if f.eval(&center_z).norm() >= eps + lip * half_diag {
            continue;
        }
        survivors.push(index);
    }

    let mut flags = Vec::new();
    if survivors.is_empty() {
        flags.push("no_cells_survived_filter".to_string());
        return Ok(MassEstimate {
            value: 0.0,
            standard_error: 0.0,
            hits: 0,
            flags,
        });
    }

    let cell_volume: f64 = widths.iter().product();
    let per_cell = (samples / (BATCHES * survivors.len())).max(1);
    let results: Vec<Result<(f64, u64), CurrentsError>> =
        sampling::parallel_batches(BATCHES, |batch| {
            let mut total = 0.0;
            let mut hits = 0u64;
            for (ci, &cell) in survivors.iter().enumerate() {
                let b = cell_bounds(cell);
                let mut rng = sampling::rng_for(seed, (batch * survivors.len() + ci) as u64);
                let mut cell_sum = 0.0;
                for _ in 0..per_cell {
                    let x = sampling::sample_box(&mut rng, &b);
                    let z = crate::jets::complex_coords(&x);
                    if f.eval(&z).norm() < eps && region.contains(&z)? {
                        cell_sum += f.grad_norm_squared(&z);
                        hits += 1;
                    }
                }
                total += cell_volume * cell_sum / per_cell as f64;
            }
            Ok((total, hits))
        });

    let mut stats = BatchStats::new();
    let mut hits = 0u64;
    for r in results {
        let (total, h) = r?;
        stats.push(total);
        hits += h;
    }
    let scale = kappa(n) / (std::f64::consts::PI * eps * eps);
    let value = stats.mean() * scale;
    let standard_error = stats.standard_error() * scale;
    if value > 0.0 && standard_error / value > 0.2 {
        flags.push("relative_se_above_20pct".to_string());
    }
    Ok(MassEstimate {
        value,
        standard_error,
        hits,
        flags,
    })
}

/// Trace mass of i ddbar u over the region for twice differentiable u, by
/// plain Monte Carlo over the bounding box.
#[cfg(test)]
mod ball_ratio_tests {
    use super::*;

    #[test]
    fn ball_ratio_sees_sheet_multiplicity() {
        let origin = vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let f1 = HoloPoly::coordinate(2, 0);
        let r1 = ball_mass_ratio(&f1, &origin, 0.8, 0.01, 400_000, 11).unwrap();
        assert!((r1.value - 1.0).abs() < 0.03, "hyperplane ratio {}", r1.value);
        let f2 = f1.mul(&HoloPoly::coordinate(2, 1));
        let r2 = ball_mass_ratio(&f2, &origin, 0.8, 0.01, 600_000, 12).unwrap();
        assert!((r2.value - 2.0).abs() < 0.06, "pair ratio {}", r2.value);
    }
}

/// Divisor mass in a ball divided by the mass a flat complex hyperplane
/// through the center would carry. For a zero set through the center this is
/// the Lelong-style density: 1 for a smooth sheet as the radius shrinks,
/// the multiplicity at a singular point.
pub fn ball_mass_ratio(
    f: &HoloPoly,
    center: &[C64],
    radius: f64,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<MassEstimate, CurrentsError> {
    let n = f.nvars();
    let region = Region::Ball {
        center: center.to_vec(),
        radius,
    };
    let est = divisor_mass(f, &region, eps, samples, seed)?;
    let flat_area = std::f64::consts::PI.powi(n as i32 - 1) / crate::forms::factorial(n - 1)
        * radius.powi(2 * n as i32 - 2);
    let scale = kappa(n) * flat_area;
    Ok(MassEstimate {
        value: est.value / scale,
        standard_error: est.standard_error / scale,
        hits: est.hits,
        flags: est.flags,
    })
}

pub fn smooth_mass(
    u: &ScalarField,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<MassEstimate, CurrentsError> {
    let bbox = region.bounding_box()?;
    let volume: f64 = bbox.iter().map(|(lo, hi)| hi - lo).product();
    let density_scale = 2f64.powi(region.n() as i32);
    let per_batch = (samples / BATCHES).max(1);
    let results: Vec<Result<(f64, u64, u64), CurrentsError>> =
        sampling::parallel_batches(BATCHES, |batch| {
            let mut rng = sampling::rng_for(seed, batch as u64);
            let mut sum = 0.0;
            let mut hits = 0u64;
            let mut field_errors = 0u64;
            for _ in 0..per_batch {
                let x = sampling::sample_box(&mut rng, &bbox);
                let z = crate::jets::complex_coords(&x);
                if !region.contains(&z)? {
                    continue;
                }
                match u.jet(&z) {
                    Ok(jet) => {
                        sum += density_scale * jet.hess.trace();
                        hits += 1;
                    }
                    // The singular locus of a log field has measure zero;
                    // landing on it exactly is counted and flagged.
                    Err(_) => field_errors += 1,
                }
            }
            Ok((volume * sum / per_batch as f64, hits, field_errors))
        });
    let mut stats = BatchStats::new();
    let mut hits = 0u64;
    let mut field_errors = 0u64;
    for r in results {
        let (total, h, fe) = r?;
        stats.push(total);
        hits += h;
        field_errors += fe;
    }
    let mut flags = Vec::new();
    if field_errors > 0 {
        flags.push(format!("field_error_samples={field_errors}"));
    }
    let value = stats.mean();
    let standard_error = stats.standard_error();
    if value.abs() > 0.0 && standard_error / value.abs() > 0.2 {
        flags.push("relative_se_above_20pct".to_string());
    }
    Ok(MassEstimate {
        value,
        standard_error,
        hits,
        flags,
    })
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(k, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Domain of a one-variable holomorphic parametrization.
#[derive(Debug, Clone)]
pub enum CurveDomain {
    Disc { radius: f64 },
    Rect { re: (f64, f64), im: (f64, f64) },
}

/// Holomorphic curve w -> (f_1(w), .., f_n(w)).
#[derive(Debug, Clone)]
pub struct HoloCurve {
    pub components: Vec<HoloPoly>,
    pub domain: CurveDomain,
}

impl HoloCurve {
    pub fn new(components: Vec<HoloPoly>, domain: CurveDomain) -> Result<Self, CurrentsError> {
        if components.iter().any(|c| c.nvars() != 1) {
            return Err(CurrentsError::CurveArity);
        }
        Ok(Self { components, domain })
    }

    pub fn eval(&self, w: C64) -> Vec<C64> {
        self.components.iter().map(|c| c.eval(&[w])).collect()
    }

    /// Pullback area density |Phi'(w)|^2.
    pub fn density(&self, w: C64) -> f64 {
        self.components
            .iter()
            .map(|c| c.grad(&[w])[0].norm_sqr())
            .sum()
    }
}

/// 2-dimensional Hausdorff measure of the curve image inside the region
/// (geometric area, no trace factor), by tensor quadrature of the pullback.
pub fn curve_area(
    curve: &HoloCurve,
    region: Option<&Region>,
    nodes_per_axis: usize,
) -> Result<f64, CurrentsError> {
    let indicator = |w: C64| -> Result<f64, CurrentsError> {
        if let Some(r) = region {
            if !r.contains(&curve.eval(w))? {
                return Ok(0.0);
            }
        }
        Ok(curve.density(w))
    };
    match curve.domain {
        CurveDomain::Disc { radius } => {
            let (rn, rw) = gauss_legendre(nodes_per_axis);
            let angular = 2 * nodes_per_axis;
            let mut total = 0.0;
            for (ri, &xi) in rn.iter().enumerate() {
                let r = radius * 0.5 * (xi + 1.0);
                let wr = rw[ri] * 0.5 * radius;
                for a in 0..angular {
                    let theta = std::f64::consts::TAU * a as f64 / angular as f64;
                    let w = C64::from_polar(r, theta);
                    total += indicator(w)?
                        * r
                        * wr
                        * (std::f64::consts::TAU / angular as f64);
                }
            }
            Ok(total)
        }
        CurveDomain::Rect { re, im } => {
            let (xn, xw) = gauss_legendre(nodes_per_axis);
            let mut total = 0.0;
            for (i, &xi) in xn.iter().enumerate() {
                let x = re.0 + (re.1 - re.0) * 0.5 * (xi + 1.0);
                for (j, &xj) in xn.iter().enumerate() {
                    let y = im.0 + (im.1 - im.0) * 0.5 * (xj + 1.0);
                    let w = C64::new(x, y);
                    total += indicator(w)?
                        * xw[i]
                        * xw[j]
                        * 0.25
                        * (re.1 - re.0)
                        * (im.1 - im.0);
                }
            }
            Ok(total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::complex_coords;

    fn z(parts: &[(f64, f64)]) -> Vec<C64> {
        parts.iter().map(|&(re, im)| C64::new(re, im)).collect()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // k nodes are exact through degree 2k - 1.
        let (nodes, weights) = gauss_legendre(3);
        let integral: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| w * x.powi(4))
            .sum();
        assert!((integral - 0.4).abs() < 1e-14);
        let total: f64 = weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        assert!(nodes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn holo_poly_eval_and_grad() {
        // f = z1^2 z2 + 3.
        let f = HoloPoly::new(
            2,
            vec![
                (vec![2, 1], C64::new(1.0, 0.0)),
                (vec![0, 0], C64::new(3.0, 0.0)),
            ],
        )
        .unwrap();
        let p = z(&[(1.0, 1.0), (0.5, -2.0)]);
        let expected = p[0] * p[0] * p[1] + 3.0;
        assert!((f.eval(&p) - expected).norm() < 1e-14);
        let g = f.grad(&p);
        assert!((g[0] - 2.0 * p[0] * p[1]).norm() < 1e-14);
        assert!((g[1] - p[0] * p[0]).norm() < 1e-14);
        assert!((f.grad_norm_squared(&p) - (g[0].norm_sqr() + g[1].norm_sqr())).abs() < 1e-14);
    }

    #[test]
    fn modulus_squared_matches_direct_evaluation() {
        let f = HoloPoly::new(
            2,
            vec![
                (vec![2, 0], C64::new(1.0, -0.5)),
                (vec![0, 1], C64::new(0.0, 2.0)),
                (vec![0, 0], C64::new(-0.3, 0.1)),
            ],
        )
        .unwrap();
        let m2 = f.modulus_squared().unwrap();
        for &(a, b, c, d) in &[(0.3, -0.7, 1.1, 0.2), (0.0, 0.0, 0.0, 0.0), (-1.2, 0.8, 0.5, -0.9)] {
            let p = z(&[(a, b), (c, d)]);
            let direct = f.eval(&p).norm_sqr();
            let via_poly = m2.value(&real_coords(&p));
            assert!(
                (direct - via_poly).abs() < 1e-12 * (1.0 + direct),
                "{direct} vs {via_poly}"
            );
        }
    }

    #[test]
    fn log_abs_is_harmonic_off_the_zero_set() {
        // n = 1: log|z - 0.3| has vanishing Laplacian away from 0.3.
        let f = HoloPoly::new(1, vec![
            (vec![1], C64::new(1.0, 0.0)),
            (vec![0], C64::new(-0.3, 0.0)),
        ])
        .unwrap();
        let u = log_abs_field(&f).unwrap();
        let p = z(&[(0.9, 0.4)]);
        let jet = u.jet(&p).unwrap();
        assert!(jet.hess.trace().abs() < 1e-10);
        // Value agrees with log |f|.
        assert!((jet.value - f.eval(&p).norm().ln()).abs() < 1e-12);
    }

    #[test]
    fn grad_bound_dominates_samples() {
        let f = HoloPoly::new(
            2,
            vec![
                (vec![2, 1], C64::new(1.5, 0.5)),
                (vec![0, 2], C64::new(-0.7, 0.0)),
                (vec![1, 0], C64::new(0.0, 1.0)),
            ],
        )
        .unwrap();
        let bbox = vec![(-1.0, 0.5), (-0.5, 1.0), (-1.0, 1.0), (0.0, 0.75)];
        let bound = f.grad_bound(&bbox);
        let mut rng = sampling::rng_for(17, 0);
        for _ in 0..2000 {
            let x = sampling::sample_box(&mut rng, &bbox);
            let g2 = f.grad_norm_squared(&complex_coords(&x));
            assert!(g2.sqrt() <= bound + 1e-12);
        }
    }

    #[test]
    fn divisor_mass_of_a_hyperplane_slice_in_a_ball() {
        // V = {z1 = 0} in C^2 meets the unit ball in the unit disc of the z2
        // axis: area pi, trace mass kappa(2) pi = 2 pi.
        let f = HoloPoly::coordinate(2, 0);
        let region = Region::Ball {
            center: z(&[(0.0, 0.0), (0.0, 0.0)]),
            radius: 1.0,
        };
        let est = divisor_mass(&f, &region, 0.02, 1_000_000, 7).unwrap();
        let expected = 2.0 * std::f64::consts::PI;
        assert!(
            (est.value - expected).abs() < 0.02 * expected,
            "value {} vs {expected}, se {}",
            est.value,
            est.standard_error
        );
        assert!(est.standard_error < 0.015 * expected);
        assert!(est.flags.is_empty(), "{:?}", est.flags);
    }

    #[test]
    fn divisor_mass_far_from_the_zero_set_is_zero() {
        let f = HoloPoly::new(1, vec![
            (vec![1], C64::new(1.0, 0.0)),
            (vec![0], C64::new(-5.0, 0.0)),
        ])
        .unwrap();
        let region = Region::Ball {
            center: z(&[(0.0, 0.0)]),
            radius: 1.0,
        };
        let est = divisor_mass(&f, &region, 0.05, 10_000, 3).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.flags.iter().any(|f| f.contains("no_cells")));
    }

    #[test]
    fn smooth_mass_of_abs_z_squared_on_the_disc() {
        // i ddbar |z|^2 has trace density 2 against Lebesgue in C^1, so the
        // unit disc carries mass 2 pi.
        let u = ScalarField::Poly(RealPoly::abs_z_squared(1));
        let region = Region::Ball {
            center: z(&[(0.0, 0.0)]),
            radius: 1.0,
        };
        let est = smooth_mass(&u, &region, 200_000, 11).unwrap();
        let expected = 2.0 * std::f64::consts::PI;
        assert!(
            (est.value - expected).abs() < 0.02 * expected,
            "value {} vs {expected}",
            est.value
        );
    }

    #[test]
    fn curve_area_of_the_parabola_graph() {
        // w -> (w, w^2) over |w| < 1 has area int (1 + 4|w|^2) = 3 pi.
        let curve = HoloCurve::new(
            vec![
                HoloPoly::coordinate(1, 0),
                HoloPoly::coordinate(1, 0).mul(&HoloPoly::coordinate(1, 0)),
            ],
            CurveDomain::Disc { radius: 1.0 },
        )
        .unwrap();
        let area = curve_area(&curve, None, 64).unwrap();
        assert!((area - 3.0 * std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn tube_region_over_the_real_plane() {
        use crate::jets::{RealPoly as RP, ScalarField as SF};
        use crate::manifold::{Chart, CoordMap};
        let rho = (0..2)
            .map(|j| SF::Poly(RP::y_coord(2, j)))
            .collect();
        let chart = Chart {
            bounds: vec![(-2.0, 2.0); 2],
            coords: vec![
                CoordMap::Param(0),
                CoordMap::Param(1),
                CoordMap::Fixed(0.0),
                CoordMap::Fixed(0.0),
            ],
        };
        let ds = DefiningSystem::new(2, rho, 4.0, Some(chart)).unwrap();
        let region = Region::Tube {
            core: TubeCore::Manifold(std::sync::Arc::new(ds)),
            thickness: 0.5,
            clip: Some(ClipBall {
                center: z(&[(0.0, 0.0), (0.0, 0.0)]),
                radius: 1.0,
            }),
        };
        assert!(region.contains(&z(&[(0.2, 0.1), (0.3, -0.2)])).unwrap());
        // Outside the clip even though close to M.
        assert!(!region.contains(&z(&[(1.5, 0.0), (0.0, 0.0)])).unwrap());
        // Outside the tube though inside the clip.
        assert!(!region.contains(&z(&[(0.0, 0.6), (0.0, 0.0)])).unwrap());
        let bbox = region.bounding_box().unwrap();
        assert_eq!(bbox.len(), 4);
        for (lo, hi) in bbox {
            assert!(lo >= -2.5 - 1e-12 && hi <= 2.5 + 1e-12);
            assert!(lo <= -0.5 && hi >= 0.5);
        }
    }

    use crate::jets::{real_coords, RealPoly, ScalarField};
    use crate::sampling;
}
