//! Mass of a current in shrinking tubes around a core, and the smooth tube
//! weights whose square roots stay plurisubharmonic near a generating
//! submanifold.
//!
//! The central object is sigma(t), the trace mass of a positive closed
//! (1,1)-current in the tube of radius t, reported together with the
//! normalized ratio sigma(t) / t^e. For generating cores the ratio is almost
//! monotone in t; the almost-monotone report quantifies the worst violation
//! over a grid.

use num_complex::Complex64;
use thiserror::Error;

use crate::currents::{
    divisor_mass, smooth_mass, ClipBall, CurrentsError, HoloPoly, Region, TubeCore,
};
use crate::forms::{factorial, wedge_coefficient, FormsError, HermitianForm};
use crate::jets::{FieldError, RealPoly, ScalarField};
use crate::manifold::{DefiningSystem, ManifoldError};
use crate::sampling::{self, BatchStats};
use crate::zero_geometry::unit_ball_volume;

pub type C64 = Complex64;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("t grid must be strictly increasing and positive")]
    BadGrid,
    #[error("sublevel sampling requires a flat chart on the core manifold")]
    NotFlat,
    #[error(transparent)]
    Currents(#[from] CurrentsError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Forms(#[from] FormsError),
}

/// The current whose tube masses are profiled.
#[derive(Debug, Clone)]
pub enum CurrentSpec {
    /// Integration current of the divisor of f, coarea width eps.
    Divisor { f: HoloPoly, eps: f64 },
    /// i ddbar u for a twice differentiable u.
    Smooth { u: ScalarField },
}

#[derive(Debug, Clone)]
pub struct MassProfile {
    pub t_grid: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sigma_se: Vec<f64>,
    /// sigma(t) / t^ratio_exponent.
    pub ratio: Vec<f64>,
    pub ratio_se: Vec<f64>,
    pub ratio_exponent: f64,
    pub warnings: Vec<String>,
}

impl MassProfile {
    fn from_sigma(
        t_grid: Vec<f64>,
        sigma: Vec<f64>,
        sigma_se: Vec<f64>,
        ratio_exponent: f64,
        warnings: Vec<String>,
    ) -> Self {
        let ratio = t_grid
            .iter()
            .zip(&sigma)
            .map(|(&t, &s)| s / t.powf(ratio_exponent))
            .collect();
        let ratio_se = t_grid
            .iter()
            .zip(&sigma_se)
            .map(|(&t, &s)| s / t.powf(ratio_exponent))
            .collect();
        Self {
            t_grid,
            sigma,
            sigma_se,
            ratio,
            ratio_se,
            ratio_exponent,
            warnings,
        }
    }

    /// Ratio value at the grid point nearest to t.
    /// True when no later ratio sits more than k_sigma combined standard
    /// errors below an earlier one, i.e. the sequence is nondecreasing up
    /// to sampling noise.
    pub fn ratio_nondecreasing_within(&self, k_sigma: f64) -> bool {
        for i in 0..self.ratio.len() {
            for j in i + 1..self.ratio.len() {
                let slack = k_sigma
                    * (self.ratio_se[i] * self.ratio_se[i] + self.ratio_se[j] * self.ratio_se[j])
                        .sqrt();
                if self.ratio[j] < self.ratio[i] - slack {
                    return false;
                }
            }
        }
        true
    }

    pub fn ratio_at(&self, t: f64) -> f64 {
        let i = self
            .t_grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .expect("profile has at least one grid point");
        self.ratio[i]
    }

    /// Least-squares slope of log sigma against log t, over points with
    /// positive mass.
    pub fn log_log_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .t_grid
            .iter()
            .zip(&self.sigma)
            .filter(|(_, &s)| s > 0.0)
            .map(|(&t, &s)| (t.ln(), s.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }
}

fn check_grid(t_grid: &[f64]) -> Result<(), ProfileError> {
    let ascending = t_grid.windows(2).all(|p| p[0] < p[1]);
    if t_grid.is_empty() || t_grid[0] <= 0.0 || !ascending {
        return Err(ProfileError::BadGrid);
    }
    Ok(())
}

/// sigma(t) over the grid for tubes around the core, one independent
/// estimate per radius.
pub fn tube_profile(
    current: &CurrentSpec,
    core: &TubeCore,
    clip: Option<&ClipBall>,
    t_grid: &[f64],
    ratio_exponent: f64,
    samples_per_t: usize,
    seed: u64,
) -> Result<MassProfile, ProfileError> {
    check_grid(t_grid)?;
    let mut sigma = Vec::with_capacity(t_grid.len());
    let mut sigma_se = Vec::with_capacity(t_grid.len());
    let mut warnings = Vec::new();
    for (i, &t) in t_grid.iter().enumerate() {
        let region = Region::Tube {
            core: core.clone(),
            thickness: t,
            clip: clip.cloned(),
        };
        let est = match current {
            CurrentSpec::Divisor { f, eps } => {
                divisor_mass(f, &region, *eps, samples_per_t, sampling::derive_seed(seed, i as u64))?
            }
            CurrentSpec::Smooth { u } => {
                smooth_mass(u, &region, samples_per_t, sampling::derive_seed(seed, i as u64))?
            }
        };
        for flag in est.flags {
            warnings.push(format!("t={t}: {flag}"));
        }
        sigma.push(est.value);
        sigma_se.push(est.standard_error);
    }
    Ok(MassProfile::from_sigma(
        t_grid.to_vec(),
        sigma,
        sigma_se,
        ratio_exponent,
        warnings,
    ))
}

#[derive(Debug, Clone)]
pub struct AlmostMonotoneReport {
    /// Largest ratio(t_small) / ratio(t_large) over grid pairs.
    pub c_measured: f64,
    /// The same maximum with two standard errors conceded to noise; above 1
    /// only when the violation is statistically solid.
    pub c_noise_floor: f64,
    pub worst_small_t: f64,
    pub worst_large_t: f64,
}

/// How far the normalized ratio is from being nondecreasing toward larger t:
/// c_measured close to 1 means sigma(t)/t^e at small radii never much
/// exceeds its value at larger radii.
pub fn almost_monotone_report(profile: &MassProfile) -> AlmostMonotoneReport {
    let mut c_measured = 0.0f64;
    let mut c_noise_floor = 0.0f64;
    let mut worst = (profile.t_grid[0], profile.t_grid[0]);
    for i in 0..profile.t_grid.len() {
        for j in i + 1..profile.t_grid.len() {
            let (ri, rj) = (profile.ratio[i], profile.ratio[j]);
            if rj <= 0.0 {
                continue;
            }
            let c = ri / rj;
            if c > c_measured {
                c_measured = c;
                worst = (profile.t_grid[i], profile.t_grid[j]);
            }
            let lo = (ri - 2.0 * profile.ratio_se[i]).max(0.0);
            let hi = rj + 2.0 * profile.ratio_se[j];
            if hi > 0.0 {
                c_noise_floor = c_noise_floor.max(lo / hi);
            }
        }
    }
    AlmostMonotoneReport {
        c_measured,
        c_noise_floor,
        worst_small_t: worst.0,
        worst_large_t: worst.1,
    }
}

/// ratio(t_small) / ratio(t_large): how much mass concentrates as tubes
/// shrink, the signature that distinguishes degenerate cores.
pub fn growth_factor(profile: &MassProfile, t_small: f64, t_large: f64) -> f64 {
    let denom = profile.ratio_at(t_large);
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    profile.ratio_at(t_small) / denom
}

#[derive(Debug, Clone, Copy)]
pub struct TubeWeightParams {
    /// Coefficient of the quadratic term added to the normalized distance.
    pub a_constant: f64,
    /// Radius where the convex cutoff takes over and makes sublevels
    /// bounded.
    pub cutoff_radius: f64,
    pub eps_cutoff: f64,
    pub eps_smooth: f64,
}

impl Default for TubeWeightParams {
    fn default() -> Self {
        Self {
            a_constant: 4.0,
            cutoff_radius: 1.0,
            eps_cutoff: 1e-4,
            eps_smooth: 1e-6,
        }
    }
}

/// Weight u >= 0 vanishing on M with sqrt(u) comparable to the distance near
/// M, plus its square root as a field.
#[derive(Debug, Clone)]
pub struct TubeWeight {
    pub field: ScalarField,
    pub sqrt_field: ScalarField,
    pub params: TubeWeightParams,
}

/// u = smooth_max(v^2, cutoff^2) with v = sqrt(w) + A w, w = (1/2) sum
/// rho_j^2, and cutoff = smooth_max(|z|^2 - r0^2, 0). Both arguments are
/// squares of nonnegative plurisubharmonic functions, the structure that
/// keeps sqrt(u) plurisubharmonic wherever sqrt(w) is.
pub fn build_tube_weight(ds: &DefiningSystem, params: TubeWeightParams) -> TubeWeight {
    let n = ds.n();
    let squares: Vec<ScalarField> = ds
        .rho()
        .iter()
        .map(|r| ScalarField::Square(Box::new(r.clone())))
        .collect();
    let w = ScalarField::Scale(0.5, Box::new(ScalarField::Sum(squares)));
    let v = ScalarField::Sum(vec![
        ScalarField::Sqrt(Box::new(w.clone())),
        ScalarField::Scale(params.a_constant, Box::new(w)),
    ]);
    let shifted = ScalarField::Sum(vec![
        ScalarField::Poly(RealPoly::abs_z_squared(n)),
        ScalarField::Poly(RealPoly::constant(
            2 * n,
            -params.cutoff_radius * params.cutoff_radius,
        )),
    ]);
    let cutoff = ScalarField::SmoothMax(
        Box::new(shifted),
        Box::new(ScalarField::Poly(RealPoly::constant(2 * n, 0.0))),
        params.eps_cutoff,
    );
    let field = ScalarField::SmoothMax(
        Box::new(ScalarField::Square(Box::new(v))),
        Box::new(ScalarField::Square(Box::new(cutoff))),
        params.eps_smooth,
    );
    TubeWeight {
        sqrt_field: ScalarField::Sqrt(Box::new(field.clone())),
        field,
        params,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PshVerifyParams {
    pub t: f64,
    pub surface_samples: usize,
    pub offsets_per_point: usize,
    pub seed: u64,
    pub tolerance: f64,
}

/// Minima of the positivity indicators of the weight over the tube of radius
/// t: wedge coefficients of the (m-1)-fold powers of both Hessians, and the
/// bottom eigenvalue of hess(sqrt u).
#[derive(Debug, Clone)]
pub struct PshBoundReport {
    pub t: f64,
    pub samples_evaluated: usize,
    /// min over the tube of the (m-1)-fold wedge coefficient of hess(u).
    pub delta_prime: f64,
    /// min over the tube of the (m-1)-fold wedge coefficient of
    /// hess(sqrt u).
    pub min_sqrt_coeff: f64,
    pub min_sqrt_eigen: f64,
    pub jet_failures: usize,
    pub tolerance: f64,
}

impl PshBoundReport {
    /// sqrt(u) stays plurisubharmonic within tolerance and hess(u) keeps its
    /// transversal positivity.
    pub fn passes(&self) -> bool {
        self.samples_evaluated > 0
            && self.min_sqrt_coeff >= -self.tolerance
            && self.min_sqrt_eigen >= -self.tolerance
            && self.delta_prime >= -self.tolerance
    }
}

/// Sample the tube of radius t around the charted patch and record the worst
/// positivity indicators of the weight there.
pub fn verify_psh_bound(
    ds: &DefiningSystem,
    weight: &TubeWeight,
    params: PshVerifyParams,
) -> Result<PshBoundReport, ProfileError> {
    let n = ds.n();
    let m = ds.codim();
    let surface = ds.sample_surface(params.surface_samples, sampling::derive_seed(params.seed, 0))?;
    // Stay off M itself: jets of sqrt(w) blow up exactly on the zero set.
    let floor = 1e-6 * params.t;
    let mut delta_prime = f64::INFINITY;
    let mut min_sqrt_coeff = f64::INFINITY;
    let mut min_sqrt_eigen = f64::INFINITY;
    let mut evaluated = 0usize;
    let mut failures = 0usize;
    for (i, point) in surface.iter().enumerate() {
        let mut rng = sampling::rng_for(params.seed, 1 + i as u64);
        for _ in 0..params.offsets_per_point {
            let mut offset = sampling::sample_unit_ball(&mut rng, 2 * n);
            let norm = offset.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = if norm * params.t < floor {
                // Push degenerate draws out to the floor radius.
                floor / norm.max(1e-300)
            } else {
                params.t
            };
            for v in offset.iter_mut() {
                *v *= scale;
            }
            let x: Vec<f64> = point.x.iter().zip(&offset).map(|(a, b)| a + b).collect();
            let (jet_u, jet_s) = match (weight.field.jet_real(&x), weight.sqrt_field.jet_real(&x)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    failures += 1;
                    continue;
                }
            };
            let power_u: Vec<&HermitianForm> = std::iter::repeat(&jet_u.hess).take(m - 1).collect();
            let power_s: Vec<&HermitianForm> = std::iter::repeat(&jet_s.hess).take(m - 1).collect();
            delta_prime = delta_prime.min(wedge_coefficient(&power_u, n)?);
            min_sqrt_coeff = min_sqrt_coeff.min(wedge_coefficient(&power_s, n)?);
            min_sqrt_eigen = min_sqrt_eigen.min(jet_s.hess.min_eigenvalue());
            evaluated += 1;
        }
    }
    Ok(PshBoundReport {
        t: params.t,
        samples_evaluated: evaluated,
        delta_prime,
        min_sqrt_coeff,
        min_sqrt_eigen,
        jet_failures: failures,
        tolerance: params.tolerance,
    })
}

/// Smallest constant from the candidate sweep whose weight passes the psh
/// verification, with every report for the record.
pub fn select_tube_constant(
    ds: &DefiningSystem,
    base: TubeWeightParams,
    candidates: &[f64],
    verify: PshVerifyParams,
) -> Result<(Option<f64>, Vec<(f64, PshBoundReport)>), ProfileError> {
    let mut reports = Vec::with_capacity(candidates.len());
    let mut chosen = None;
    for &a in candidates {
        let weight = build_tube_weight(
            ds,
            TubeWeightParams {
                a_constant: a,
                ..base
            },
        );
        let report = verify_psh_bound(ds, &weight, verify)?;
        if chosen.is_none() && report.passes() {
            chosen = Some(a);
        }
        reports.push((a, report));
    }
    Ok((chosen, reports))
}

/// Largest tube radius from the candidate grid where the weight still passes
/// the psh verification.
pub fn find_t0(
    ds: &DefiningSystem,
    weight: &TubeWeight,
    t_candidates: &[f64],
    base: PshVerifyParams,
) -> Result<(Option<f64>, Vec<PshBoundReport>), ProfileError> {
    let mut reports = Vec::with_capacity(t_candidates.len());
    let mut t0 = None;
    for &t in t_candidates {
        let report = verify_psh_bound(ds, weight, PshVerifyParams { t, ..base })?;
        if report.passes() {
            t0 = Some(match t0 {
                Some(prev) if prev > t => prev,
                _ => t,
            });
        }
        reports.push(report);
    }
    Ok((t0, reports))
}

/// Mass of i ddbar phi wedge (i ddbar u)^(m-1) wedge beta^(n-m) / (n-m)!
/// over the sublevel sets {sqrt u < t}, for flat cores: the chart box and the
/// normal ball factor exactly, so sampling covers the sublevel set without a
/// bounding-box search.
pub fn sigma_u_profile(
    ds: &DefiningSystem,
    weight: &TubeWeight,
    phi: &ScalarField,
    t_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<MassProfile, ProfileError> {
    check_grid(t_grid)?;
    let chart = ds.chart().ok_or(ProfileError::NotFlat)?;
    let split = chart.flat_split().ok_or(ProfileError::NotFlat)?;
    let n = ds.n();
    let m = ds.codim();
    let t_max = *t_grid.last().unwrap();
    // v = dist/sqrt(2) + A dist^2/2 for flat cores, so {sqrt u < t} keeps the
    // normal offset below sqrt(2) t; the 1.05 margin absorbs smoothing.
    let normal_radius = 2.0f64.sqrt() * t_max * 1.05;
    let box_volume = chart.box_volume();
    let ball_volume = unit_ball_volume(m) * normal_radius.powi(m as i32);
    let volume = box_volume * ball_volume;
    let floor = 1e-6 * t_max;
    let density_scale = factorial(n) / factorial(n - m) * 2f64.powi(n as i32);

    const BATCHES: usize = 32;
    let per_batch = (samples / BATCHES).max(1);
    let results: Vec<Result<(Vec<f64>, usize), ProfileError>> =
        sampling::parallel_batches(BATCHES, |batch| {
            let mut rng = sampling::rng_for(seed, batch as u64);
            let mut sums = vec![0.0; t_grid.len()];
            let mut failures = 0usize;
            for _ in 0..per_batch {
                let u_param = sampling::sample_box(&mut rng, &chart.bounds);
                let offset = sampling::sample_unit_ball(&mut rng, m);
                let norm = offset.iter().map(|v| v * v).sum::<f64>().sqrt();
                let scale = if norm * normal_radius < floor {
                    floor / norm.max(1e-300)
                } else {
                    normal_radius
                };
                let mut x = vec![0.0; 2 * n];
                for &(coord, param) in &split.free {
                    x[coord] = u_param[param];
                }
                for (k, &(coord, value)) in split.fixed.iter().enumerate() {
                    x[coord] = value + offset[k] * scale;
                }
                let u_value = match weight.field.value_real(&x) {
                    Ok(v) => v,
                    Err(_) => {
                        failures += 1;
                        continue;
                    }
                };
                if u_value >= t_max * t_max {
                    continue;
                }
                let (jet_phi, jet_u) = match (phi.jet_real(&x), weight.field.jet_real(&x)) {
                    (Ok(a), Ok(b)) => (a, b),
                    _ => {
                        failures += 1;
                        continue;
                    }
                };
                let mut forms: Vec<&HermitianForm> = vec![&jet_phi.hess];
                forms.extend(std::iter::repeat(&jet_u.hess).take(m - 1));
                let density = density_scale * wedge_coefficient(&forms, n)?;
                for (ti, &t) in t_grid.iter().enumerate() {
                    if u_value < t * t {
                        sums[ti] += density;
                    }
                }
            }
            Ok((
                sums.into_iter()
                    .map(|s| volume * s / per_batch as f64)
                    .collect(),
                failures,
            ))
        });

    let mut per_t: Vec<BatchStats> = vec![BatchStats::new(); t_grid.len()];
    let mut failures = 0usize;
    for r in results {
        let (sums, f) = r?;
        failures += f;
        for (ti, s) in sums.into_iter().enumerate() {
            per_t[ti].push(s);
        }
    }
    let mut warnings = Vec::new();
    if failures > 0 {
        warnings.push(format!("jet_failures={failures}"));
    }
    let sigma: Vec<f64> = per_t.iter().map(|s| s.mean()).collect();
    let sigma_se: Vec<f64> = per_t.iter().map(|s| s.standard_error()).collect();
    Ok(MassProfile::from_sigma(
        t_grid.to_vec(),
        sigma,
        sigma_se,
        (m - 1) as f64,
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Chart, CoordMap};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn nondecreasing_check_tolerates_noise_sized_dips() {
        let profile = MassProfile {
            t_grid: vec![0.1, 0.2, 0.3],
            sigma: vec![0.1, 0.196, 0.33],
            sigma_se: vec![0.001, 0.002, 0.003],
            ratio: vec![1.0, 0.98, 1.1],
            ratio_se: vec![0.01, 0.01, 0.01],
            ratio_exponent: 1.0,
            warnings: Vec::new(),
        };
        // The dip of 0.02 sits inside three combined SE (0.042) but outside
        // one (0.014).
        assert!(profile.ratio_nondecreasing_within(3.0));
        assert!(!profile.ratio_nondecreasing_within(1.0));
    }

    /// M = R^2 in C^2 with a flat chart on [-w, w]^2.
    fn plane(half_width: f64) -> DefiningSystem {
        let rho = (0..2)
            .map(|j| ScalarField::Poly(RealPoly::y_coord(2, j)))
            .collect();
        let chart = Chart {
            bounds: vec![(-half_width, half_width); 2],
            coords: vec![
                CoordMap::Param(0),
                CoordMap::Param(1),
                CoordMap::Fixed(0.0),
                CoordMap::Fixed(0.0),
            ],
        };
        DefiningSystem::new(2, rho, 4.0, Some(chart)).unwrap()
    }

    /// Disc-and-strip overlap: trace mass of the hyperplane {z1 = 0} in the
    /// tube of radius t around R^2, clipped to |z| < r.
    fn hyperplane_tube_mass(t: f64, r: f64) -> f64 {
        2.0 * (2.0 * t * (r * r - t * t).sqrt() + 2.0 * r * r * (t / r).asin())
    }

    #[test]
    fn hyperplane_profile_matches_closed_form_and_is_almost_monotone() {
        let ds = std::sync::Arc::new(plane(2.0));
        let core = TubeCore::Manifold(ds);
        let clip = ClipBall {
            center: vec![c(0.0, 0.0); 2],
            radius: 0.9,
        };
        let current = CurrentSpec::Divisor {
            f: HoloPoly::coordinate(2, 0),
            eps: 0.015,
        };
        let t_grid = [0.225, 0.45];
        let profile = tube_profile(&current, &core, Some(&clip), &t_grid, 1.0, 400_000, 21).unwrap();
        for (i, &t) in t_grid.iter().enumerate() {
            let expected = hyperplane_tube_mass(t, 0.9);
            assert!(
                (profile.sigma[i] - expected).abs() < 0.03 * expected,
                "t={t}: {} vs {expected} (se {})",
                profile.sigma[i],
                profile.sigma_se[i]
            );
        }
        let report = almost_monotone_report(&profile);
        assert!(
            report.c_measured > 0.95 && report.c_measured < 1.12,
            "c = {}",
            report.c_measured
        );
    }

    #[test]
    fn flat_weight_passes_psh_verification() {
        let ds = plane(2.0);
        let weight = build_tube_weight(
            &ds,
            TubeWeightParams {
                a_constant: 4.0,
                cutoff_radius: 1.5,
                eps_cutoff: 1e-4,
                eps_smooth: 1e-6,
            },
        );
        let report = verify_psh_bound(
            &ds,
            &weight,
            PshVerifyParams {
                t: 0.4,
                surface_samples: 40,
                offsets_per_point: 8,
                seed: 3,
                tolerance: 1e-5,
            },
        )
        .unwrap();
        assert!(report.passes(), "{report:?}");
        assert!(report.delta_prime > 0.0);
        assert_eq!(report.jet_failures, 0);
    }

    #[test]
    fn weight_vanishes_on_m_and_grows_with_distance() {
        let ds = plane(2.0);
        let weight = build_tube_weight(&ds, TubeWeightParams::default());
        // On M the smooth max floors the weight at eps/2.
        let on_m = weight.field.value(&[c(0.3, 0.0), c(-0.8, 0.0)]).unwrap();
        assert!(on_m > 0.0 && on_m < 1e-5, "{on_m}");
        // At distance d the value tracks (d/sqrt2 + A d^2/2)^2.
        let d = 0.3;
        let v = d / 2.0f64.sqrt() + 4.0 * d * d / 2.0;
        let off_m = weight.field.value(&[c(0.3, d), c(-0.8, 0.0)]).unwrap();
        assert!((off_m - v * v).abs() < 1e-4, "{off_m} vs {}", v * v);
        // Far outside the cutoff radius the convex part dominates.
        let far = weight.field.value(&[c(3.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(far > 1.0);
    }

    #[test]
    fn curved_system_has_finite_positivity_radius() {
        // M = {y1 = 2 x2^2, y2 = 0} in C^2: curvature 2 makes sqrt(u) lose
        // positivity at tube radii around 1/(2*2); the verifier must accept
        // small radii and reject large ones.
        let rho = vec![
            ScalarField::Poly(
                RealPoly::y_coord(2, 0).add(
                    &RealPoly::x_coord(2, 1)
                        .mul(&RealPoly::x_coord(2, 1))
                        .scale(-2.0),
                ),
            ),
            ScalarField::Poly(RealPoly::y_coord(2, 1)),
        ];
        let chart = Chart {
            bounds: vec![(-0.8, 0.8); 2],
            coords: vec![
                CoordMap::Param(0),
                CoordMap::Param(1),
                CoordMap::Poly(
                    RealPoly::coordinate(2, 1)
                        .mul(&RealPoly::coordinate(2, 1))
                        .scale(2.0),
                ),
                CoordMap::Fixed(0.0),
            ],
        };
        let ds = DefiningSystem::new(2, rho, 3.0, Some(chart)).unwrap();
        let weight = build_tube_weight(
            &ds,
            TubeWeightParams {
                a_constant: 4.0,
                cutoff_radius: 1.2,
                ..TubeWeightParams::default()
            },
        );
        let base = PshVerifyParams {
            t: 0.0,
            surface_samples: 60,
            offsets_per_point: 10,
            seed: 5,
            tolerance: 1e-5,
        };
        let candidates = [0.02, 0.05, 0.1, 0.2, 0.3, 0.45];
        let (t0, reports) = find_t0(&ds, &weight, &candidates, base).unwrap();
        let t0 = t0.expect("small radii must pass");
        assert!(t0 >= 0.02, "t0 = {t0}");
        assert!(
            !reports.last().unwrap().passes(),
            "largest radius should fail: {:?}",
            reports.last().unwrap()
        );
    }

    #[test]
    fn sublevel_profile_is_monotone_for_a_slab() {
        // m = 1: the normalization exponent vanishes and sigma_u itself must
        // be nondecreasing because sublevels nest.
        let rho = vec![ScalarField::Poly(RealPoly::y_coord(1, 0))];
        let chart = Chart {
            bounds: vec![(-1.0, 1.0)],
            coords: vec![CoordMap::Param(0), CoordMap::Fixed(0.0)],
        };
        let ds = DefiningSystem::new(1, rho, 2.0, Some(chart)).unwrap();
        let weight = build_tube_weight(
            &ds,
            TubeWeightParams {
                cutoff_radius: 2.0,
                ..TubeWeightParams::default()
            },
        );
        let phi = ScalarField::Poly(RealPoly::abs_z_squared(1));
        let t_grid = [0.05, 0.1, 0.2, 0.3];
        let profile = sigma_u_profile(&ds, &weight, &phi, &t_grid, 60_000, 13).unwrap();
        for w in profile.sigma.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-9), "{:?}", profile.sigma);
        }
        assert!(profile.sigma[0] > 0.0);
        let report = almost_monotone_report(&profile);
        assert!(report.c_measured <= 1.0 + 1e-9, "c = {}", report.c_measured);
        // Sublevel width: v(y) < t solves to |y| just under sqrt(2) t, so
        // sigma_u(t) is about 2 * (2L) * 2 y*(t). Sanity-check the scale.
        let t = 0.3;
        let y_star = {
            // v = y/sqrt2 + 2 y^2 = t at the positive root.
            let (a, b) = (2.0, 1.0 / 2.0f64.sqrt());
            (-b + (b * b + 4.0 * a * t).sqrt()) / (2.0 * a)
        };
        let expected = 2.0 * 4.0 * y_star;
        let got = profile.sigma[3];
        assert!(
            (got - expected).abs() < 0.1 * expected,
            "{got} vs {expected}"
        );
    }

    #[test]
    fn two_dimensional_sublevel_ratio_is_almost_monotone() {
        // m = n = 2 with phi = |z|^2: density involves the mixed wedge of
        // hess(phi) = I with hess(u); the normalized ratio sigma_u(t)/t must
        // stay almost monotone for the flat plane.
        let ds = plane(1.0);
        let weight = build_tube_weight(
            &ds,
            TubeWeightParams {
                cutoff_radius: 2.5,
                ..TubeWeightParams::default()
            },
        );
        let phi = ScalarField::Poly(RealPoly::abs_z_squared(2));
        let t_grid = [0.1, 0.2, 0.3];
        let profile = sigma_u_profile(&ds, &weight, &phi, &t_grid, 60_000, 29).unwrap();
        assert!(profile.sigma.iter().all(|&s| s > 0.0), "{:?}", profile.sigma);
        let report = almost_monotone_report(&profile);
        assert!(
            report.c_measured < 1.35,
            "c = {} ({:?})",
            report.c_measured,
            profile.ratio
        );
    }
}
