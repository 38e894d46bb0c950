//! Zero sets of holomorphic systems restricted to a real submanifold:
//! locating them, packing them with separated balls, and converting packing
//! counts into Hausdorff content estimates.

use num_complex::Complex64;
use thiserror::Error;

use crate::currents::HoloPoly;
use crate::manifold::{DefiningSystem, ManifoldError};
use crate::sampling;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub type C64 = Complex64;

#[derive(Debug, Error)]
pub enum ZeroError {
    #[error("zero search requires a chart on the manifold")]
    NoChart,
    #[error("system component depends on {found} variables, expected {expected}")]
    Arity { expected: usize, found: usize },
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

/// Volume of the unit ball in R^d, by the two-step recursion
/// V_d = (2 pi / d) V_(d-2).
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

#[derive(Debug, Clone)]
pub struct ZeroPoint {
    pub u: Vec<f64>,
    pub z: Vec<C64>,
    pub residual: f64,
}

/// Common zeros of the system on the charted patch of M, found by damped
/// Gauss-Newton on |g|^2 restricted to the chart, started from every grid
/// point and deduplicated. Output is sorted by chart parameters, so callers
/// iterating it see grid-scan order.
pub fn zeros_on_m(
    g: &[HoloPoly],
    ds: &DefiningSystem,
    per_axis: usize,
    tol: f64,
    dedupe_radius: f64,
) -> Result<Vec<ZeroPoint>, ZeroError> {
    let chart = ds.chart().ok_or(ZeroError::NoChart)?;
    let n = ds.n();
    for comp in g {
        if comp.nvars() != n {
            return Err(ZeroError::Arity {
                expected: n,
                found: comp.nvars(),
            });
        }
    }
    let d = chart.dim();
    let k = g.len();
    let margin: Vec<(f64, f64)> = chart
        .bounds
        .iter()
        .map(|&(lo, hi)| {
            let pad = 0.1 * (hi - lo);
            (lo - pad, hi + pad)
        })
        .collect();

    let residual_at = |u: &[f64]| -> (DVector<f64>, Vec<C64>) {
        let z = chart.map_z(u);
        let mut r = DVector::zeros(2 * k);
        for (i, comp) in g.iter().enumerate() {
            let v = comp.eval(&z);
            r[2 * i] = v.re;
            r[2 * i + 1] = v.im;
        }
        (r, z)
    };

    let mut found: Vec<ZeroPoint> = Vec::new();
    for u0 in chart.grid(per_axis) {
        let mut u = DVector::from_column_slice(&u0);
        let (mut r, mut z) = residual_at(u.as_slice());
        let mut ok = false;
        for _ in 0..40 {
            if r.norm() < tol {
                ok = true;
                break;
            }
            // Real 2k x d Jacobian of the restricted system.
            let jac_chart = chart.jacobian(u.as_slice());
            let mut jr = DMatrix::zeros(2 * k, d);
            for (i, comp) in g.iter().enumerate() {
                let grad = comp.grad(&z);
                for a in 0..d {
                    let dz_du: C64 = (0..n)
                        .map(|j| grad[j] * C64::new(jac_chart[(j, a)], jac_chart[(n + j, a)]))
                        .sum();
                    jr[(2 * i, a)] = dz_du.re;
                    jr[(2 * i + 1, a)] = dz_du.im;
                }
            }
            let svd = jr.svd(true, true);
            let Ok(step) = svd.solve(&r, 1e-12) else { break };
            let mut scale = 1.0;
            let mut advanced = false;
            for _ in 0..8 {
                let cand = &u - &step * scale;
                let inside = cand
                    .iter()
                    .zip(&margin)
                    .all(|(&v, &(lo, hi))| v >= lo && v <= hi);
                if inside {
                    let (rc, zc) = residual_at(cand.as_slice());
                    if rc.norm() < r.norm() {
                        u = cand;
                        r = rc;
                        z = zc;
                        advanced = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        if !(ok || r.norm() < tol) {
            continue;
        }
        let candidate = ZeroPoint {
            u: u.as_slice().to_vec(),
            z: z.clone(),
            residual: r.norm(),
        };
        let duplicate = found.iter_mut().find(|p| {
            p.z.iter()
                .zip(&candidate.z)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
                < dedupe_radius
        });
        match duplicate {
            Some(existing) => {
                if candidate.residual < existing.residual {
                    *existing = candidate;
                }
            }
            None => found.push(candidate),
        }
    }
    found.sort_by(|a, b| {
        a.u.iter()
            .zip(&b.u)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(found)
}

/// Visit order for the greedy packing scan.
#[derive(Debug, Clone, Copy)]
pub enum PackOrder {
    /// Take the points as given.
    Input,
    /// Deterministic shuffle before scanning.
    Shuffled { seed: u64 },
}

/// Greedy maximal separated subset: scan the points and keep each one lying
/// at least `min_separation` from everything kept so far. Returns indices
/// into the input. Kept points are centers of disjoint balls of radius
/// min_separation / 2.
pub fn greedy_pack(points: &[Vec<C64>], min_separation: f64, order: PackOrder) -> Vec<usize> {
    let mut visit: Vec<usize> = (0..points.len()).collect();
    if let PackOrder::Shuffled { seed } = order {
        let mut rng = sampling::rng_for(seed, 0);
        for i in (1..visit.len()).rev() {
            let j = rng.random_range(0..=i);
            visit.swap(i, j);
        }
    }
    let mut kept: Vec<usize> = Vec::new();
    for idx in visit {
        let far_enough = kept.iter().all(|&k| {
            points[idx]
                .iter()
                .zip(&points[k])
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
                >= min_separation
        });
        if far_enough {
            kept.push(idx);
        }
    }
    kept.sort_unstable();
    kept
}

/// p-dimensional content estimate from a packing count: each of the `count`
/// disjoint balls of radius eps witnesses about c_p eps^p of measure, with
/// c_p the unit p-ball volume.
pub fn hausdorff_content(count: usize, eps: f64, p: usize) -> f64 {
    unit_ball_volume(p) * count as f64 * eps.powi(p as i32)
}

/// count * eps^exponent / reference, the packing constant compared against a
/// reference measure of the ambient set.
pub fn packing_ratio(count: usize, eps: f64, exponent: f64, reference: f64) -> f64 {
    count as f64 * eps.powf(exponent) / reference
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{RealPoly, ScalarField};
    use crate::manifold::{Chart, CoordMap};

    fn real_line(half_width: f64) -> DefiningSystem {
        let rho = vec![ScalarField::Poly(RealPoly::y_coord(1, 0))];
        let chart = Chart {
            bounds: vec![(-half_width, half_width)],
            coords: vec![CoordMap::Param(0), CoordMap::Fixed(0.0)],
        };
        DefiningSystem::new(1, rho, 2.0, Some(chart)).unwrap()
    }

    #[test]
    fn unit_ball_volumes_match_closed_forms() {
        assert_eq!(unit_ball_volume(0), 1.0);
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_zeros_on_the_real_line() {
        // z^3 - 0.25 z vanishes at -1/2, 0, 1/2, all on R.
        let g = HoloPoly::new(
            1,
            vec![
                (vec![3], C64::new(1.0, 0.0)),
                (vec![1], C64::new(-0.25, 0.0)),
            ],
        )
        .unwrap();
        let ds = real_line(1.0);
        let zeros = zeros_on_m(&[g], &ds, 50, 1e-10, 1e-4).unwrap();
        assert_eq!(zeros.len(), 3);
        let expected = [-0.5, 0.0, 0.5];
        for (zp, &e) in zeros.iter().zip(&expected) {
            assert!((zp.u[0] - e).abs() < 1e-8, "{} vs {e}", zp.u[0]);
            assert!(zp.residual < 1e-10);
        }
    }

    #[test]
    fn circle_zeros_of_a_quadratic() {
        // z^2 - 1 on the unit circle: zeros at +-1.
        let rho = ScalarField::Poly(RealPoly::abs_z_squared(1).add(&RealPoly::constant(2, -1.0)));
        let chart = Chart {
            bounds: vec![(-std::f64::consts::PI, std::f64::consts::PI)],
            coords: vec![
                CoordMap::Cos {
                    param: 0,
                    amp: 1.0,
                    freq: 1.0,
                    phase: 0.0,
                },
                CoordMap::Sin {
                    param: 0,
                    amp: 1.0,
                    freq: 1.0,
                    phase: 0.0,
                },
            ],
        };
        let ds = DefiningSystem::new(1, vec![rho], 3.0, Some(chart)).unwrap();
        let g = HoloPoly::new(
            1,
            vec![(vec![2], C64::new(1.0, 0.0)), (vec![0], C64::new(-1.0, 0.0))],
        )
        .unwrap();
        let zeros = zeros_on_m(&[g], &ds, 64, 1e-10, 1e-4).unwrap();
        assert_eq!(zeros.len(), 2);
        for zp in &zeros {
            assert!((zp.z[0].norm() - 1.0).abs() < 1e-9);
            assert!((zp.z[0].im).abs() < 1e-9);
            assert!((zp.z[0].re.abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_off_the_manifold_is_not_reported() {
        // z - i/2 has its only zero off the real line.
        let g = HoloPoly::new(
            1,
            vec![
                (vec![1], C64::new(1.0, 0.0)),
                (vec![0], C64::new(0.0, -0.5)),
            ],
        )
        .unwrap();
        let ds = real_line(1.0);
        let zeros = zeros_on_m(&[g], &ds, 40, 1e-10, 1e-4).unwrap();
        assert!(zeros.is_empty());
    }

    #[test]
    fn greedy_packing_on_a_uniform_row() {
        let points: Vec<Vec<C64>> = (0..=10)
            .map(|i| vec![C64::new(i as f64 * 0.1, 0.0)])
            .collect();
        // Nudge below 0.2 so grid rounding (6 * 0.1 > 0.6) cannot flip the
        // boundary comparisons.
        let sep = 0.2 - 1e-9;
        let kept = greedy_pack(&points, sep, PackOrder::Input);
        assert_eq!(kept, vec![0, 2, 4, 6, 8, 10]);
        // Separation holds pairwise.
        for (a, &i) in kept.iter().enumerate() {
            for &j in &kept[a + 1..] {
                let d = (points[i][0] - points[j][0]).norm();
                assert!(d >= sep);
            }
        }
        // Shuffled mode is deterministic per seed.
        let s1 = greedy_pack(&points, sep, PackOrder::Shuffled { seed: 9 });
        let s2 = greedy_pack(&points, sep, PackOrder::Shuffled { seed: 9 });
        assert_eq!(s1, s2);
    }

    #[test]
    fn content_and_packing_ratio_formulas() {
        // Six balls of radius 0.1 on a line: content 2 * 6 * 0.1 = 1.2.
        assert!((hausdorff_content(6, 0.1, 1) - 1.2).abs() < 1e-14);
        // 12 points at eps = 0.05 against a reference length 0.6.
        assert!((packing_ratio(12, 0.05, 1.0, 0.6) - 1.0).abs() < 1e-14);
    }
}
