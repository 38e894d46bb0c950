//! Conversion from scenario configs to the numeric objects they describe.
//! Shape problems (wrong exponent counts, inconsistent charts) surface as
//! schema errors so the caller can exit accordingly.

use tubemass_core::currents::{ClipBall, HoloPoly};
use tubemass_core::jets::{RealPoly, ScalarField, Term};
use tubemass_core::manifold::{Chart, ConvexBody, CoordMap, DefiningSystem};
use tubemass_core::mass_profile::TubeWeightParams;
use tubemass_core::Complex64 as C64;

use crate::config::{
    BodyConfig, ChartConfig, ClipConfig, ConfigError, CoordConfig, HoloPolyConfig, ManifoldConfig,
    PolyConfig, WeightConfig,
};

pub fn real_poly(cfg: &PolyConfig, nvars: usize) -> Result<RealPoly, ConfigError> {
    let mut terms = Vec::with_capacity(cfg.terms.len());
    for t in &cfg.terms {
        if t.exponents.len() != nvars {
            return Err(ConfigError::Invalid(format!(
                "real polynomial term has {} exponents, expected {nvars}",
                t.exponents.len()
            )));
        }
        terms.push(Term {
            exps: t.exponents.clone(),
            coeff: t.coeff,
        });
    }
    RealPoly::new(nvars, terms).map_err(|e| ConfigError::Invalid(e.to_string()))
}

pub fn holo_poly(cfg: &HoloPolyConfig, n: usize) -> Result<HoloPoly, ConfigError> {
    let mut terms = Vec::with_capacity(cfg.terms.len());
    for t in &cfg.terms {
        if t.exponents.len() != n {
            return Err(ConfigError::Invalid(format!(
                "holomorphic term has {} exponents, expected {n}",
                t.exponents.len()
            )));
        }
        terms.push((t.exponents.clone(), C64::new(t.coeff_re, t.coeff_im)));
    }
    HoloPoly::new(n, terms).map_err(|e| ConfigError::Invalid(e.to_string()))
}

fn coord_map(cfg: &CoordConfig, chart_dim: usize) -> Result<CoordMap, ConfigError> {
    Ok(match cfg {
        CoordConfig::Param(i) => CoordMap::Param(*i),
        CoordConfig::Fixed(v) => CoordMap::Fixed(*v),
        CoordConfig::Poly(p) => CoordMap::Poly(real_poly(p, chart_dim)?),
        CoordConfig::Cos {
            param,
            amp,
            freq,
            phase,
        } => CoordMap::Cos {
            param: *param,
            amp: *amp,
            freq: *freq,
            phase: *phase,
        },
        CoordConfig::Sin {
            param,
            amp,
            freq,
            phase,
        } => CoordMap::Sin {
            param: *param,
            amp: *amp,
            freq: *freq,
            phase: *phase,
        },
    })
}

pub fn chart(cfg: &ChartConfig) -> Result<Chart, ConfigError> {
    let dim = cfg.bounds.len();
    let coords = cfg
        .coords
        .iter()
        .map(|c| coord_map(c, dim))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Chart {
        bounds: cfg.bounds.clone(),
        coords,
    })
}

pub fn manifold(cfg: &ManifoldConfig) -> Result<DefiningSystem, ConfigError> {
    let rho = cfg
        .rho
        .iter()
        .map(|p| Ok(ScalarField::Poly(real_poly(p, 2 * cfg.n)?)))
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let chart_built = cfg.chart.as_ref().map(chart).transpose()?;
    DefiningSystem::new(cfg.n, rho, cfg.domain_radius, chart_built)
        .map_err(|e| ConfigError::Invalid(e.to_string()))
}

pub fn body(cfg: &BodyConfig) -> ConvexBody {
    match cfg {
        BodyConfig::Point(p) => ConvexBody::Point(p.clone()),
        BodyConfig::Box(b) => ConvexBody::Box(b.clone()),
        BodyConfig::Segment { a, b } => ConvexBody::Segment {
            a: a.clone(),
            b: b.clone(),
        },
        BodyConfig::Ball { center, radius } => ConvexBody::Ball {
            center: center.clone(),
            radius: *radius,
        },
    }
}

pub fn clip(cfg: &ClipConfig) -> ClipBall {
    ClipBall {
        center: cfg
            .center
            .iter()
            .map(|&(re, im)| C64::new(re, im))
            .collect(),
        radius: cfg.radius,
    }
}

pub fn weight_params(cfg: &WeightConfig) -> TubeWeightParams {
    TubeWeightParams {
        a_constant: cfg.a_constant,
        cutoff_radius: cfg.cutoff_radius,
        eps_cutoff: cfg.eps_cutoff,
        eps_smooth: cfg.eps_smooth,
    }
}

/// Common configs assembled in code, used by several bundled scenarios.

/// rho_j = y_j for M = R^n in C^n.
pub fn y_coord_poly(n: usize, j: usize) -> PolyConfig {
    let mut exps = vec![0u32; 2 * n];
    exps[n + j] = 1;
    PolyConfig {
        terms: vec![crate::config::RealTermConfig {
            exponents: exps,
            coeff: 1.0,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RealTermConfig;

    #[test]
    fn exponent_arity_is_enforced() {
        let bad = PolyConfig {
            terms: vec![RealTermConfig {
                exponents: vec![1, 0],
                coeff: 1.0,
            }],
        };
        assert!(real_poly(&bad, 4).is_err());
        assert!(real_poly(&bad, 2).is_ok());
    }

    #[test]
    fn flat_manifold_builds_and_classifies() {
        let cfg = ManifoldConfig {
            n: 2,
            rho: vec![y_coord_poly(2, 0), y_coord_poly(2, 1)],
            domain_radius: 3.0,
            chart: Some(ChartConfig {
                bounds: vec![(-1.0, 1.0), (-1.0, 1.0)],
                coords: vec![
                    CoordConfig::Param(0),
                    CoordConfig::Param(1),
                    CoordConfig::Fixed(0.0),
                    CoordConfig::Fixed(0.0),
                ],
            }),
        };
        let ds = manifold(&cfg).unwrap();
        let pts: Vec<_> = ds
            .sample_surface(40, 1)
            .unwrap()
            .into_iter()
            .map(|p| p.z)
            .collect();
        let report = ds.generating_report(&pts).unwrap();
        assert!(report.generating);
        assert!((report.delta_min - 0.25).abs() < 1e-9);
    }
}
