//! Executes one parsed scenario: builds the geometry, runs the computation,
//! evaluates the expectation checks, and returns tables plus a verdict.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

use tubemass_core::currents::{
    ball_mass_ratio, divisor_mass, kappa, log_abs_field, Region, TubeCore,
};
use tubemass_core::forms::{self, HermitianForm};
use tubemass_core::jets::{finite_difference, RealPoly, ScalarField};
use tubemass_core::manifold::DefiningSystem;
use tubemass_core::mass_profile::{
    almost_monotone_report, build_tube_weight, find_t0, growth_factor, select_tube_constant,
    sigma_u_profile, tube_profile, verify_psh_bound, CurrentSpec, MassProfile, PshVerifyParams,
    TubeWeightParams,
};
use tubemass_core::potentials::{
    adaptive_kernel, exp_bound_check, exp_integral, log_log_slope, nu_monotone, parts_identity,
    KernelQuadOpts, RadialMass,
};
use tubemass_core::sampling;
use tubemass_core::zero_geometry::{greedy_pack, hausdorff_content, zeros_on_m, PackOrder};

use crate::config::{
    CalibrationCase, ClosedForm, ConfigError, CoreSpec, CurrentConfig, ExpIntegralCase,
    GeneratingCase, LelongCase, PotentialExpect, PshBoundCase, Scenario, SigmaUExpect, Task,
    TubeExpect, ZerosExpect,
};
use crate::plot::{PlotSpec, Series};
use crate::report::{Table, TaskOutcome};
use crate::scene;

/// How a run can end without producing a verdict. Configuration problems are
/// distinct from numerical breakdowns so the process can exit accordingly.
#[derive(Debug)]
pub enum RunError {
    Invalid(String),
    Numerical(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(m) => write!(f, "invalid scenario: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Invalid(e.to_string())
    }
}

fn num<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Numerical(e.to_string())
}

pub fn execute(sc: &Scenario) -> Result<TaskOutcome, RunError> {
    let seed = sc.seed;
    match &sc.task {
        Task::FormsCheck {
            n_max,
            tuples,
            tolerance,
        } => run_forms(seed, *n_max, *tuples, *tolerance),
        Task::JetsCheck { points, tolerance } => run_jets(seed, *points, *tolerance),
        Task::Generating { cases } => run_generating(seed, cases),
        Task::Calibration { cases } => run_calibration(seed, cases),
        Task::TubeMass {
            n,
            core,
            current,
            clip,
            t_grid,
            ratio_exponent,
            samples_per_t,
            expect,
        } => run_tube_mass(
            seed,
            *n,
            core,
            current,
            clip.as_ref(),
            t_grid,
            *ratio_exponent,
            *samples_per_t,
            expect,
        ),
        Task::SigmaU {
            manifold,
            weight,
            phi,
            t_grid,
            samples,
            expect,
        } => run_sigma_u(seed, manifold, weight, phi.as_ref(), t_grid, *samples, expect),
        Task::PshBound { cases } => run_psh_bound(seed, cases),
        Task::Zeros {
            manifold,
            f,
            grid_per_axis,
            dedupe_radius,
            epsilons,
            hausdorff_p,
            exact_measure,
            expect,
        } => run_zeros(
            manifold,
            f,
            *grid_per_axis,
            *dedupe_radius,
            epsilons,
            *hausdorff_p,
            *exact_measure,
            expect,
        ),
        Task::Lelong { n, cases } => run_lelong(seed, *n, cases),
        Task::NuClassifier {
            n,
            centers_per_family,
            atoms_per_cloud,
            s_grid,
            rel_tol,
        } => run_nu_classifier(seed, *n, *centers_per_family, *atoms_per_cloud, s_grid, *rel_tol),
        Task::Potential {
            n,
            alpha,
            ball_radius,
            atom_counts,
            z_grid_points,
            expect,
        } => run_potential(seed, *n, *alpha, *ball_radius, atom_counts, *z_grid_points, expect),
        Task::KernelSlope {
            manifold,
            alpha,
            distances,
            expect_slope,
            slope_tol,
        } => run_kernel_slope(manifold, *alpha, distances, *expect_slope, *slope_tol),
        Task::ExpIntegral {
            n,
            log_of,
            body,
            cases,
            clip_levels,
            samples,
        } => run_exp_integral(seed, *n, log_of, body, cases, clip_levels, *samples),
    }
}

fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> HermitianForm {
    let mut m = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = C64::new(sampling::standard_normal(rng), 0.0);
        for k in j + 1..n {
            let v = C64::new(sampling::standard_normal(rng), sampling::standard_normal(rng));
            m[(j, k)] = v;
            m[(k, j)] = v.conj();
        }
    }
    HermitianForm::new(m).expect("construction is Hermitian")
}

fn run_forms(seed: u64, n_max: usize, tuples: usize, tol: f64) -> Result<TaskOutcome, RunError> {
    let started = Instant::now();
    let mut out = TaskOutcome::new();
    let mut rng = sampling::rng_for(seed, 0);
    let mut table = Table::new("tuples", &["index", "n", "k", "fast", "reference", "rel_err"]);
    let mut worst = 0.0f64;
    for i in 0..tuples {
        let n = 1 + i % n_max;
        let k = 1 + rng.random_range(0..n);
        let forms: Vec<HermitianForm> = (0..k).map(|_| random_hermitian(&mut rng, n)).collect();
        let refs: Vec<&HermitianForm> = forms.iter().collect();
        let fast = forms::wedge_coefficient(&refs, n).map_err(num)?;
        let oracle = forms::reference::wedge_coefficient(&refs, n).map_err(num)?;
        let rel = (fast - oracle).abs() / fast.abs().max(oracle.abs()).max(1.0);
        worst = worst.max(rel);
        table.push(vec![i as f64, n as f64, k as f64, fast, oracle, rel]);
    }
    out.tables.push(table);
    out.check(
        "wedge_matches_reference",
        worst < tol,
        format!("worst relative error {worst:.3e} over {tuples} tuples (tol {tol:.1e})"),
    );
    let elapsed = started.elapsed().as_secs_f64();
    out.check(
        "runtime_within_budget",
        elapsed < 5.0,
        format!("{elapsed:.2} s for the sweep (budget 5 s)"),
    );
    Ok(out)
}

/// The bundled differentiable fields: every field constructor is exercised,
/// with sample boxes chosen away from kinks and singular sets so central
/// differences converge at their nominal rate.
fn jet_menagerie() -> Result<Vec<(&'static str, ScalarField, Vec<(f64, f64)>)>, RunError> {
    let x = RealPoly::x_coord;
    let y = RealPoly::y_coord;
    let shifted_norm = |n: usize| {
        ScalarField::Poly(RealPoly::abs_z_squared(n).add(&RealPoly::constant(2 * n, 1.0)))
    };
    let plane = DefiningSystem::new(
        2,
        vec![
            ScalarField::Poly(y(2, 0)),
            ScalarField::Poly(y(2, 1)),
        ],
        4.0,
        None,
    )
    .map_err(num)?;
    let plane_weight = build_tube_weight(&plane, TubeWeightParams::default());
    let sheet = DefiningSystem::new(
        2,
        vec![ScalarField::Poly(
            y(2, 0).add(&x(2, 1).mul(&x(2, 1)).scale(-1.0)),
        )],
        4.0,
        None,
    )
    .map_err(num)?;
    let sheet_weight = build_tube_weight(&sheet, TubeWeightParams::default());
    let slab = DefiningSystem::new(1, vec![ScalarField::Poly(y(1, 0))], 4.0, None).map_err(num)?;
    let slab_weight = build_tube_weight(&slab, TubeWeightParams::default());
    let log_modulus = log_abs_field(
        &tubemass_core::currents::HoloPoly::coordinate(2, 0),
    )
    .map_err(num)?;

    let wide = vec![(-2.0, 2.0); 4];
    // Weight fields are smoothed at a tiny scale both on M itself and on the
    // cutoff sphere |z| = r0. The boxes keep the imaginary parts positive and
    // stay strictly inside the cutoff ball, safely on one smooth branch.
    let off_plane = vec![(-0.3, 0.3), (-0.3, 0.3), (0.2, 0.45), (0.2, 0.45)];
    let above_sheet = vec![(-0.25, 0.25), (-0.3, 0.3), (0.55, 0.7), (-0.25, 0.25)];
    Ok(vec![
        ("squared_norm", ScalarField::Poly(RealPoly::abs_z_squared(2)), wide.clone()),
        (
            "curved_sheet_residual",
            ScalarField::Square(Box::new(ScalarField::Poly(
                y(2, 0).add(&x(2, 1).mul(&x(2, 1)).scale(-1.0)),
            ))),
            vec![(-1.5, 1.5); 4],
        ),
        ("log_shifted_norm", ScalarField::Ln(Box::new(shifted_norm(2))), wide.clone()),
        ("sqrt_shifted_norm", ScalarField::Sqrt(Box::new(shifted_norm(2))), wide.clone()),
        (
            "smooth_max_pair",
            ScalarField::SmoothMax(
                Box::new(ScalarField::Poly(
                    x(2, 0).mul(&x(2, 0)).add(&y(2, 0).mul(&y(2, 0))),
                )),
                Box::new(ScalarField::Poly(
                    x(2, 1)
                        .mul(&x(2, 1))
                        .add(&y(2, 1).mul(&y(2, 1)))
                        .add(&RealPoly::constant(4, 0.3)),
                )),
                0.25,
            ),
            vec![(-1.0, 1.0); 4],
        ),
        (
            "scaled_product",
            ScalarField::Scale(
                0.7,
                Box::new(ScalarField::Product(
                    Box::new(ScalarField::Poly(
                        x(2, 0).mul(&x(2, 0)).add(&RealPoly::constant(4, 1.0)),
                    )),
                    Box::new(ScalarField::Sqrt(Box::new(ScalarField::Poly(
                        y(2, 1).mul(&y(2, 1)).add(&RealPoly::constant(4, 1.0)),
                    )))),
                )),
            ),
            wide.clone(),
        ),
        ("plane_weight", plane_weight.field.clone(), off_plane.clone()),
        ("plane_weight_root", plane_weight.sqrt_field, off_plane),
        ("curved_weight", sheet_weight.field, above_sheet),
        (
            "slab_weight_root",
            slab_weight.sqrt_field,
            vec![(-0.55, 0.55), (0.2, 0.6)],
        ),
        (
            "log_modulus",
            log_modulus,
            vec![(0.4, 1.2), (0.4, 1.2), (-1.0, 1.0), (-1.0, 1.0)],
        ),
    ])
}

fn run_jets(seed: u64, points: usize, tol: f64) -> Result<TaskOutcome, RunError> {
    let mut out = TaskOutcome::new();
    let mut table = Table::new("deviations", &["field", "point", "deviation"]);
    let fields = jet_menagerie()?;
    for (fi, (name, field, bounds)) in fields.iter().enumerate() {
        let mut rng = sampling::rng_for(seed, fi as u64);
        let mut worst = 0.0f64;
        for pi in 0..points {
            let xpt = sampling::sample_box(&mut rng, bounds);
            let analytic = field.jet_real(&xpt).map_err(num)?;
            let fd = finite_difference::fd_jet(
                |q| field.value_real(q).expect("field smooth on its box"),
                &xpt,
                1e-4,
            );
            let dev = finite_difference::jet_deviation(&analytic, &fd);
            worst = worst.max(dev);
            table.push(vec![fi as f64, pi as f64, dev]);
        }
        out.check(
            &format!("{name}_matches_differences"),
            worst < tol,
            format!("worst deviation {worst:.3e} over {points} points (tol {tol:.1e})"),
        );
    }
    out.tables.push(table);
    Ok(out)
}

fn run_generating(seed: u64, cases: &[GeneratingCase]) -> Result<TaskOutcome, RunError> {
    let mut out = TaskOutcome::new();
    let mut table = Table::new(
        "cases",
        &["case", "generating", "delta_min", "min_rank", "points"],
    );
    for (i, case) in cases.iter().enumerate() {
        let ds = scene::manifold(&case.manifold)?;
        let pts: Vec<Vec<C64>> = ds
            .sample_surface(48, sampling::derive_seed(seed, i as u64))
            .map_err(num)?
            .into_iter()
            .map(|p| p.z)
            .collect();
        let report = ds.generating_report(&pts).map_err(num)?;
        table.push(vec![
            i as f64,
            if report.generating { 1.0 } else { 0.0 },
            report.delta_min,
            report.min_rank as f64,
            report.points_checked as f64,
        ]);
        out.check(
            &format!("{}_classification", case.name),
            report.generating == case.expect_generating,
            format!(
                "classified generating={} (delta_min {:.6e}, rank {})",
                report.generating, report.delta_min, report.min_rank
            ),
        );
        if let Some(expected) = case.expect_delta_min {
            let tol = case.delta_tol.unwrap_or(1e-9);
            let gap = (report.delta_min - expected).abs();
            out.check(
                &format!("{}_delta_min", case.name),
                gap <= tol,
                format!("delta_min {:.12} vs expected {expected} (tol {tol:.1e})", report.delta_min),
            );
        }
    }
    out.tables.push(table);
    Ok(out)
}

fn run_calibration(seed: u64, cases: &[CalibrationCase]) -> Result<TaskOutcome, RunError> {
    let started = Instant::now();
    let mut out = TaskOutcome::new();
    let mut table = Table::new("areas", &["case", "area", "se", "expected", "rel_err"]);
    for (i, case) in cases.iter().enumerate() {
        let f = scene::holo_poly(&case.f, case.n)?;
        let region = Region::Ball {
            center: vec![C64::new(0.0, 0.0); case.n],
            radius: case.ball_radius,
        };
        let est = divisor_mass(
            &f,
            &region,
            case.eps,
            case.samples,
            sampling::derive_seed(seed, i as u64),
        )
        .map_err(num)?;
        let scale = kappa(case.n);
        let area = est.value / scale;
        let se = est.standard_error / scale;
        let rel = (area - case.expect_area).abs() / case.expect_area;
        table.push(vec![i as f64, area, se, case.expect_area, rel]);
        out.check(
            &format!("{}_area", case.name),
            rel <= case.rel_tol,
            format!(
                "area {area:.5} vs {:.5} expected, off by {:.2}% (tol {:.1}%), se {se:.2e}",
                case.expect_area,
                100.0 * rel,
                100.0 * case.rel_tol
            ),
        );
        for flag in &est.flags {
            out.notes.push(format!("{}: {flag}", case.name));
            if flag.contains("relative_se_above") {
                out.shaky = true;
            }
        }
    }
    out.tables.push(table);
    let elapsed = started.elapsed().as_secs_f64();
    out.check(
        "runtime_within_budget",
        elapsed < 60.0,
        format!("{elapsed:.1} s for the calibration sweep (budget 60 s)"),
    );
    Ok(out)
}

fn hyperplane_ball_sigma(t: f64, r: f64) -> f64 {
    let t = t.min(r);
    kappa(2) * 2.0 * (t * (r * r - t * t).sqrt() + r * r * (t / r).asin())
}

fn profile_table(profile: &MassProfile) -> Table {
    let mut table = Table::new("profile", &["t", "sigma", "se", "ratio", "ratio_se"]);
    for i in 0..profile.t_grid.len() {
        table.push(vec![
            profile.t_grid[i],
            profile.sigma[i],
            profile.sigma_se[i],
            profile.ratio[i],
            profile.ratio_se[i],
        ]);
    }
    table
}

fn absorb_profile_warnings(out: &mut TaskOutcome, profile: &MassProfile) {
    for w in &profile.warnings {
        out.notes.push(w.clone());
        if w.contains("relative_se_above") {
            out.shaky = true;
        }
    }
}

fn check_profile_expectations(out: &mut TaskOutcome, profile: &MassProfile, expect: &TubeExpect) {
    if let Some(form) = &expect.closed_form {
        let tol = expect.closed_form_rel_tol.unwrap_or(0.05);
        let mut worst = 0.0f64;
        let mut worst_t = profile.t_grid[0];
        let mut reference = Table::new("reference", &["t", "sigma_ref"]);
        for (i, &t) in profile.t_grid.iter().enumerate() {
            let expected = match form {
                ClosedForm::HyperplaneBall { r } => hyperplane_ball_sigma(t, *r),
            };
            reference.push(vec![t, expected]);
            let rel = (profile.sigma[i] - expected).abs() / expected;
            if rel > worst {
                worst = rel;
                worst_t = t;
            }
        }
        out.tables.push(reference);
        out.check(
            "profile_matches_closed_form",
            worst <= tol,
            format!(
                "worst relative gap {:.2}% at t={worst_t} (tol {:.1}%)",
                100.0 * worst,
                100.0 * tol
            ),
        );
    }
    if let Some(max_c) = expect.max_c {
        let report = almost_monotone_report(profile);
        out.check(
            "ratio_almost_monotone",
            report.c_measured < max_c,
            format!(
                "C {:.4} (worst pair t={} vs t={}, bound {max_c})",
                report.c_measured, report.worst_small_t, report.worst_large_t
            ),
        );
    }
    if let Some(k) = expect.nondecreasing_sigma {
        out.check(
            "ratio_nondecreasing",
            profile.ratio_nondecreasing_within(k),
            format!("normalized ratio nondecreasing within {k} combined SE"),
        );
    }
    if let Some(slope) = expect.ratio_slope {
        let tol = expect.ratio_slope_tol.unwrap_or(0.1);
        let pairs: Vec<(f64, f64)> = profile
            .t_grid
            .iter()
            .zip(&profile.ratio)
            .map(|(&t, &r)| (t, r))
            .collect();
        match log_log_slope(&pairs) {
            Some(got) => out.check(
                "ratio_slope",
                (got - slope).abs() <= tol,
                format!("log-log ratio slope {got:.3} vs expected {slope} (tol {tol})"),
            ),
            None => out.check(
                "ratio_slope",
                false,
                "slope undefined: nonpositive ratios in the profile".to_string(),
            ),
        }
    }
    if let Some(min_growth) = expect.min_ratio_growth {
        let t_small = profile.t_grid[0];
        let t_large = *profile.t_grid.last().unwrap();
        let growth = growth_factor(profile, t_small, t_large);
        out.check(
            "ratio_growth",
            growth > min_growth,
            format!("ratio grew {growth:.2}x from t={t_large} down to t={t_small} (need > {min_growth})"),
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn run_tube_mass(
    seed: u64,
    n: usize,
    core_cfg: &CoreSpec,
    current_cfg: &CurrentConfig,
    clip_cfg: Option<&crate::config::ClipConfig>,
    t_grid: &[f64],
    ratio_exponent: Option<f64>,
    samples_per_t: usize,
    expect: &TubeExpect,
) -> Result<TaskOutcome, RunError> {
    let (core, default_exponent) = match core_cfg {
        CoreSpec::Manifold(mc) => {
            let ds = scene::manifold(mc)?;
            let e = (ds.real_dim() as f64 - 1.0).max(0.0);
            (TubeCore::Manifold(Arc::new(ds)), e)
        }
        CoreSpec::Convex(bc) => {
            let body = scene::body(bc);
            let e = (body.n() as f64 - 1.0).max(0.0);
            (TubeCore::Convex(body), e)
        }
    };
    let current = match current_cfg {
        CurrentConfig::Divisor { f, eps } => CurrentSpec::Divisor {
            f: scene::holo_poly(f, n)?,
            eps: *eps,
        },
        CurrentConfig::Smooth { u } => {
            CurrentSpec::Smooth {
                u: ScalarField::Poly(scene::real_poly(u, 2 * n)?),
            }
        }
    };
    let clip = clip_cfg.map(scene::clip);
    let exponent = ratio_exponent.unwrap_or(default_exponent);
    let profile = tube_profile(
        &current,
        &core,
        clip.as_ref(),
        t_grid,
        exponent,
        samples_per_t,
        seed,
    )
    .map_err(num)?;
    let mut out = TaskOutcome::new();
    out.tables.push(profile_table(&profile));
    absorb_profile_warnings(&mut out, &profile);
    check_profile_expectations(&mut out, &profile, expect);
    Ok(out)
}

fn run_sigma_u(
    seed: u64,
    manifold: &crate::config::ManifoldConfig,
    weight: &crate::config::WeightConfig,
    phi: Option<&crate::config::PolyConfig>,
    t_grid: &[f64],
    samples: usize,
    expect: &SigmaUExpect,
) -> Result<TaskOutcome, RunError> {
    let ds = scene::manifold(manifold)?;
    let tw = build_tube_weight(&ds, scene::weight_params(weight));
    let phi_field = match phi {
        Some(cfg) => ScalarField::Poly(scene::real_poly(cfg, 2 * ds.n())?),
        None => ScalarField::Poly(RealPoly::abs_z_squared(ds.n())),
    };
    let profile = sigma_u_profile(&ds, &tw, &phi_field, t_grid, samples, seed).map_err(num)?;
    let mut out = TaskOutcome::new();
    out.tables.push(profile_table(&profile));
    absorb_profile_warnings(&mut out, &profile);
    if let Some(k) = expect.nondecreasing_sigma {
        out.check(
            "ratio_nondecreasing",
            profile.ratio_nondecreasing_within(k),
            format!("sublevel ratio nondecreasing within {k} combined SE"),
        );
    }
    if let Some(max_c) = expect.max_c {
        let report = almost_monotone_report(&profile);
        out.check(
            "ratio_almost_monotone",
            report.c_measured < max_c,
            format!("C {:.4} (bound {max_c})", report.c_measured),
        );
    }
    Ok(out)
}

fn run_psh_bound(seed: u64, cases: &[PshBoundCase]) -> Result<TaskOutcome, RunError> {
    let mut out = TaskOutcome::new();
    let mut table = Table::new(
        "margins",
        &["case", "a", "t", "delta_prime", "sqrt_coeff", "sqrt_eigen", "passed"],
    );
    for (ci, case) in cases.iter().enumerate() {
        let ds = scene::manifold(&case.manifold)?;
        let base_params = scene::weight_params(&case.weight);
        let verify = PshVerifyParams {
            t: case.t_candidates[0],
            surface_samples: case.surface_samples,
            offsets_per_point: case.offsets_per_point,
            seed: sampling::derive_seed(seed, ci as u64),
            tolerance: case.tolerance,
        };
        let (chosen, a_reports) =
            select_tube_constant(&ds, base_params, &case.a_candidates, verify).map_err(num)?;
        for (a, rep) in &a_reports {
            table.push(vec![
                ci as f64,
                *a,
                rep.t,
                rep.delta_prime,
                rep.min_sqrt_coeff,
                rep.min_sqrt_eigen,
                if rep.passes() { 1.0 } else { 0.0 },
            ]);
        }
        out.check(
            &format!("{}_constant_selected", case.name),
            chosen.is_some() == case.expect_pass,
            match chosen {
                Some(a) => format!("smallest passing quadratic coefficient {a}"),
                None => "no candidate coefficient passed".to_string(),
            },
        );
        if let Some(a) = chosen {
            let weight = build_tube_weight(
                &ds,
                TubeWeightParams {
                    a_constant: a,
                    ..base_params
                },
            );
            let (t0, t_reports) = find_t0(&ds, &weight, &case.t_candidates, verify).map_err(num)?;
            for rep in &t_reports {
                table.push(vec![
                    ci as f64,
                    a,
                    rep.t,
                    rep.delta_prime,
                    rep.min_sqrt_coeff,
                    rep.min_sqrt_eigen,
                    if rep.passes() { 1.0 } else { 0.0 },
                ]);
            }
            match t0 {
                Some(t0) => {
                    let at_t0 = t_reports
                        .iter()
                        .find(|r| r.t == t0)
                        .expect("t0 comes from the sweep");
                    // Strict positivity of the transversal margin, and at
                    // most rounding noise in the root weight coefficients.
                    out.check(
                        &format!("{}_margin_at_widest_tube", case.name),
                        at_t0.delta_prime > 0.0 && at_t0.min_sqrt_coeff >= -1e-8,
                        format!(
                            "t0={t0}: delta_prime {:.4e}, sqrt coeff {:.4e}",
                            at_t0.delta_prime, at_t0.min_sqrt_coeff
                        ),
                    );
                }
                None => out.check(
                    &format!("{}_margin_at_widest_tube", case.name),
                    !case.expect_pass,
                    "no tube radius passed".to_string(),
                ),
            }
        }
        if case.expect_fail_without_a {
            let bare = build_tube_weight(
                &ds,
                TubeWeightParams {
                    a_constant: 0.0,
                    ..base_params
                },
            );
            let rep = verify_psh_bound(&ds, &bare, verify).map_err(num)?;
            table.push(vec![
                ci as f64,
                0.0,
                rep.t,
                rep.delta_prime,
                rep.min_sqrt_coeff,
                rep.min_sqrt_eigen,
                if rep.passes() { 1.0 } else { 0.0 },
            ]);
            let negativity = rep.min_sqrt_coeff.min(rep.min_sqrt_eigen);
            out.check(
                &format!("{}_needs_quadratic_term", case.name),
                negativity < 0.0,
                format!(
                    "without the quadratic term the root weight dips to {negativity:.4e}"
                ),
            );
        }
    }
    out.tables.push(table);
    Ok(out)
}

/// Orders a point cloud along its underlying curve by a nearest-neighbor
/// walk from an extremal point. Greedy packing over this order leaves gaps
/// tight against the separation, which a scrambled scan order would not.
fn chain_order(points: &[Vec<C64>]) -> Vec<Vec<C64>> {
    if points.is_empty() {
        return Vec::new();
    }
    let dist2 = |a: &[C64], b: &[C64]| -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum()
    };
    let dim = points[0].len();
    let mut centroid = vec![C64::new(0.0, 0.0); dim];
    for p in points {
        for (c, v) in centroid.iter_mut().zip(p) {
            *c += v;
        }
    }
    for c in centroid.iter_mut() {
        *c /= points.len() as f64;
    }
    let start = (0..points.len())
        .max_by(|&a, &b| {
            dist2(&points[a], &centroid)
                .total_cmp(&dist2(&points[b], &centroid))
        })
        .unwrap();
    let mut visited = vec![false; points.len()];
    let mut order = Vec::with_capacity(points.len());
    let mut current = start;
    visited[current] = true;
    order.push(points[current].clone());
    for _ in 1..points.len() {
        let next = (0..points.len())
            .filter(|&i| !visited[i])
            .min_by(|&a, &b| {
                dist2(&points[a], &points[current])
                    .total_cmp(&dist2(&points[b], &points[current]))
            })
            .unwrap();
        visited[next] = true;
        order.push(points[next].clone());
        current = next;
    }
    order
}

#[allow(clippy::too_many_arguments)]
fn run_zeros(
    manifold: &crate::config::ManifoldConfig,
    f_cfg: &crate::config::HoloPolyConfig,
    grid_per_axis: usize,
    dedupe_radius: f64,
    epsilons: &[f64],
    hausdorff_p: usize,
    exact_measure: f64,
    expect: &ZerosExpect,
) -> Result<TaskOutcome, RunError> {
    let ds = scene::manifold(manifold)?;
    let f = scene::holo_poly(f_cfg, ds.n())?;
    let zeros = zeros_on_m(&[f], &ds, grid_per_axis, 1e-10, dedupe_radius).map_err(num)?;
    if zeros.is_empty() {
        return Err(RunError::Numerical(
            "no zeros found on the charted patch".to_string(),
        ));
    }
    let ordered = chain_order(&zeros.iter().map(|p| p.z.clone()).collect::<Vec<_>>());
    let mut out = TaskOutcome::new();
    out.notes.push(format!(
        "{} zero points after deduplication at radius {dedupe_radius}",
        ordered.len()
    ));
    let mut table = Table::new(
        "packing",
        &["epsilon", "N", "C_measured", "hausdorff_p", "hausdorff_estimate"],
    );
    let mut c_min = f64::INFINITY;
    let mut c_max = 0.0f64;
    let mut smallest = (f64::INFINITY, 0.0, 0.0);
    for &eps in epsilons {
        let n_pack = greedy_pack(&ordered, eps, PackOrder::Input).len();
        let c = n_pack as f64 * eps.powi(hausdorff_p as i32) / exact_measure;
        // Covering balls of radius eps around a maximal 2eps-separated set.
        let n_cover = greedy_pack(&ordered, 2.0 * eps, PackOrder::Input).len();
        let content = hausdorff_content(n_cover, eps, hausdorff_p);
        table.push(vec![eps, n_pack as f64, c, hausdorff_p as f64, content]);
        c_min = c_min.min(c);
        c_max = c_max.max(c);
        if eps < smallest.0 {
            smallest = (eps, content, c);
        }
    }
    out.tables.push(table);
    if let Some(max_var) = expect.max_c_variation {
        let variation = c_max / c_min;
        out.check(
            "packing_constant_stable",
            variation < max_var,
            format!(
                "C in [{c_min:.4}, {c_max:.4}], variation {variation:.3}x (bound {max_var}x)"
            ),
        );
    }
    if let Some(tol) = expect.hausdorff_rel_tol {
        let (eps, content, _) = smallest;
        let rel = (content - exact_measure).abs() / exact_measure;
        out.check(
            "content_matches_measure",
            rel <= tol,
            format!(
                "estimate {content:.4} vs exact {exact_measure} at eps={eps}, off {:.2}% (tol {:.1}%)",
                100.0 * rel,
                100.0 * tol
            ),
        );
        out.check(
            "content_bounded_by_packing",
            content <= c_max * exact_measure * (1.0 + 1e-12),
            format!(
                "estimate {content:.4} vs packing bound {:.4}",
                c_max * exact_measure
            ),
        );
    }
    Ok(out)
}

fn run_lelong(seed: u64, n: usize, cases: &[LelongCase]) -> Result<TaskOutcome, RunError> {
    let mut out = TaskOutcome::new();
    let mut table = Table::new("ratios", &["case", "ratio", "se", "expected"]);
    for (i, case) in cases.iter().enumerate() {
        let f = scene::holo_poly(&case.f, n)?;
        let center: Vec<C64> = case.center.iter().map(|&(re, im)| C64::new(re, im)).collect();
        let est = ball_mass_ratio(
            &f,
            &center,
            case.radius,
            case.eps,
            case.samples,
            sampling::derive_seed(seed, i as u64),
        )
        .map_err(num)?;
        table.push(vec![i as f64, est.value, est.standard_error, case.expect_ratio]);
        let pass = if case.one_sided {
            est.value >= case.expect_ratio - case.tol
        } else {
            (est.value - case.expect_ratio).abs() <= case.tol
        };
        out.check(
            &format!("{}_density", case.name),
            pass,
            format!(
                "ball mass ratio {:.4} (se {:.1e}) vs {} {:.2} +- {}",
                est.value,
                est.standard_error,
                if case.one_sided { "at least" } else { "expected" },
                case.expect_ratio,
                case.tol
            ),
        );
        for flag in &est.flags {
            out.notes.push(format!("{}: {flag}", case.name));
            if flag.contains("relative_se_above") {
                out.shaky = true;
            }
        }
    }
    out.tables.push(table);
    Ok(out)
}

fn run_nu_classifier(
    seed: u64,
    n: usize,
    centers_per_family: usize,
    atoms_per_cloud: usize,
    s_grid: &[f64],
    rel_tol: f64,
) -> Result<TaskOutcome, RunError> {
    let exponent = (2 * n - 2) as f64;
    let mut out = TaskOutcome::new();
    let mut table = Table::new("clouds", &["family", "index", "monotone", "worst_drop"]);
    let mut errors = 0usize;
    let weight = 1.0 / atoms_per_cloud as f64;
    for i in 0..centers_per_family {
        let mut rng = sampling::rng_for(seed, i as u64);
        // Trace measures of model psh functions, radially resolved around
        // their centers: volume clouds and codimension-two plane clouds.
        let flat_dim = if i % 2 == 0 { 2 * n } else { 2 * n - 2 };
        let atoms: Vec<(f64, f64)> = (0..atoms_per_cloud)
            .map(|_| {
                let u: f64 = rng.random();
                (u.powf(1.0 / flat_dim as f64), weight)
            })
            .collect();
        let rm = RadialMass::from_atoms(atoms, exponent);
        let verdict = nu_monotone(&rm, s_grid, rel_tol);
        table.push(vec![
            0.0,
            i as f64,
            if verdict.monotone { 1.0 } else { 0.0 },
            verdict.worst_drop,
        ]);
        if !verdict.monotone {
            errors += 1;
        }
    }
    let s_min = s_grid.first().copied().unwrap_or(0.5);
    let s_max = s_grid.last().copied().unwrap_or(1.0);
    for i in 0..centers_per_family {
        let mut rng = sampling::rng_for(seed, 1000 + i as u64);
        // A single atom strictly inside the grid span: nu drops once the
        // radius passes it.
        let lo = 1.06 * s_min;
        let hi = 0.75 * s_max;
        let d = lo + (hi - lo) * rng.random::<f64>();
        let rm = RadialMass::from_atoms(vec![(d, 1.0)], exponent);
        let verdict = nu_monotone(&rm, s_grid, rel_tol);
        table.push(vec![
            1.0,
            i as f64,
            if verdict.monotone { 1.0 } else { 0.0 },
            verdict.worst_drop,
        ]);
        if verdict.monotone {
            errors += 1;
        }
    }
    out.tables.push(table);
    out.check(
        "zero_misclassifications",
        errors == 0,
        format!("{errors} errors over {} clouds", 2 * centers_per_family),
    );
    Ok(out)
}

fn run_potential(
    seed: u64,
    n: usize,
    alpha: f64,
    ball_radius: f64,
    atom_counts: &[usize],
    z_grid_points: usize,
    expect: &PotentialExpect,
) -> Result<TaskOutcome, RunError> {
    let mut out = TaskOutcome::new();
    let mut bound_table = Table::new(
        "exp_bound",
        &["refinement", "z_index", "U", "lhs", "rhs", "implied_C"],
    );
    // One fixed evaluation grid shared by every refinement.
    let mut zrng = sampling::rng_for(seed, 7);
    let z_grid: Vec<Vec<C64>> = (0..z_grid_points)
        .map(|_| {
            let x = sampling::sample_unit_ball(&mut zrng, 2 * n);
            (0..n)
                .map(|j| C64::new(0.9 * ball_radius * x[j], 0.9 * ball_radius * x[n + j]))
                .collect()
        })
        .collect();
    let mut sups = Vec::new();
    let mut last_cloud: Option<(Vec<Vec<C64>>, Vec<f64>)> = None;
    for (ri, &count) in atom_counts.iter().enumerate() {
        let mut rng = sampling::rng_for(seed, 100 + ri as u64);
        let points: Vec<Vec<C64>> = (0..count)
            .map(|_| {
                let x = sampling::sample_unit_ball(&mut rng, 2 * n);
                (0..n)
                    .map(|j| C64::new(ball_radius * x[j], ball_radius * x[n + j]))
                    .collect()
            })
            .collect();
        let weights = vec![1.0 / count as f64; count];
        let mut sup = 0.0f64;
        let mut clipped = 0usize;
        for (zi, z) in z_grid.iter().enumerate() {
            let chk = exp_bound_check(&points, &weights, z, n, alpha).map_err(num)?;
            sup = sup.max(chk.implied_c);
            clipped += chk.clipped;
            bound_table.push(vec![
                ri as f64,
                zi as f64,
                chk.u,
                chk.lhs,
                chk.rhs,
                chk.implied_c,
            ]);
        }
        if clipped > 0 {
            out.notes
                .push(format!("refinement {ri}: {clipped} clipped kernel terms"));
        }
        sups.push(sup);
        last_cloud = Some((points, weights));
    }
    out.tables.push(bound_table);
    let mut sup_table = Table::new("sup_drift", &["refinement", "atoms", "sup_implied_C"]);
    for (ri, sup) in sups.iter().enumerate() {
        sup_table.push(vec![ri as f64, atom_counts[ri] as f64, *sup]);
    }
    out.tables.push(sup_table);
    out.check(
        "implied_constant_finite",
        sups.iter().all(|s| s.is_finite()),
        format!("sup implied C per refinement: {sups:?}"),
    );
    if let Some(max_drift) = expect.max_sup_drift {
        let mut worst = 1.0f64;
        for pair in sups.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            worst = worst.max(a.max(b) / a.min(b).max(1e-300));
        }
        out.check(
            "implied_constant_stable",
            worst <= max_drift,
            format!("largest drift {worst:.3}x between refinements (bound {max_drift}x)"),
        );
    }
    if let Some(tol) = expect.parts_identity_tol {
        let (points, weights) = last_cloud.expect("at least one refinement");
        let origin = vec![C64::new(0.0, 0.0); n];
        let rm = RadialMass::from_cloud(&points, &weights, &origin, (2 * n - 2) as f64);
        let (direct, assembled) = parts_identity(&rm, alpha);
        let rel = (direct - assembled).abs() / direct.abs().max(1e-300);
        let mut parts_table = Table::new("parts", &["direct", "assembled", "rel_gap"]);
        parts_table.push(vec![direct, assembled, rel]);
        out.tables.push(parts_table);
        out.check(
            "parts_assembly_matches",
            rel <= tol,
            format!("direct {direct:.9e} vs assembled {assembled:.9e}, rel gap {rel:.2e}"),
        );
    }
    Ok(out)
}

fn run_kernel_slope(
    manifold: &crate::config::ManifoldConfig,
    alpha: f64,
    distances: &[f64],
    expect_slope: f64,
    slope_tol: f64,
) -> Result<TaskOutcome, RunError> {
    let ds = scene::manifold(manifold)?;
    let n = ds.n();
    let c = (2 * n - 2) as f64 + alpha;
    let chart = ds
        .chart()
        .ok_or_else(|| RunError::Invalid("kernel-slope needs a charted manifold".to_string()))?;
    let center: Vec<f64> = chart.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let foot = chart.map(&center);
    // Step off M along the gradient of the first defining function.
    let jet = ds.rho()[0].jet_real(&foot).map_err(num)?;
    let mut dir = vec![0.0; 2 * n];
    for j in 0..n {
        dir[j] = 2.0 * jet.grad[j].re;
        dir[n + j] = -2.0 * jet.grad[j].im;
    }
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return Err(RunError::Numerical(
            "degenerate normal direction at the chart center".to_string(),
        ));
    }
    let mut out = TaskOutcome::new();
    let mut table = Table::new("kernel", &["d", "I", "nearest", "support_atoms"]);
    let opts = KernelQuadOpts::default();
    let mut pairs = Vec::new();
    for &d in distances {
        let z: Vec<C64> = (0..n)
            .map(|j| {
                C64::new(
                    foot[j] + d * dir[j] / norm,
                    foot[n + j] + d * dir[n + j] / norm,
                )
            })
            .collect();
        let val = adaptive_kernel(&ds, &z, c, &opts).map_err(num)?;
        table.push(vec![d, val.value, val.nearest, val.atoms_within_10x as f64]);
        if val.sparse {
            out.notes.push(format!("d={d}: sparse quadrature support"));
        }
        pairs.push((d, val.value));
    }
    out.tables.push(table);
    match log_log_slope(&pairs) {
        Some(slope) => out.check(
            "kernel_decay_exponent",
            (slope - expect_slope).abs() <= slope_tol,
            format!("fitted slope {slope:.4} vs expected {expect_slope} (tol {slope_tol})"),
        ),
        None => out.check(
            "kernel_decay_exponent",
            false,
            "slope undefined: nonpositive kernel values".to_string(),
        ),
    }
    Ok(out)
}

fn run_exp_integral(
    seed: u64,
    n: usize,
    log_of: &crate::config::HoloPolyConfig,
    body_cfg: &crate::config::BodyConfig,
    cases: &[ExpIntegralCase],
    clip_levels: &[f64],
    samples: usize,
) -> Result<TaskOutcome, RunError> {
    let f = scene::holo_poly(log_of, n)?;
    let phi = log_abs_field(&f).map_err(num)?;
    let body = scene::body(body_cfg);
    let mut out = TaskOutcome::new();
    let mut table = Table::new("levels", &["case", "level", "clip", "value", "se"]);
    for (ci, case) in cases.iter().enumerate() {
        let report = exp_integral(
            &phi,
            case.alpha,
            &body,
            clip_levels,
            samples,
            sampling::derive_seed(seed, ci as u64),
        )
        .map_err(num)?;
        for (li, level) in report.levels.iter().enumerate() {
            table.push(vec![ci as f64, li as f64, level.clip, level.value, level.se]);
        }
        let last = report.levels.last().expect("levels nonempty");
        if case.expect_converged {
            let target = case.expect_value.ok_or_else(|| {
                RunError::Invalid("expect_value required when convergence is expected".into())
            })?;
            let tol = case.rel_tol.unwrap_or(0.05);
            let rel = (last.value - target).abs() / target;
            out.check(
                &format!("alpha_{ci}_converges"),
                report.converged && rel <= tol,
                format!(
                    "alpha={}: tail value {:.4} vs {target} (off {:.2}%), ladder converged: {}",
                    case.alpha,
                    last.value,
                    100.0 * rel,
                    report.converged
                ),
            );
        } else {
            out.check(
                &format!("alpha_{ci}_diverges"),
                !report.converged,
                format!(
                    "alpha={}: clip ladder still climbing at {:.4}; integrability not confirmed",
                    case.alpha, last.value
                ),
            );
            if !report.converged {
                out.notes.push(format!(
                    "alpha={}: exponential integrability not confirmed on this ladder",
                    case.alpha
                ));
            }
        }
    }
    out.tables.push(table);
    Ok(out)
}

fn find_table<'a>(outcome: &'a TaskOutcome, name: &str) -> Option<&'a Table> {
    outcome.tables.iter().find(|t| t.name == name)
}

fn column_pairs(table: &Table, x: usize, y: usize) -> Vec<(f64, f64)> {
    table.rows.iter().map(|r| (r[x], r[y])).collect()
}

fn scaled_column(table: &Table, i: usize, k: f64) -> Vec<f64> {
    table.rows.iter().map(|r| k * r[i]).collect()
}

/// Plots derived from the outcome tables. Purely a rendering of numbers the
/// run already produced; nothing here feeds back into checks.
pub fn figures(sc: &Scenario, outcome: &TaskOutcome) -> Vec<(String, PlotSpec)> {
    let mut out = Vec::new();
    match &sc.task {
        Task::TubeMass { .. } | Task::SigmaU { .. } => {
            if let Some(profile) = find_table(outcome, "profile") {
                let mut sigma = PlotSpec {
                    title: format!("{}: tube mass", sc.name),
                    x_label: "t".to_string(),
                    y_label: "sigma(t)".to_string(),
                    log_x: false,
                    log_y: false,
                    series: vec![Series::new("measured", column_pairs(profile, 0, 1))
                        .with_bars(scaled_column(profile, 2, 3.0))],
                };
                if let Some(reference) = find_table(outcome, "reference") {
                    sigma
                        .series
                        .push(Series::new("closed form", column_pairs(reference, 0, 1)));
                }
                out.push(("sigma".to_string(), sigma));
                out.push((
                    "ratio".to_string(),
                    PlotSpec {
                        title: format!("{}: normalized ratio", sc.name),
                        x_label: "t".to_string(),
                        y_label: "sigma(t) / t^e".to_string(),
                        log_x: false,
                        log_y: false,
                        series: vec![Series::new("ratio", column_pairs(profile, 0, 3))
                            .with_bars(scaled_column(profile, 4, 3.0))],
                    },
                ));
            }
        }
        Task::Zeros { .. } => {
            if let Some(packing) = find_table(outcome, "packing") {
                out.push((
                    "packing".to_string(),
                    PlotSpec {
                        title: format!("{}: packing and content", sc.name),
                        x_label: "epsilon".to_string(),
                        y_label: "estimate".to_string(),
                        log_x: true,
                        log_y: false,
                        series: vec![
                            Series::new("packing constant", column_pairs(packing, 0, 2)),
                            Series::new("content estimate", column_pairs(packing, 0, 4)),
                        ],
                    },
                ));
            }
        }
        Task::KernelSlope { .. } => {
            if let Some(kernel) = find_table(outcome, "kernel") {
                out.push((
                    "decay".to_string(),
                    PlotSpec {
                        title: format!("{}: kernel integral decay", sc.name),
                        x_label: "distance".to_string(),
                        y_label: "integral".to_string(),
                        log_x: true,
                        log_y: true,
                        series: vec![Series::new("I(d)", column_pairs(kernel, 0, 1))],
                    },
                ));
            }
        }
        Task::Potential { .. } => {
            if let Some(sup) = find_table(outcome, "sup_drift") {
                out.push((
                    "sup".to_string(),
                    PlotSpec {
                        title: format!("{}: implied constant by refinement", sc.name),
                        x_label: "atoms".to_string(),
                        y_label: "sup implied C".to_string(),
                        log_x: true,
                        log_y: false,
                        series: vec![Series::new("sup C", column_pairs(sup, 1, 2))],
                    },
                ));
            }
        }
        Task::ExpIntegral { cases, .. } => {
            if let Some(levels) = find_table(outcome, "levels") {
                let mut spec = PlotSpec {
                    title: format!("{}: clip ladder", sc.name),
                    x_label: "clip".to_string(),
                    y_label: "integral".to_string(),
                    log_x: true,
                    log_y: false,
                    series: Vec::new(),
                };
                for (ci, case) in cases.iter().enumerate() {
                    let pts: Vec<(f64, f64)> = levels
                        .rows
                        .iter()
                        .filter(|r| r[0] == ci as f64)
                        .map(|r| (r[2], r[3]))
                        .collect();
                    spec.series
                        .push(Series::new(&format!("alpha={}", case.alpha), pts));
                }
                out.push(("ladder".to_string(), spec));
            }
        }
        _ => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_walk_recovers_segment_order() {
        // Points on a line presented in scrambled order. Dyadic spacing keeps
        // every pairwise distance exact, so the pack count is deterministic.
        let mut pts: Vec<Vec<C64>> = (0..101)
            .map(|i| vec![C64::new(0.0, 0.0), C64::new(-1.0 + i as f64 / 64.0, 0.0)])
            .collect();
        pts.swap(3, 97);
        pts.swap(10, 55);
        pts.swap(0, 42);
        let ordered = chain_order(&pts);
        let xs: Vec<f64> = ordered.iter().map(|p| p[1].re).collect();
        let monotone_up = xs.windows(2).all(|w| w[1] > w[0]);
        let monotone_down = xs.windows(2).all(|w| w[1] < w[0]);
        assert!(monotone_up || monotone_down, "{xs:?}");
        // Separation of four spacings over 100 steps keeps every fourth point.
        let kept = greedy_pack(&ordered, 0.0625, PackOrder::Input);
        assert_eq!(kept.len(), 26);
    }

    #[test]
    fn hermitian_sampler_produces_hermitian_matrices() {
        let mut rng = sampling::rng_for(9, 0);
        let h = random_hermitian(&mut rng, 3);
        let m = h.matrix();
        for j in 0..3 {
            for k in 0..3 {
                let gap = (m[(j, k)] - m[(k, j)].conj()).norm();
                assert!(gap < 1e-15);
            }
        }
    }
}
