//! Scenario configuration: versioned JSON documents describing one numeric
//! experiment each. Polynomials are flat term lists (integer exponents plus
//! a coefficient) so configs stay language-neutral and diffable.

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    #[serde(flatten)]
    pub task: Task,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum Task {
    /// Fast wedge-coefficient algebra against the permutation oracle.
    FormsCheck {
        n_max: usize,
        tuples: usize,
        tolerance: f64,
    },
    /// Jets of the built-in field menagerie against finite differences.
    JetsCheck { points: usize, tolerance: f64 },
    /// Generating / not-generating classification of a manifold list.
    Generating { cases: Vec<GeneratingCase> },
    /// Divisor trace masses of known zero sets in balls.
    Calibration { cases: Vec<CalibrationCase> },
    /// sigma(t) profile of a current in shrinking tubes.
    TubeMass {
        n: usize,
        core: CoreSpec,
        current: CurrentConfig,
        clip: Option<ClipConfig>,
        t_grid: Vec<f64>,
        /// Defaults to dim(core) minus one when omitted.
        ratio_exponent: Option<f64>,
        samples_per_t: usize,
        expect: TubeExpect,
    },
    /// sigma_u(t) for the tube weight built over a flat manifold.
    SigmaU {
        manifold: ManifoldConfig,
        weight: WeightConfig,
        /// Smooth reference weight phi; |z|^2 when omitted.
        phi: Option<PolyConfig>,
        t_grid: Vec<f64>,
        samples: usize,
        expect: SigmaUExpect,
    },
    /// Positivity margins of the square-rooted tube weight.
    PshBound {
        cases: Vec<PshBoundCase>,
    },
    /// Zero sets on M: packing counts and Hausdorff content.
    Zeros {
        manifold: ManifoldConfig,
        f: HoloPolyConfig,
        grid_per_axis: usize,
        dedupe_radius: f64,
        epsilons: Vec<f64>,
        hausdorff_p: usize,
        exact_measure: f64,
        expect: ZerosExpect,
    },
    /// Ball-mass ratios at a point of the zero set (Lelong densities).
    Lelong { n: usize, cases: Vec<LelongCase> },
    /// nu-monotonicity classification over random centers.
    NuClassifier {
        n: usize,
        centers_per_family: usize,
        atoms_per_cloud: usize,
        s_grid: Vec<f64>,
        rel_tol: f64,
    },
    /// Newton potential exponential bound over a z-grid, plus the
    /// step-function assembly identity.
    Potential {
        n: usize,
        alpha: f64,
        ball_radius: f64,
        atom_counts: Vec<usize>,
        z_grid_points: usize,
        expect: PotentialExpect,
    },
    /// Singular kernel on M against the distance to M.
    KernelSlope {
        manifold: ManifoldConfig,
        alpha: f64,
        distances: Vec<f64>,
        expect_slope: f64,
        slope_tol: f64,
    },
    /// Clipped exponential integrals of a psh function over a body.
    ExpIntegral {
        n: usize,
        log_of: HoloPolyConfig,
        body: BodyConfig,
        cases: Vec<ExpIntegralCase>,
        clip_levels: Vec<f64>,
        samples: usize,
    },
}

impl Task {
    pub fn tag(&self) -> &'static str {
        match self {
            Task::FormsCheck { .. } => "forms",
            Task::JetsCheck { .. } => "jets",
            Task::Generating { .. } => "generating",
            Task::Calibration { .. } => "calibration",
            Task::TubeMass { .. } => "tube-mass",
            Task::SigmaU { .. } => "sigma-u",
            Task::PshBound { .. } => "psh-bound",
            Task::Zeros { .. } => "zeros",
            Task::Lelong { .. } => "lelong",
            Task::NuClassifier { .. } => "nu-classifier",
            Task::Potential { .. } => "potential",
            Task::KernelSlope { .. } => "kernel",
            Task::ExpIntegral { .. } => "expint",
        }
    }
}

/// One real-coefficient polynomial term over the 2n real coordinates
/// (x_1..x_n, y_1..y_n).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealTermConfig {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyConfig {
    pub terms: Vec<RealTermConfig>,
}

/// One holomorphic term over the n complex coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoloTermConfig {
    pub exponents: Vec<u32>,
    pub coeff_re: f64,
    pub coeff_im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoloPolyConfig {
    pub terms: Vec<HoloTermConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoordConfig {
    Param(usize),
    Fixed(f64),
    Poly(PolyConfig),
    Cos { param: usize, amp: f64, freq: f64, phase: f64 },
    Sin { param: usize, amp: f64, freq: f64, phase: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub bounds: Vec<(f64, f64)>,
    pub coords: Vec<CoordConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub n: usize,
    pub rho: Vec<PolyConfig>,
    pub domain_radius: f64,
    pub chart: Option<ChartConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum BodyConfig {
    Point(Vec<f64>),
    Box(Vec<(f64, f64)>),
    Segment { a: Vec<f64>, b: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoreSpec {
    Manifold(ManifoldConfig),
    Convex(BodyConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurrentConfig {
    Divisor { f: HoloPolyConfig, eps: f64 },
    Smooth { u: PolyConfig },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipConfig {
    pub center: Vec<(f64, f64)>,
    pub radius: f64,
}

/// Closed forms the tube profile can be checked against.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClosedForm {
    /// Hyperplane {z_1 = 0} in C^2 clipped to a ball of radius r around
    /// the origin, tube around M = R^2.
    HyperplaneBall { r: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TubeExpect {
    /// Per-point relative tolerance against the closed form.
    pub closed_form: Option<ClosedForm>,
    pub closed_form_rel_tol: Option<f64>,
    /// Upper bound on the almost-monotonicity constant.
    pub max_c: Option<f64>,
    /// Ratios nondecreasing within this many combined SE.
    pub nondecreasing_sigma: Option<f64>,
    /// Fitted log-log slope of the ratio against t.
    pub ratio_slope: Option<f64>,
    pub ratio_slope_tol: Option<f64>,
    /// The ratio must grow by at least this factor from the largest t to
    /// the smallest (a failure-of-monotonicity demonstration).
    pub min_ratio_growth: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SigmaUExpect {
    pub nondecreasing_sigma: Option<f64>,
    pub max_c: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratingCase {
    pub name: String,
    pub manifold: ManifoldConfig,
    pub expect_generating: bool,
    /// Exact delta_min when known (e.g. 1/4 for real slices).
    pub expect_delta_min: Option<f64>,
    pub delta_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationCase {
    pub name: String,
    pub n: usize,
    pub f: HoloPolyConfig,
    pub ball_radius: f64,
    pub eps: f64,
    pub samples: usize,
    pub expect_area: f64,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub a_constant: f64,
    pub cutoff_radius: f64,
    pub eps_cutoff: f64,
    pub eps_smooth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PshBoundCase {
    pub name: String,
    pub manifold: ManifoldConfig,
    pub weight: WeightConfig,
    /// Candidate constants for the w-term; the first passing one is kept.
    pub a_candidates: Vec<f64>,
    pub t_candidates: Vec<f64>,
    pub surface_samples: usize,
    pub offsets_per_point: usize,
    pub tolerance: f64,
    /// The margin check must succeed at some candidate t.
    pub expect_pass: bool,
    /// With the w-term removed the margin must go negative (the
    /// correction term is doing real work).
    pub expect_fail_without_a: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ZerosExpect {
    /// Max over the epsilon sweep of C = N eps / measure divided by the
    /// min stays below this.
    pub max_c_variation: Option<f64>,
    /// Hausdorff estimate at the smallest epsilon lands within this
    /// relative tolerance of the exact measure.
    pub hausdorff_rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LelongCase {
    pub name: String,
    pub f: HoloPolyConfig,
    pub center: Vec<(f64, f64)>,
    pub radius: f64,
    pub eps: f64,
    pub samples: usize,
    pub expect_ratio: f64,
    /// Two-sided tolerance; when one_sided is set only ratios below
    /// expect_ratio - tol fail.
    pub tol: f64,
    #[serde(default)]
    pub one_sided: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PotentialExpect {
    /// sup of implied C over the z-grid changes by less than this factor
    /// between consecutive refinements.
    pub max_sup_drift: Option<f64>,
    /// Relative agreement of the two parts-identity assemblies.
    pub parts_identity_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpIntegralCase {
    pub alpha: f64,
    /// Converged limit when finite; omitted for expected divergence.
    pub expect_value: Option<f64>,
    pub rel_tol: Option<f64>,
    pub expect_converged: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {found} (supported: {supported})")]
    SchemaVersion { found: u32, supported: u32 },
    #[error("{0}")]
    Invalid(String),
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let raw: serde_json::Value = serde_json::from_str(text)?;
    let scenario: Scenario = serde_json::from_value(raw.clone())?;
    reject_unknown_envelope_keys(&raw, &scenario)?;
    if scenario.schema_version != SCHEMA_VERSION {
        return Err(ConfigError::SchemaVersion {
            found: scenario.schema_version,
            supported: SCHEMA_VERSION,
        });
    }
    validate(&scenario)?;
    Ok(scenario)
}

/// Serde cannot deny unknown fields across the flattened task block, so the
/// envelope is checked by hand: every input key must reappear when the parsed
/// scenario is serialized back. Nested blocks still deny unknown fields
/// natively.
fn reject_unknown_envelope_keys(raw: &serde_json::Value, s: &Scenario) -> Result<(), ConfigError> {
    let echo = serde_json::to_value(s)?;
    if let (Some(input), Some(known)) = (raw.as_object(), echo.as_object()) {
        for key in input.keys() {
            if !known.contains_key(key) {
                return Err(ConfigError::Invalid(format!("unknown field `{key}`")));
            }
        }
    }
    Ok(())
}

fn require(cond: bool, msg: &str) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::Invalid(msg.to_string()))
    }
}

fn validate(s: &Scenario) -> Result<(), ConfigError> {
    require(!s.name.is_empty(), "name must be nonempty")?;
    match &s.task {
        Task::FormsCheck { n_max, tuples, .. } => {
            require(*n_max >= 1 && *n_max <= 4, "n_max must be 1..=4")?;
            require(*tuples >= 1, "tuples must be positive")?;
        }
        Task::JetsCheck { points, .. } => require(*points >= 1, "points must be positive")?,
        Task::Generating { cases } => require(!cases.is_empty(), "generating cases empty")?,
        Task::Calibration { cases } => {
            require(!cases.is_empty(), "calibration cases empty")?;
            for c in cases {
                require(c.eps > 0.0 && c.ball_radius > 0.0, "radii must be positive")?;
            }
        }
        Task::TubeMass {
            t_grid,
            samples_per_t,
            ..
        } => {
            require(!t_grid.is_empty(), "t_grid empty")?;
            require(
                t_grid.windows(2).all(|w| w[0] < w[1]),
                "t_grid must be strictly increasing",
            )?;
            require(t_grid.iter().all(|&t| t > 0.0), "t values must be positive")?;
            require(*samples_per_t > 0, "samples_per_t must be positive")?;
        }
        Task::SigmaU { t_grid, samples, .. } => {
            require(!t_grid.is_empty(), "t_grid empty")?;
            require(
                t_grid.windows(2).all(|w| w[0] < w[1]),
                "t_grid must be strictly increasing",
            )?;
            require(*samples > 0, "samples must be positive")?;
        }
        Task::PshBound { cases } => {
            require(!cases.is_empty(), "psh-bound cases empty")?;
            for c in cases {
                require(!c.t_candidates.is_empty(), "t_candidates empty")?;
                require(!c.a_candidates.is_empty(), "a_candidates empty")?;
            }
        }
        Task::Zeros {
            epsilons,
            exact_measure,
            hausdorff_p,
            ..
        } => {
            require(!epsilons.is_empty(), "epsilon sweep empty")?;
            require(epsilons.iter().all(|&e| e > 0.0), "epsilons must be positive")?;
            require(*exact_measure > 0.0, "exact_measure must be positive")?;
            require(*hausdorff_p >= 1, "hausdorff_p must be at least 1")?;
        }
        Task::Lelong { cases, .. } => require(!cases.is_empty(), "lelong cases empty")?,
        Task::NuClassifier {
            centers_per_family,
            atoms_per_cloud,
            s_grid,
            ..
        } => {
            require(*centers_per_family >= 1, "centers_per_family must be positive")?;
            require(*atoms_per_cloud >= 100, "atoms_per_cloud too small to classify")?;
            require(s_grid.len() >= 2, "s_grid needs at least two radii")?;
        }
        Task::Potential {
            alpha,
            atom_counts,
            z_grid_points,
            ..
        } => {
            require(*alpha > 0.0 && *alpha < 1.0, "alpha must be in (0, 1)")?;
            require(atom_counts.len() >= 2, "need at least two refinements")?;
            require(*z_grid_points >= 1, "z_grid_points must be positive")?;
        }
        Task::KernelSlope {
            alpha, distances, ..
        } => {
            require(*alpha > 0.0 && *alpha < 1.0, "alpha must be in (0, 1)")?;
            require(distances.len() >= 2, "need at least two distances")?;
        }
        Task::ExpIntegral {
            cases,
            clip_levels,
            samples,
            ..
        } => {
            require(!cases.is_empty(), "expint cases empty")?;
            require(
                clip_levels.windows(2).all(|w| w[0] > w[1])
                    && clip_levels.last().is_some_and(|&l| l > 0.0),
                "clip_levels must be positive and strictly decreasing",
            )?;
            require(*samples > 0, "samples must be positive")?;
        }
    }
    Ok(())
}

/// Human-oriented summary of the scenario format, printed by the `schema`
/// subcommand.
pub fn schema_text() -> &'static str {
    r#"Scenario files are JSON with a flat envelope plus one task block:

  {"schema_version": 1, "name": "...", "seed": 1, "task": "<kind>", ...}

Polynomials are term lists. Real polynomials run over the 2n coordinates
(x_1..x_n, y_1..y_n): {"terms": [{"exponents": [u32; 2n], "coeff": f}]}.
Holomorphic polynomials run over z_1..z_n:
{"terms": [{"exponents": [u32; n], "coeff_re": f, "coeff_im": f}]}.
Manifolds: {"n", "rho": [real poly; m], "domain_radius", "chart"} with chart
{"bounds": [[lo, hi]; d], "coords": [2n coordinate rules]} where a rule is
{"param": i}, {"fixed": v}, {"poly": p}, or {"cos"/"sin": {param, amp, freq,
phase}}. Convex bodies: {"point": [..]}, {"box": [[lo, hi]..]},
{"segment": {"a", "b"}}, {"ball": {"center", "radius"}}.

Task kinds and their fields:

  forms-check     n_max, tuples, tolerance
  jets-check      points, tolerance
  generating      cases: [{name, manifold, expect_generating,
                  expect_delta_min?, delta_tol?}]
  calibration     cases: [{name, n, f, ball_radius, eps, samples,
                  expect_area, rel_tol}]
  tube-mass       n, core ({"manifold"} | {"convex"}), current
                  ({"divisor": {f, eps}} | {"smooth": {u}}), clip?
                  ({center, radius}), t_grid, ratio_exponent?,
                  samples_per_t, expect: {closed_form?, closed_form_rel_tol?,
                  max_c?, nondecreasing_sigma?, ratio_slope?,
                  ratio_slope_tol?, min_ratio_growth?}
  sigma-u         manifold, weight: {a_constant, cutoff_radius, eps_cutoff,
                  eps_smooth}, phi?, t_grid, samples, expect:
                  {nondecreasing_sigma?, max_c?}
  psh-bound       cases: [{name, manifold, weight, a_candidates,
                  t_candidates, surface_samples, offsets_per_point,
                  tolerance, expect_pass, expect_fail_without_a?}]
  zeros           manifold, f, grid_per_axis, dedupe_radius, epsilons,
                  hausdorff_p, exact_measure, expect: {max_c_variation?,
                  hausdorff_rel_tol?}
  lelong          n, cases: [{name, f, center: [[re, im]..], radius, eps,
                  samples, expect_ratio, tol, one_sided?}]
  nu-classifier   n, centers_per_family, atoms_per_cloud, s_grid, rel_tol
  potential       n, alpha, ball_radius, atom_counts, z_grid_points,
                  expect: {max_sup_drift?, parts_identity_tol?}
  kernel          manifold, alpha, distances, expect_slope, slope_tol
  expint          n, log_of, body, cases: [{alpha, expect_value?, rel_tol?,
                  expect_converged}], clip_levels, samples

Verdicts (pass / fail / inconclusive) never change the exit code; exit 2
means the scenario was rejected, exit 3 means the computation broke down.
"#
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_schema_version() {
        let text = r#"{"schema_version": 7, "name": "x", "seed": 1,
            "task": "forms-check", "n_max": 3, "tuples": 5, "tolerance": 1e-10}"#;
        assert!(matches!(
            parse_scenario(text),
            Err(ConfigError::SchemaVersion { found: 7, .. })
        ));
    }

    #[test]
    fn rejects_missing_seed() {
        let text = r#"{"schema_version": 1, "name": "x",
            "task": "forms-check", "n_max": 3, "tuples": 5, "tolerance": 1e-10}"#;
        assert!(matches!(parse_scenario(text), Err(ConfigError::Json(_))));
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = r#"{"schema_version": 1, "name": "x", "seed": 1, "surprise": true,
            "task": "forms-check", "n_max": 3, "tuples": 5, "tolerance": 1e-10}"#;
        assert!(parse_scenario(text).is_err());
    }

    #[test]
    fn accepts_a_minimal_scenario_and_round_trips() {
        let text = r#"{"schema_version": 1, "name": "forms", "seed": 42,
            "task": "forms-check", "n_max": 3, "tuples": 100, "tolerance": 1e-10}"#;
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.task.tag(), "forms");
        let json = serde_json::to_string(&s).unwrap();
        let back = parse_scenario(&json).unwrap();
        assert_eq!(back.name, s.name);
    }

    #[test]
    fn rejects_unsorted_t_grid() {
        let text = r#"{"schema_version": 1, "name": "tube", "seed": 1,
            "task": "tube-mass", "n": 2,
            "core": {"manifold": {"n": 2, "rho": [], "domain_radius": 2.0, "chart": null}},
            "current": {"divisor": {"f": {"terms": []}, "eps": 0.01}},
            "clip": null, "t_grid": [0.3, 0.2], "ratio_exponent": null,
            "samples_per_t": 100, "expect": {}}"#;
        assert!(matches!(parse_scenario(text), Err(ConfigError::Invalid(_))));
    }
}
