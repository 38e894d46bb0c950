//! Built-in verification suite. Each criterion binds bundled scenarios to
//! the named checks that decide it; the final criterion replays every
//! scenario and compares the rendered tables byte for byte.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use crate::config::parse_scenario;
use crate::report::TaskOutcome;
use crate::runner::{execute, RunError};

pub const BUNDLED: &[(&str, &str)] = &[
    (
        "forms_selfcheck",
        include_str!("../scenarios/forms_selfcheck.json"),
    ),
    (
        "jets_selfcheck",
        include_str!("../scenarios/jets_selfcheck.json"),
    ),
    (
        "generating_suite",
        include_str!("../scenarios/generating_suite.json"),
    ),
    (
        "divisor_calibration",
        include_str!("../scenarios/divisor_calibration.json"),
    ),
    (
        "r2_hyperplane_tube",
        include_str!("../scenarios/r2_hyperplane_tube.json"),
    ),
    (
        "sigma_u_plane",
        include_str!("../scenarios/sigma_u_plane.json"),
    ),
    ("sigma_u_slab", include_str!("../scenarios/sigma_u_slab.json")),
    (
        "psh_bound_suite",
        include_str!("../scenarios/psh_bound_suite.json"),
    ),
    (
        "convex_point_tube",
        include_str!("../scenarios/convex_point_tube.json"),
    ),
    (
        "convex_box_tube",
        include_str!("../scenarios/convex_box_tube.json"),
    ),
    (
        "nongenerating_counterexample",
        include_str!("../scenarios/nongenerating_counterexample.json"),
    ),
    (
        "zeros_segment",
        include_str!("../scenarios/zeros_segment.json"),
    ),
    ("zeros_circle", include_str!("../scenarios/zeros_circle.json")),
    (
        "lelong_ratios",
        include_str!("../scenarios/lelong_ratios.json"),
    ),
    (
        "nu_classifier",
        include_str!("../scenarios/nu_classifier.json"),
    ),
    (
        "potential_ball",
        include_str!("../scenarios/potential_ball.json"),
    ),
    ("kernel_slope", include_str!("../scenarios/kernel_slope.json")),
    ("expint_log", include_str!("../scenarios/expint_log.json")),
];

pub struct Need {
    pub scenario: &'static str,
    /// Deciding check names; empty means every check in the scenario.
    pub checks: &'static [&'static str],
}

pub struct Criterion {
    pub id: u32,
    pub tag: &'static str,
    pub title: &'static str,
    pub needs: &'static [Need],
}

const fn all(scenario: &'static str) -> Need {
    Need {
        scenario,
        checks: &[],
    }
}

pub const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        tag: "forms",
        title: "wedge coefficients match the permutation oracle",
        needs: &[all("forms_selfcheck")],
    },
    Criterion {
        id: 2,
        tag: "jets",
        title: "analytic jets agree with central differences",
        needs: &[all("jets_selfcheck")],
    },
    Criterion {
        id: 3,
        tag: "generating",
        title: "generating classification over the bundled manifolds",
        needs: &[all("generating_suite")],
    },
    Criterion {
        id: 4,
        tag: "calibration",
        title: "divisor tube mass recovers known areas",
        needs: &[all("divisor_calibration")],
    },
    Criterion {
        id: 5,
        tag: "closed-form",
        title: "hyperplane tube profile matches its closed form",
        needs: &[all("r2_hyperplane_tube")],
    },
    Criterion {
        id: 6,
        tag: "sigma-u",
        title: "smooth sublevel masses are almost nondecreasing",
        needs: &[all("sigma_u_plane"), all("sigma_u_slab")],
    },
    Criterion {
        id: 7,
        tag: "psh-bound",
        title: "root tube weights keep their positivity margins",
        needs: &[all("psh_bound_suite")],
    },
    Criterion {
        id: 8,
        tag: "convex",
        title: "convex body tubes grow at the expected power",
        needs: &[all("convex_point_tube"), all("convex_box_tube")],
    },
    Criterion {
        id: 9,
        tag: "growth",
        title: "non-generating core lets the normalized mass blow up",
        needs: &[all("nongenerating_counterexample")],
    },
    Criterion {
        id: 10,
        tag: "packing",
        title: "zero packing counts scale with a stable constant",
        needs: &[Need {
            scenario: "zeros_segment",
            checks: &["packing_constant_stable"],
        }],
    },
    Criterion {
        id: 11,
        tag: "hausdorff",
        title: "content estimates recover the zero set measure",
        needs: &[
            Need {
                scenario: "zeros_segment",
                checks: &["content_matches_measure", "content_bounded_by_packing"],
            },
            Need {
                scenario: "zeros_circle",
                checks: &["content_matches_measure"],
            },
        ],
    },
    Criterion {
        id: 12,
        tag: "lelong",
        title: "ball mass ratios recover point densities",
        needs: &[all("lelong_ratios")],
    },
    Criterion {
        id: 13,
        tag: "nu-classifier",
        title: "radial density monotonicity separates the two families",
        needs: &[all("nu_classifier")],
    },
    Criterion {
        id: 14,
        tag: "potential",
        title: "exponential potential bound is stable under refinement",
        needs: &[all("potential_ball")],
    },
    Criterion {
        id: 15,
        tag: "kernel",
        title: "singular kernel decays with the predicted exponent",
        needs: &[all("kernel_slope")],
    },
    Criterion {
        id: 16,
        tag: "expint",
        title: "clipped exponential integrals converge exactly when expected",
        needs: &[all("expint_log")],
    },
    Criterion {
        id: 17,
        tag: "determinism",
        title: "replayed scenarios render byte-identical tables",
        needs: &[],
    },
];

pub struct CriterionOutcome {
    pub id: u32,
    pub tag: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub struct SuiteReport {
    pub results: Vec<CriterionOutcome>,
    pub elapsed_seconds: f64,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

fn scenario_text(name: &str) -> Result<&'static str, RunError> {
    BUNDLED
        .iter()
        .find(|(k, _)| *k == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| RunError::Invalid(format!("no bundled scenario named {name}")))
}

fn run_bundled(name: &'static str) -> Result<TaskOutcome, RunError> {
    let scenario = parse_scenario(scenario_text(name)?)?;
    execute(&scenario)
}

fn memoized<'a>(
    memo: &'a mut HashMap<&'static str, TaskOutcome>,
    name: &'static str,
) -> Result<&'a TaskOutcome, RunError> {
    if !memo.contains_key(name) {
        let outcome = run_bundled(name)?;
        memo.insert(name, outcome);
    }
    Ok(&memo[name])
}

fn eval_needs(
    needs: &[Need],
    memo: &mut HashMap<&'static str, TaskOutcome>,
) -> Result<(bool, String), RunError> {
    let mut failures = Vec::new();
    let mut counted = 0usize;
    for need in needs {
        let outcome = memoized(memo, need.scenario)?;
        if need.checks.is_empty() {
            for c in &outcome.checks {
                counted += 1;
                if !c.pass {
                    failures.push(format!("{}/{}: {}", need.scenario, c.name, c.detail));
                }
            }
        } else {
            for &wanted in need.checks {
                counted += 1;
                match outcome.checks.iter().find(|c| c.name == wanted) {
                    Some(c) if c.pass => {}
                    Some(c) => {
                        failures.push(format!("{}/{}: {}", need.scenario, c.name, c.detail))
                    }
                    None => failures.push(format!(
                        "{}/{wanted}: check missing from the outcome",
                        need.scenario
                    )),
                }
            }
        }
    }
    if failures.is_empty() {
        Ok((true, format!("{counted} checks")))
    } else {
        Ok((false, failures.join("; ")))
    }
}

fn rendered_tables(outcome: &TaskOutcome) -> Vec<(String, String)> {
    outcome
        .tables
        .iter()
        .map(|t| (t.name.clone(), t.to_csv()))
        .collect()
}

/// Replays every bundled scenario referenced so far and byte-compares the
/// rendered tables, then checks the wall-clock budget of the whole sweep.
fn eval_determinism(
    memo: &mut HashMap<&'static str, TaskOutcome>,
    started: Instant,
) -> Result<(bool, String), RunError> {
    let mut mismatches = Vec::new();
    for (name, _) in BUNDLED {
        let first = rendered_tables(memoized(memo, name)?);
        let second = rendered_tables(&run_bundled(name)?);
        if first != second {
            mismatches.push((*name).to_string());
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    if !mismatches.is_empty() {
        return Ok((
            false,
            format!("re-rendered tables differ for: {}", mismatches.join(", ")),
        ));
    }
    let within_budget = elapsed < 900.0;
    Ok((
        within_budget,
        format!(
            "{} scenarios replayed identically, suite took {elapsed:.0} s (budget 900 s)",
            BUNDLED.len()
        ),
    ))
}

pub fn run_suite(filter: Option<&str>, out: &mut dyn Write) -> Result<SuiteReport, RunError> {
    let started = Instant::now();
    let mut memo: HashMap<&'static str, TaskOutcome> = HashMap::new();
    let mut results = Vec::new();
    for criterion in CRITERIA {
        if let Some(f) = filter {
            if !criterion.tag.contains(f) {
                continue;
            }
        }
        let (passed, detail) = if criterion.tag == "determinism" {
            eval_determinism(&mut memo, started)?
        } else {
            eval_needs(criterion.needs, &mut memo)?
        };
        let _ = writeln!(
            out,
            "criterion {:02} {}: {} ({})",
            criterion.id,
            criterion.tag,
            if passed { "PASS" } else { "FAIL" },
            if passed {
                format!("{}; {detail}", criterion.title)
            } else {
                detail.clone()
            }
        );
        results.push(CriterionOutcome {
            id: criterion.id,
            tag: criterion.tag,
            passed,
            detail,
        });
    }
    let elapsed_seconds = started.elapsed().as_secs_f64();
    let passed = results.iter().filter(|r| r.passed).count();
    let _ = writeln!(
        out,
        "{passed}/{} criteria passed in {elapsed_seconds:.0} s",
        results.len()
    );
    Ok(SuiteReport {
        results,
        elapsed_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_names_match_keys() {
        for (key, text) in BUNDLED {
            let sc = parse_scenario(text).unwrap_or_else(|e| panic!("{key}: {e}"));
            assert_eq!(&sc.name, key, "scenario name must match its registry key");
        }
    }

    #[test]
    fn criteria_reference_only_bundled_scenarios() {
        for c in CRITERIA {
            for need in c.needs {
                assert!(
                    BUNDLED.iter().any(|(k, _)| *k == need.scenario),
                    "criterion {} wants unknown scenario {}",
                    c.id,
                    need.scenario
                );
            }
        }
    }

    #[test]
    fn ids_are_sequential_and_unique() {
        let ids: Vec<u32> = CRITERIA.iter().map(|c| c.id).collect();
        let expected: Vec<u32> = (1..=ids.len() as u32).collect();
        assert_eq!(ids, expected);
    }
}
