//! One line per acceptance criterion. Tolerances are passed explicitly so the
//! pinned values are visible here rather than buried in experiment defaults.
//!
//! Criteria listed in `UNATTAINED` are reported but do not fail the target;
//! any other failure, or an experiment error, exits non-zero.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use anisoharm::experiments::{run_experiment, ExperimentConfig};
use anisoharm::report::ExperimentReport;

/// Criteria whose verdicts are known not to hold on the desk-scale grids.
const UNATTAINED: &[u32] = &[8, 10];

struct Criterion {
    id: u32,
    title: &'static str,
    runs: &'static [(&'static str, &'static [(&'static str, f64)])],
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        title: "quasi-norm axioms",
        runs: &[("rho-axioms", &[("slack", 1e-9), ("isotropic", 1e-10)])],
    },
    Criterion {
        id: 2,
        title: "polar and volume consistency",
        runs: &[("polar-volume", &[("unit_ball", 1e-4), ("polar_weight", 1e-6)])],
    },
    Criterion {
        id: 3,
        title: "transform correctness",
        runs: &[("transform", &[("parseval", 1e-10), ("round_trip", 1e-12)])],
    },
    Criterion {
        id: 4,
        title: "semigroup law",
        runs: &[("semigroup-law", &[("law", 1e-8)])],
    },
    Criterion {
        id: 5,
        title: "subordination identity",
        runs: &[("subordination", &[("identity", 1e-3)])],
    },
    Criterion {
        id: 6,
        title: "kernel decay",
        runs: &[
            ("kernel-decay", &[("bound_ratio", 1.15), ("doubling_change", 0.10)]),
            ("rho-tilde-decay", &[("uniformity", 1.25)]),
        ],
    },
    Criterion {
        id: 7,
        title: "D_alpha plane waves and L2 bound",
        runs: &[("d-alpha-l2", &[("plane_wave", 0.02), ("l2_bound", 1.05)])],
    },
    Criterion {
        id: 8,
        title: "T_j decay",
        runs: &[("tj-decay", &[("decay", 1.1)])],
    },
    Criterion {
        id: 9,
        title: "g_Q domination under refinement",
        runs: &[("gq-domination", &[("refinement_change", 0.2)])],
    },
    Criterion {
        id: 10,
        title: "Calderon-Zygmund suite",
        runs: &[("cz-suite", &[("exact", 1e-10), ("constant_spread", 2.0), ("overlap", 64.0)])],
    },
    Criterion {
        id: 11,
        title: "weak type (p0, p0)",
        runs: &[("weak-type", &[("weak_spread", 4.0)])],
    },
    Criterion {
        id: 12,
        title: "sharpness below p0",
        runs: &[("sharpness", &[("blow_up_slope", -0.1), ("flat_slope", 0.05)])],
    },
];

fn describe_failures(r: &ExperimentReport) -> String {
    r.failures()
        .into_iter()
        .map(|name| {
            let v = &r.verdicts[name];
            format!("{name} ({} = {:.4e}, {:?} {:e})", v.metric, r.metrics[&v.metric], v.comparison, v.tolerance)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut unexpected = false;
    let mut passed = 0;
    for c in CRITERIA {
        let t = Instant::now();
        let mut ok = true;
        let mut verdicts = 0;
        let mut detail = Vec::new();
        for (name, tols) in c.runs {
            let config = ExperimentConfig {
                tolerances: tols.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>(),
                ..ExperimentConfig::default()
            };
            match run_experiment(name, &config) {
                Ok(r) => {
                    verdicts += r.verdicts.len();
                    if !r.passed() {
                        ok = false;
                        detail.push(format!("{name}: {}", describe_failures(&r)));
                    }
                }
                Err(e) => {
                    ok = false;
                    unexpected = true;
                    detail.push(format!("{name}: error: {e}"));
                }
            }
        }
        let status = if ok { "PASS" } else { "FAIL" };
        let known = !ok && UNATTAINED.contains(&c.id);
        println!(
            "{status} {:>2} {} [{verdicts} verdicts, {:.1}s]{}",
            c.id,
            c.title,
            t.elapsed().as_secs_f64(),
            if known { " (known)" } else { "" }
        );
        for d in detail {
            println!("       {d}");
        }
        if ok {
            passed += 1;
        } else if !known {
            unexpected = true;
        }
    }
    println!("{passed}/{} criteria pass in {:.1}s", CRITERIA.len(), start.elapsed().as_secs_f64());
    if unexpected {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
