mod common;

use common::*;
use manifold_cp::cutting_plane::{centers_of, run_simple, run_slack};
use manifold_cp::ensemble::{ensemble_from_json, ensemble_to_json};
use manifold_cp::harness::{
    audit_sampled, audit_solution, generate_ensemble, run_experiment, ExperimentConfig, Method, RESULTS_HEADER,
};
use manifold_cp::oracle::EllipsoidOracle;
use manifold_cp::{Label, Manifold, RunConfig, RunStatus, SampledManifold, WorkingSet};

#[test]
fn radii_follow_the_uniform_law() {
    let r0 = 20.0;
    let mut radii = Vec::new();
    // 10⁴ manifolds with one axis each
    for seed in 0..10 {
        for m in generate_ensemble(2, 1000, 1, r0, 50.0, seed).unwrap() {
            radii.extend_from_slice(m.radii());
        }
    }
    assert_eq!(radii.len(), 10_000);
    let min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let max = radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = radii.iter().sum::<f64>() / radii.len() as f64;
    assert!(min >= 0.5 * r0 && max <= 1.5 * r0);
    assert!((mean - r0).abs() <= 0.02 * r0, "{mean}");
}

#[test]
fn full_sized_ensemble() {
    let ms = generate_ensemble(500, 48, 10, 20.0, 50.0, 0).unwrap();
    assert_eq!(ms.len(), 48);
    assert!(ms.iter().all(|m| m.ambient_dim() == 500 && m.param_dim() == 10 && m.q() == 50.0));
    assert_eq!(ms.iter().filter(|m| m.label() == Label::Positive).count(), 24);
    assert_eq!(ms, generate_ensemble(500, 48, 10, 20.0, 50.0, 0).unwrap());
    let back = ensemble_from_json(&ensemble_to_json(&ms).unwrap()).unwrap();
    assert_eq!(back, ms);
}

fn small_config(extra: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"N": 40, "P": 6, "D": 3, "R0": 0.3, "q": 2, "seeds": [3, 1, 2], "budgets": [6, 12, 30],
            "m_test": 200, "delta": 0.01 {extra}}}"#
    ))
    .unwrap()
}

#[test]
fn csv_rows_and_budget_accounting() {
    for cfg in [small_config(""), small_config(r#", "mode": "slack", "C": 10"#)] {
        let out = run_experiment(&cfg).unwrap();
        // seeds × budgets × methods, plus one final-run status row per seed
        assert_eq!(out.rows.len(), 3 * 3 * 2 + 3);
        for (seed, trace) in &out.traces {
            let fin = out.rows.iter().find(|r| r.seed == *seed && r.method == Method::McpFinal).unwrap();
            assert_eq!(fin.budget, cfg.p + trace.augmentation_count());
            assert_eq!(fin.status, RunStatus::Converged.to_string());
            for r in out.rows.iter().filter(|r| r.seed == *seed && r.method == Method::Mcp) {
                assert!(cfg.p + r.iters <= r.budget.max(cfg.p));
                assert!(r.iters <= trace.augmentation_count());
            }
        }
        let csv = out.to_csv(&cfg);
        let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], RESULTS_HEADER);
        assert_eq!(body.len(), out.rows.len() + 1);
        assert!(csv.lines().any(|l| l == "# delta=0.01"));
        let seeds: Vec<u64> = out.rows.iter().map(|r| r.seed).collect();
        assert!(seeds.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn experiments_are_deterministic() {
    let cfg = small_config("");
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let strip = |o: &manifold_cp::harness::ExperimentOutput| {
        o.rows.iter().map(|r| (r.method, r.seed, r.budget, r.gen_error.to_bits(), r.iters)).collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn trivial_config_has_zero_error() {
    let cfg = ExperimentConfig::from_json(
        r#"{"N": 3, "P": 2, "D": 1, "R0": 0.01, "q": 2, "budgets": [2], "m_test": 100, "delta": 0.1}"#,
    )
    .unwrap();
    let out = run_experiment(&cfg).unwrap();
    let fin = out.rows.iter().find(|r| r.method == Method::McpFinal).unwrap();
    assert_eq!(fin.gen_error, 0.0);
    assert_eq!(fin.status, "converged");
}

#[test]
fn infeasible_runs_are_recorded() {
    // large radii in few dimensions: no separating hyperplane through the origin
    let cfg = ExperimentConfig::from_json(
        r#"{"N": 2, "P": 8, "D": 2, "R0": 5, "q": 2, "budgets": [8, 16], "m_test": 50}"#,
    )
    .unwrap();
    let out = run_experiment(&cfg).unwrap();
    let fin = out.rows.iter().find(|r| r.method == Method::McpFinal).unwrap();
    assert_eq!(fin.status, "infeasible");
    assert!(out.rows.iter().any(|r| r.method == Method::PointSvm && r.status == "infeasible"));
}

#[test]
fn config_errors_name_line_and_field() {
    let e = ExperimentConfig::from_json("{\"N\": 10,\n\"P\": \"x\"}").unwrap_err();
    assert!(e.0.contains("line 2"), "{e}");
    let e = ExperimentConfig::from_json(r#"{"N": 10, "P": 4, "D": 2, "R0": 1.0, "q": 2, "delta": 1.5}"#).unwrap_err();
    assert!(e.0.contains("`delta`"), "{e}");
}

#[test]
fn audit_passes_converged_and_flags_truncated_runs() {
    let ms = generate_ensemble(30, 4, 3, 0.3, 3.0, 5).unwrap();
    let mut oracle = EllipsoidOracle::new(&ms);
    let delta = 1e-3;
    let done = run_simple(&mut oracle, WorkingSet::from_centers(&ms), &RunConfig::hard(delta)).unwrap();
    assert_eq!(done.status(), RunStatus::Converged);
    let w = done.solution.unwrap().weights;
    let report = audit_solution(&w, None, &ms, delta, 100_000, 1);
    assert!(report.passed(), "{}", report.summary());
    assert!(report.min_gap() >= -1e-9);

    let cut = run_simple(
        &mut oracle,
        WorkingSet::from_centers(&ms),
        &RunConfig::hard(delta).with_max_iterations(1),
    )
    .unwrap();
    assert_eq!(cut.status(), RunStatus::MaxIterations);
    let report = audit_solution(&cut.solution.unwrap().weights, None, &ms, delta, 100_000, 1);
    assert!(report.total_violations() >= 1);
    assert!(report.summary().ends_with("FLAGGED"));
}

#[test]
fn audit_of_zero_weights_flags_everything() {
    let ms = generate_ensemble(5, 2, 2, 1.0, 2.0, 0).unwrap();
    let report = audit_solution(&[0.0; 5], None, &ms, 0.1, 100, 0);
    assert_eq!(report.total_violations(), 200);
    assert!(report.manifolds.iter().all(|m| m.worst_sampled_margin == 0.0));
    assert!(!report.passed());
}

#[test]
fn audit_slack_solution() {
    let ms = generate_ensemble(10, 6, 2, 2.0, 2.0, 4).unwrap();
    let mut oracle = EllipsoidOracle::new(&ms);
    let out = run_slack(&mut oracle, &centers_of(&ms), WorkingSet::from_centers(&ms), &RunConfig::slack(1e-3, 1.0))
        .unwrap();
    let sol = out.solution.unwrap();
    let report = audit_solution(&sol.weights, Some(&sol.slacks), &ms, 1e-3, 20_000, 2);
    assert!(report.passed(), "{}", report.summary());
}

#[test]
fn audit_margin_converges_to_oracle_margin() {
    let mut r = rng(12);
    for d in [2, 3] {
        for q in [1.5, 2.0, 4.0] {
            let m = random_ellipsoid(&mut r, 6, d, q, Label::Positive);
            // the gap scales with ‖w‖
            let w = gaussian(&mut r, 6);
            let w: Vec<f64> = w.iter().map(|v| v / norm(&w)).collect();
            let ms = [m];
            let mut last = f64::INFINITY;
            for samples in [1_000, 10_000, 100_000] {
                let report = audit_solution(&w, None, &ms, 0.5, samples, 9);
                let gap = report.max_gap();
                assert!(gap >= -1e-12);
                // prefixes of one stream: more samples never raise the minimum
                assert!(report.worst_sampled_margin() <= last);
                last = report.worst_sampled_margin();
            }
            let gap = last - audit_solution(&w, None, &ms, 0.5, 1, 9).manifolds[0].analytic_margin.unwrap();
            assert!(gap <= 1e-4 * (1.0 + last.abs()), "D={d} q={q} gap {gap}");
        }
    }
}

#[test]
fn sampled_audit_checks_every_point() {
    let pts = vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.2, 1.0]];
    let params: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64]).collect();
    let m = SampledManifold::from_parameter_samples(pts, &params, 1, Label::Positive, 0).unwrap();
    // margins 2, 1, 0.4
    let report = audit_sampled(&[2.0, 0.0], None, &[m.clone()], 0.1);
    assert_eq!(report.total_violations(), 1);
    assert_eq!(report.worst_sampled_margin(), 0.4);
    assert!(audit_sampled(&[2.0, 0.0], Some(&[0.6]), &[m], 0.1).passed());
}
