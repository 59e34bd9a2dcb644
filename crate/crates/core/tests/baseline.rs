mod common;

use common::*;
use manifold_cp::baseline::{generalization_error, pooled_samples, sample_manifold, sample_params, train_point_svm};
use manifold_cp::qp::{solve_hard, solve_slack, QpProblem};
use manifold_cp::{EllipsoidManifold, Label, Manifold, QpError, WorkingSet};
use rand::Rng;

const TOL: f64 = 1e-8;

/// Dual coordinate ascent on `max Σα − ½‖Σ α_i z_i‖²`, `0 <= α <= c`.
/// Returns the dual value, a lower bound on the primal optimum.
fn dual_coordinate_ascent(z: &[Vec<f64>], c: f64) -> f64 {
    let dim = z[0].len();
    let mut alpha = vec![0.0; z.len()];
    let mut w = vec![0.0; dim];
    for _ in 0..100_000 {
        let mut change: f64 = 0.0;
        for (i, zi) in z.iter().enumerate() {
            let g = 1.0 - dot(zi, &w);
            let a = (alpha[i] + g / dot(zi, zi)).clamp(0.0, c);
            let d = a - alpha[i];
            if d != 0.0 {
                for (wv, zv) in w.iter_mut().zip(zi) {
                    *wv += d * zv;
                }
                alpha[i] = a;
                change = change.max(d.abs());
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w)
}

fn primal(z: &[Vec<f64>], w: &[f64], c: f64) -> f64 {
    0.5 * dot(w, w) + c * z.iter().map(|zi| (1.0 - dot(zi, w)).max(0.0)).sum::<f64>()
}

#[test]
fn twenty_random_points_match_dual_bound() {
    let mut r = rng(3);
    for _ in 0..10 {
        let dim = 4;
        let points: Vec<Vec<f64>> = (0..20).map(|_| gaussian(&mut r, dim)).collect();
        let labels: Vec<Label> = (0..20).map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative }).collect();
        let z: Vec<Vec<f64>> = points
            .iter()
            .zip(&labels)
            .map(|(x, y)| x.iter().map(|v| y.sign() * v).collect())
            .collect();
        let sol = train_point_svm(&points, &labels, Some(1.0), TOL).unwrap();
        let f = primal(&z, &sol.weights, 1.0);
        assert!(rel_diff(f, sol.objective) <= 1e-9);
        let lower = dual_coordinate_ascent(&z, 1.0);
        assert!(lower <= f * (1.0 + 1e-12));
        assert!(rel_diff(f, lower) <= 1e-7, "{f} vs {lower}");
        assert!(sol.kkt_residual <= TOL);
    }
}

#[test]
fn small_point_sets_match_brute_force() {
    let mut r = rng(4);
    for _ in 0..20 {
        let dim = 2;
        let points: Vec<Vec<f64>> = (0..6).map(|_| gaussian(&mut r, dim)).collect();
        let labels: Vec<Label> = (0..6).map(|i| if i < 3 { Label::Positive } else { Label::Negative }).collect();
        let signed: Vec<Vec<f64>> = points
            .iter()
            .zip(&labels)
            .map(|(x, y)| x.iter().map(|v| y.sign() * v).collect())
            .collect();
        let groups: Vec<usize> = (0..6).collect();
        let sol = train_point_svm(&points, &labels, Some(0.5), TOL).unwrap();
        let (f, _, _) = brute_force_slack(dim, &signed, &groups, &vec![None; 6], 0.5).unwrap();
        assert!(rel_diff(sol.objective, f) <= 1e-7, "{} vs {f}", sol.objective);
    }
}

#[test]
fn pooled_unit_vectors() {
    let sol = train_point_svm(&[vec![1.0, 0.0], vec![-1.0, 0.0]], &[Label::Positive, Label::Negative], None, TOL).unwrap();
    assert!((sol.weights[0] - 1.0).abs() <= 1e-12 && sol.weights[1].abs() <= 1e-12);
}

#[test]
fn hard_mode_reduces_to_singleton_manifolds() {
    let mut r = rng(5);
    for _ in 0..10 {
        let points: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let mut x = gaussian(&mut r, 6);
                x[0] += if i % 2 == 0 { 3.0 } else { -3.0 };
                x
            })
            .collect();
        let labels: Vec<Label> = (0..30).map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative }).collect();
        let mut ws = WorkingSet::new(30);
        for (i, x) in points.iter().enumerate() {
            ws.push(x.clone(), i).unwrap();
        }
        let trained = train_point_svm(&points, &labels, None, TOL);
        let direct = solve_hard(&QpProblem::hard(ws.clone(), labels.clone()).unwrap(), TOL);
        match (trained, direct) {
            (Ok(a), Ok((b, _))) => assert!((a.objective - b.objective).abs() <= 1e-9 * b.objective.max(1.0)),
            (Err(QpError::Infeasible), Err(QpError::Infeasible)) => {}
            (a, b) => panic!("{a:?} vs {b:?}"),
        }
        for c in [0.1, 10.0] {
            let a = train_point_svm(&points, &labels, Some(c), TOL).unwrap();
            let problem = QpProblem::slack_without_centers(ws.clone(), labels.clone(), c).unwrap();
            let (b, _) = solve_slack(&problem, TOL).unwrap();
            assert!((a.objective - b.objective).abs() <= 1e-9 * b.objective.max(1.0));
        }
    }
}

#[test]
fn inseparable_points_are_infeasible_in_hard_mode() {
    let points = vec![vec![1.0], vec![2.0]];
    let labels = vec![Label::Positive, Label::Negative];
    assert_eq!(train_point_svm(&points, &labels, None, TOL).unwrap_err(), QpError::Infeasible);
    assert!(train_point_svm(&points, &labels, Some(1.0), TOL).is_ok());
}

#[test]
fn one_dimensional_sphere_has_two_points() {
    let m = EllipsoidManifold::new(vec![1.0, 2.0], vec![vec![0.0, 1.0]], vec![0.5], 2.0, Label::Positive).unwrap();
    for seed in 0..20 {
        let x = &sample_manifold(&m, 1, seed)[0];
        assert_eq!(x[0], 1.0);
        assert!(x[1] == 1.5 || x[1] == 2.5, "{x:?}");
    }
}

#[test]
fn samples_lie_on_the_q_sphere() {
    let mut r = rng(6);
    for q in [1.0, 1.5, 2.0, 10.0, 50.0] {
        let m = random_ellipsoid(&mut r, 8, 5, q, Label::Negative);
        for s in sample_params(&m, 1000, &mut r) {
            assert!((qnorm(&s, q) - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn l2_samples_are_centered() {
    let mut r = rng(7);
    let m = random_ellipsoid(&mut r, 4, 3, 2.0, Label::Positive);
    let draws = sample_params(&m, 100_000, &mut r);
    let mut mean = vec![0.0; 3];
    for s in &draws {
        for (a, b) in mean.iter_mut().zip(s) {
            *a += b / draws.len() as f64;
        }
    }
    assert!(norm(&mean) <= 0.02, "{mean:?}");
}

#[test]
fn sampling_is_deterministic() {
    let mut r = rng(8);
    let ms: Vec<EllipsoidManifold> = (0..4)
        .map(|k| random_ellipsoid(&mut r, 6, 3, 3.0, if k < 2 { Label::Positive } else { Label::Negative }))
        .collect();
    assert_eq!(sample_manifold(&ms[0], 50, 1), sample_manifold(&ms[0], 50, 1));
    assert_ne!(sample_manifold(&ms[0], 50, 1), sample_manifold(&ms[0], 50, 2));
    let (a, la) = pooled_samples(&ms, 10, 3);
    let (b, lb) = pooled_samples(&ms, 10, 3);
    assert_eq!(a, b);
    assert_eq!(la, lb);
    assert_eq!(a.len(), 40);
    // sample-major: every prefix of length 4k covers each manifold k times
    assert_eq!(&la[..4], &[Label::Positive, Label::Positive, Label::Negative, Label::Negative]);
    let (short, _) = pooled_samples(&ms, 3, 3);
    assert_eq!(&a[..12], &short[..]);
}

#[test]
fn generalization_error_conventions() {
    let mut r = rng(9);
    let ms: Vec<EllipsoidManifold> = (0..4)
        .map(|k| {
            let label = if k < 2 { Label::Positive } else { Label::Negative };
            let m = random_ellipsoid(&mut r, 5, 2, 2.0, label);
            let mut c = m.center().to_vec();
            c[0] = 10.0 * label.sign();
            EllipsoidManifold::new(c, m.basis().to_vec(), m.radii().to_vec(), 2.0, label).unwrap()
        })
        .collect();
    assert_eq!(generalization_error(&[0.0; 5], &ms, 100, 0), 1.0);
    let w = [1.0, 0.0, 0.0, 0.0, 0.0];
    assert_eq!(generalization_error(&w, &ms, 1000, 0), 0.0);
    let w: Vec<f64> = gaussian(&mut r, 5);
    let e = generalization_error(&w, &ms, 500, 11);
    assert_eq!(e, generalization_error(&w, &ms, 500, 11));
    for scale in [1e-6, 3.0, 1e6] {
        let ws: Vec<f64> = w.iter().map(|v| v * scale).collect();
        assert_eq!(generalization_error(&ws, &ms, 500, 11), e);
    }
}

#[test]
fn bisected_ball_has_half_error() {
    let mut r = rng(10);
    for _ in 0..5 {
        let u1 = gaussian(&mut r, 4);
        let u2 = gaussian(&mut r, 4);
        let m = EllipsoidManifold::new(vec![0.0; 4], vec![u1, u2], vec![1.0, 2.0], 2.0, Label::Positive).unwrap();
        // w has no component along the center, so the hyperplane passes through it
        let w = gaussian(&mut r, 4);
        let seed = r.random();
        let e = generalization_error(&w, &[m], 1000, seed);
        assert!((e - 0.5).abs() <= 0.05, "{e}");
    }
}
