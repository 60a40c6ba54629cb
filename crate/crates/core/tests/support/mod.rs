//! Strategies and checks shared by the property suite and the acceptance run.

#![allow(dead_code)]

use latent_class::newton::newton_fit_traced;
use latent_class::symmetry::square;
use latent_class::{
    em_fit, em_step, hessian, log_likelihood, max_minor_residual, score, seeded_start,
    Classification, ContingencyTable, EmConfig, FreeChart, ModelSpec, NewtonConfig, ParamPoint,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), TestCaseError>;

/// Up to three variables with up to four categories each, one to three
/// classes, and counts in 0..=20 with at least one positive cell.
pub fn spec_and_table() -> impl Strategy<Value = (ModelSpec, ContingencyTable)> {
    (prop::collection::vec(2usize..=4, 2..=3), 1usize..=3).prop_flat_map(|(dims, r)| {
        let cells: usize = dims.iter().product();
        prop::collection::vec(0u64..=20, cells).prop_map(move |mut counts| {
            counts[0] += 1;
            let t = ContingencyTable::new(dims.clone(), counts).unwrap();
            (ModelSpec::new(dims.clone(), r).unwrap(), t)
        })
    })
}

/// Symmetric `n x n` tables with a positive diagonal.
pub fn symmetric_table(n: usize) -> impl Strategy<Value = ContingencyTable> {
    prop::collection::vec(0u64..=15, n * (n + 1) / 2).prop_map(move |upper| {
        let mut m = vec![0u64; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                m[i * n + j] = upper[k] + u64::from(i == j);
                m[j * n + i] = upper[k] + u64::from(i == j);
                k += 1;
            }
        }
        ContingencyTable::new(vec![n, n], m).unwrap()
    })
}

pub fn three_by_three() -> impl Strategy<Value = ContingencyTable> {
    prop::collection::vec(0u64..=20, 9).prop_map(|mut counts| {
        counts[0] += 1;
        ContingencyTable::new(vec![3, 3], counts).unwrap()
    })
}

pub fn interior_point(spec: &ModelSpec, seed: u64) -> ParamPoint {
    let mut theta = ParamPoint::random(spec, &mut ChaCha8Rng::seed_from_u64(seed));
    theta.project_interior(0.02);
    theta
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    diff / scale
}

fn loglik_at(chart: &[f64], spec: &ModelSpec, t: &ContingencyTable) -> f64 {
    log_likelihood(&FreeChart(chart.to_vec()).to_param(spec).unwrap(), t).unwrap()
}

pub fn check_em_monotone(spec: &ModelSpec, t: &ContingencyTable, seed: u64) -> Check {
    let mut theta = seeded_start(spec, seed, 0);
    let mut prev = log_likelihood(&theta, t).unwrap();
    for _ in 0..20 {
        theta = em_step(&theta, t).unwrap();
        let cur = log_likelihood(&theta, t).unwrap();
        prop_assert!(cur >= prev - 1e-12, "{prev} -> {cur}");
        prev = cur;
    }
    Ok(())
}

pub fn check_derivatives(spec: &ModelSpec, t: &ContingencyTable, seed: u64) -> Check {
    let chart = interior_point(spec, seed).to_chart();
    let x = chart.as_slice().to_vec();
    let h = 1e-6;
    let g = score(&chart, spec, t).unwrap();
    let fd: Vec<f64> = (0..x.len())
        .map(|k| {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[k] += h;
            down[k] -= h;
            (loglik_at(&up, spec, t) - loglik_at(&down, spec, t)) / (2.0 * h)
        })
        .collect();
    prop_assert!(
        rel_err(g.as_slice(), &fd) < 1e-5,
        "gradient {:?} vs {:?}",
        g.as_slice(),
        fd
    );

    let hess = hessian(&chart, spec, t).unwrap();
    let n = x.len();
    let mut fd_h = DMatrix::zeros(n, n);
    for k in 0..n {
        let (mut up, mut down) = (x.clone(), x.clone());
        up[k] += h;
        down[k] -= h;
        let gu: DVector<f64> = score(&FreeChart(up), spec, t).unwrap();
        let gd: DVector<f64> = score(&FreeChart(down), spec, t).unwrap();
        fd_h.set_column(k, &((gu - gd) / (2.0 * h)));
    }
    prop_assert!(rel_err(hess.as_slice(), fd_h.as_slice()) < 1e-5);
    prop_assert!((&hess - hess.transpose()).amax() <= 1e-9 * hess.amax().max(1.0));
    Ok(())
}

pub fn check_rank_two(t: &ContingencyTable, seed: u64) -> Check {
    let spec = ModelSpec::for_table(t, 2).unwrap();
    let fit = em_fit(&seeded_start(&spec, seed, 0), t, &EmConfig::default()).unwrap();
    let m = DMatrix::from_row_slice(3, 3, &fit.fitted.p);
    prop_assert!(max_minor_residual(&m, 2) < 1e-10);
    Ok(())
}

/// Row and column sums of fitted maxima agree on symmetric data.
pub fn check_equal_margins(t: &ContingencyTable, seed: u64) -> Check {
    let spec = ModelSpec::for_table(t, 2).unwrap();
    let fit = em_fit(&seeded_start(&spec, seed, 0), t, &EmConfig::default()).unwrap();
    if !matches!(
        fit.classification,
        Classification::InteriorMax | Classification::Boundary
    ) {
        return Ok(());
    }
    let n = t.dims()[0];
    let m = square(&fit.fitted_counts(t));
    for i in 0..n {
        prop_assert!((m.row(i).sum() - m.column(i).sum()).abs() < 1e-6);
    }
    Ok(())
}

pub fn check_newton_gains(spec: &ModelSpec, t: &ContingencyTable, seed: u64) -> Check {
    let start = interior_point(spec, seed);
    if let Ok(out) = newton_fit_traced(&start, t, &NewtonConfig::default()) {
        for it in &out.trace {
            prop_assert!(it.gain > 0.0, "iteration {} gain {}", it.iteration, it.gain);
        }
    }
    Ok(())
}

/// Runs every property suite with a fixed seed; returns the failures.
pub fn run_property_suites() -> Vec<String> {
    let runner = |cases| {
        let config = Config {
            failure_persistence: None,
            ..Config::with_cases(cases)
        };
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
    };
    let mut failures = Vec::new();
    let mut record = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };
    record(
        "em monotonicity",
        runner(1000)
            .run(&(spec_and_table(), any::<u64>()), |((s, t), seed)| {
                check_em_monotone(&s, &t, seed)
            })
            .map_err(|e| e.to_string()),
    );
    record(
        "derivatives",
        runner(20)
            .run(&(spec_and_table(), any::<u64>()), |((s, t), seed)| {
                check_derivatives(&s, &t, seed)
            })
            .map_err(|e| e.to_string()),
    );
    record(
        "rank two",
        runner(200)
            .run(&(three_by_three(), any::<u64>()), |(t, seed)| {
                check_rank_two(&t, seed)
            })
            .map_err(|e| e.to_string()),
    );
    record(
        "equal margins",
        runner(200)
            .run(&(symmetric_table(4), any::<u64>()), |(t, seed)| {
                check_equal_margins(&t, seed)
            })
            .map_err(|e| e.to_string()),
    );
    record(
        "newton gains",
        runner(100)
            .run(&(spec_and_table(), any::<u64>()), |((s, t), seed)| {
                check_newton_gains(&s, &t, seed)
            })
            .map_err(|e| e.to_string()),
    );
    failures
}
