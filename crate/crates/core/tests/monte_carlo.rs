use nce_lab::dist::{BatchSampler, ProductQuartic, StandardGaussian};
use nce_lab::harness::{
    identity_record, linear_fit, mse_decomposition, population_hessian_d1_quadrature, run_mse_experiment,
    ExperimentConfig, GdSettings, InitKind,
};
use nce_lab::model::theta_star;
use nce_lab::nce::{
    directional_stats, gradient_descent, mc_population_hessian_at_star, GdConfig, GdInit, HessianRepresentation,
};
use nce_lab::numerics::RngStream;
use nce_lab::theory::{chi_square_tail_check, t_up_estimate, verify_anticonc};

#[test]
fn population_hessian_representations_agree() {
    let d = 3;
    let a = mc_population_hessian_at_star(d, 100_000, &mut RngStream::new(1, 0), HessianRepresentation::Data).unwrap();
    let b = mc_population_hessian_at_star(d, 100_000, &mut RngStream::new(1, 1), HessianRepresentation::Noise).unwrap();
    for i in 0..=d {
        for j in 0..=d {
            let se = (a.entry_stderr[(i, j)].powi(2) + b.entry_stderr[(i, j)].powi(2)).sqrt();
            assert!((a.matrix[(i, j)] - b.matrix[(i, j)]).abs() <= 4.0 * se, "({i},{j})");
        }
    }
}

#[test]
fn population_hessian_d1_against_quadrature() {
    let h = mc_population_hessian_at_star(1, 200_000, &mut RngStream::new(2, 0), HessianRepresentation::Noise).unwrap();
    let q = population_hessian_d1_quadrature().unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((h.matrix[(i, j)] - q[(i, j)]).abs() <= 4.0 * h.entry_stderr[(i, j)], "({i},{j})");
        }
    }
}

#[test]
fn identity_at_d2_and_along_last_basis_vector() {
    let r = identity_record(2, &[1.0, 1.0, 1.0], 100_000, 11).unwrap();
    assert!(r.pass, "{r:?}");
    let e = identity_record(3, &[0.0, 0.0, 0.0, 1.0], 100_000, 12).unwrap();
    assert!(e.pass, "{e:?}");
}

#[test]
fn directional_summands_are_positive() {
    let s = directional_stats(5, 20_000, &mut RngStream::new(3, 0)).unwrap();
    assert!(s.mean_a > 0.0 && s.mean_b > 0.0);
    assert!(s.mean_sq_a >= s.mean_a * s.mean_a);
    assert!(s.var_a >= 0.0 && s.var_b >= 0.0);
}

#[test]
fn gd_from_truth_converges_to_a_nearby_point() {
    let d = 2;
    let data = ProductQuartic::new(d).unwrap().sample_batch(40, &mut RngStream::new(4, 0)).unwrap();
    let noise = StandardGaussian::new(d).unwrap().sample_batch(40, &mut RngStream::new(4, 1)).unwrap();
    let cfg = GdConfig {
        step_size: 0.5,
        max_iters: 200_000,
        grad_tol: 1e-7,
        init: GdInit::AtThetaStar,
    };
    let report = gradient_descent(&cfg, &data, &noise, &mut RngStream::new(4, 2)).unwrap();
    assert!(report.converged, "{}", report.final_grad_norm);
    assert!(report.final_grad_norm <= cfg.grad_tol);
    assert!(report.theta_hat.sq_distance(&theta_star(d).unwrap()) > 0.0);
    assert!(report.loss_trace.len() <= 200);
}

fn mse_cfg(dims: Vec<usize>, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        dims,
        n_samples: 500,
        trials,
        gd: GdSettings {
            max_iters: 1000,
            ..GdSettings::default()
        },
        ..ExperimentConfig::desk_mse()
    }
}

#[test]
fn mse_grows_from_d5_to_d40() {
    let out = run_mse_experiment(&mse_cfg(vec![5, 40], 20)).unwrap();
    assert!(out.summary[0].mean < out.summary[1].mean, "{:?}", out.summary);
}

#[test]
fn single_trial_lies_in_the_multi_trial_range() {
    let many = run_mse_experiment(&mse_cfg(vec![10], 20)).unwrap();
    let one = run_mse_experiment(&mse_cfg(vec![10], 1)).unwrap();
    let (lo, hi) = many
        .records
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.sq_error), hi.max(r.sq_error)));
    let single = one.records[0].sq_error;
    assert!(lo <= single && single <= hi);
    // Trial 0 draws from the same seed in both runs.
    assert_eq!(single, many.records[0].sq_error);
}

#[test]
fn mse_decomposes_into_variance_and_small_bias() {
    let cfg = ExperimentConfig {
        gd: GdSettings {
            init: InitKind::AtThetaStar,
            max_iters: 2000,
            ..GdSettings::default()
        },
        ..mse_cfg(vec![4], 40)
    };
    let out = run_mse_experiment(&cfg).unwrap();
    let est: Vec<_> = out.estimates.iter().map(|e| e.clone().unwrap()).collect();
    let star = theta_star(4).unwrap();
    let (trace, bias_sq) = mse_decomposition(&est, &star).unwrap();
    let mean = out.summary[0].mean;
    assert!((trace + bias_sq - mean).abs() <= 1e-12 * mean);
    // ‖mean θ̂ − θ*‖² has expectation trace/T under zero bias.
    let t = est.len() as f64;
    let bias_se = (trace / t) * (2.0f64).sqrt();
    assert!(bias_sq <= trace / t + 3.0 * bias_se, "bias² {bias_sq}, trace {trace}");
}

#[test]
fn forward_anticoncentration_and_standardized_cdf() {
    let r = verify_anticonc(100, 0.125, 100_000, &mut RngStream::new(5, 0)).unwrap();
    assert!(r.forward.pass, "{:?}", r.forward);
    let se = (0.25f64 / 100_000.0).sqrt();
    assert!((r.forward.standardized_cdf_at_zero - 0.5).abs() <= r.forward.be_band + 3.0 * se);
}

#[test]
fn t_up_scaling() {
    let dims = [25, 50, 100, 200, 400];
    let mut rng = RngStream::new(6, 0);
    let est: Vec<_> = dims
        .iter()
        .map(|&d| t_up_estimate(d, 0.875, 10_000, &mut rng).unwrap())
        .collect();
    for w in est.windows(2) {
        assert!(w[1].t_up_data > w[0].t_up_data && w[1].t_up_noise > w[0].t_up_noise);
    }
    // ‖T‖ concentrates near √(d E[x⁸] + 1) under the data law.
    let at100 = &est[2];
    let centre = (100.0 * 23.946_339_747_463_05 + 1.0f64).sqrt();
    assert!(at100.t_up_data > centre && at100.t_up_data < 1.3 * centre, "{}", at100.t_up_data);
    let pts: Vec<(f64, f64)> = est.iter().map(|e| ((e.d as f64).ln(), e.t_up_data.ln())).collect();
    let fit = linear_fit(&pts).unwrap();
    // CLT oracle for the 7/8 quantile of ‖T‖² = Σxᵢ⁸ + 1: d E[x⁸] + 1 + z √(d Var x⁸).
    let (e8, e16, z) = (23.946_339_747_463_05, 13_418.196_182_841_73, 1.150_349_380_376_008);
    let oracle: Vec<(f64, f64)> = dims
        .iter()
        .map(|&d| {
            let d = d as f64;
            (d.ln(), 0.5 * (d * e8 + 1.0 + z * (d * (e16 - e8 * e8)).sqrt()).ln())
        })
        .collect();
    let want = linear_fit(&oracle).unwrap().slope;
    assert!(fit.slope < 0.5 && (fit.slope - want).abs() < 0.03, "{} vs {want}", fit.slope);
    // The √d limit shows at larger d.
    let far: Vec<(f64, f64)> = [1600, 6400]
        .iter()
        .map(|&d| {
            let e = t_up_estimate(d, 0.875, 10_000, &mut rng).unwrap();
            ((d as f64).ln(), e.t_up_data.ln())
        })
        .collect();
    let far_slope = (far[1].1 - far[0].1) / (far[1].0 - far[0].0);
    assert!((far_slope - 0.5).abs() < 0.03, "{far_slope}");
}

#[test]
fn chi_square_tail_bound_holds_on_a_grid() {
    let mut rng = RngStream::new(7, 0);
    for d in [1, 3, 10] {
        for t in [0.25, 1.0, 3.0] {
            let r = chi_square_tail_check(d, t, 50_000, &mut rng).unwrap();
            assert!(r.empirical <= r.bound + 3.0 * r.stderr, "d={d} t={t}");
        }
    }
}

#[test]
fn fisher_frobenius_against_sampling_at_d3() {
    use nce_lab::dist::BatchSampler;
    let d = 3;
    let pstar = ProductQuartic::new(d).unwrap();
    let mut rng = RngStream::new(8, 0);
    let mut x = vec![0.0; d];
    let n = 1_000_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        pstar.sample_into(&mut rng, &mut x);
        let norm_sq: f64 = x.iter().map(|v| v.powi(8)).sum::<f64>() + 1.0;
        let v = norm_sq * norm_sq;
        s += v;
        s2 += v * v;
    }
    let nf = n as f64;
    let mean = s / nf;
    let se = ((s2 / nf - mean * mean) / nf).sqrt();
    let exact = nce_lab::theory::fisher_frobenius(d).unwrap().exact_value;
    assert!((mean - exact).abs() <= 4.0 * se, "{mean} ± {se} vs {exact}");
}
