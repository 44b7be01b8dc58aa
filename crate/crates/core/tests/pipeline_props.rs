//! Cross-module properties: numerical audits of the mechanisms, empirical
//! sensitivity checks for the remaining pre-processing kinds, the released-
//! branch accuracy trend of the propose-test-release wrapper, and the
//! experiment pipeline's certified-budget and clipping properties.

use nalgebra::DVector;
use predp_core::accountant::{compose_optimized, ComposeConfig};
use predp_core::dataset::DatasetMatrix;
use predp_core::experiments::{make_classification, run_comparison, Arm, ExperimentConfig};
use predp_core::mechanisms::{rdp_curve, run_laplace, srdp_curve, MechanismSpec};
use predp_core::oracle::{brute_force_budget_audit, renyi_gaussian};
use predp_core::preprocessing::{
    eigen_gap, empirical_sensitivity, sensitivity, ImputeModel, PreprocSpec,
};
use predp_core::profile::CollectionProfile;
use predp_core::ptr::{run_ptr, PtrConfig, PtrOutcome};
use predp_core::sampling::rng_from_seed;
use rand::Rng;

fn mean_vector(d: &DatasetMatrix) -> DVector<f64> {
    let mut m = DVector::zeros(d.d());
    for r in d.rows() {
        m += r;
    }
    m / d.n() as f64
}

// Gaussian mean release: the closed-form divergence over random neighbor
// pairs never exceeds the standard curve.
#[test]
fn gaussian_numerical_audit_over_neighbors() {
    let n = 25;
    let d = 3;
    let eps = 1.3;
    let df = 2.0 / n as f64;
    let spec = MechanismSpec::gaussian(1.0 / n as f64, df, eps);
    let rdp = rdp_curve(&spec).unwrap();
    let sigma = spec.noise_scale().unwrap();
    let mut rng = rng_from_seed(71);
    for _ in 0..100 {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect();
        let a = DatasetMatrix::new(rows).unwrap();
        let i = rng.gen_range(0..n);
        let b = a
            .replace_row(i, (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .unwrap();
        for alpha in [2.0, 11.0, 64.0] {
            let div = renyi_gaussian(&mean_vector(&a), &mean_vector(&b), sigma, alpha).unwrap();
            assert!(div <= rdp.eval(alpha).unwrap() + 1e-12);
        }
    }
}

// Laplace count query: the empirical log-likelihood ratio over a histogram
// grid stays below eps plus estimator tolerance.
#[test]
fn laplace_monte_carlo_log_ratio_audit() {
    let n = 40;
    let eps = 0.5;
    let spec = MechanismSpec::laplace(1.0, 1.0, eps);
    let count_positive = |d: &DatasetMatrix| {
        DVector::from_vec(vec![d.rows().iter().filter(|r| r[0] > 0.0).count() as f64])
    };
    let mut rng = rng_from_seed(72);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-0.9..0.9)]).collect();
    let a = DatasetMatrix::new(rows).unwrap();
    // flip one row's sign so the count changes by exactly one
    let idx = (0..n).find(|&i| a.row(i)[0] > 0.0).unwrap();
    let b = a.replace_row(idx, vec![-a.row(idx)[0]]).unwrap();

    let draws = 200_000u64;
    let scale = spec.noise_scale().unwrap();
    let lo = -8.0 * scale;
    let hi = count_positive(&a)[0] + 8.0 * scale;
    let bins = 60usize;
    let width = (hi - lo) / bins as f64;
    let mut ca = vec![0u64; bins];
    let mut cb = vec![0u64; bins];
    for s in 0..draws {
        let va = run_laplace(&spec, count_positive, &a, s).unwrap()[0];
        let vb = run_laplace(&spec, count_positive, &b, s + draws).unwrap()[0];
        for (v, c) in [(va, &mut ca), (vb, &mut cb)] {
            let k = (((v - lo) / width) as isize).clamp(0, bins as isize - 1) as usize;
            c[k] += 1;
        }
    }
    let mut sup = 0.0f64;
    for (p, q) in ca.iter().zip(&cb) {
        // only bins with enough mass on both sides are statistically usable
        if *p >= 200 && *q >= 200 {
            sup = sup.max(((*p as f64) / (*q as f64)).ln().abs());
        }
    }
    assert!(sup <= eps + 0.15, "sup log ratio {sup} vs eps {eps}");
    assert!(sup > 0.1, "audit should see a nontrivial ratio, got {sup}");
}

// Empirical sensitivity stays below the analytic bound for the regression
// and rank-reduction kinds as well.
#[test]
fn regression_and_pca_empirical_sensitivity() {
    let n = 6;
    let mut mask = vec![vec![false; 2]; n];
    mask[0][1] = true; // feature 1 of row 0 is imputed by regression
    let f0 = [-0.75, -0.5, 0.5, 0.75];
    let f1 = [-0.5, -0.25, 0.0, 0.25, 0.5];
    let mut rng = rng_from_seed(73);
    let mut pairs = Vec::new();
    while pairs.len() < 200 {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                vec![
                    f0[rng.gen_range(0..f0.len())],
                    f1[rng.gen_range(0..f1.len())],
                ]
            })
            .collect();
        let Ok(a) = DatasetMatrix::with_missing(rows, mask.clone(), None) else {
            continue;
        };
        let i = rng.gen_range(1..n);
        let Ok(b) = a.replace_row(
            i,
            vec![
                f0[rng.gen_range(0..f0.len())],
                f1[rng.gen_range(0..f1.len())],
            ],
        ) else {
            continue;
        };
        if predp_core::hamming_distance(&a, &b).unwrap() == 1 {
            pairs.push((a, b));
        }
    }

    // gram-eigenvalue bounds of the complete cases, measured honestly
    let gram = |d: &DatasetMatrix| -> f64 {
        (0..n)
            .filter(|&i| !d.is_missing(i, 0) && !d.is_missing(i, 1))
            .map(|i| d.row(i)[0] * d.row(i)[0])
            .sum()
    };
    let mut lmin = f64::INFINITY;
    let mut lmax = 0.0f64;
    for (a, b) in &pairs {
        for d in [a, b] {
            let g = gram(d);
            lmin = lmin.min(g);
            lmax = lmax.max(g);
        }
    }
    let mut profile = CollectionProfile::new(n);
    profile.p = 1;
    profile.lambda_min = Some(lmin);
    profile.lambda_max = Some(lmax);
    let spec = PreprocSpec::Impute {
        model: ImputeModel::LinearRegression,
    };
    let analytic = sensitivity(&spec, &profile).unwrap();
    let observed = empirical_sensitivity(&spec, &pairs).unwrap();
    assert!(
        observed.delta2 <= analytic.delta2 + 1e-12 && observed.delta_inf <= analytic.delta_inf,
        "regression: observed {observed:?} vs analytic {analytic:?} (lambda {lmin}..{lmax})"
    );

    // rank reduction over collections with a non-vanishing top gap
    let mut pca_pairs = Vec::new();
    let mut min_gap = f64::INFINITY;
    let mut tries = 0;
    while pca_pairs.len() < 200 && tries < 20_000 {
        tries += 1;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                vec![
                    0.25 * rng.gen_range(-3i32..=3) as f64 * 1.2,
                    0.1 * rng.gen_range(-2i32..=2) as f64,
                ]
            })
            .collect();
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| {
                let nm = (r[0] * r[0] + r[1] * r[1]).sqrt();
                if nm > 1.0 {
                    vec![r[0] / nm, r[1] / nm]
                } else {
                    r
                }
            })
            .collect();
        let Ok(a) = DatasetMatrix::new(rows) else {
            continue;
        };
        let i = rng.gen_range(0..n);
        let Ok(b) = a.replace_row(i, vec![0.25 * rng.gen_range(-3i32..=3) as f64, 0.0]) else {
            continue;
        };
        if predp_core::hamming_distance(&a, &b).unwrap() != 1 {
            continue;
        }
        let ga = eigen_gap(&a, 1).unwrap();
        let gb = eigen_gap(&b, 1).unwrap();
        if ga < 0.05 || gb < 0.05 {
            continue;
        }
        min_gap = min_gap.min(ga.min(gb));
        pca_pairs.push((a, b));
    }
    assert!(pca_pairs.len() >= 200);
    let mut pca_profile = CollectionProfile::new(n);
    pca_profile.delta_min_k = Some(min_gap);
    pca_profile.delta_min_1 = Some(min_gap);
    let spec = PreprocSpec::PcaRank { k: 1 };
    let analytic = sensitivity(&spec, &pca_profile).unwrap();
    let observed = empirical_sensitivity(&spec, &pca_pairs).unwrap();
    assert!(
        observed.delta2 <= analytic.delta2 + 1e-12,
        "rank reduction: observed {observed:?} vs analytic {analytic:?}"
    );
}

// Released-branch accuracy improves (or holds) as the mechanism budget grows.
#[test]
fn ptr_release_loss_decreases_with_eps() {
    let config = ExperimentConfig {
        n: 1000,
        d: 12,
        approx_rank: 3,
        class_count: 2,
        eps_list: vec![1.0],
        delta: 1e-4,
        seeds: vec![0],
        k: 1,
        clip: None,
        tail_noise: Some(0.002),
    };
    let data = make_classification(&config, 42).unwrap();
    let gap = eigen_gap(&data, 1).unwrap();
    let w_star = predp_core::experiments::nonprivate_minimizer(&data);
    let base = predp_core::experiments::logistic_loss(&w_star, &data);
    let grad = |w: &DVector<f64>, x: &DVector<f64>, y: Option<f64>| {
        let y = 2.0 * y.unwrap() - 1.0;
        let m = y * w.dot(x);
        let s = if m > 30.0 { 0.0 } else { 1.0 / (1.0 + m.exp()) };
        x * (-y * s)
    };
    let mut means = Vec::new();
    let mut ses = Vec::new();
    for eps in [1.0, 2.0, 5.0] {
        let cfg = PtrConfig {
            beta: gap / 10.0,
            eps,
            delta: 1e-4,
            k: 1,
            l: 1.0,
            mu: 1.0,
            t: 150,
            lr: 0.3,
            clip: None,
        };
        let mut losses = Vec::new();
        for seed in 0..10u64 {
            match run_ptr(&data, &cfg, &grad, seed).unwrap() {
                PtrOutcome::Model { params, .. } => {
                    losses.push(predp_core::experiments::logistic_loss(&params, &data) - base)
                }
                PtrOutcome::Abort => {}
            }
        }
        assert!(losses.len() >= 9, "expected releases at gap margin");
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        let var =
            losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (losses.len() - 1) as f64;
        means.push(mean);
        ses.push((var / losses.len() as f64).sqrt());
    }
    for i in 1..means.len() {
        let se = ses[i - 1].max(ses[i]);
        assert!(
            means[i] <= means[i - 1] + se,
            "release loss not decreasing: {means:?} (se {se})"
        );
    }
}

// The pre-processed arm's reported budget is certified by a brute-force
// audit of a scalar-statistic shadow of the pipeline.
#[test]
fn preprocessed_budget_certified_by_shadow_audit() {
    let n = 30;
    let k = 2;
    let mut rng = rng_from_seed(74);
    let gen_rows = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                vec![
                    rng.gen_range(-0.8..0.8),
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.1..0.1),
                ]
            })
            .collect()
    };
    let mut pairs = Vec::new();
    let mut min_gap_k = f64::INFINITY;
    let mut min_gap_1 = f64::INFINITY;
    while pairs.len() < 200 {
        let Ok(a) = DatasetMatrix::new(gen_rows(&mut rng)) else {
            continue;
        };
        let i = rng.gen_range(0..n);
        let Ok(b) = a.replace_row(
            i,
            vec![
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.1..0.1),
            ],
        ) else {
            continue;
        };
        for ds in [&a, &b] {
            min_gap_k = min_gap_k.min(eigen_gap(ds, k).unwrap());
            min_gap_1 = min_gap_1.min(eigen_gap(ds, 1).unwrap());
        }
        pairs.push((a, b));
    }
    let mut profile = CollectionProfile::new(n);
    profile.delta_min_k = Some(min_gap_k.max(1e-6));
    profile.delta_min_1 = Some(min_gap_1.max(1e-6));
    let preproc = PreprocSpec::PcaRank { k };
    let sens = sensitivity(&preproc, &profile).unwrap();
    let mech = MechanismSpec::gaussian(1.0 / n as f64, 2.0 / n as f64, 1.0);
    let rdp = rdp_curve(&mech).unwrap();
    let srdp = srdp_curve(&mech, &profile).unwrap();
    let budget = compose_optimized(&rdp, &srdp, &sens, &ComposeConfig::with_delta(1e-5)).unwrap();
    let scalar = |d: &DatasetMatrix| d.rows().iter().map(|r| r[0]).sum::<f64>() / d.n() as f64;
    let audit = brute_force_budget_audit(
        &mech,
        &scalar,
        Some(&preproc),
        &pairs,
        budget.provenance.alpha,
    )
    .unwrap();
    assert!(
        audit <= budget.eps_hat + 1e-12,
        "shadow audit {audit} exceeds certified budget {}",
        budget.eps_hat
    );
}

// Clipping at 0.7R or 0.99R does not degrade the pre-processed arm more than
// the aggressive 0.1R clip does.
#[test]
fn clipping_thresholds_preserve_accuracy_ordering() {
    let base = ExperimentConfig {
        n: 400,
        d: 12,
        approx_rank: 3,
        class_count: 2,
        eps_list: vec![2.0],
        delta: 1e-5,
        seeds: (0..8).collect(),
        k: 1,
        clip: None,
        tail_noise: Some(0.002),
    };
    let run_at = |clip: f64| {
        let mut cfg = base.clone();
        cfg.clip = Some(clip);
        let table = run_comparison(&cfg).unwrap();
        let e = table.entry(2.0, Arm::Preprocessed).unwrap().clone();
        (e.mean_excess_loss, e.std_error)
    };
    let (l01, s01) = run_at(0.1);
    let (l07, s07) = run_at(0.7);
    let (l99, s99) = run_at(0.99);
    let slack = 2.0 * s01.max(s07).max(s99);
    assert!(
        l07 <= l01 + slack,
        "clip 0.7R loss {l07} worse than 0.1R {l01} beyond slack {slack}"
    );
    assert!(
        l99 <= l01 + slack,
        "clip 0.99R loss {l99} worse than 0.1R {l01} beyond slack {slack}"
    );
}
