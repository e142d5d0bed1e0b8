//! Acceptance checks. Each test prints one `PASS`/`FAIL` line (written
//! straight to stderr so it shows even when output is captured) and then
//! asserts on the same condition.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::time::{Duration, Instant};

use coherest::coherence::{
    compute_mu, compute_mu0, compute_mu1, estimate_coherence, exact_coherence, gamma,
    projector_update,
};
use coherest::experiment::{run_experiment, write_raw_csv, ExperimentConfig};
use coherest::kernels::{build_kernel, energy_rank, KernelSpec, PointDataset};
use coherest::lowrank::{column_projection, nystrom};
use coherest::matrix::{projector, thin_svd, DenseMatrix};
use coherest::sampling::{exclusion_sample, nested_sample_sequence, rng_from_seed, uniform_sample};
use coherest::synthgen::{
    gaussian_matrix, make_low_rank, make_worstcase_spsd, CoherenceLevel, Decay, SynthSpec,
    WorstCaseSpec,
};

fn report(label: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "[acceptance] {label}: {verdict} ({detail})"
    );
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    gaussian_matrix(rows, cols, &mut rng_from_seed(seed))
}

fn low_rank(n: usize, m: usize, r: usize, seed: u64) -> DenseMatrix {
    gaussian(n, r, 2 * seed)
        .matmul(&gaussian(r, m, 2 * seed + 1))
        .unwrap()
}

fn max_diag(p: &DenseMatrix) -> f64 {
    (0..p.rows()).map(|i| p[(i, i)]).fold(0.0, f64::max)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_1_nested_estimates_are_monotone() {
    let start = Instant::now();
    let (n, r) = (60, 8);
    let mut worst_drop = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut steps = 0usize;
    for trial in 0..1000u64 {
        let x = low_rank(n, n, r, 10_000 + trial);
        let mut p = DenseMatrix::zeros(n, n);
        let mut prev = 0.0;
        for sample in nested_sample_sequence(&x, n, trial).unwrap() {
            let new_col = sample.submatrix.column(sample.len() - 1);
            let upd = projector_update(&p, new_col).unwrap();
            let est = estimate_coherence(&sample.submatrix, r).unwrap().gamma;
            let delta = est - prev;
            worst_drop = worst_drop.max(-delta);
            worst_excess = worst_excess.max(delta - upd.increment_bound);
            // the projector route agrees with the SVD route
            let via_projector = max_diag(&upd.projector);
            assert!((via_projector - est).abs() < 1e-10, "trial {trial}");
            p = upd.projector;
            prev = est;
            steps += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_drop <= 1e-12 && worst_excess <= 1e-12 && elapsed < Duration::from_secs(60);
    report(
        "criterion 1 nested monotonicity",
        pass,
        &format!(
            "{steps} increments, max decrease {worst_drop:.2e}, max excess over gamma(z) {worst_excess:.2e}, {elapsed:.1?}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_rank_match_gives_exact_estimates() {
    let start = Instant::now();
    let r = 10;
    let mut matched = 0;
    let mut worst_gamma = 0.0f64;
    let mut worst_proj = 0.0f64;
    for trial in 0..500u64 {
        let spec = SynthSpec {
            n: 100,
            m: 100,
            r,
            decay: Decay::ALL[trial as usize % 3],
            coherence: CoherenceLevel::ALL[(trial / 3) as usize % 3],
            noise: None,
            seed: trial,
        };
        let x = make_low_rank(&spec).unwrap().matrix;
        let truth = exact_coherence(&x, Some(r)).unwrap().gamma;
        let l = r + (trial as usize % 21);
        let s = uniform_sample(&x, l, 50_000 + trial).unwrap();
        if thin_svd(&s.submatrix).unwrap().numerical_rank != r {
            continue;
        }
        matched += 1;
        let est = estimate_coherence(&s.submatrix, r).unwrap().gamma;
        worst_gamma = worst_gamma.max((est - truth).abs());
        worst_proj = worst_proj.max(column_projection(&x, &s).unwrap().normalized_error);
    }
    let elapsed = start.elapsed();
    let pass = matched > 0
        && worst_gamma < 1e-10
        && worst_proj < 1e-10
        && elapsed < Duration::from_secs(60);
    report(
        "criterion 2 exactness at full sample rank",
        pass,
        &format!(
            "{matched}/500 samples reached rank {r}, max |gamma error| {worst_gamma:.2e}, max projection error {worst_proj:.2e}, {elapsed:.1?}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_projector_update_matches_recomputation() {
    let n = 30;
    let mut worst = 0.0f64;
    let mut in_span = 0;
    for inst in 0..200u64 {
        let l = 1 + (inst as usize % 10);
        let base = gaussian(n, l, 70_000 + inst);
        let x1 = base.leading_columns(l - 1).ok();
        let p = match &x1 {
            Some(x1) => projector(&thin_svd(x1).unwrap().u).unwrap(),
            None => DenseMatrix::zeros(n, n),
        };
        // every fifth new column lies in the current span
        let x: Vec<f64> = match (&x1, inst % 5) {
            (Some(x1), 0) => {
                in_span += 1;
                let coef = gaussian(l - 1, 1, inst);
                x1.matmul(&coef).unwrap().column(0).to_vec()
            }
            _ => base.column(l - 1).to_vec(),
        };
        let upd = projector_update(&p, &x).unwrap();
        let xcol = DenseMatrix::from_column_slice(n, 1, &x).unwrap();
        let stacked = match &x1 {
            Some(x1) => x1.hstack(&xcol).unwrap(),
            None => xcol,
        };
        let svd = thin_svd(&stacked).unwrap();
        let scratch = match svd.leading_left(svd.numerical_rank) {
            Some(u) => projector(&u).unwrap(),
            None => DenseMatrix::zeros(n, n),
        };
        worst = worst.max(upd.projector.max_abs_diff(&scratch).unwrap());
    }
    let pass = worst <= 1e-10;
    report(
        "criterion 3 projector update equals recomputation",
        pass,
        &format!("200 instances ({in_span} in-span columns), max entrywise difference {worst:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_worst_case_defeats_estimation() {
    let n = 400;
    let mut max_est = 0.0f64;
    let mut min_truth = f64::INFINITY;
    for seed in 0..5u64 {
        let k = make_worstcase_spsd(&WorstCaseSpec::new(n, 10, seed)).unwrap();
        let svd = thin_svd(&k).unwrap();
        let r = svd.numerical_rank;
        min_truth = min_truth.min(gamma(&svd.leading_left(r).unwrap()).unwrap());
        for l in (10..=200).step_by(10) {
            let s = exclusion_sample(&k, l, 1000 * seed + l as u64, &BTreeSet::from([0])).unwrap();
            max_est = max_est.max(estimate_coherence(&s.submatrix, r).unwrap().gamma);
        }
    }
    let pass = max_est < 0.1 && min_truth > 0.99;
    report(
        "criterion 4 worst-case matrix",
        pass,
        &format!("5 matrices x 20 sample sizes, max estimate {max_est:.4}, min true gamma {min_truth:.6}"),
    );
    assert!(pass);
}

fn mean_error_by_l(text: &str) -> HashMap<usize, f64> {
    let rows = run_experiment(&ExperimentConfig::from_text(text).unwrap()).unwrap();
    let mut groups: HashMap<usize, Vec<f64>> = HashMap::new();
    for row in rows {
        groups.entry(row.l).or_default().push(row.abs_error);
    }
    groups.into_iter().map(|(l, v)| (l, mean(&v))).collect()
}

#[test]
fn criterion_5_exact_synthetic_trend() {
    let start = Instant::now();
    let r = 20;
    let mut worst_at_2r = 0.0f64;
    let mut worst_gap = f64::NEG_INFINITY;
    for decay in Decay::ALL {
        let mut by_level = HashMap::new();
        for level in CoherenceLevel::ALL {
            let text = format!(
                "kind = synth_exact\nn = 400\nr = {r}\ndecay = {decay}\ncoherence = {level}\n\
                 seed = 11\nl_values = 1:{}:1\ntrials = 10\nbase_seed = 500\n",
                2 * r
            );
            let errors = mean_error_by_l(&text);
            worst_at_2r = worst_at_2r.max(errors[&(2 * r)]);
            by_level.insert(level, errors);
        }
        for l in 1..r {
            let gap = by_level[&CoherenceLevel::Low][&l] - by_level[&CoherenceLevel::High][&l];
            worst_gap = worst_gap.max(gap);
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_at_2r < 1e-6 && worst_gap <= 0.02 && elapsed < Duration::from_secs(300);
    report(
        "criterion 5 exact synthetic convergence",
        pass,
        &format!(
            "max mean error at l = 2r {worst_at_2r:.2e}, max (low - high) mean error for l < r {worst_gap:.4}, {elapsed:.1?}"
        ),
    );
    assert!(pass);
}

// Calibration over 20 matrices x 10 trials (n = 400, r = 20), mean error at
// l = r / 2r / 4r:
//   f = 0.1: low 0.0070/0.0043/0.0027, mid 0.0125/0.0060/0.0032, high 0.0313/0.0078/0.0040
//   f = 0.9: low 0.0088/0.0093/0.0093, mid 0.0186/0.0181/0.0173, high 0.1332/0.1138/0.0771
// With f = 0.9 the low and mid errors sit on a noise floor from l = r on, so
// the ordering of the l = r and l = 4r means is decided by sampling noise.
#[test]
fn criterion_6_noisy_synthetic_trend() {
    let r = 20;
    let mut ok = true;
    let mut details = Vec::new();
    let mut small_noise_at_2r = 0.0f64;
    for f in [0.1, 0.9] {
        for level in CoherenceLevel::ALL {
            let text = format!(
                "kind = synth_noisy\nn = 400\nr = {r}\ndecay = medium\ncoherence = {level}\n\
                 noise = {f}\nseed = 13\nl_values = {r}, {}, {}\ntrials = 10\nbase_seed = 900\n",
                2 * r,
                4 * r
            );
            let e = mean_error_by_l(&text);
            let (at_r, at_2r, at_4r) = (e[&r], e[&(2 * r)], e[&(4 * r)]);
            ok &= at_4r < at_r;
            if f == 0.1 {
                small_noise_at_2r = small_noise_at_2r.max(at_2r);
            }
            details.push(format!("f={f} {level}: {at_r:.4}/{at_2r:.4}/{at_4r:.4}"));
        }
    }
    let pass = ok && small_noise_at_2r < 0.05;
    report(
        "criterion 6 noisy synthetic convergence",
        pass,
        &format!("mean error at l = r/2r/4r: {}", details.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_7_outlier_kernel_is_harder() {
    let (n, d, l) = (400, 3, 50);
    let cloud = gaussian(n, d, 321);
    let mut far = cloud.clone().into_dmatrix();
    for k in 0..d {
        far[(n / 2, k)] = 50.0;
    }
    let low = PointDataset::new(cloud, "cloud");
    let high = PointDataset::new(DenseMatrix::new(far).unwrap(), "cloud_with_outlier");
    let mut results = Vec::new();
    for data in [&low, &high] {
        let spec = KernelSpec::rbf_default(data).unwrap();
        let k = build_kernel(data, &spec).unwrap();
        let r = energy_rank(&k, 0.99).unwrap();
        let truth = exact_coherence(&k, Some(r)).unwrap().gamma;
        let errors: Vec<f64> = (0..10u64)
            .map(|t| {
                nystrom(&k, &uniform_sample(&k, l, 4000 + t).unwrap())
                    .unwrap()
                    .normalized_error
            })
            .collect();
        results.push((r, truth, mean(&errors)));
    }
    let pass = results[1].2 > results[0].2;
    let describe = |(r, g, e): (usize, f64, f64)| {
        format!("gamma at 99% energy rank {r} = {g:.4}, mean error {e:.4e}")
    };
    report(
        "criterion 7 coherence predicts Nystrom error",
        pass,
        &format!(
            "low: {}; high: {}",
            describe(results[0]),
            describe(results[1])
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_invariant_battery() {
    let mut failures = Vec::new();

    // coherence chain: 1 <= mu0 <= min(mu^2, n/q), 1 <= mu, mu1 <= sqrt(q) mu0
    for seed in 0..200u64 {
        let (n, q) = (20 + seed as usize % 30, 1 + seed as usize % 7);
        let u = thin_svd(&gaussian(n, q, seed)).unwrap().u;
        let v = thin_svd(&gaussian(n + 5, q, seed + 1)).unwrap().u;
        let (mu, mu0, mu1) = (
            compute_mu(&u).unwrap(),
            compute_mu0(&u).unwrap(),
            compute_mu1(&u, &v).unwrap(),
        );
        let tol = 1e-12;
        if !(mu0 >= 1.0 - tol
            && mu0 <= mu * mu + tol
            && mu0 <= n as f64 / q as f64 + tol
            && mu >= 1.0 - tol
            && mu1 <= (q as f64).sqrt() * mu0.max(compute_mu0(&v).unwrap()) + tol)
        {
            failures.push(format!("coherence chain, seed {seed}"));
        }
    }

    // projector idempotence and symmetry
    for seed in 0..50u64 {
        let p = projector(&thin_svd(&gaussian(25, 6, seed)).unwrap().u).unwrap();
        let defect = p
            .matmul(&p)
            .unwrap()
            .max_abs_diff(&p)
            .unwrap()
            .max(p.symmetry_defect());
        if defect > 1e-12 {
            failures.push(format!("projector, seed {seed}: {defect:.2e}"));
        }
    }

    // Nystrom symmetry
    for seed in 0..50u64 {
        let g = gaussian(8, 30, seed);
        let k = g.transpose().matmul(&g).unwrap();
        let k = k.add(&k.transpose()).unwrap().scale(0.5);
        let approx = nystrom(
            &k,
            &uniform_sample(&k, 1 + seed as usize % 15, seed).unwrap(),
        )
        .unwrap()
        .approx;
        if approx.symmetry_defect() > 1e-10 {
            failures.push(format!("nystrom symmetry, seed {seed}"));
        }
    }

    // sampler uniformity: chi-square over the 15 pairs of 6 columns, df = 14,
    // 0.999 quantile 36.12
    let x = gaussian(1, 6, 0);
    let draws = 15_000u64;
    let mut counts: HashMap<Vec<usize>, f64> = HashMap::new();
    for seed in 0..draws {
        let mut idx = uniform_sample(&x, 2, seed).unwrap().indices;
        idx.sort_unstable();
        *counts.entry(idx).or_default() += 1.0;
    }
    let expected = draws as f64 / 15.0;
    let chi2: f64 = counts
        .values()
        .map(|c| (c - expected).powi(2) / expected)
        .sum();
    if counts.len() != 15 || chi2 > 36.12 {
        failures.push(format!(
            "sampler chi-square {chi2:.2} over {} cells",
            counts.len()
        ));
    }

    // byte-identical raw CSV across reruns
    let config = ExperimentConfig::from_text(
        "kind = synth_noisy\nn = 120\nr = 6\nnoise = 0.1\ncoherence = mid\n\
         l_values = 3, 6, 12, 24\ntrials = 6\nmethods = column_projection\n",
    )
    .unwrap();
    let render = || {
        let mut buf = Vec::new();
        write_raw_csv(&mut buf, &run_experiment(&config).unwrap()).unwrap();
        buf
    };
    if render() != render() {
        failures.push("raw CSV differs between reruns".into());
    }

    let pass = failures.is_empty();
    report(
        "criterion 8 invariant battery",
        pass,
        &if pass {
            format!("coherence chain, projectors, Nystrom symmetry, sampler chi-square {chi2:.2}, CSV determinism")
        } else {
            failures.join("; ")
        },
    );
    assert!(pass);
}

#[test]
fn criterion_9_estimate_cost_scales_with_sample_size() {
    let n = 2000;
    let repeats = 9;
    let mut medians = Vec::new();
    for l in [50usize, 100, 200] {
        let x1 = gaussian(n, l, l as u64);
        estimate_coherence(&x1, l).unwrap();
        let mut times: Vec<Duration> = (0..repeats)
            .map(|_| {
                let start = Instant::now();
                std::hint::black_box(estimate_coherence(&x1, l).unwrap());
                start.elapsed()
            })
            .collect();
        times.sort();
        medians.push(times[repeats / 2].as_secs_f64());
    }
    let ratios = [medians[1] / medians[0], medians[2] / medians[1]];
    let pass = ratios.iter().all(|&q| q <= 5.0);
    report(
        "criterion 9 runtime scaling",
        pass,
        &format!(
            "median times {:.2} / {:.2} / {:.2} ms at l = 50 / 100 / 200, ratios {:.2}, {:.2}",
            medians[0] * 1e3,
            medians[1] * 1e3,
            medians[2] * 1e3,
            ratios[0],
            ratios[1]
        ),
    );
    assert!(pass);
}
