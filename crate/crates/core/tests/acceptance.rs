//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any gating criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use myoaudit::audit::{bh_fdr, collect_results, run_audit, AuditConfig, AuditOutput};
use myoaudit::config::PipelineConfig;
use myoaudit::dataset::{AnalysisWindow, N_DEMOGRAPHICS};
use myoaudit::features::{
    build_feature_matrix, power_spectrum, window_features, FeatureCatalog, FeatureConfig, SpectrumEstimator,
    N_FEATURES,
};
use myoaudit::lmm::{fit_all, standardize_design, GroupingFactor, LmmDesign, LmmFit, LmmOptions, LmmProblem};
use myoaudit::pipeline::Pipeline;
use myoaudit::spls::{fit_spls, q2_crossval, standardize_columns, Q2_THRESHOLD};
use myoaudit::synth::{generate_population, oracle_features_multi, oracle_ols, Bandpass, SynthSpec, VarianceBudget};

struct Outcome {
    pass: bool,
    /// Reported but never fails the suite.
    info: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, info: false, detail: detail.into() }
}

fn info(detail: impl Into<String>) -> Outcome {
    Outcome { pass: true, info: true, detail: detail.into() }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_channels(rng: &mut ChaCha8Rng, n_channels: usize, len: usize, fs: f64) -> Vec<Vec<f64>> {
    let common: Vec<f64> = (0..len + 256).map(|_| gaussian(rng)).collect();
    let share = rng.random_range(0.0..0.6);
    (0..n_channels)
        .map(|_| {
            let lo = rng.random_range(5.0..60.0);
            let hi = rng.random_range(200.0..900.0);
            let amp = 10f64.powf(rng.random_range(-2.0..0.5));
            let offset = rng.random_range(-0.05..0.05);
            let mut x: Vec<f64> =
                common.iter().map(|c| share * c + (1.0 - share) * gaussian(rng)).collect();
            Bandpass::new(lo, hi, fs).process(&mut x);
            x[256..].iter().map(|v| amp * v + offset).collect()
        })
        .collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-12
}

fn criterion_1() -> Outcome {
    let fs = 2000.0;
    let cfg = FeatureConfig::default();
    let names = FeatureCatalog::standard().names();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut mismatches = 0;
    let mut windows = 0;
    for _ in 0..25 {
        let chans = random_channels(&mut rng, 4, 2800, fs);
        let engine = window_features(&chans, fs, &cfg).expect("engine accepts window");
        let oracle = oracle_features_multi(&chans, fs, &cfg);
        for (e, o) in engine.iter().zip(&oracle) {
            windows += 1;
            for j in 0..N_FEATURES {
                let err = (e[j] - o[j]).abs() / e[j].abs().max(o[j].abs()).max(1e-300);
                if !close(e[j], o[j], 1e-9) {
                    mismatches += 1;
                }
                if err > worst.0 && (e[j] - o[j]).abs() > 1e-12 {
                    worst = (err, names[j].clone());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && windows == 100 && secs < 30.0,
        format!(
            "{windows} windows x {N_FEATURES} features, {mismatches} mismatches, worst rel err {:.1e} ({}), {secs:.1} s",
            worst.0,
            if worst.1.is_empty() { "-" } else { &worst.1 }
        ),
    )
}

/// Power in the bins at or outside the FE range, by direct DFT projection.
fn out_of_band_power(x: &[f64], fs: f64) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut total = 0.0;
    for j in 0..=n / 2 {
        let f = j as f64 * fs / n as f64;
        if (10.0..500.0).contains(&f) {
            continue;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            let ang = 2.0 * PI * ((j * t) % n) as f64 / n as f64;
            re += (v - mean) * ang.cos();
            im -= (v - mean) * ang.sin();
        }
        let c = if j == 0 || (n % 2 == 0 && j == n / 2) { 1.0 } else { 2.0 };
        total += c * (re * re + im * im) / (n * n) as f64;
    }
    total
}

fn criterion_2() -> Outcome {
    let fs = 2000.0;
    let cfg = FeatureConfig::default();
    let catalog = FeatureCatalog::standard();
    let fe0 = catalog.index_of("FE_10Hz").unwrap();
    let re0 = catalog.index_of("WPT_RE_0").unwrap();
    let pkf = catalog.index_of("PKF").unwrap();
    let mdf = catalog.index_of("MDF").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut parseval_ok, mut re_ok, mut tone_ok) = (0, 0, 0);
    let n_cases = 50;
    for _ in 0..n_cases {
        let x = random_channels(&mut rng, 2, 2800, fs);
        let f = window_features(&x, fs, &cfg).unwrap();
        let fe_sum: f64 = f[0][fe0..fe0 + 49].iter().sum();
        let mean = x[0].iter().sum::<f64>() / x[0].len() as f64;
        let ms = x[0].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x[0].len() as f64;
        let in_band = ms - out_of_band_power(&x[0], fs);
        parseval_ok += close(fe_sum, in_band, 1e-6) as usize;
        let re_sum: f64 = f[0][re0..re0 + 16].iter().sum();
        re_ok += ((re_sum - 1.0).abs() <= 1e-9) as usize;

        let freq = rng.random_range(20.0..450.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        let amp = rng.random_range(0.05..2.0);
        let tone: Vec<f64> = (0..2800).map(|i| amp * (2.0 * PI * freq * i as f64 / fs + phase).sin()).collect();
        let t = window_features(&[tone.clone(), tone.iter().rev().copied().collect()], fs, &cfg).unwrap();
        let bin = power_spectrum(&tone, fs, &SpectrumEstimator::Periodogram).freqs[1];
        tone_ok += ((t[0][pkf] - freq).abs() <= bin && (t[0][mdf] - freq).abs() <= bin) as usize;
    }
    outcome(
        parseval_ok == n_cases && re_ok == n_cases && tone_ok == n_cases,
        format!("Parseval {parseval_ok}/{n_cases}, WPT_RE sum {re_ok}/{n_cases}, tone PKF/MDF {tone_ok}/{n_cases}"),
    )
}

fn criterion_3() -> Outcome {
    let catalog = FeatureCatalog::standard();
    let spec = SynthSpec { n_subjects: 20, n_gestures: 2, n_channels: 2, trial_length: 512, ..SynthSpec::default() };
    let pop = generate_population(&spec).unwrap();
    let fm = build_feature_matrix(&pop.tensors, &catalog, AnalysisWindow::DEFAULT_FRACTION, &FeatureConfig::default())
        .unwrap();
    let data = standardize_design(&fm, &pop.demographics).unwrap();
    let fits = fit_all(&data, &LmmOptions::default()).unwrap();
    let results = collect_results(&fits, &AuditConfig::default());
    let pairs = results.len();
    outcome(
        catalog.len() == 147 && fm.n_features() == 147 && pairs == 1764 && pairs == 147 * N_DEMOGRAPHICS,
        format!("catalog {} features, audit grid {pairs} pairs", catalog.len()),
    )
}

/// Responses whose noise has no component along any grouping factor, so the
/// REML variance components sit at the boundary. At this size the normal and
/// t references differ by under 5e-5.
fn criterion_4() -> Outcome {
    let (ns, ng, nc) = (81, 10, 12);
    let n = ns * ng * nc;
    let mut worst_beta = 0.0f64;
    let mut worst_p = 0.0f64;
    let mut largest_component = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
        let (mut subj, mut gest, mut chan) = (Vec::new(), Vec::new(), Vec::new());
        for s in 0..ns {
            for g in 0..ng {
                for c in 0..nc {
                    subj.push(s);
                    gest.push(g);
                    chan.push(c);
                }
            }
        }
        let k = 4;
        let cov = DMatrix::from_fn(n, k, |_, _| gaussian(&mut rng));
        let slopes = [0.0, 0.02, 0.05, 0.3];
        let mut noise: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
        for (idx, levels) in [(&subj, ns), (&gest, ng), (&chan, nc)] {
            let mut sums = vec![0.0; levels];
            let mut counts = vec![0.0; levels];
            for (i, &l) in idx.iter().enumerate() {
                sums[l] += noise[i];
                counts[l] += 1.0;
            }
            for (i, &l) in idx.iter().enumerate() {
                noise[i] -= sums[l] / counts[l];
            }
        }
        let y: Vec<f64> = (0..n).map(|i| 1.0 + (0..k).map(|j| slopes[j] * cov[(i, j)]).sum::<f64>() + noise[i]).collect();
        let factors = vec![
            GroupingFactor::from_labels("subject", &subj),
            GroupingFactor::from_labels("gesture", &gest),
            GroupingFactor::from_labels("channel", &chan),
        ];
        let names = (0..k).map(|j| format!("x{j}")).collect();
        let design = LmmDesign::with_intercept(names, &cov, factors);
        let fit = LmmProblem::new(&design).unwrap().fit("y", &y, &LmmOptions::default()).unwrap();
        let ols = oracle_ols(&y, &design.x).unwrap();
        largest_component = fit.sigma2_random.iter().fold(largest_component, |m, v| m.max(*v));
        for j in 0..=k {
            worst_beta = worst_beta.max((fit.beta[j] - ols.beta[j]).abs());
            worst_p = worst_p.max((fit.p[j] - ols.p[j]).abs());
        }
    }
    outcome(
        worst_beta <= 1e-4 && worst_p <= 1e-4,
        format!("20 designs, max |dbeta| {worst_beta:.1e}, max |dp| {worst_p:.1e}, largest fitted random variance {largest_component:.1e}"),
    )
}

fn criterion_5() -> Outcome {
    let (ns, ng, nc) = (81, 10, 12);
    let n = ns * ng * nc;
    let beta_true = [0.3, 0.5, -0.25];
    let mut recovered = 0;
    let mut beta_ok = 0;
    let mut slowest = 0.0f64;
    let mut estimates = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let u_s: Vec<f64> = (0..ns).map(|_| gaussian(&mut rng)).collect();
        let u_g: Vec<f64> = (0..ng).map(|_| 0.5f64.sqrt() * gaussian(&mut rng)).collect();
        let u_c: Vec<f64> = (0..nc).map(|_| 0.3f64.sqrt() * gaussian(&mut rng)).collect();
        let age: Vec<f64> = (0..ns).map(|_| gaussian(&mut rng)).collect();
        let sex: Vec<f64> = (0..ns).map(|s| if s % 2 == 0 { -0.5 } else { 0.5 }).collect();
        let (mut subj, mut gest, mut chan, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut cov = Vec::new();
        for s in 0..ns {
            for g in 0..ng {
                for c in 0..nc {
                    subj.push(s);
                    gest.push(g);
                    chan.push(c);
                    cov.push([age[s], sex[s]]);
                    y.push(beta_true[0] + beta_true[1] * age[s] + beta_true[2] * sex[s] + u_s[s] + u_g[g] + u_c[c] + gaussian(&mut rng));
                }
            }
        }
        let x = DMatrix::from_fn(n, 2, |i, j| cov[i][j]);
        let factors = vec![
            GroupingFactor::from_labels("subject", &subj),
            GroupingFactor::from_labels("gesture", &gest),
            GroupingFactor::from_labels("channel", &chan),
        ];
        let design = LmmDesign::with_intercept(vec!["age".into(), "sex".into()], &x, factors);
        let start = Instant::now();
        let fit = LmmProblem::new(&design).unwrap().fit("y", &y, &LmmOptions::default()).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let s2 = fit.sigma2_random[0];
        estimates.push(s2);
        recovered += (0.7..=1.3).contains(&s2) as usize;
        beta_ok += (0..3).all(|j| (fit.beta[j] - beta_true[j]).abs() <= 3.0 * fit.se[j]) as usize;
    }
    estimates.sort_by(f64::total_cmp);
    outcome(
        recovered >= 19 && beta_ok >= 19 && slowest < 5.0,
        format!(
            "sigma2_subject in [0.7, 1.3] {recovered}/20 (range {:.3}..{:.3}), beta within 3 se {beta_ok}/20, slowest fit of {n} obs {slowest:.2} s",
            estimates[0],
            estimates[19]
        ),
    )
}

fn brute_force_bh(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    (0..m)
        .map(|i| {
            let mut best = 1.0f64;
            for j in 0..m {
                if p[j] >= p[i] {
                    let rank = p.iter().filter(|&&q| q <= p[j]).count();
                    best = best.min(p[j] * m as f64 / rank as f64);
                }
            }
            best.min(1.0)
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut exact = 0;
    for _ in 0..1000 {
        let m = rng.random_range(1..60);
        let p: Vec<f64> = (0..m)
            .map(|_| if rng.random_bool(0.3) { rng.random::<f64>() * 1e-3 } else { rng.random::<f64>() })
            .collect();
        exact += (bh_fdr(&p) == brute_force_bh(&p)) as usize;
    }
    let hand = bh_fdr(&[0.005, 0.009, 0.05, 0.5]);
    let want = [0.018, 0.018, 0.0667, 0.5];
    let hand_ok = hand.iter().zip(want).all(|(a, b)| (a - b).abs() < 5e-5);
    outcome(
        exact == 1000 && hand_ok,
        format!("{exact}/1000 vectors equal brute force, hand case {hand:?}"),
    )
}

fn planted_spec(seed: u64) -> SynthSpec {
    SynthSpec { n_subjects: 81, n_gestures: 5, n_channels: 6, trial_length: 2000, seed, ..SynthSpec::default() }
}

/// Effect strengths calibrated so that indicator features land near partial
/// eta squared 0.10 at this population size.
pub const SEX_AMPLITUDE: f64 = 0.25;
pub const FAT_LOWPASS: f64 = 0.2;

fn criterion_7() -> Outcome {
    let catalog = FeatureCatalog::standard();
    let cfg = AuditConfig::default();
    let (mut hits, mut planted_pairs, mut false_flags, mut null_pairs) = (0, 0, 0, 0);
    let mut null_clean = 0;
    let mut eta = Vec::new();
    for seed in 0..20u64 {
        let pop = generate_population(&planted_spec(seed).with_planted(SEX_AMPLITUDE, FAT_LOWPASS)).unwrap();
        let fm = build_feature_matrix(&pop.tensors, &catalog, AnalysisWindow::DEFAULT_FRACTION, &FeatureConfig::default())
            .unwrap();
        let fits = fit_all(&standardize_design(&fm, &pop.demographics).unwrap(), &LmmOptions::default()).unwrap();
        let audit = run_audit(&fits, &cfg);
        let planted = pop.ground_truth.planted_demographics();
        for r in &audit.results {
            if pop.ground_truth.is_planted(&r.feature_name, &r.demographic_name) {
                planted_pairs += 1;
                hits += r.significant as usize;
                eta.push(r.eta2_partial);
            } else if !planted.contains(&r.demographic_name.as_str()) {
                null_pairs += 1;
                false_flags += r.significant as usize;
            }
        }

        let null_spec = SynthSpec { variance: VarianceBudget::zero(), ..planted_spec(1000 + seed) };
        let pop = generate_population(&null_spec).unwrap();
        let fm = build_feature_matrix(&pop.tensors, &catalog, AnalysisWindow::DEFAULT_FRACTION, &FeatureConfig::default())
            .unwrap();
        let fits = fit_all(&standardize_design(&fm, &pop.demographics).unwrap(), &LmmOptions::default()).unwrap();
        null_clean += (run_audit(&fits, &cfg).n_significant == 0) as usize;
    }
    eta.sort_by(f64::total_cmp);
    let sensitivity = hits as f64 / planted_pairs as f64;
    let false_rate = false_flags as f64 / null_pairs as f64;
    outcome(
        sensitivity >= 0.9 && false_rate <= 0.05 && null_clean >= 19,
        format!(
            "sensitivity {hits}/{planted_pairs} = {sensitivity:.3}, false-flag rate {false_flags}/{null_pairs} = {false_rate:.4}, median planted eta2 {:.3}, null seeds with 0 flags {null_clean}/20",
            eta[eta.len() / 2]
        ),
    )
}

fn criterion_8() -> Outcome {
    // Rank-one response driven by a sparse weight vector.
    let (n, p) = (10_000, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let x = DMatrix::from_fn(n, p, |_, _| gaussian(&mut rng));
    let mut w = DVector::zeros(p);
    for (i, v) in [(3, 1.0), (11, -0.7), (20, 0.5), (33, 0.8)] {
        w[i] = v;
    }
    let xs = standardize_columns(&x).unwrap();
    let signal = &xs * &w;
    let y = DMatrix::from_fn(n, 3, |i, j| signal[i] * [1.0, -0.5, 2.0][j]);
    let ys = standardize_columns(&y).unwrap();
    let model = fit_spls(&xs, &ys, 4, 1).unwrap();
    let u = DVector::from_vec(model.components[0].u.clone());
    let cos = u.dot(&w).abs() / (u.norm() * w.norm());
    let q2_signal = q2_crossval(&x, &y, 4, 1, 5, 1).unwrap()[0];

    let mut low_q2 = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(8100 + seed);
        let x = DMatrix::from_fn(100, 50, |_, _| gaussian(&mut rng));
        let y = DMatrix::from_fn(100, 3, |_, _| gaussian(&mut rng));
        let q2 = q2_crossval(&x, &y, 10, 1, 5, seed).unwrap();
        low_q2 += (q2[0] < Q2_THRESHOLD) as usize;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(809);
    let xd = standardize_columns(&DMatrix::from_fn(60, 12, |_, _| gaussian(&mut rng))).unwrap();
    let yd = standardize_columns(&DMatrix::from_fn(60, 4, |_, _| gaussian(&mut rng))).unwrap();
    let dense = fit_spls(&xd, &yd, 12, 1).unwrap();
    let m = xd.tr_mul(&yd);
    let eig_u = SymmetricEigen::new(&m * m.transpose());
    let eig_v = SymmetricEigen::new(m.transpose() * &m);
    let top = |e: &SymmetricEigen<f64, nalgebra::Dyn>| e.eigenvectors.column(e.eigenvalues.imax()).into_owned();
    let (ou, ov) = (top(&eig_u), top(&eig_v));
    let du = DVector::from_vec(dense.components[0].u.clone());
    let dv = DVector::from_vec(dense.components[0].v.clone());
    let dist = |a: &DVector<f64>, b: &DVector<f64>| (a - b).amax().min((a + b).amax());
    let dense_err = dist(&du, &ou).max(dist(&dv, &ov));

    outcome(
        cos > 0.999 && q2_signal > 0.9 && low_q2 >= 18 && dense_err < 1e-6,
        format!(
            "|cos(u1, w)| {cos:.6}, Q2_1 {q2_signal:.4}, noise Q2_1 < {Q2_THRESHOLD} in {low_q2}/20, dense vs SVD max err {dense_err:.1e}"
        ),
    )
}

fn smoke_config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

/// CSV files below `root`, keyed by relative path.
fn csv_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "csv"))
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    let mut slowest: f64 = 0.0;
    for name in ["a", "b"] {
        let mut cfg = match PipelineConfig::from_path(&smoke_config_path()) {
            Ok(c) => c,
            Err(e) => return outcome(false, format!("smoke config: {e}")),
        };
        cfg.out = dir.path().join(name);
        let t0 = Instant::now();
        if let Err(e) = Pipeline::new(cfg).and_then(|mut p| p.run()) {
            return outcome(false, format!("run {name} failed: {e}"));
        }
        slowest = slowest.max(t0.elapsed().as_secs_f64());
        runs.push(csv_files(&dir.path().join(name)));
    }
    let names_match = runs[0].iter().map(|f| &f.0).eq(runs[1].iter().map(|f| &f.0));
    let differing: Vec<&str> =
        runs[0].iter().zip(&runs[1]).filter(|(a, b)| a.1 != b.1).map(|(a, _)| a.0.as_str()).collect();
    outcome(
        names_match && differing.is_empty() && slowest < 60.0,
        format!(
            "{} CSVs compared, {} differ{}, slowest run {slowest:.1} s",
            runs[0].len(),
            differing.len(),
            if names_match { "" } else { ", file sets differ" }
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn read_payload<T: serde::de::DeserializeOwned>(path: &Path, key: &str) -> T {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    serde_json::from_value(v[key].clone()).unwrap()
}

/// Non-gating: needs a real dataset exported to the portable format.
fn criterion_10() -> Outcome {
    let Some(manifest) = std::env::var_os("MYOAUDIT_REAL_MANIFEST") else {
        return info("skipped; set MYOAUDIT_REAL_MANIFEST to a dataset manifest.json to run it");
    };
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig { dataset: Some(manifest.into()), out: dir.path().to_path_buf(), ..PipelineConfig::default() };
    if let Err(e) = Pipeline::new(cfg).and_then(|mut p| p.run()) {
        return info(format!("pipeline failed: {e}"));
    }
    let audit: AuditOutput = read_payload(&dir.path().join("audit.json"), "audit");
    let fits: Vec<LmmFit> = read_payload(&dir.path().join("lmm_fits.json"), "fits");
    let top_demo = audit.distributions.first().map(|b| (b.demographic.clone(), b.median));
    let top_feature = audit.summaries.first().map(|s| (s.feature_name.clone(), s.n_significant));
    let r2c = median(fits.iter().map(|f| f.r2_conditional).collect());
    let checks = [
        ((audit.n_significant as i64 - 109).abs() <= 30, format!("significant pairs {} (paper 109)", audit.n_significant)),
        (top_demo.as_ref().is_some_and(|d| d.0 == "Sex"), format!("largest median eta2 {:?} (paper Sex, 0.07)", top_demo)),
        (top_feature.as_ref().is_some_and(|f| f.0 == "PKF"), format!("top feature {:?} (paper PKF, 5)", top_feature)),
        ((0.5..=0.8).contains(&r2c), format!("median conditional R2 {r2c:.3} (paper 0.65)")),
    ];
    let agree = checks.iter().filter(|c| c.0).count();
    let detail: Vec<String> = checks.iter().map(|c| format!("{}{}", if c.0 { "" } else { "DEVIATES " }, c.1)).collect();
    info(format!("{agree}/4 targets met; {}", detail.join("; ")))
}

fn main() {
    let criteria: Vec<(&str, &str, fn() -> Outcome)> = vec![
        ("1", "feature-oracle equivalence", criterion_1),
        ("2", "spectral invariants", criterion_2),
        ("3", "catalog shape", criterion_3),
        ("4", "LMM degenerate equivalence", criterion_4),
        ("5", "LMM recovery", criterion_5),
        ("6", "FDR correctness", criterion_6),
        ("7", "planted-effect audit", criterion_7),
        ("8", "sPLS recovery", criterion_8),
        ("9", "end-to-end determinism", criterion_9),
        ("10", "real-data replication (non-gating)", criterion_10),
    ];
    let filter = std::env::args().nth(1).filter(|a| !a.starts_with('-'));
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if filter.as_deref().is_some_and(|f| f != id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        println!(
            "[{}] {id}. {name}: {} ({:.1} s)",
            if o.info {
                "INFO"
            } else if o.pass {
                "PASS"
            } else {
                "FAIL"
            },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
