//! Planted-effect sweep: prints indicator effect sizes and flag rates.
//!
//! Usage: planted_sweep [sex_strength] [fat_strength] [n_seeds]

use std::time::Instant;

use myoaudit::audit::{run_audit, AuditConfig};
use myoaudit::dataset::AnalysisWindow;
use myoaudit::features::{build_feature_matrix, FeatureCatalog, FeatureConfig};
use myoaudit::lmm::{fit_all, standardize_design, LmmOptions};
use myoaudit::synth::{generate_population, SynthSpec};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let sex = args.first().copied().unwrap_or(0.5);
    let fat = args.get(1).copied().unwrap_or(0.3);
    let seeds = args.get(2).copied().unwrap_or(3.0) as u64;
    let catalog = FeatureCatalog::standard();
    for seed in 0..seeds {
        let t0 = Instant::now();
        let spec = SynthSpec {
            n_subjects: 81,
            n_gestures: 5,
            n_channels: 6,
            trial_length: 2000,
            seed,
            ..SynthSpec::default()
        }
        .with_planted(sex, fat);
        let pop = generate_population(&spec).unwrap();
        let fm = build_feature_matrix(&pop.tensors, &catalog, AnalysisWindow::DEFAULT_FRACTION, &FeatureConfig::default())
            .unwrap();
        let t1 = t0.elapsed();
        let data = standardize_design(&fm, &pop.demographics).unwrap();
        let fits = fit_all(&data, &LmmOptions::default()).unwrap();
        let audit = run_audit(&fits, &AuditConfig::default());
        let t2 = t0.elapsed();
        let planted = pop.ground_truth.planted_demographics();
        let mut hits = 0;
        let mut total = 0;
        let mut false_flags = 0;
        let mut null_pairs = 0;
        for r in &audit.results {
            if pop.ground_truth.is_planted(&r.feature_name, &r.demographic_name) {
                total += 1;
                hits += r.significant as usize;
                print!(" {}={:.3}", r.feature_name, r.eta2_partial);
            } else if !planted.contains(&r.demographic_name.as_str()) {
                null_pairs += 1;
                false_flags += r.significant as usize;
            }
        }
        if std::env::var_os("SWEEP_VERBOSE").is_some() {
            for r in audit.results.iter().filter(|r| r.demographic_name == "Subcutaneous_Fat_1") {
                print!(" [{}={:.3}]", r.feature_name, r.eta2_partial);
            }
        }
        println!();
        let collateral: Vec<String> = audit
            .results
            .iter()
            .filter(|r| r.significant && planted.contains(&r.demographic_name.as_str()))
            .filter(|r| !pop.ground_truth.is_planted(&r.feature_name, &r.demographic_name))
            .map(|r| format!("{}:{}", r.feature_name, r.demographic_name))
            .collect();
        println!(
            "seed {seed}: sensitivity {hits}/{total}, false flags {false_flags}/{null_pairs}, collateral {}, extract {:.1?} total {:.1?}",
            collateral.len(),
            t1,
            t2
        );
    }
}
