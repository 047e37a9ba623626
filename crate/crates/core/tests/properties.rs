use nalgebra::DMatrix;
use proptest::prelude::*;

use myoaudit::audit::{aggregate_features, bh_fdr, SensitivityResult};
use myoaudit::dataset::{DemographicTable, DEMOGRAPHIC_COLUMNS, N_DEMOGRAPHICS};
use myoaudit::features::{window_features, FeatureCatalog, FeatureConfig, FeatureMatrix, RowKey};
use myoaudit::mice::{mice_impute, MiceConfig};
use myoaudit::spls::{build_cim, fit_spls, hac_complete, leaf_order, standardize_columns};

fn names() -> Vec<String> {
    FeatureCatalog::standard().names()
}

fn value(feats: &[f64], names: &[String], name: &str) -> f64 {
    feats[names.iter().position(|n| n == name).unwrap()]
}

fn window_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 400..900)
}

fn is_permutation(order: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    order.len() == n && order.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bh_is_bounded_monotone_and_order_equivariant(p in prop::collection::vec(0.0f64..=1.0, 1..60), rot in 0usize..60) {
        let adj = bh_fdr(&p);
        for (a, raw) in adj.iter().zip(&p) {
            // p * m / m may round one ulp below p.
            prop_assert!(*a >= *raw * (1.0 - f64::EPSILON) && *a <= 1.0);
        }
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] < p[j] {
                    prop_assert!(adj[i] <= adj[j]);
                }
            }
        }
        let k = rot % p.len();
        let mut rotated = p.clone();
        rotated.rotate_left(k);
        let mut expect = adj.clone();
        expect.rotate_left(k);
        prop_assert_eq!(bh_fdr(&rotated), expect);
    }

    #[test]
    fn amplitude_scaling_moves_only_amplitude_features(w in window_strategy(), scale in 0.1f64..20.0) {
        let cfg = FeatureConfig::default();
        let names = names();
        let base = window_features(std::slice::from_ref(&w), 2000.0, &cfg).unwrap()[0];
        let scaled_w: Vec<f64> = w.iter().map(|v| v * scale).collect();
        let scaled = window_features(&[scaled_w], 2000.0, &cfg).unwrap()[0];
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1e-12);
        for n in ["MAV", "RMS", "WL", "IAV", "STD", "DAMV", "MPV"] {
            prop_assert!(rel(value(&scaled, &names, n), scale * value(&base, &names, n)), "{}", n);
        }
        let mut invariant: Vec<String> =
            ["ZC", "SSC", "MNF", "MDF", "PKF", "HMob", "HCom", "Skew", "Kurt", "HFD", "NP", "MFV"].iter().map(|s| s.to_string()).collect();
        invariant.extend(names.iter().filter(|n| n.starts_with("WPT_RE_") || n.starts_with("Hist")).cloned());
        for n in &invariant {
            let (a, b) = (value(&base, &names, n), value(&scaled, &names, n));
            prop_assert!((a - b).abs() <= 1e-7 * a.abs().max(1.0), "{} {} {}", n, a, b);
        }
    }

    #[test]
    fn relative_wavelet_energy_is_a_distribution(w in window_strategy()) {
        let names = names();
        let f = window_features(&[w], 2000.0, &FeatureConfig::default()).unwrap()[0];
        let re: Vec<f64> = names.iter().zip(f.iter()).filter(|(n, _)| n.starts_with("WPT_RE_")).map(|(_, v)| *v).collect();
        prop_assert_eq!(re.len(), 16);
        prop_assert!(re.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((re.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inter_channel_feature_is_bounded(a in window_strategy(), mix in -1.0f64..1.0) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| mix * v + (1.0 - mix.abs()) * ((i * 7919) % 13) as f64 / 13.0).collect();
        let f = window_features(&[a, b], 2000.0, &FeatureConfig::default()).unwrap();
        let xch = f[0][146];
        prop_assert!((-1.0..=1.0).contains(&xch));
        prop_assert_eq!(xch, f[1][146]);
    }

    #[test]
    fn significant_total_matches_feature_counts(flags in prop::collection::vec(any::<bool>(), 12 * 8)) {
        let results: Vec<SensitivityResult> = flags
            .iter()
            .enumerate()
            .map(|(k, &s)| SensitivityResult {
                feature_name: format!("F{}", k / 12),
                demographic_name: DEMOGRAPHIC_COLUMNS[k % 12].to_string(),
                beta: 0.0,
                p_raw: 0.5,
                p_fdr: 0.5,
                eta2_partial: (k % 17) as f64 / 100.0,
                significant: s,
            })
            .collect();
        let summaries = aggregate_features(&results);
        prop_assert_eq!(summaries.len(), 8);
        prop_assert_eq!(summaries.iter().map(|s| s.n_significant).sum::<usize>(), flags.iter().filter(|f| **f).count());
        for w in summaries.windows(2) {
            prop_assert!(w[0].n_significant >= w[1].n_significant);
        }
    }

    #[test]
    fn demographics_csv_roundtrip_is_exact(rows in prop::collection::vec(prop::collection::vec(prop::option::of(0.5f64..1e3), N_DEMOGRAPHICS), 1..12)) {
        let mut table = DemographicTable { subject_ids: Vec::new(), cells: Vec::new() };
        for (i, r) in rows.iter().enumerate() {
            let mut cells = [None; N_DEMOGRAPHICS];
            cells.copy_from_slice(r);
            cells[1] = Some((i % 2) as f64);
            table.subject_ids.push(format!("S{i:03}"));
            table.cells.push(cells);
        }
        let back = DemographicTable::parse_csv(&table.to_csv(Some("# stamp\n"))).unwrap();
        prop_assert_eq!(back, table);
    }

    #[test]
    fn feature_matrix_csv_roundtrip_is_exact(vals in prop::collection::vec(-1e6f64..1e6, 147 * 3)) {
        let mut m = FeatureMatrix::empty(&FeatureCatalog::standard());
        for r in 0..3 {
            m.push_row(RowKey { subject: format!("S{r}"), gesture: r as u32 + 1, channel: r }, &vals[r * 147..(r + 1) * 147]);
        }
        let back = FeatureMatrix::from_csv(&m.to_csv(Some("# stamp\n"))).unwrap();
        prop_assert_eq!(back.values, m.values);
        prop_assert_eq!(back.rows, m.rows);
    }

    #[test]
    fn leaf_orders_are_permutations(points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..25)) {
        let merges = hac_complete(&points);
        prop_assert_eq!(merges.len(), points.len() - 1);
        for w in merges.windows(2) {
            prop_assert!(w[0].distance <= w[1].distance + 1e-12);
        }
        prop_assert!(is_permutation(&leaf_order(points.len(), &merges), points.len()));
    }

    #[test]
    fn negating_a_feature_column_flips_only_its_loading(seed in 0u64..1000, col in 0usize..10) {
        let (n, p, q) = (30, 10, 4);
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let x = DMatrix::from_fn(n, p, |_, _| next());
        let y = DMatrix::from_fn(n, q, |i, j| x[(i, j)] + 0.5 * next());
        let xs = standardize_columns(&x).unwrap();
        let ys = standardize_columns(&y).unwrap();
        let mut xneg = xs.clone();
        xneg.column_mut(col).neg_mut();
        let a = fit_spls(&xs, &ys, p, 1).unwrap();
        let b = fit_spls(&xneg, &ys, p, 1).unwrap();
        for i in 0..p {
            let sign = if i == col { -1.0 } else { 1.0 };
            prop_assert!((a.components[0].u[i] - sign * b.components[0].u[i]).abs() < 1e-8);
        }
        for j in 0..q {
            prop_assert!((a.components[0].v[j] - b.components[0].v[j]).abs() < 1e-8);
        }
        let names_x: Vec<String> = (0..p).map(|i| format!("x{i}")).collect();
        let names_y: Vec<String> = (0..q).map(|j| format!("y{j}")).collect();
        let cim = build_cim(&a, 1, &names_x, &names_y).unwrap();
        prop_assert!(is_permutation(&cim.row_order, p) && is_permutation(&cim.col_order, q));
    }

    #[test]
    fn mice_fills_every_gap_and_keeps_observed_cells(seed in 0u64..500, holes in prop::collection::vec((0usize..24, 0usize..12), 0..20)) {
        let mut table = DemographicTable { subject_ids: Vec::new(), cells: Vec::new() };
        for i in 0..24 {
            let mut row = [None; N_DEMOGRAPHICS];
            for (j, c) in row.iter_mut().enumerate() {
                *c = Some(if j == 1 { (i % 2) as f64 } else { 10.0 + ((i * 31 + j * 17 + seed as usize) % 23) as f64 });
            }
            table.subject_ids.push(format!("S{i:03}"));
            table.cells.push(row);
        }
        let original = table.clone();
        for &(i, j) in &holes {
            if j != 1 {
                table.cells[i][j] = None;
            }
        }
        let (done, report) = mice_impute(&table, &MiceConfig { seed, ..MiceConfig::default() }).unwrap();
        prop_assert_eq!(done.n_missing(), 0);
        prop_assert_eq!(report.cells.len(), table.n_missing());
        for i in 0..24 {
            for j in 0..N_DEMOGRAPHICS {
                if table.cells[i][j].is_some() {
                    prop_assert_eq!(done.cells[i][j], original.cells[i][j]);
                }
            }
        }
    }
}
