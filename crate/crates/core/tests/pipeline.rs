use proptest::prelude::*;
use sgdlab_core::analysis::w2_empirical_1d;
use sgdlab_core::expansion::{truncated_series, Method};
use sgdlab_core::export::{estimates_table, to_csv_string};
use sgdlab_core::model::{family_by_id, observable_by_id};
use sgdlab_core::sgd::enumerate::exact_expectation;
use sgdlab_core::sgd::{mc_estimate, mc_estimate_at, ChainConfig, VarianceReduction};

#[test]
fn estimates_ignore_the_thread_count() {
    let fam = family_by_id("example2").unwrap();
    let phi = observable_by_id("sin", &fam).unwrap();
    let cfg = ChainConfig::new(0.25, 16, vec![0.8], 9).with_variance_reduction(VarianceReduction::Antithetic);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_estimate(&cfg, &fam, &phi, 5_000).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
}

#[test]
fn checkpoints_agree_with_separate_runs() {
    let fam = family_by_id("example1").unwrap();
    let phi = observable_by_id("cos", &fam).unwrap();
    let cfg = ChainConfig::new(0.125, 0, vec![1.0], 4);
    let joint = mc_estimate_at(&cfg, &fam, &phi, &[3, 8], 2_000).unwrap();
    for (k, n) in [3usize, 8].into_iter().enumerate() {
        let single = mc_estimate(&ChainConfig::new(0.125, n, vec![1.0], 4), &fam, &phi, 2_000).unwrap();
        assert_eq!(joint.estimates[k], single);
    }
}

#[test]
fn monte_carlo_approaches_the_expansion_as_eta_shrinks() {
    let fam = family_by_id("example1").unwrap();
    let phi = observable_by_id("sin", &fam).unwrap();
    let mut previous = f64::INFINITY;
    for eta in [0.5, 0.25, 0.125] {
        let n = (2.0 / eta) as usize;
        let exact = exact_expectation(&fam, &phi, &[1.0], eta, n).unwrap();
        let series = truncated_series(&[1.0], n as f64 * eta, eta, &phi, &fam, Method::ClosedForm).unwrap();
        let err = (exact - series.u_trunc).abs();
        assert!(err < previous / 3.0, "eta = {eta}: {err} vs {previous}");
        previous = err;
    }
}

#[test]
fn exported_estimates_parse_back() {
    let fam = family_by_id("ou").unwrap();
    let phi = observable_by_id("square", &fam).unwrap();
    let ns = [1, 4];
    let est: Vec<_> = ns
        .iter()
        .map(|&n| mc_estimate(&ChainConfig::new(0.1, n, vec![1.0], 2), &fam, &phi, 500).unwrap())
        .collect();
    let text = to_csv_string(Some("{\"seed\":2}"), &estimates_table(&ns, &est)).unwrap();
    let mut lines = text.split("\r\n");
    assert_eq!(lines.next(), Some("# {\"seed\":2}"));
    assert_eq!(lines.next(), Some("n,value,std_error,n_samples"));
    for (line, e) in lines.zip(&est) {
        let value: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(value, e.value);
    }
}

proptest! {
    #[test]
    fn w2_is_a_symmetric_translation_metric(
        a in prop::collection::vec(-5.0f64..5.0, 1..40),
        b in prop::collection::vec(-5.0f64..5.0, 1..40),
        shift in -3.0f64..3.0,
    ) {
        let d = w2_empirical_1d(&a, &b);
        prop_assert!(d >= 0.0);
        prop_assert!((d - w2_empirical_1d(&b, &a)).abs() <= 1e-12 * (1.0 + d));
        prop_assert!(w2_empirical_1d(&a, &a) == 0.0);
        let moved: Vec<f64> = a.iter().map(|v| v + shift).collect();
        prop_assert!((w2_empirical_1d(&a, &moved) - shift.abs()).abs() <= 1e-9);
    }
}
