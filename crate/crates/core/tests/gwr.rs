use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smgwr_core::data::{build_design, Column, Dataset, PointSet};
use smgwr_core::local::{gwr_fit, select_gwr_bandwidth, KernelSpec, Neighborhoods};

fn varying(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0]).collect();
    let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let y = (0..n)
        .map(|i| {
            let [u, v] = coords[i];
            (u / 3.0).sin() + (1.0 + 0.3 * v) * x[i] + 0.3 * (rng.random::<f64>() - 0.5)
        })
        .collect();
    Dataset::new(PointSet::from_coords(coords), Column::new("y", y), vec![Column::new("x", x)]).unwrap()
}

#[test]
fn shrinking_bandwidth_never_raises_rss() {
    let ds = varying(80, 4);
    let design = build_design(&ds, false).unwrap();
    let nb = Neighborhoods::new(&ds.points);
    let ladder = [80.0, 60.0, 40.0, 25.0, 12.0];
    let rss: Vec<f64> = ladder
        .iter()
        .map(|&bw| gwr_fit(&design, &nb, KernelSpec::default(), bw).unwrap().rss)
        .collect();
    for pair in rss.windows(2) {
        assert!(pair[1] <= pair[0], "{rss:?}");
    }
}

#[test]
fn searched_bandwidth_lies_in_default_interval() {
    let ds = varying(60, 8);
    let design = build_design(&ds, true).unwrap();
    let nb = Neighborhoods::new(&ds.points);
    let found = select_gwr_bandwidth(&design, &nb, KernelSpec::default(), None).unwrap();
    assert_eq!(found.argmin.fract(), 0.0);
    assert!((4.0..=60.0).contains(&found.argmin));
    let at = gwr_fit(&design, &nb, KernelSpec::default(), found.argmin).unwrap();
    assert!((at.aicc - found.value).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn hat_diagonal_is_a_probability(seed in 0u64..1000, bw in 6usize..40) {
        let ds = varying(40, seed);
        let design = build_design(&ds, false).unwrap();
        let fit = gwr_fit(&design, &Neighborhoods::new(&ds.points), KernelSpec::default(), bw as f64).unwrap();
        prop_assert!(fit.hat_diagonal.iter().all(|&h| (0.0..=1.0 + 1e-12).contains(&h)));
        let trace: f64 = fit.hat_diagonal.iter().sum();
        prop_assert!((trace - fit.trace_s).abs() < 1e-9);
    }
}
