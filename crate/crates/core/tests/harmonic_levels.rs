use ccrlab::expr::{Bindings, PotentialExpr};
use ccrlab::lattice::LatticeParams;
use ccrlab::spectral;

#[test]
fn low_levels_of_the_thousand_site_oscillator() {
    let params = LatticeParams::commensurate(1, 1000, 0.0, 0.0).unwrap();
    let ev = spectral::spectrum(&params, &PotentialExpr::parse("x^2/2").unwrap(), &Bindings::new()).unwrap();
    let tau2 = params.tau() * params.tau();

    assert!((ev[0] - 0.5).abs() <= 0.02);

    // four wells in phase space: each level appears four times
    for n in 0..5 {
        let cluster = &ev[4 * n..4 * n + 4];
        let spread = cluster[3] - cluster[0];
        assert!(spread < 1e-9, "level {n} split by {spread:e}");
        assert!(ev[4 * n + 4] - cluster[3] > 0.9);

        let level = cluster.iter().sum::<f64>() / 4.0;
        let first_order = n as f64 + 0.5 - tau2 * (2.0 * (n * n + n) as f64 + 1.0) / 4.0;
        assert!((level - first_order).abs() < 1e-3, "level {n}: {level} vs {first_order}");
    }
}
