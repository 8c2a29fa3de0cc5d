//! Desk-scale calibration of the noise-bandwidth constant: the procedure is
//! validated (not the published constant, which came from a much larger
//! collection of settings).

mod common;

use snipcov_core::bench::calibrate_h0_constant;
use snipcov_core::sim::{CovSetting, Design, MeanFn, NoiseSpec, SimConfig};

#[test]
fn calibrated_constant_lands_in_sanity_bracket() {
    let mut settings = Vec::new();
    for (cov, n, sigma0) in [
        (CovSetting::I, 50, 0.1),
        (CovSetting::I, 200, 0.25),
        (CovSetting::II, 50, 0.25),
        (CovSetting::II, 200, 0.1),
        (CovSetting::III, 50, 0.25),
        (CovSetting::III, 200, 0.1),
    ] {
        settings.push(SimConfig {
            cov,
            mean: MeanFn::Zero,
            design: Design::SparseFixed { m: 4 },
            n,
            delta: 0.25,
            noise: NoiseSpec::Sigma0Sq(sigma0),
            seed: 0,
        });
    }
    let calibration = calibrate_h0_constant(&settings, 20, 77).unwrap();
    assert_eq!(calibration.points.len(), 6);
    for p in &calibration.points {
        assert!(p.h_hat > 0.0 && p.h_hat < p.delta_hat);
        assert!(p.x > 0.0);
    }
    assert!(
        (0.1..=0.8).contains(&calibration.c),
        "calibrated c = {}",
        calibration.c
    );
}
