//! Full second-order dynamics with an offset: the convoluted equation keeps
//! the whole history and settles away from the Gibbs state.

use bathcorr::master_eq::{evolve_convoluted, steady_state_report, BathInput, EvolveOptions, SystemSpec};
use bathcorr::oracles::ohmic_golden_rule_gamma;
use bathcorr::Complex64;
use nalgebra::DMatrix;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[test]
fn convoluted_steady_state_departs_from_gibbs_with_offset() {
    let h = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.0), c(0.0), c(-0.5)]);
    let s = DMatrix::from_row_slice(2, 2, &[c(0.5), c(1.0), c(1.0), c(-0.5)]);
    let sys = SystemSpec::new(&h, &s).unwrap();
    let up = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
    let down = DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]);
    let opts = EvolveOptions {
        record_stride: 100,
        ..EvolveOptions::new(2000.0, 0.05)
    };
    let mut gibbs = Vec::new();
    let mut dependence = Vec::new();
    for c0 in [0.0, 0.05, 0.1, 0.3] {
        let bath = BathInput::from_rates(c0, |w| c(ohmic_golden_rule_gamma(0.1, 1.0, 1.0, w))).unwrap();
        let a = evolve_convoluted(&sys, &bath, &up, &opts).unwrap();
        let b = evolve_convoluted(&sys, &bath, &down, &opts).unwrap();
        let rep = steady_state_report(&a, Some(&b), &sys, 1.0);
        gibbs.push(rep.gibbs_distance);
        dependence.push(rep.initial_state_dependence.unwrap());
    }
    println!("gibbs distance {gibbs:?}\ninitial-state dependence {dependence:?}");
    assert!(gibbs[0] < 1e-3);
    assert!(gibbs.windows(2).all(|w| w[1] > w[0]));
    assert!(gibbs[3] > 10.0 * gibbs[0]);
    assert!(dependence[0] < 1e-3);
    assert!(dependence.windows(2).all(|w| w[1] > w[0]));
}
