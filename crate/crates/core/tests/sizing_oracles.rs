mod common;

use common::*;
use fruitlet_nbv::sizing::{boundary_points, fit_ellipse, hcs_on_edges, register_global, HcsParams, RegistrationParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn hcs_matches_exhaustive_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut graphs = vec![
        (4, complete(0, 4)),
        (8, [complete(0, 4), complete(4, 4), vec![(3, 4)]].concat()),
        (3, vec![(0, 1), (1, 2)]),
        (5, vec![(0, 1), (1, 2), (2, 3), (3, 4)]),
    ];
    graphs.extend((0..100).map(|_| random_graph(&mut rng, 8)));
    for (n, edges) in graphs {
        let got = hcs_on_edges(n, &edges, &HcsParams::default());
        let mut sorted = got.clone();
        sorted.sort();
        assert_eq!(sorted, brute_hcs(n, &edges), "n={n} edges={edges:?}");
        for c in &got {
            assert!(c.len() == 2 || 2 * induced_min_cut(c, &edges) > c.len());
        }
        let mut all: Vec<usize> = got.concat();
        let len = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), len, "clusters overlap");
    }
}

#[test]
fn ellipse_axes_within_half_pixel() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let major = rng.gen_range(10.0..80.0);
        let minor = rng.gen_range(10.0..=major);
        let theta = rng.gen_range(0.0..std::f64::consts::PI);
        let (cx, cy) = (rng.gen_range(55.0..65.0), rng.gen_range(55.0..65.0));
        let mask = raster_ellipse(cx, cy, major, minor, theta, 120, 120);
        let e = fit_ellipse(&boundary_points(&mask)).unwrap();
        assert!((e.major - major).abs() < 0.5 && (e.minor - minor).abs() < 0.5, "{major} {minor} -> {e:?}");
    }
}

#[test]
fn registration_recovers_wind_with_spurious_detections() {
    for (wind, sigma) in [
        (WindModel::Uniform(0.01), 0.0),
        (WindModel::Simulator(Default::default()), 0.0),
        (WindModel::Uniform(0.01), 0.0003),
    ] {
        let e = pooled_registration_error(wind, sigma, 0.2, 51);
        assert!(e < 5e-4, "{wind:?} sigma {sigma}: {e}");
    }
}

#[test]
fn robust_loss_beats_squared_loss_on_outliers() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let inst = registration_instance(&mut rng, WindModel::Uniform(0.008), 0.0, 0.2);
    let robust = register_global(&inst.frames, &RegistrationParams::default());
    let squared = register_global(
        &inst.frames,
        &RegistrationParams {
            squared_loss: true,
            ..Default::default()
        },
    );
    assert!(registration_rms_error(&inst, &robust) < registration_rms_error(&inst, &squared));
}

#[test]
fn solver_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for _ in 0..5 {
        let e = gradient_relative_error(&mut rng);
        assert!(e < 1e-5, "{e}");
    }
}
