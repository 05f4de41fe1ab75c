mod common;

use common::{abs_square_minus_one, grid_prox, scalar};
use proxkit::moreau::{prox_map, proximal_point_run};

#[test]
fn prox_of_abs_square_minus_one_matches_grid_search() {
    let f = abs_square_minus_one();
    let mp = prox_map(&f, 0.25, &scalar(0.0), 1e-12, 10_000).unwrap();
    let (x, v) = grid_prox(|x| (x * x - 1.0).abs(), 0.25, 0.0, -3.0, 3.0, 1e-6);
    assert!((mp.prox_point[0] - x).abs() <= 2e-6, "{} vs {x}", mp.prox_point[0]);
    assert!((mp.envelope_value - v).abs() <= 1e-9, "{} vs {v}", mp.envelope_value);
}

#[test]
fn proximal_point_on_abs_square_minus_one_tracks_grid_oracle() {
    let f = abs_square_minus_one();
    let r = proximal_point_run(&f, 0.25, &scalar(0.2), 40, 0.0).unwrap();
    let xs: Vec<f64> = r.iterates.iter().map(|(_, x)| x[0]).chain([r.final_point[0]]).collect();
    for w in xs.windows(2) {
        // Each step is checked on a local grid around the previous iterate.
        let (x, _) = grid_prox(|x| (x * x - 1.0).abs(), 0.25, w[0], w[0] - 2.0, w[0] + 2.0, 1e-6);
        assert!((w[1] - x).abs() <= 2e-6, "from {}: {} vs {x}", w[0], w[1]);
    }
    assert!((r.final_point[0] - 1.0).abs() <= 1e-4, "{}", r.final_point[0]);
}
