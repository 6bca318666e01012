//! Rotation search (the Wahba problem with outliers).
//!
//! Generates 500 unit-vector correspondences related by an unknown rotation,
//! corrupts 80% of them, and compares the two estimator variants against
//! RANSAC on the same instance.

use imot::baselines::ransac;
use imot::geometry::geodesic_distance;
use imot::problems::RotationSearchAdapter;
use imot::synth::{gen_rotation_search, GeneratorSpec};
use imot::{imot, imot_star, EstimatorConfig};

fn main() -> imot::Result<()> {
    let sigma = 0.01;
    let spec = GeneratorSpec::new(500, sigma, 0.8, 7);
    let inst = gen_rotation_search(&spec);
    let adapter = RotationSearchAdapter::new(inst.pairs.clone());

    let config = EstimatorConfig::default().with_layers(EstimatorConfig::recommended_layers(500));
    let star = imot_star(&adapter, &config)?;
    println!(
        "bound-free : error {:.4} deg, {} inliers, {} iterations",
        geodesic_distance(&star.solution, &inst.ground_truth).to_degrees(),
        star.inliers.len(),
        star.iterations,
    );

    let gamma = 6.0 * sigma;
    let bounded = imot(&adapter, &config.clone().with_noise_bound(gamma))?;
    println!(
        "with bound : error {:.4} deg, {} inliers, {} iterations",
        geodesic_distance(&bounded.solution, &inst.ground_truth).to_degrees(),
        bounded.inliers.len(),
        bounded.iterations,
    );

    let rs = ransac(&adapter, gamma, 200, 0.99, 7)?;
    println!(
        "ransac     : error {:.4} deg, {} inliers",
        geodesic_distance(&rs.solution, &inst.ground_truth).to_degrees(),
        rs.inliers.len(),
    );
    Ok(())
}
