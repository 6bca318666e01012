//! Point cloud registration with 90% outlier correspondences.
//!
//! Generates 1000 putative 3D correspondences under a random rigid motion,
//! replaces 90% of the targets with random points, and recovers the motion.

use imot::geometry::geodesic_distance;
use imot::problems::RegistrationAdapter;
use imot::synth::{gen_registration, GeneratorSpec};
use imot::{imot, EstimatorConfig};

fn main() -> imot::Result<()> {
    let sigma = 0.01;
    let spec = GeneratorSpec::new(1000, sigma, 0.9, 13);
    let inst = gen_registration(&spec, None)?;
    let adapter = RegistrationAdapter::new(inst.pairs.clone());

    let config = EstimatorConfig::default()
        .with_layers(EstimatorConfig::recommended_layers(1000))
        .with_noise_bound(5.0 * sigma);
    let result = imot(&adapter, &config)?;

    let rot_err = geodesic_distance(&result.solution.rotation, &inst.ground_truth.rotation);
    let trans_err = (result.solution.translation - inst.ground_truth.translation).norm();
    println!(
        "rotation error {:.4} deg, translation error {:.5}",
        rot_err.to_degrees(),
        trans_err,
    );
    println!(
        "{} of {} correspondences kept in {} iterations",
        result.inliers.len(),
        inst.pairs.len(),
        result.iterations,
    );

    let false_keeps = result.inliers.iter().filter(|&&i| !inst.labels[i]).count();
    println!("outliers kept by mistake: {false_keeps}");
    Ok(())
}
