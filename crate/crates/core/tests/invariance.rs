use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssmlab::datagen::random_rotation;
use ssmlab::segmenter::{extract_features, FeatureConfig, SegmenterModel};
use ssmlab::{fixture, ClassTable, Workers};

#[test]
fn features_and_predictions_ignore_pose() {
    let fx = fixture::generate(2, 600, 3).unwrap();
    let cloud = fx.meshes[0].to_point_cloud();
    let cfg = FeatureConfig::default();
    let model = SegmenterModel::untrained(cfg.clone(), ClassTable::landmarks(), &[16, 16], 4);
    let base = extract_features(&cloud, &cfg, Workers::Auto).unwrap();
    let pred = model.predict(&cloud, Workers::Auto).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let r = random_rotation(&mut rng);
        let t = Vector3::from_fn(|_, _| rng.random_range(-100.0..100.0));
        let moved = cloud.transformed(&r, &t);
        let f = extract_features(&moved, &cfg, Workers::Auto).unwrap();
        let dev = base.data.iter().zip(&f.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-9, "{dev}");
        assert_eq!(model.predict(&moved, Workers::Auto).unwrap(), pred);
    }
}
