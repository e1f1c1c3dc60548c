use canopy::pcio::{
    read_cloud, read_label_dataset, read_manifest, read_observations, write_cloud, write_label_dataset,
    write_manifest, write_observations,
};
use canopy::synth::{gen_label_dataset, gen_season, SynthSeasonSpec, SynthTreeSpec};
use canopy::{ColoredPoint, ColoredPointCloud, TreeObservation, YellownessIndex};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(n: usize, seed: u64) -> ColoredPointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            ColoredPoint::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(0.0..10.0),
                rng.random(),
                rng.random(),
                rng.random(),
            )
        })
        .collect();
    ColoredPointCloud::new(format!("cloud-{seed}"), 3, points)
}

#[test]
fn hundred_thousand_points_round_trip_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.ply");
    let cloud = random_cloud(100_000, 1);
    write_cloud(&cloud, &path).unwrap();
    let back = read_cloud(&path).unwrap();
    assert_eq!(back.len(), cloud.len());
    for (a, b) in cloud.points.iter().zip(&back.points) {
        assert_eq!(a.x.to_bits(), b.x.to_bits());
        assert_eq!(a.y.to_bits(), b.y.to_bits());
        assert_eq!(a.z.to_bits(), b.z.to_bits());
        assert_eq!(a.rgb(), b.rgb());
    }
    assert_eq!(back.source_id, cloud.source_id);
    assert_eq!(back.capture_week, 3);
}

#[test]
fn ascii_ply_with_extra_properties_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.ply");
    std::fs::write(
        &path,
        "ply\nformat ascii 1.0\ncomment capture_week 2\nelement vertex 2\nproperty double x\nproperty double y\n\
         property double z\nproperty float nx\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n\
         element face 0\nproperty list uchar int vertex_indices\nend_header\n\
         0.5 1 2 0 10 20 30\n-1 0 3.25 1 200 170 40\n",
    )
    .unwrap();
    let cloud = read_cloud(&path).unwrap();
    assert_eq!(cloud.len(), 2);
    assert_eq!(cloud.points[1].rgb(), [200, 170, 40]);
    assert_eq!(cloud.points[1].z, 3.25);
    assert_eq!(cloud.capture_week, 2);
}

#[test]
fn truncated_binary_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.ply");
    write_cloud(&random_cloud(10, 2), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
    assert!(read_cloud(&path).is_err());
}

#[test]
fn label_dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.csv");
    let spec = SynthTreeSpec {
        point_count: 3000,
        yellow_fraction: 0.4,
        ..Default::default()
    };
    let ds = gen_label_dataset(&spec, 15, 30).unwrap();
    write_label_dataset(&ds, &path).unwrap();
    let back = read_label_dataset(&path).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.toml");
    let spec = SynthSeasonSpec {
        n_trees: 3,
        weeks: 2,
        ..Default::default()
    };
    let season = gen_season(&spec).unwrap();
    write_manifest(&season.manifest, &path).unwrap();
    let back = read_manifest(&path).unwrap();
    assert_eq!(back.entries, season.manifest.entries);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn small_clouds_round_trip(n in 0usize..200, seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        let cloud = random_cloud(n, seed);
        write_cloud(&cloud, &path).unwrap();
        prop_assert_eq!(read_cloud(&path).unwrap(), cloud);
    }

    #[test]
    fn observations_round_trip(ys in proptest::collection::vec((1u64..5000, 0u64..5000), 1..20)) {
        let obs: Vec<TreeObservation> = ys
            .iter()
            .enumerate()
            .map(|(i, &(y, g))| TreeObservation {
                tree_id: format!("T{i:03}"),
                week: 1 + i as u32 % 6,
                index: YellownessIndex::from_counts(y, g).unwrap(),
                ground_truth: if i % 2 == 0 { Some(0.25 * i as f64 / 20.0 - 0.1) } else { None },
                leaf_n_percent: Some(1.5 + i as f64 * 0.07),
            })
            .collect();
        let mut buf = Vec::new();
        canopy::pcio::write_observations_to(&obs, &mut buf).unwrap();
        let back = canopy::pcio::read_observations_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back, obs.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.csv");
        write_observations(&obs, &path).unwrap();
        prop_assert_eq!(read_observations(&path).unwrap(), obs);
    }
}
