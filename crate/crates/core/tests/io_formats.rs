mod common;

use common::*;
use kptmatch::io::{self, JsonMode, MatchDocument};
use kptmatch::projection::{DepthImage, FeatureImage};
use kptmatch::*;
use nalgebra::Vector3;
use proptest::prelude::*;

fn f32_value() -> impl Strategy<Value = f64> {
    (-1.0e3f32..1.0e3f32).prop_map(|x| x as f64)
}

fn cloud_strategy() -> impl Strategy<Value = SemanticPointCloud> {
    (1usize..=16, 0usize..=40).prop_flat_map(|(dim, n)| {
        proptest::collection::vec(
            (
                [f32_value(), f32_value(), f32_value()],
                [0.0f32..=1.0, 0.0f32..=1.0, 0.0f32..=1.0],
                proptest::collection::vec(f32_value(), dim),
            ),
            n,
        )
        .prop_map(move |points| {
            let mut cloud = SemanticPointCloud::empty(dim, false).unwrap();
            for (p, c, f) in points {
                cloud
                    .push(Vector3::from(p), c.map(|x| x as f64), &f)
                    .unwrap();
            }
            cloud
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn spcf_round_trip(cloud in cloud_strategy()) {
        let bytes = io::encode_spcf(&cloud).unwrap();
        prop_assert_eq!(bytes.len(), io::SPCF_HEADER_LEN + cloud.len() * io::spcf_record_len(cloud.feature_dim()));
        prop_assert_eq!(io::decode_spcf(&bytes).unwrap(), cloud);
    }

    #[test]
    fn sfim_round_trip(w in 1u32..12, h in 1u32..12, dim in 1u32..8, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = rng(seed);
        let data: Vec<f32> = (0..w * h * dim).map(|_| r.random_range(-5.0..5.0)).collect();
        let img = FeatureImage::new(w, h, dim, data).unwrap();
        let bytes = io::encode_sfim(&img);
        prop_assert_eq!(bytes.len(), io::SFIM_HEADER_LEN + 4 * (w * h * dim) as usize);
        prop_assert_eq!(io::decode_sfim(&bytes).unwrap(), img);
    }

    #[test]
    fn sdep_round_trip(w in 1u32..20, h in 1u32..20, data in proptest::collection::vec(any::<u16>(), 400)) {
        let depth = DepthImage::new(w, h, data[..(w * h) as usize].to_vec()).unwrap();
        let bytes = io::encode_sdep(&depth);
        prop_assert_eq!(io::decode_sdep(&bytes).unwrap(), depth);
    }

    #[test]
    fn every_truncation_is_a_positioned_error(cloud in cloud_strategy(), cut in 0.0..1.0f64) {
        let bytes = io::encode_spcf(&cloud).unwrap();
        let len = (bytes.len() as f64 * cut) as usize;
        prop_assume!(len < bytes.len());
        match io::decode_spcf(&bytes[..len]) {
            Err(Error::TruncatedPayload { offset, .. }) => {
                prop_assert!(offset <= len);
                if len >= io::SPCF_HEADER_LEN {
                    let record = io::spcf_record_len(cloud.feature_dim());
                    prop_assert_eq!((offset - io::SPCF_HEADER_LEN) % record, 0);
                    prop_assert!(len - offset < record);
                }
            }
            Err(Error::BadMagic { .. }) => prop_assert!(false, "prefix of a valid file reported bad magic"),
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn corrupted_bytes_never_panic(cloud in cloud_strategy(), flips in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..6)) {
        let mut bytes = io::encode_spcf(&cloud).unwrap();
        for (at, v) in flips {
            let n = bytes.len();
            bytes[at % n] = v;
        }
        let _ = io::decode_spcf(&bytes);
        let _ = io::decode_sfim(&bytes);
        let _ = io::decode_sdep(&bytes);
    }

    #[test]
    fn template_and_match_json_round_trip(seed in 0u64..5000, occlusion in 0.0..0.4f64) {
        let scene = kptmatch::bench::generate_scene(&kptmatch::bench::SceneSpec {
            rng_seed: seed,
            distractor_count: 80,
            occlusion_fraction: occlusion,
            position_noise_sigma: 0.001,
            feature_noise_sigma: 0.1,
            ..Default::default()
        }).unwrap();
        let text = io::template_to_json(&scene.template).unwrap();
        prop_assert_eq!(&io::template_from_json(&text, JsonMode::Strict).unwrap(), &scene.template);
        for variant in MatchVariant::ALL {
            let params = MatchParams { rng_seed: seed, ..Default::default() };
            let result = variant.run(&scene.template, &scene.cloud, &params).unwrap();
            let doc = MatchDocument { variant: Some(variant), result, params: Some(params) };
            let text = io::match_to_json(&doc).unwrap();
            let back = io::match_from_json(&text, JsonMode::Strict).unwrap();
            prop_assert_eq!(&back, &doc);
            prop_assert_eq!(io::match_to_json(&back).unwrap(), text);
        }
    }
}

#[test]
fn calib_round_trip_and_file_helpers() {
    let dir = tempfile::tempdir().unwrap();
    let fx = synthetic_rgbd(20, 10, 3, 2);
    write_rgbd(dir.path(), &fx);
    assert_eq!(
        io::read_sfim(&dir.path().join("features.sfim")).unwrap(),
        fx.features
    );
    assert_eq!(
        io::read_sdep(&dir.path().join("depth.sdep")).unwrap(),
        fx.depth
    );
    assert_eq!(
        io::read_calib(&dir.path().join("calib.json"), JsonMode::Strict).unwrap(),
        fx.calib
    );
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(leftovers.len(), 3, "{leftovers:?}");
}

#[test]
fn strict_and_lenient_json() {
    let mut r = rng(4);
    let cloud = random_cloud(&mut r, 30, 4, false);
    let t = kptmatch::template_builder::fps_sample(&cloud, 4, &Default::default(), None, "cup")
        .unwrap();
    let mut v: serde_json::Value =
        serde_json::from_str(&io::template_to_json(&t).unwrap()).unwrap();
    v["keypoints"][2]["colour"] = serde_json::json!([1, 0, 0]);
    v["note"] = serde_json::json!("hand edited");
    let text = v.to_string();
    match io::template_from_json(&text, JsonMode::Strict) {
        Err(Error::Json { path, .. }) => {
            assert!(path == "keypoints[2].colour" || path == "note", "{path}")
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(io::template_from_json(&text, JsonMode::Lenient).unwrap(), t);

    v["keypoints"][1]["feature"] = serde_json::json!([1.0, 2.0]);
    match io::template_from_json(&v.to_string(), JsonMode::Lenient) {
        Err(e) => assert!(e.to_string().contains("keypoints[1]"), "{e}"),
        Ok(_) => panic!("short feature accepted"),
    }

    let fx = synthetic_rgbd(4, 4, 2, 1);
    let mut c: serde_json::Value =
        serde_json::from_str(&io::calib_to_json(&fx.calib).unwrap()).unwrap();
    c["intrinsics"]["skew"] = serde_json::json!(0.0);
    match io::calib_from_json(&c.to_string(), JsonMode::Strict) {
        Err(Error::Json { path, .. }) => assert_eq!(path, "intrinsics.skew"),
        other => panic!("{other:?}"),
    }
    c["intrinsics"]["fx"] = serde_json::json!("wide");
    match io::calib_from_json(&c.to_string(), JsonMode::Lenient) {
        Err(Error::Json { path, .. }) => assert_eq!(path, "intrinsics.fx"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn match_json_status_consistency() {
    let scene = kptmatch::bench::generate_scene(&kptmatch::bench::SceneSpec {
        occlusion_fraction: 0.3,
        ..Default::default()
    })
    .unwrap();
    let result = match_template(&scene.template, &scene.cloud, &MatchParams::default()).unwrap();
    let text = io::match_to_json(&MatchDocument {
        variant: None,
        result,
        params: None,
    })
    .unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let k = v["keypoints"]
        .as_array()
        .unwrap()
        .iter()
        .position(|kp| kp["status"] == "inferred")
        .unwrap();
    v["keypoints"][k]["index"] = serde_json::json!(3);
    match io::match_from_json(&v.to_string(), JsonMode::Strict) {
        Err(Error::Json { path, .. }) => assert_eq!(path, format!("keypoints[{k}].index")),
        other => panic!("{other:?}"),
    }
    v["keypoints"][k]["status"] = serde_json::json!("guessed");
    match io::match_from_json(&v.to_string(), JsonMode::Lenient) {
        Err(Error::Json { path, .. }) => assert_eq!(path, format!("keypoints[{k}].status")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn inspect_reports_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let fx = synthetic_rgbd(24, 18, 6, 9);
    write_rgbd(dir.path(), &fx);
    let sfim = io::inspect(&dir.path().join("features.sfim")).unwrap();
    assert!(
        sfim.contains("format: SFIM")
            && sfim.contains("width: 24")
            && sfim.contains("feature_dim: 6"),
        "{sfim}"
    );
    let sdep = io::inspect(&dir.path().join("depth.sdep")).unwrap();
    let valid = fx.depth.data().iter().filter(|&&z| z > 0).count();
    assert!(sdep.contains(&format!("valid_pixels: {valid}")), "{sdep}");
    let calib = io::inspect(&dir.path().join("calib.json")).unwrap();
    assert!(calib.contains("calib"), "{calib}");

    let mut r = rng(1);
    let cloud = random_cloud(&mut r, 25, 6, false);
    io::write_spcf(&dir.path().join("c.spcf"), &cloud).unwrap();
    let spcf = io::inspect(&dir.path().join("c.spcf")).unwrap();
    assert!(spcf.contains("points: 25"), "{spcf}");

    std::fs::write(
        dir.path().join("junk.bin"),
        [0xffu8, 0xfe, 0x00, 0x01, 0x02],
    )
    .unwrap();
    assert!(io::inspect(&dir.path().join("junk.bin")).is_err());
    let mut bytes = io::encode_spcf(&cloud).unwrap();
    bytes.truncate(bytes.len() - 5);
    std::fs::write(dir.path().join("short.spcf"), bytes).unwrap();
    assert!(matches!(
        io::inspect(&dir.path().join("short.spcf")),
        Err(Error::TruncatedPayload { .. })
    ));
}
