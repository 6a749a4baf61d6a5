use actionspotter::dataset::{
    predictions_from_jsonl, predictions_to_jsonl, read_annotations, read_feature_file, synth_generate,
    write_annotations, write_feature_file, Dataset, FeatureSequence, SpotPrediction, SynthConfig,
};
use actionspotter::env::BrowseActionSet;
use actionspotter::nn::{Checkpoint, ModelParameters, ModelShape};
use actionspotter::seed;
use actionspotter::trainer::HyperParams;
use actionspotter::Error;
use proptest::prelude::*;

proptest! {
    #[test]
    fn feature_bytes_round_trip(
        rows in 1usize..20, dim in 1usize..6, span in 1usize..4,
        vals in prop::collection::vec(-1e6f64..1e6, 120)
    ) {
        let data: Vec<f64> = vals.iter().cycle().take(rows * dim).copied().collect();
        let seq = FeatureSequence::new("v", dim, span, data).unwrap();
        let back = FeatureSequence::from_bytes("v", &seq.to_bytes()).unwrap();
        prop_assert_eq!(back, seq);
    }

    #[test]
    fn truncated_feature_bytes_are_rejected(cut in 1usize..40) {
        let seq = FeatureSequence::new("v", 3, 1, vec![0.5; 12]).unwrap();
        let bytes = seq.to_bytes();
        let cut = cut.min(bytes.len());
        let err = FeatureSequence::from_bytes("v", &bytes[..bytes.len() - cut]).unwrap_err();
        prop_assert!(err.is_data_error());
    }

    #[test]
    fn predictions_round_trip(spots in prop::collection::vec((0usize..500, -10.0f64..10.0, 0usize..5), 0..30)) {
        let preds: Vec<SpotPrediction> = spots
            .iter()
            .map(|&(t, score, label)| SpotPrediction { video: "v".into(), t, score, label })
            .collect();
        let text = predictions_to_jsonl(&preds).unwrap();
        prop_assert_eq!(predictions_from_jsonl(&text).unwrap(), preds);
    }
}

#[test]
fn dataset_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_generate(&SynthConfig { train_videos: 3, val_videos: 1, seed: 5, ..SynthConfig::default() })
        .unwrap()
        .train;
    data.save(dir.path()).unwrap();
    assert_eq!(Dataset::load(dir.path()).unwrap(), data);
    let gts = read_annotations(dir.path().join("annotations.json")).unwrap();
    assert_eq!(gts, data.annotations());
}

#[test]
fn feature_and_annotation_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_generate(&SynthConfig { train_videos: 2, val_videos: 1, seed: 9, ..SynthConfig::default() })
        .unwrap()
        .val;
    let v = &data.videos[0];
    let fpath = dir.path().join("x.aspt");
    write_feature_file(&v.features, &fpath).unwrap();
    assert_eq!(read_feature_file(&fpath).unwrap().as_slice(), v.features.as_slice());
    let apath = dir.path().join("gt.json");
    write_annotations(&data.annotations(), &apath).unwrap();
    assert_eq!(read_annotations(&apath).unwrap(), data.annotations());
}

#[test]
fn missing_feature_file_fails_dataset_load() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_generate(&SynthConfig { train_videos: 2, val_videos: 1, seed: 1, ..SynthConfig::default() })
        .unwrap()
        .train;
    data.save(dir.path()).unwrap();
    let victim = dir.path().join("features").join(format!("{}.aspt", data.videos[0].id()));
    std::fs::remove_file(victim).unwrap();
    assert!(Dataset::load(dir.path()).is_err());
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let shape = ModelShape { input_dim: 5, hidden: 7, num_classes: 3, num_actions: 2, memory: true };
    let mut rng = seed::rng(3, &[]);
    let params = ModelParameters::random(shape, 1.0, &mut rng).unwrap();
    let ckpt = Checkpoint {
        params,
        actions: BrowseActionSet::new(vec![1, 3]).unwrap(),
        hyper: HyperParams { gamma: 0.95, ..HyperParams::default() },
        rho: 0.25,
        opt: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bin");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ckpt);
    assert_eq!(back.to_bytes().unwrap(), ckpt.to_bytes().unwrap());
    let bytes = std::fs::read(&path).unwrap();
    assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() / 2]), Err(Error::Checkpoint(_))));
}

#[test]
fn synthetic_data_depends_only_on_seed() {
    let cfg = SynthConfig { train_videos: 5, val_videos: 2, seed: 42, ..SynthConfig::default() };
    let a = synth_generate(&cfg).unwrap();
    let b = synth_generate(&cfg).unwrap();
    assert_eq!(a.train, b.train);
    assert_eq!(a.val, b.val);
    let c = synth_generate(&SynthConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(a.train, c.train);
}

#[test]
fn benchmark_shape() {
    let d = synth_generate(&SynthConfig::default()).unwrap();
    assert_eq!(d.train.videos.len(), 200);
    assert_eq!(d.val.videos.len(), 50);
    assert_eq!(d.train.num_classes, 4);
    assert_eq!(d.train.feature_dim(), 16);
    for v in d.train.videos.iter().chain(&d.val.videos) {
        assert_eq!(v.features.frames(), 120);
        assert!((1..=4).contains(&v.annotation.segments.len()));
    }
}
