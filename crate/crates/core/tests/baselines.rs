use actionspotter::baselines::{
    center_targets, no_memory_variant, redraw_detections, supervised_actionspotter, uniform_policy, DetectionSegment,
    FrameModel, FrameModelKind,
};
use actionspotter::dataset::{synth_generate, FrameLabel, GroundTruthSegment, SynthConfig, VideoAnnotation};
use actionspotter::env::BrowseActionSet;
use actionspotter::metric::spotting_map;
use actionspotter::trainer::{evaluate, train, HyperParams};
use proptest::prelude::*;

fn noise_free_points(seed: u64) -> SynthConfig {
    SynthConfig {
        train_videos: 20,
        val_videos: 10,
        frames: 40,
        min_segment_len: 1,
        max_segment_len: 1,
        noise_scale: 0.0,
        seed,
        ..SynthConfig::default()
    }
}

fn quick(seed: u64) -> HyperParams {
    HyperParams {
        hidden: 16,
        lr: 3e-3,
        batch_size: 8,
        pretrain_epochs: 5,
        epochs: 20,
        patience: 20,
        temperature_lr: 0.0,
        seed,
        ..HyperParams::default()
    }
}

proptest! {
    #[test]
    fn redraw_keeps_count_scores_and_floor_centers(
        segs in prop::collection::vec((0usize..50, 0usize..30, 0usize..3, 0.0f64..1.0), 0..20)
    ) {
        let dets: Vec<DetectionSegment> = segs
            .iter()
            .map(|&(start, len, label, score)| DetectionSegment {
                video: "v".into(), label, start, end: start + len, score,
            })
            .collect();
        let spots = redraw_detections(&dets).unwrap();
        prop_assert_eq!(spots.len(), dets.len());
        for (d, s) in dets.iter().zip(&spots) {
            prop_assert_eq!(s.t, (d.start + d.end) / 2);
            prop_assert!(d.start <= s.t && s.t <= d.end);
            prop_assert_eq!(s.score, d.score);
            prop_assert_eq!(s.label, d.label);
        }
    }

    #[test]
    fn one_center_target_per_segment(
        segs in prop::collection::vec((0usize..20, 0usize..4, 0usize..3), 0..8)
    ) {
        // Disjoint segments laid out left to right.
        let mut next = 0;
        let mut segments = Vec::new();
        for (gap, len, label) in segs {
            let start = next + gap;
            segments.push(GroundTruthSegment { label, start, end: start + len });
            next = start + len + 1;
        }
        let annotation = VideoAnnotation { id: "v".into(), num_frames: next + 1, segments: segments.clone() };
        let targets = center_targets(&annotation);
        let positives = targets.iter().filter(|l| **l != FrameLabel::Background).count();
        prop_assert_eq!(positives, segments.len());
        for s in &segments {
            prop_assert_eq!(targets[s.center()], FrameLabel::Action(s.label));
        }
    }
}

#[test]
fn redraw_of_worked_examples() {
    let det = |start, end| DetectionSegment { video: "v".into(), label: 0, start, end, score: 0.4 };
    let spots = redraw_detections(&[det(10, 20), det(11, 20), det(7, 7)]).unwrap();
    let ts: Vec<usize> = spots.iter().map(|s| s.t).collect();
    assert_eq!(ts, vec![15, 15, 7]);
    assert!(redraw_detections(&[det(5, 4)]).is_err());
}

#[test]
fn naive_segmentation_recovers_noise_free_centers() {
    let data = synth_generate(&noise_free_points(4)).unwrap();
    let hp = HyperParams { epochs: 60, ..quick(4) };
    let out = FrameModel::train(FrameModelKind::Naive, &data.train, &data.val, &hp).unwrap();
    assert_eq!(out.val_map, 1.0);
    assert_eq!(spotting_map(&out.val_predictions, &data.val.annotations()).unwrap(), 1.0);
}

#[test]
fn untrained_frame_model_is_near_chance() {
    let data = synth_generate(&SynthConfig { train_videos: 2, val_videos: 20, seed: 2, ..SynthConfig::default() })
        .unwrap();
    let model = FrameModel::new(FrameModelKind::Multitask, 16, 16, 4, 2);
    let m = spotting_map(&model.predict(&data.val).unwrap(), &data.val.annotations()).unwrap();
    assert!(m < 0.3, "untrained mAP {m}");
}

#[test]
fn supervised_spotter_is_deterministic_and_never_skips() {
    let data = synth_generate(&SynthConfig { train_videos: 10, val_videos: 5, seed: 1, ..SynthConfig::default() })
        .unwrap();
    let hp = HyperParams { epochs: 3, pretrain_epochs: 2, ..quick(1) };
    let a = supervised_actionspotter(&data.train, &data.val, &hp).unwrap();
    let b = supervised_actionspotter(&data.train, &data.val, &hp).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.val_predictions, b.val_predictions);
    assert_eq!(a.val_skip_ratio, 0.0);
    assert_eq!(a.best.actions, BrowseActionSet::uniform(1).unwrap());
}

#[test]
fn supervised_spotter_learns_noise_free_centers() {
    let data = synth_generate(&noise_free_points(6)).unwrap();
    let hp = HyperParams { pretrain_epochs: 0, epochs: 100, patience: 100, ..quick(6) };
    let out = supervised_actionspotter(&data.train, &data.val, &hp).unwrap();
    assert!(out.val_map > 0.9, "mAP {}", out.val_map);
}

#[test]
fn uniform_policy_fixes_the_stride() {
    let data = synth_generate(&SynthConfig {
        train_videos: 4,
        val_videos: 4,
        frames: 100,
        max_segment_len: 8,
        ..SynthConfig::default()
    })
    .unwrap();
    let actions = uniform_policy(2).unwrap();
    let hp = HyperParams { epochs: 1, pretrain_epochs: 1, ..quick(0) };
    let out = train(&data.train, &data.val, &actions, &hp).unwrap();
    let eval = evaluate(&out.best, &data.val).unwrap();
    assert!((eval.skip_ratio - 0.49).abs() < 1e-12);
    assert!(eval.traces.iter().all(|t| t.steps.iter().all(|s| s.displacement == 2)));
}

/// Class identity sits in a cue frame one row before each segment, so only
/// a model that remembers it can label the segment.
#[test]
fn memory_matters_when_the_label_is_cued_earlier() {
    let cfg = SynthConfig {
        train_videos: 60,
        val_videos: 20,
        frames: 40,
        num_classes: 3,
        segments_max: 2,
        min_segment_len: 1,
        max_segment_len: 3,
        cue_frames: true,
        noise_scale: 0.2,
        seed: 11,
        ..SynthConfig::default()
    };
    let data = synth_generate(&cfg).unwrap();
    let actions = BrowseActionSet::uniform(1).unwrap();
    let hp = HyperParams { pretrain_epochs: 15, epochs: 15, ..quick(11) };
    let full = train(&data.train, &data.val, &actions, &hp).unwrap();
    let flat = train(&data.train, &data.val, &actions, &no_memory_variant(&hp)).unwrap();
    assert!(
        full.val_map > flat.val_map + 0.1,
        "memory {} without {}",
        full.val_map,
        flat.val_map
    );
}
