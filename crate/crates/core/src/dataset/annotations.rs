use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One ground-truth action occurrence: class `label` over frames
/// `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthSegment {
    pub label: usize,
    pub start: usize,
    pub end: usize,
}

impl GroundTruthSegment {
    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t <= self.end
    }

    /// Floor midpoint, the frame supervised baselines treat as the spot.
    pub fn center(&self) -> usize {
        (self.start + self.end) / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoAnnotation {
    pub id: String,
    pub num_frames: usize,
    pub segments: Vec<GroundTruthSegment>,
}

/// Per-frame supervision target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameLabel {
    Action(usize),
    Background,
}

impl FrameLabel {
    /// Index into a classifier with `num_classes + 1` outputs, background last.
    pub fn class_index(self, num_classes: usize) -> usize {
        match self {
            FrameLabel::Action(c) => c,
            FrameLabel::Background => num_classes,
        }
    }
}

impl VideoAnnotation {
    fn validate(&mut self, num_classes: usize) -> Result<()> {
        let fail = |reason: String| Error::Annotation {
            video: self.id.clone(),
            reason,
        };
        if self.num_frames == 0 {
            return Err(fail("num_frames must be positive".into()));
        }
        for s in &self.segments {
            if s.end < s.start {
                return Err(fail(format!("segment end {} before start {}", s.end, s.start)));
            }
            if s.end >= self.num_frames {
                return Err(fail(format!(
                    "segment [{}, {}] outside {} frames",
                    s.start, s.end, self.num_frames
                )));
            }
            if s.label >= num_classes {
                return Err(fail(format!(
                    "class {} not below num_classes {num_classes}",
                    s.label
                )));
            }
        }
        self.segments.sort_by_key(|s| (s.start, s.end));
        Ok(())
    }

    /// Class of frame `t`. Overlapping segments resolve to the earliest
    /// start, then the earliest end.
    pub fn frame_label(&self, t: usize) -> Result<FrameLabel> {
        if t >= self.num_frames {
            return Err(Error::OutOfRange {
                index: t,
                len: self.num_frames,
            });
        }
        Ok(self
            .segments
            .iter()
            .filter(|s| s.contains(t))
            .min_by_key(|s| (s.start, s.end))
            .map_or(FrameLabel::Background, |s| FrameLabel::Action(s.label)))
    }

    pub fn frame_labels(&self) -> Vec<FrameLabel> {
        let mut labels = vec![FrameLabel::Background; self.num_frames];
        // Iterating in reverse (start, end) order lets the earliest segment win.
        let mut order: Vec<_> = self.segments.iter().collect();
        order.sort_by_key(|s| std::cmp::Reverse((s.start, s.end)));
        for s in order {
            for l in &mut labels[s.start..=s.end] {
                *l = FrameLabel::Action(s.label);
            }
        }
        labels
    }
}

/// Free function form of [`VideoAnnotation::frame_label`].
pub fn frame_label(annotation: &VideoAnnotation, t: usize) -> Result<FrameLabel> {
    annotation.frame_label(t)
}

/// The on-disk annotation document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub num_classes: usize,
    pub videos: Vec<VideoAnnotation>,
}

impl AnnotationSet {
    pub fn new(num_classes: usize, videos: Vec<VideoAnnotation>) -> Result<Self> {
        let mut set = Self { num_classes, videos };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&mut self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be positive".into()));
        }
        let mut seen = HashSet::new();
        for v in &mut self.videos {
            if !seen.insert(v.id.clone()) {
                return Err(Error::Annotation {
                    video: v.id.clone(),
                    reason: "duplicate video id".into(),
                });
            }
            v.validate(self.num_classes)?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&VideoAnnotation> {
        self.videos.iter().find(|v| v.id == id)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut set: AnnotationSet = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AnnotationSet::from_json(&text)
}

pub fn write_annotations(set: &AnnotationSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(set)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(label: usize, start: usize, end: usize) -> GroundTruthSegment {
        GroundTruthSegment { label, start, end }
    }

    fn video(segments: Vec<GroundTruthSegment>) -> VideoAnnotation {
        VideoAnnotation {
            id: "a".into(),
            num_frames: 100,
            segments,
        }
    }

    #[test]
    fn loads_single_segment() {
        let set = AnnotationSet::from_json(
            r#"{"num_classes": 1, "videos": [{"id": "a", "num_frames": 100,
                "segments": [{"label": 0, "start": 10, "end": 20}]}]}"#,
        )
        .unwrap();
        assert_eq!(set.videos.len(), 1);
        assert_eq!(set.videos[0].segments, vec![seg(0, 10, 20)]);
    }

    #[test]
    fn reversed_segment_names_video() {
        let err = AnnotationSet::new(1, vec![video(vec![seg(0, 20, 10)])]).unwrap_err();
        match err {
            Error::Annotation { video, .. } => assert_eq!(video, "a"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_and_unknown_class() {
        assert!(AnnotationSet::new(1, vec![video(vec![seg(0, 90, 100)])]).is_err());
        assert!(AnnotationSet::new(1, vec![video(vec![seg(1, 1, 2)])]).is_err());
        let dup = vec![video(vec![]), video(vec![])];
        assert!(AnnotationSet::new(1, dup).is_err());
    }

    #[test]
    fn sorts_segments_on_load() {
        let set = AnnotationSet::new(1, vec![video(vec![seg(0, 30, 40), seg(0, 5, 9)])]).unwrap();
        assert_eq!(set.videos[0].segments, vec![seg(0, 5, 9), seg(0, 30, 40)]);
    }

    #[test]
    fn frame_label_cases() {
        let v = video(vec![seg(2, 10, 20)]);
        assert_eq!(v.frame_label(15).unwrap(), FrameLabel::Action(2));
        assert_eq!(v.frame_label(9).unwrap(), FrameLabel::Background);
        assert_eq!(v.frame_label(20).unwrap(), FrameLabel::Action(2));
        assert!(matches!(v.frame_label(100), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn overlapping_segments_tie_break() {
        // Enumerate the rule by hand on a crafted overlap.
        let v = video(vec![seg(1, 10, 20), seg(3, 15, 25), seg(2, 15, 17)]);
        let expect = |t: usize| -> FrameLabel {
            match t {
                10..=20 => FrameLabel::Action(1),
                21..=25 => FrameLabel::Action(3),
                _ => FrameLabel::Background,
            }
        };
        let dense = v.frame_labels();
        for t in 0..100 {
            assert_eq!(v.frame_label(t).unwrap(), expect(t), "t={t}");
            assert_eq!(dense[t], expect(t), "t={t}");
        }
        assert_eq!(v.frame_label(18).unwrap(), FrameLabel::Action(1));
        // Same start: the earlier end wins.
        let w = video(vec![seg(3, 15, 25), seg(2, 15, 17)]);
        assert_eq!(w.frame_label(16).unwrap(), FrameLabel::Action(2));
        assert_eq!(w.frame_labels()[16], FrameLabel::Action(2));
    }
}
