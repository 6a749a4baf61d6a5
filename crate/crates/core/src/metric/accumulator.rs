use std::cmp::Ordering;
use std::collections::HashMap;

use super::{ap_of_flags, mean, Match, MatchFlags, SegmentPool};
use crate::dataset::{AnnotationSet, SpotPrediction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Ranked {
    score: f64,
    /// Position of the video id in sorted id order, for tie-breaking.
    video_rank: usize,
    video: usize,
    t: usize,
}

fn ranked_order(a: &Ranked, b: &Ranked) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.video_rank.cmp(&b.video_rank))
        .then(a.t.cmp(&b.t))
}

#[derive(Debug, Clone)]
struct ClassState {
    num_gt: usize,
    /// Segment pools indexed by video.
    pools: Vec<SegmentPool>,
    ranked: Vec<Ranked>,
    ap: f64,
}

impl ClassState {
    fn rescore(&mut self) {
        self.pools.iter_mut().for_each(SegmentPool::reset);
        let flags = self
            .ranked
            .iter()
            .map(|r| {
                if self.pools[r.video].take(r.t) {
                    Match::TruePositive
                } else {
                    Match::FalsePositive
                }
            })
            .collect();
        self.ap = ap_of_flags(&MatchFlags {
            flags,
            num_gt: self.num_gt,
        });
    }
}

/// Spotting mAP maintained under spot insertion.
///
/// Inserting a spot re-ranks and re-matches only the class it belongs to;
/// the result always equals [`super::spotting_map`] over every spot
/// inserted so far.
#[derive(Debug, Clone)]
pub struct MapAccumulator {
    video_index: HashMap<String, usize>,
    video_rank: Vec<usize>,
    num_frames: Vec<usize>,
    classes: Vec<ClassState>,
    map: f64,
    len: usize,
}

impl MapAccumulator {
    pub fn new(gts: &AnnotationSet) -> Self {
        let n = gts.videos.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| gts.videos[a].id.cmp(&gts.videos[b].id));
        let mut video_rank = vec![0; n];
        for (rank, &v) in order.iter().enumerate() {
            video_rank[v] = rank;
        }
        let classes = (0..gts.num_classes)
            .map(|c| {
                let pools: Vec<SegmentPool> = gts
                    .videos
                    .iter()
                    .map(|v| {
                        SegmentPool::new(
                            v.segments
                                .iter()
                                .filter(|s| s.label == c)
                                .map(|s| (s.start, s.end))
                                .collect(),
                        )
                    })
                    .collect();
                ClassState {
                    num_gt: pools.iter().map(|p| p.segments.len()).sum(),
                    pools,
                    ranked: Vec::new(),
                    ap: 0.0,
                }
            })
            .collect();
        Self {
            video_index: gts
                .videos
                .iter()
                .enumerate()
                .map(|(i, v)| (v.id.clone(), i))
                .collect(),
            video_rank,
            num_frames: gts.videos.iter().map(|v| v.num_frames).collect(),
            classes,
            map: 0.0,
            len: 0,
        }
    }

    pub fn map(&self) -> f64 {
        self.map
    }

    /// Number of inserted spots.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn class_ap(&self, class: usize) -> Option<f64> {
        self.classes
            .get(class)
            .filter(|c| c.num_gt > 0)
            .map(|c| c.ap)
    }

    pub fn insert(&mut self, spot: &SpotPrediction) -> Result<f64> {
        let video = *self
            .video_index
            .get(&spot.video)
            .ok_or_else(|| Error::UnknownVideo(spot.video.clone()))?;
        self.insert_indexed(video, spot.t, spot.score, spot.label)
    }

    /// Inserts a spot for the `video`-th registered video.
    pub fn insert_indexed(&mut self, video: usize, t: usize, score: f64, label: usize) -> Result<f64> {
        if video >= self.num_frames.len() {
            return Err(Error::OutOfRange {
                index: video,
                len: self.num_frames.len(),
            });
        }
        if t >= self.num_frames[video] {
            return Err(Error::OutOfRange {
                index: t,
                len: self.num_frames[video],
            });
        }
        if !score.is_finite() {
            return Err(Error::Contract("spot score is not finite".into()));
        }
        let num_classes = self.classes.len();
        let class = self.classes.get_mut(label).ok_or(Error::OutOfRange {
            index: label,
            len: num_classes,
        })?;
        let entry = Ranked {
            score,
            video_rank: self.video_rank[video],
            video,
            t,
        };
        let at = class
            .ranked
            .partition_point(|r| ranked_order(r, &entry) != Ordering::Greater);
        class.ranked.insert(at, entry);
        self.len += 1;
        if class.num_gt > 0 {
            class.rescore();
            self.map = mean(self.classes.iter().filter(|c| c.num_gt > 0).map(|c| c.ap));
        }
        Ok(self.map)
    }
}
