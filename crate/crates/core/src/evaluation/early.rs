//! Early detection: how many post-mortem comments (or days after death) a
//! classifier needs before it first labels a test profile post-mortem.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{join_texts, make_documents, Corpus, Label, Profile, UnitKind};
use crate::error::{Error, Result};
use crate::models::{predict_text, TrainedModel};
use crate::resources::TextResources;

use super::pipeline::{fit_pipeline, PipelineConfig};

const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: i64,
    pub fraction: f64,
}

/// First post classification of one test profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub profile_id: String,
    pub post_comments: usize,
    /// Number of post-mortem comments seen at first detection.
    pub m: Option<usize>,
    /// Whole days between death and the m-th post-mortem comment.
    pub day: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyDetectionCurve {
    pub by_count: Vec<CurvePoint>,
    pub by_time: Vec<CurvePoint>,
    /// Post-mortem test profiles with at least one post-mortem comment.
    pub test_profiles: usize,
    pub detected: usize,
    /// Post-mortem test profiles skipped for lack of post-mortem comments.
    pub excluded: Vec<String>,
    pub detections: Vec<Detection>,
}

impl EarlyDetectionCurve {
    /// Cumulative fraction detected after at most `m` post-mortem comments.
    pub fn fraction_at_count(&self, m: i64) -> f64 {
        fraction_at(&self.by_count, m)
    }

    pub fn fraction_at_day(&self, day: i64) -> f64 {
        fraction_at(&self.by_time, day)
    }

    pub fn final_fraction(&self) -> f64 {
        self.by_count.last().map_or(0.0, |p| p.fraction)
    }

    /// Two CSV sections, `m,fraction` then `day,fraction`, separated by a
    /// blank line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,fraction\n");
        for p in &self.by_count {
            let _ = writeln!(out, "{},{}", p.x, p.fraction);
        }
        out.push_str("\nday,fraction\n");
        for p in &self.by_time {
            let _ = writeln!(out, "{},{}", p.x, p.fraction);
        }
        out
    }
}

fn fraction_at(points: &[CurvePoint], x: i64) -> f64 {
    points
        .iter()
        .take_while(|p| p.x <= x)
        .last()
        .map_or(0.0, |p| p.fraction)
}

/// Replays one profile: pre-mortem comments first, then post-mortem comments
/// one at a time, classifying the concatenation after each addition.
pub fn detect_profile(model: &TrainedModel, profile: &Profile, resources: &TextResources) -> Result<Detection> {
    let death = profile
        .death_time
        .ok_or_else(|| Error::CannotDerive(profile.profile_id.clone()))?;
    let (post, pre): (Vec<_>, Vec<_>) = profile.comments.iter().partition(|c| c.timestamp >= death);
    let mut detection = Detection {
        profile_id: profile.profile_id.clone(),
        post_comments: post.len(),
        m: None,
        day: None,
    };
    for m in 1..=post.len() {
        let text = join_texts(pre.iter().chain(&post[..m]).map(|c| c.text.as_str()));
        if predict_text(model, &text, resources)?.label == Label::Post {
            detection.m = Some(m);
            detection.day = Some((post[m - 1].timestamp - death).div_euclid(SECONDS_PER_DAY));
            break;
        }
    }
    Ok(detection)
}

/// Builds both cumulative curves from a fitted model.
pub fn detection_curve(model: &TrainedModel, test: &Corpus, resources: &TextResources) -> Result<EarlyDetectionCurve> {
    let mut excluded = Vec::new();
    let mut candidates = Vec::new();
    for p in test.profiles.iter().filter(|p| p.is_post_mortem()) {
        let death = p.death_time.unwrap_or_default();
        if p.comments.iter().any(|c| c.timestamp >= death) {
            candidates.push(p);
        } else {
            excluded.push(p.profile_id.clone());
        }
    }
    if candidates.is_empty() {
        return Err(Error::Degenerate("no post-mortem test profile has post-mortem comments".into()));
    }
    let detections: Vec<Detection> = candidates
        .par_iter()
        .map(|p| detect_profile(model, p, resources))
        .collect::<Result<_>>()?;

    let total = detections.len();
    let max_m = detections.iter().map(|d| d.post_comments).max().unwrap_or(0) as i64;
    let max_day = candidates
        .iter()
        .flat_map(|p| {
            let death = p.death_time.unwrap_or_default();
            p.comments
                .iter()
                .filter(move |c| c.timestamp >= death)
                .map(move |c| (c.timestamp - death).div_euclid(SECONDS_PER_DAY))
        })
        .max()
        .unwrap_or(0);
    let cumulative = |xs: Vec<i64>, upto: i64, from: i64| -> Vec<CurvePoint> {
        (from..=upto)
            .map(|x| CurvePoint {
                x,
                fraction: xs.iter().filter(|&&v| v <= x).count() as f64 / total as f64,
            })
            .collect()
    };
    let counts: Vec<i64> = detections.iter().filter_map(|d| d.m).map(|m| m as i64).collect();
    let days: Vec<i64> = detections.iter().filter_map(|d| d.day).collect();
    Ok(EarlyDetectionCurve {
        by_count: cumulative(counts.clone(), max_m, 1),
        by_time: cumulative(days, max_day, 0),
        test_profiles: total,
        detected: counts.len(),
        excluded,
        detections,
    })
}

/// Trains on profile documents of `train` and simulates detection on the
/// post-mortem profiles of `test`.
pub fn early_detection(
    train: &Corpus,
    test: &Corpus,
    config: &PipelineConfig,
    resources: &TextResources,
) -> Result<EarlyDetectionCurve> {
    let docs = make_documents(train, UnitKind::Profile)?;
    let model = fit_pipeline(config, &docs, resources)?;
    detection_curve(&model, test, resources)
}
