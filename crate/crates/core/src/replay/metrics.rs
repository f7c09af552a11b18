//! Recall scoring against a recorded pod.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::zone_of;
use crate::pod::{Annotation, MemoryPod};
use crate::time::Timestamp;

/// What a reviewer remembered about one annotated event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallResponse {
    pub label: String,
    #[serde(rename = "t_us")]
    pub reported_time: Timestamp,
    #[serde(rename = "zone")]
    pub reported_zone: String,
}

impl RecallResponse {
    pub fn new(label: impl Into<String>, reported_time: Timestamp, reported_zone: impl Into<String>) -> Self {
        RecallResponse { label: label.into(), reported_time, reported_zone: reported_zone.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("no responses to score")]
    EmptyResponses,
    #[error("no annotation labelled {0:?}")]
    UnmatchedLabel(String),
    #[error("several annotations labelled {0:?}")]
    AmbiguousLabel(String),
    #[error("pod defines no zones")]
    NoZones,
    #[error("annotation {0} lies outside every zone")]
    AnnotationOutsideZones(u32),
}

fn matching<'a>(pod: &'a MemoryPod, label: &str) -> Result<&'a Annotation, MetricError> {
    let mut found = pod.annotations.iter().filter(|a| a.label == label);
    let first = found.next().ok_or_else(|| MetricError::UnmatchedLabel(label.to_owned()))?;
    if found.next().is_some() {
        return Err(MetricError::AmbiguousLabel(label.to_owned()));
    }
    Ok(first)
}

/// Mean absolute difference, in seconds, between reported times and the
/// times of the annotations with the same label.
pub fn mean_time_offset(responses: &[RecallResponse], pod: &MemoryPod) -> Result<f64, MetricError> {
    if responses.is_empty() {
        return Err(MetricError::EmptyResponses);
    }
    let mut total: u128 = 0;
    for r in responses {
        total += u128::from(matching(pod, &r.label)?.at.abs_diff(r.reported_time));
    }
    Ok(total as f64 / responses.len() as f64 / 1e6)
}

/// Fraction of responses naming the zone that contains the matching
/// annotation's position.
pub fn area_accuracy(responses: &[RecallResponse], pod: &MemoryPod) -> Result<f64, MetricError> {
    if responses.is_empty() {
        return Err(MetricError::EmptyResponses);
    }
    if pod.zones.is_empty() {
        return Err(MetricError::NoZones);
    }
    let mut correct = 0usize;
    for r in responses {
        let a = matching(pod, &r.label)?;
        let zone = zone_of(&pod.zones, a.position).ok_or(MetricError::AnnotationOutsideZones(a.id))?;
        if zone.id == r.reported_zone {
            correct += 1;
        }
    }
    Ok(correct as f64 / responses.len() as f64)
}
