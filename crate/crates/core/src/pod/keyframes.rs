use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Annotation, PodError};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Keyframe {
    #[serde(rename = "t_us")]
    pub t: Timestamp,
    pub annotation_id: u32,
}

/// Navigation points, one per annotation, sorted by `(time, annotation id)`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KeyframeIndex {
    entries: Vec<Keyframe>,
}

pub fn build_keyframe_index(annotations: &[Annotation]) -> Result<KeyframeIndex, PodError> {
    let mut seen = HashSet::with_capacity(annotations.len());
    for a in annotations {
        if !seen.insert(a.id) {
            return Err(PodError::DuplicateAnnotationId(a.id));
        }
    }
    let mut entries: Vec<Keyframe> =
        annotations.iter().map(|a| Keyframe { t: a.at, annotation_id: a.id }).collect();
    entries.sort_unstable();
    Ok(KeyframeIndex { entries })
}

impl KeyframeIndex {
    pub fn entries(&self) -> &[Keyframe] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Earliest keyframe time strictly after `t`.
    pub fn next_after(&self, t: Timestamp) -> Option<Timestamp> {
        let i = self.entries.partition_point(|k| k.t <= t);
        self.entries.get(i).map(|k| k.t)
    }

    /// Latest keyframe time strictly before `t`.
    pub fn prev_before(&self, t: Timestamp) -> Option<Timestamp> {
        let i = self.entries.partition_point(|k| k.t < t);
        i.checked_sub(1).map(|i| self.entries[i].t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::pod::AnnotationKind;

    fn ann(id: u32, secs: f64) -> Annotation {
        Annotation {
            id,
            kind: AnnotationKind::Use,
            label: format!("a{id}"),
            at: Timestamp::from_secs_f64(secs),
            position: Vec3::ZERO,
            entity_ref: None,
        }
    }

    #[test]
    fn empty_input() {
        assert!(build_keyframe_index(&[]).unwrap().is_empty());
    }

    #[test]
    fn sorted_by_time() {
        let idx = build_keyframe_index(&[ann(0, 42.0), ann(1, 0.0), ann(2, 10.5)]).unwrap();
        let times: Vec<f64> = idx.entries().iter().map(|k| k.t.as_secs_f64()).collect();
        assert_eq!(times, vec![0.0, 10.5, 42.0]);
    }

    #[test]
    fn ties_broken_by_id() {
        let idx = build_keyframe_index(&[ann(7, 5.0), ann(3, 5.0)]).unwrap();
        let ids: Vec<u32> = idx.entries().iter().map(|k| k.annotation_id).collect();
        assert_eq!(ids, vec![3, 7]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert_eq!(build_keyframe_index(&[ann(1, 0.0), ann(1, 2.0)]), Err(PodError::DuplicateAnnotationId(1)));
    }

    #[test]
    fn strict_neighbours() {
        let idx = build_keyframe_index(&[ann(0, 0.0), ann(1, 10.5), ann(2, 42.0), ann(3, 80.0)]).unwrap();
        let s = Timestamp::from_secs_f64;
        assert_eq!(idx.next_after(s(15.0)), Some(s(42.0)));
        assert_eq!(idx.next_after(s(42.0)), Some(s(80.0)));
        assert_eq!(idx.next_after(s(80.0)), None);
        assert_eq!(idx.prev_before(s(0.0)), None);
        assert_eq!(idx.prev_before(s(42.0)), Some(s(10.5)));
    }
}
