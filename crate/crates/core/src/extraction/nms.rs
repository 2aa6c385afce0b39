use super::{Minutia, MinutiaeList};
use std::cmp::Ordering;

/// Order used by NMS: score descending, then `x`, then `y` ascending.
pub(crate) fn nms_order(a: &Minutia, b: &Minutia) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.x.total_cmp(&b.x))
        .then(a.y.total_cmp(&b.y))
}

/// Greedy non-maximum suppression: a minutia survives iff no higher-ranked
/// survivor lies within `radius` (inclusive). Output is in rank order.
pub fn nms(list: &[Minutia], radius: f64) -> MinutiaeList {
    let mut sorted = list.to_vec();
    sorted.sort_by(nms_order);
    let r2 = radius * radius;
    let mut kept: MinutiaeList = Vec::new();
    for m in sorted {
        if kept.iter().all(|k| {
            let (dx, dy) = (k.x - m.x, k.y - m.y);
            dx * dx + dy * dy > r2
        }) {
            kept.push(m);
        }
    }
    kept
}
