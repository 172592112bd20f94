//! Axis-aligned box arithmetic and the matching criteria built on top of it.

use crate::{Error, Result};

/// Axis-aligned rectangle in image pixel coordinates.
///
/// `(x1, y1)` is the top-left corner, `(x2, y2)` the bottom-right one.
/// Construction rejects anything without strictly positive width and
/// height, so every value has positive area and all operations below are
/// total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let finite = x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite();
        if !finite || x2 <= x1 || y2 <= y1 {
            return Err(Error::InvalidBox { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Box centered at `(cx, cy)` with the given width and height.
    pub fn centered(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(
            cx - width / 2.0,
            cy - height / 2.0,
            cx + width / 2.0,
            cy + height / 2.0,
        )
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Boundary inclusive.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }

    /// Whether `other` lies entirely within `self` (boundary inclusive).
    pub fn contains_box(&self, other: &BBox) -> bool {
        other.x1 >= self.x1 && other.y1 >= self.y1 && other.x2 <= self.x2 && other.y2 <= self.y2
    }

    /// Translated copy; panics are impossible since shape is preserved.
    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }
}

/// Intersection over union of two boxes, in `[0, 1]`. Symmetric; 0 when the
/// interiors are disjoint.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix1 = a.x1.max(b.x1);
    let iy1 = a.y1.max(b.y1);
    let ix2 = a.x2.min(b.x2);
    let iy2 = a.y2.min(b.y2);

    let iw = (ix2 - ix1).max(0.0);
    let ih = (iy2 - iy1).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Euclidean distance between the box centers, in pixels.
pub fn centroid_distance(a: &BBox, b: &BBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let dx = ax - bx;
    let dy = ay - by;
    libm::sqrt(dx * dx + dy * dy)
}

/// Combined overlap/position score: the average of the IoU and an
/// exponentially decaying function of the inter-center distance,
/// `(iou + exp(-beta * d)) / 2`. Lies in `(0, 1]` and equals 1 only for
/// identical boxes.
pub fn exp_iou(a: &BBox, b: &BBox, beta: f64) -> f64 {
    (iou(a, b) + libm::exp(-beta * centroid_distance(a, b))) / 2.0
}

/// True when the center of `candidate` lies within `reference`, boundary
/// inclusive. Not symmetric.
pub fn centroid_inside(candidate: &BBox, reference: &BBox) -> bool {
    let (cx, cy) = candidate.center();
    reference.contains_point(cx, cy)
}

/// Rule deciding whether a proposal counts as lesion, background, or
/// neither against a set of ground-truth boxes.
///
/// `Iou` and `ExpIou` score each ground truth and compare the best score
/// against the `t_upper`/`t_lower` thresholds; `Centroid` is the binary
/// "center inside the ground-truth box" rule and never yields `Neutral`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchCriterion {
    Iou { t_upper: f64, t_lower: f64 },
    Centroid,
    ExpIou { t_upper: f64, t_lower: f64, beta: f64 },
}

fn check_thresholds(t_upper: f64, t_lower: f64) -> Result<()> {
    let ok = t_lower.is_finite()
        && t_upper.is_finite()
        && 0.0 <= t_lower
        && t_lower <= t_upper
        && t_upper <= 1.0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidCriterion(alloc::format!(
            "thresholds must satisfy 0 <= t_lower <= t_upper <= 1, got t_upper={t_upper} t_lower={t_lower}"
        )))
    }
}

impl MatchCriterion {
    pub fn iou(t_upper: f64, t_lower: f64) -> Result<Self> {
        check_thresholds(t_upper, t_lower)?;
        Ok(Self::Iou { t_upper, t_lower })
    }

    pub fn centroid() -> Self {
        Self::Centroid
    }

    pub fn exp_iou(t_upper: f64, t_lower: f64, beta: f64) -> Result<Self> {
        check_thresholds(t_upper, t_lower)?;
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidCriterion(alloc::format!(
                "beta must be positive, got {beta}"
            )));
        }
        Ok(Self::ExpIou { t_upper, t_lower, beta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Iou { .. } => "iou",
            Self::Centroid => "centroid",
            Self::ExpIou { .. } => "exp_iou",
        }
    }

    /// Score of a single (proposal, ground truth) pair. For the binary
    /// centroid rule this is 1 inside, 0 outside.
    pub fn pair_score(&self, proposal: &BBox, ground_truth: &BBox) -> f64 {
        match self {
            Self::Iou { .. } => iou(proposal, ground_truth),
            Self::Centroid => {
                if centroid_inside(proposal, ground_truth) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::ExpIou { beta, .. } => exp_iou(proposal, ground_truth, *beta),
        }
    }

    /// Score used to rank proposals when no proposal clears the positive
    /// rule for a ground truth and the best one must be promoted. The
    /// binary centroid rule cannot rank, so it falls back to the IoU
    /// overlap; the threshold criteria rank by their own score.
    pub fn fallback_score(&self, proposal: &BBox, ground_truth: &BBox) -> f64 {
        match self {
            Self::Centroid => iou(proposal, ground_truth),
            _ => self.pair_score(proposal, ground_truth),
        }
    }
}

/// Outcome of matching one proposal against a set of ground truths.
/// `Positive` carries the index of the matched ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchLabel {
    Positive(usize),
    Negative,
    Neutral,
}

/// Labels a proposal against ground truths under the given criterion.
///
/// For the threshold criteria the best pair score `s` decides: positive at
/// `s >= t_upper` (matched to the argmax, lowest index on ties), negative
/// below `t_lower`, neutral in between. With no ground truths `s` is 0.
/// The centroid rule yields positive on the first ground truth containing
/// the proposal center, negative otherwise.
pub fn match_label(
    proposal: &BBox,
    ground_truths: &[BBox],
    criterion: &MatchCriterion,
) -> MatchLabel {
    if let MatchCriterion::Centroid = criterion {
        for (idx, gt) in ground_truths.iter().enumerate() {
            if centroid_inside(proposal, gt) {
                return MatchLabel::Positive(idx);
            }
        }
        return MatchLabel::Negative;
    }

    if ground_truths.is_empty() {
        return MatchLabel::Negative;
    }

    let (t_upper, t_lower) = match criterion {
        MatchCriterion::Iou { t_upper, t_lower } => (*t_upper, *t_lower),
        MatchCriterion::ExpIou { t_upper, t_lower, .. } => (*t_upper, *t_lower),
        MatchCriterion::Centroid => unreachable!(),
    };

    let mut best = 0.0_f64;
    let mut best_idx = None;
    for (idx, gt) in ground_truths.iter().enumerate() {
        let s = criterion.pair_score(proposal, gt);
        if best_idx.is_none() || s > best {
            best = s;
            best_idx = Some(idx);
        }
    }

    match best_idx {
        Some(idx) if best >= t_upper => MatchLabel::Positive(idx),
        _ if best < t_lower => MatchLabel::Negative,
        _ => MatchLabel::Neutral,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BBox::new(0.0, 0.0, 0.0, 10.0).is_err());
        assert!(BBox::new(0.0, 0.0, 10.0, 0.0).is_err());
        assert!(BBox::new(5.0, 5.0, 4.0, 10.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::NAN, 10.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::INFINITY, 10.0).is_err());
    }

    #[test]
    fn iou_identical_boxes() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint_boxes() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(20.0, 20.0, 30.0, 30.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_partial_overlap() {
        // Intersection 5x5 = 25, union 100 + 100 - 25 = 175.
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(5.0, 5.0, 15.0, 15.0);
        assert!((iou(&a, &b) - 25.0 / 175.0).abs() < 1e-12);
    }

    #[test]
    fn centroid_distance_cases() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(centroid_distance(&a, &a), 0.0);

        let b = bx(5.0, 5.0, 15.0, 15.0);
        assert!((centroid_distance(&a, &b) - 50.0_f64.sqrt()).abs() < 1e-12);

        let c = bx(0.0, 0.0, 2.0, 2.0);
        let d = bx(3.0, 0.0, 5.0, 2.0);
        assert!((centroid_distance(&c, &d) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exp_iou_identical_is_one() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(exp_iou(&a, &a, 0.1), 1.0);
    }

    #[test]
    fn exp_iou_worked_example() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(5.0, 5.0, 15.0, 15.0);
        let expected = (25.0 / 175.0 + (-0.1 * 50.0_f64.sqrt()).exp()) / 2.0;
        assert!((exp_iou(&a, &b, 0.1) - expected).abs() < 1e-15);
        assert!((exp_iou(&a, &b, 0.1) - 0.31796).abs() < 1e-5);
    }

    #[test]
    fn exp_iou_positive_even_when_far() {
        // exp underflows to 0 only past beta * d ~ 745; within that range
        // the score stays strictly positive however far the boxes are.
        let a = bx(0.0, 0.0, 1.0, 1.0);
        let b = bx(5000.0, 0.0, 5001.0, 1.0);
        let s = exp_iou(&a, &b, 0.1);
        assert!(s > 0.0 && s < 1e-3);
    }

    #[test]
    fn centroid_inside_cases() {
        let reference = bx(0.0, 0.0, 10.0, 10.0);
        assert!(centroid_inside(&bx(2.0, 2.0, 6.0, 6.0), &reference));
        assert!(!centroid_inside(&bx(20.0, 20.0, 24.0, 24.0), &reference));
        // Center exactly on the boundary counts as inside.
        assert!(centroid_inside(&bx(-5.0, -5.0, 5.0, 5.0), &reference));
    }

    #[test]
    fn match_label_thresholds() {
        let crit = MatchCriterion::iou(0.5, 0.3).unwrap();
        let gt = [bx(0.0, 0.0, 10.0, 10.0)];

        assert_eq!(
            match_label(&bx(0.0, 0.0, 10.0, 10.0), &gt, &crit),
            MatchLabel::Positive(0)
        );
        assert_eq!(
            match_label(&bx(50.0, 50.0, 60.0, 60.0), &gt, &crit),
            MatchLabel::Negative
        );
        // IoU = 100/250 = 0.4, between the thresholds.
        let tall = [bx(0.0, 0.0, 10.0, 25.0)];
        assert_eq!(
            match_label(&bx(0.0, 0.0, 10.0, 10.0), &tall, &crit),
            MatchLabel::Neutral
        );
    }

    #[test]
    fn match_label_empty_ground_truth_is_negative() {
        let crit = MatchCriterion::iou(0.5, 0.3).unwrap();
        assert_eq!(
            match_label(&bx(0.0, 0.0, 1.0, 1.0), &[], &crit),
            MatchLabel::Negative
        );
        assert_eq!(
            match_label(&bx(0.0, 0.0, 1.0, 1.0), &[], &MatchCriterion::centroid()),
            MatchLabel::Negative
        );
    }

    #[test]
    fn match_label_argmax_ties_take_lowest_index() {
        let crit = MatchCriterion::iou(0.5, 0.3).unwrap();
        let gt = [bx(0.0, 0.0, 10.0, 10.0), bx(0.0, 0.0, 10.0, 10.0)];
        assert_eq!(
            match_label(&bx(0.0, 0.0, 10.0, 10.0), &gt, &crit),
            MatchLabel::Positive(0)
        );
    }

    #[test]
    fn match_label_centroid_never_neutral() {
        let crit = MatchCriterion::centroid();
        let gt = [bx(0.0, 0.0, 10.0, 10.0)];
        assert_eq!(
            match_label(&bx(4.0, 4.0, 6.0, 6.0), &gt, &crit),
            MatchLabel::Positive(0)
        );
        assert_eq!(
            match_label(&bx(40.0, 40.0, 60.0, 60.0), &gt, &crit),
            MatchLabel::Negative
        );
    }

    #[test]
    fn criterion_validation() {
        assert!(MatchCriterion::iou(0.3, 0.5).is_err());
        assert!(MatchCriterion::iou(1.5, 0.3).is_err());
        assert!(MatchCriterion::exp_iou(0.5, 0.3, 0.0).is_err());
        assert!(MatchCriterion::exp_iou(0.5, 0.3, -1.0).is_err());
    }
}
