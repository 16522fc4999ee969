//! One-pass evaluation metrics: overlap, centre error, success and precision curves.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::BoundingBox;

/// Default number of success-curve samples (step 0.01 on `[0, 1]`).
pub const SUCCESS_SAMPLES: usize = 101;
/// Default precision-curve range in pixels (51 samples, 1 px apart).
pub const PRECISION_MAX_THRESHOLD: usize = 50;
/// Pixel threshold of the representative precision score.
pub const PRECISION_SCORE_THRESHOLD: f64 = 20.0;

/// Sampled curve plus its scalar summary (AUC or precision at 20 px).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
    pub summary: f64,
}

/// Intersection over union of two axis-aligned boxes.
pub fn overlap_ratio(bt: &BoundingBox, bg: &BoundingBox) -> Result<f64> {
    bt.validate()?;
    bg.validate()?;
    if bt == bg {
        return Ok(1.0);
    }
    let iw = bt.right().min(bg.right()) - bt.x.max(bg.x);
    let ih = bt.bottom().min(bg.bottom()) - bt.y.max(bg.y);
    if iw <= 0.0 || ih <= 0.0 {
        return Ok(0.0);
    }
    let inter = iw * ih;
    let union = bt.area() + bg.area() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Euclidean distance between box centres.
pub fn center_error(bt: &BoundingBox, bg: &BoundingBox) -> Result<f64> {
    bt.validate()?;
    bg.validate()?;
    let (ax, ay) = bt.center();
    let (bx, by) = bg.center();
    Ok(libm::hypot(ax - bx, ay - by))
}

/// Fraction of frames with overlap strictly above each of `samples` evenly
/// spaced thresholds on `[0, 1]`; the summary is the mean of those values.
pub fn success_curve(overlaps: &[f64], samples: usize) -> Result<EvalCurve> {
    if overlaps.is_empty() {
        return Err(Error::Empty("overlap sequence"));
    }
    if samples < 2 {
        return Err(Error::Config(alloc::format!(
            "success curve needs >= 2 samples, got {samples}"
        )));
    }
    let thresholds: Vec<f64> = (0..samples).map(|k| k as f64 / (samples - 1) as f64).collect();
    let count = overlaps.len() as f64;
    let values: Vec<f64> = thresholds
        .iter()
        .map(|&t| overlaps.iter().filter(|&&s| s > t).count() as f64 / count)
        .collect();
    let summary = values.iter().sum::<f64>() / samples as f64;
    Ok(EvalCurve {
        thresholds,
        values,
        summary,
    })
}

/// Fraction of frames with centre error at most `t` for `t = 0, 1, ..., max_threshold`.
/// The summary is the fraction within 20 px.
pub fn precision_curve(errors: &[f64], max_threshold: usize) -> Result<EvalCurve> {
    if errors.is_empty() {
        return Err(Error::Empty("centre-error sequence"));
    }
    let count = errors.len() as f64;
    let within = |t: f64| errors.iter().filter(|&&e| e <= t).count() as f64 / count;
    let thresholds: Vec<f64> = (0..=max_threshold).map(|t| t as f64).collect();
    let values = thresholds.iter().map(|&t| within(t)).collect();
    Ok(EvalCurve {
        thresholds,
        values,
        summary: within(PRECISION_SCORE_THRESHOLD),
    })
}

/// Per-frame overlaps and centre errors of a tracked run against ground truth.
pub fn frame_scores(tracked: &[BoundingBox], truth: &[BoundingBox]) -> Result<(Vec<f64>, Vec<f64>)> {
    if tracked.len() != truth.len() {
        return Err(Error::Dimension(alloc::format!(
            "{} tracked boxes for {} ground-truth boxes",
            tracked.len(),
            truth.len()
        )));
    }
    let overlaps = tracked
        .iter()
        .zip(truth)
        .map(|(t, g)| overlap_ratio(t, g))
        .collect::<Result<_>>()?;
    let errors = tracked
        .iter()
        .zip(truth)
        .map(|(t, g)| center_error(t, g))
        .collect::<Result<_>>()?;
    Ok((overlaps, errors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn overlap_examples() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        assert_eq!(overlap_ratio(&a, &a).unwrap(), 1.0);
        assert_eq!(overlap_ratio(&a, &bx(5.0, 5.0, 1.0, 1.0)).unwrap(), 0.0);
        // touching edges share no area
        assert_eq!(overlap_ratio(&a, &bx(2.0, 0.0, 2.0, 2.0)).unwrap(), 0.0);
        assert_eq!(overlap_ratio(&a, &bx(1.0, 1.0, 2.0, 2.0)).unwrap(), 1.0 / 7.0);
        let weird = bx(0.1, 0.7, 0.2, 0.3);
        assert_eq!(overlap_ratio(&weird, &weird).unwrap(), 1.0);
        let degenerate = BoundingBox {
            x: 0.0,
            y: 0.0,
            w: 0.0,
            h: 1.0,
        };
        assert!(overlap_ratio(&a, &degenerate).is_err());
    }

    #[test]
    fn center_error_examples() {
        let a = bx(0.0, 0.0, 4.0, 4.0);
        assert_eq!(center_error(&a, &a).unwrap(), 0.0);
        assert_eq!(center_error(&a, &bx(3.0, 4.0, 4.0, 4.0)).unwrap(), 5.0);
        assert_eq!(center_error(&a, &bx(1.0, 0.0, 4.0, 4.0)).unwrap(), 1.0);
    }

    #[test]
    fn success_examples() {
        let perfect = success_curve(&[1.0; 10], SUCCESS_SAMPLES).unwrap();
        assert!(perfect.values[..100].iter().all(|&v| v == 1.0));
        assert_eq!(perfect.values[100], 0.0);
        assert!(perfect.summary >= 100.0 / 101.0);

        let none = success_curve(&[0.0; 4], SUCCESS_SAMPLES).unwrap();
        assert!(none.values.iter().all(|&v| v == 0.0));
        assert_eq!(none.summary, 0.0);

        let two = success_curve(&[0.2, 0.8], 3).unwrap();
        assert_eq!(two.thresholds, [0.0, 0.5, 1.0]);
        assert_eq!(two.values, [1.0, 0.5, 0.0]);

        assert!(success_curve(&[], SUCCESS_SAMPLES).is_err());
    }

    #[test]
    fn precision_examples() {
        let zero = precision_curve(&[0.0; 5], PRECISION_MAX_THRESHOLD).unwrap();
        assert_eq!(zero.values.len(), 51);
        assert!(zero.values.iter().all(|&v| v == 1.0));
        assert_eq!(zero.summary, 1.0);

        let far = precision_curve(&[100.0; 3], PRECISION_MAX_THRESHOLD).unwrap();
        assert!(far.values.iter().all(|&v| v == 0.0));
        assert_eq!(far.summary, 0.0);

        assert_eq!(precision_curve(&[5.0, 25.0], 50).unwrap().summary, 0.5);
        assert!(precision_curve(&[], 50).is_err());
    }
}
