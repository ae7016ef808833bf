//! Multiscale power features: the K x T matrix of mean squared projection
//! coefficients over T evenly divided temporal intervals of one utterance.
//!
//! Interval t covers trace rows `[floor(t*W/T), floor((t+1)*W/T))`, which
//! partitions the rows exactly for every W >= T. Power is the mean square
//! (not the sum), so features are invariant to utterance length within an
//! interval.

use std::io::Write;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Per-utterance feature matrix with its label.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    /// K x T; entry (k, t) is the mean of the squared k-th projection over
    /// interval t.
    pub values: Array2<f64>,
    pub utterance_id: String,
    pub label: u32,
}

impl FeatureMatrix {
    pub fn k(&self) -> usize {
        self.values.nrows()
    }

    pub fn t(&self) -> usize {
        self.values.ncols()
    }

    /// Row-major (k-major) flattening, the classifier's input layout.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().cloned().collect()
    }
}

/// Interval boundaries `[floor(t*W/T), floor((t+1)*W/T))` for t in 0..T.
pub fn interval_bounds(frames: usize, intervals: usize) -> Vec<(usize, usize)> {
    (0..intervals)
        .map(|t| (t * frames / intervals, (t + 1) * frames / intervals))
        .collect()
}

/// Converts a W x K projection trace into the K x T power feature matrix.
pub fn extract_features(
    trace: &ArrayView2<f64>,
    intervals: usize,
    utterance_id: &str,
    label: u32,
) -> Result<FeatureMatrix> {
    assert!(intervals >= 1, "need at least one interval");
    let frames = trace.nrows();
    let k = trace.ncols();
    if frames < intervals {
        return Err(Error::TraceTooShort {
            frames,
            intervals,
        });
    }
    let mut values = Array2::zeros((k, intervals));
    for (t, (lo, hi)) in interval_bounds(frames, intervals).into_iter().enumerate() {
        let span = (hi - lo) as f64;
        for col in 0..k {
            let mut acc = 0.0;
            for row in lo..hi {
                let v = trace[[row, col]];
                acc += v * v;
            }
            values[[col, t]] = acc / span;
        }
    }
    Ok(FeatureMatrix {
        values,
        utterance_id: utterance_id.to_string(),
        label,
    })
}

/// Feature CSV export: header `utt,label,f_0..f_{K*T-1}` in the row-major
/// flatten order.
pub fn export_features_csv<W: Write>(w: &mut W, features: &[FeatureMatrix]) -> Result<()> {
    let Some(first) = features.first() else {
        writeln!(w, "utt,label")?;
        return Ok(());
    };
    let width = first.k() * first.t();
    write!(w, "utt,label")?;
    for i in 0..width {
        write!(w, ",f_{i}")?;
    }
    writeln!(w)?;
    for fm in features {
        write!(w, "{},{}", fm.utterance_id, fm.label)?;
        for v in fm.values.iter() {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn constant_trace_gives_constant_square() {
        let c = -1.5;
        let trace = Array2::from_elem((12, 3), c);
        for t in [1usize, 2, 5] {
            let fm = extract_features(&trace.view(), t, "u", 0).unwrap();
            assert_eq!(fm.k(), 3);
            assert_eq!(fm.t(), t);
            for v in fm.values.iter() {
                assert!((v - c * c).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_interval_is_column_mean_square() {
        let trace = Array2::from_shape_fn((7, 2), |(i, j)| (i + 1) as f64 * if j == 0 { 1.0 } else { -0.5 });
        let fm = extract_features(&trace.view(), 1, "u", 3).unwrap();
        for col in 0..2 {
            let want: f64 = (0..7).map(|i| trace[[i, col]] * trace[[i, col]]).sum::<f64>() / 7.0;
            assert!((fm.values[[col, 0]] - want).abs() < 1e-12);
        }
        assert_eq!(fm.label, 3);
    }

    #[test]
    fn floor_rule_partitions_ten_rows_into_sizes_2_3_2_3() {
        let bounds = interval_bounds(10, 4);
        assert_eq!(bounds, vec![(0, 2), (2, 5), (5, 7), (7, 10)]);

        // Hand-accumulated oracle over the uneven intervals.
        let trace = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let fm = extract_features(&trace.view(), 4, "u", 0).unwrap();
        let hand = |lo: usize, hi: usize| -> f64 {
            (lo..hi).map(|i| (i * i) as f64).sum::<f64>() / (hi - lo) as f64
        };
        assert!((fm.values[[0, 0]] - hand(0, 2)).abs() < 1e-12);
        assert!((fm.values[[0, 1]] - hand(2, 5)).abs() < 1e-12);
        assert!((fm.values[[0, 2]] - hand(5, 7)).abs() < 1e-12);
        assert!((fm.values[[0, 3]] - hand(7, 10)).abs() < 1e-12);
    }

    #[test]
    fn intervals_partition_for_many_shapes() {
        for frames in 1..40usize {
            for intervals in 1..=frames {
                let bounds = interval_bounds(frames, intervals);
                assert_eq!(bounds[0].0, 0);
                assert_eq!(bounds[intervals - 1].1, frames);
                let mut total = 0;
                for (i, (lo, hi)) in bounds.iter().enumerate() {
                    assert!(lo < hi, "empty interval {i} for W={frames}, T={intervals}");
                    if i > 0 {
                        assert_eq!(bounds[i - 1].1, *lo, "gap or overlap");
                    }
                    total += hi - lo;
                }
                assert_eq!(total, frames);
            }
        }
    }

    #[test]
    fn scaling_trace_scales_features_quadratically() {
        let trace = Array2::from_shape_fn((9, 2), |(i, j)| (i as f64 - 4.0) * 0.3 + j as f64);
        let alpha = 2.5;
        let scaled = &trace * alpha;
        let a = extract_features(&trace.view(), 3, "u", 0).unwrap();
        let b = extract_features(&scaled.view(), 3, "u", 0).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((y - alpha * alpha * x).abs() < 1e-10);
        }
    }

    #[test]
    fn column_permutation_permutes_feature_rows() {
        let trace = Array2::from_shape_fn((8, 3), |(i, j)| (i * 3 + j) as f64 * 0.1);
        let permuted = Array2::from_shape_fn((8, 3), |(i, j)| trace[[i, (j + 1) % 3]]);
        let a = extract_features(&trace.view(), 2, "u", 0).unwrap();
        let b = extract_features(&permuted.view(), 2, "u", 0).unwrap();
        for k in 0..3 {
            for t in 0..2 {
                assert_eq!(b.values[[k, t]], a.values[[(k + 1) % 3, t]]);
            }
        }
    }

    #[test]
    fn short_trace_is_rejected() {
        let trace = Array2::zeros((3, 2));
        assert!(matches!(
            extract_features(&trace.view(), 4, "u", 0),
            Err(Error::TraceTooShort { frames: 3, intervals: 4 })
        ));
    }

    #[test]
    fn csv_layout_and_flatten_order() {
        let values = Array2::from_shape_fn((2, 3), |(k, t)| (k * 3 + t) as f64);
        let fm = FeatureMatrix {
            values,
            utterance_id: "u7".into(),
            label: 4,
        };
        assert_eq!(fm.flatten(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut buf = Vec::new();
        export_features_csv(&mut buf, &[fm]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "utt,label,f_0,f_1,f_2,f_3,f_4,f_5");
        assert_eq!(lines[1], "u7,4,0,1,2,3,4,5");
    }
}
