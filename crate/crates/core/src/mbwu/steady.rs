//! Steady-state detection over throughput series.

use serde::{Deserialize, Serialize};

use super::MeasureError;

/// Detection parameters. Defaults follow the usual storage performance
/// testing convention: a 5-sample window whose excursion stays within 20%
/// of its mean and whose trend stays within 10%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyParams {
    /// Number of consecutive points the window spans.
    pub window: usize,
    /// Allowed (max - min) / mean excursion within the window.
    pub band: f64,
    /// Allowed |least-squares slope * window| / mean trend.
    pub slope_limit: f64,
}

impl Default for SteadyParams {
    fn default() -> Self {
        SteadyParams {
            window: 5,
            band: 0.20,
            slope_limit: 0.10,
        }
    }
}

/// The earliest window that qualified as steady.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadySegment {
    /// Index of the first point of the window.
    pub start: usize,
    /// Window length in points.
    pub len: usize,
    /// Mean of the window — the steady value.
    pub mean: f64,
}

impl SteadySegment {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

fn least_squares_slope(window: &[f64]) -> f64 {
    let n = window.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = window.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (i, &y) in window.iter().enumerate() {
        let dx = i as f64 - x_mean;
        cov += dx * (y - y_mean);
        var += dx * dx;
    }
    if var == 0.0 {
        0.0
    } else {
        cov / var
    }
}

/// Scans for the earliest window of `params.window` consecutive points
/// whose excursion and trend fall within the configured bands. Returns
/// `None` when no window qualifies (for example a series that is still
/// ramping).
pub fn detect_steady_state(
    series: &[f64],
    params: &SteadyParams,
) -> Result<Option<SteadySegment>, MeasureError> {
    let window = params.window.max(2);
    if series.len() < window {
        return Err(MeasureError::InsufficientData {
            have: series.len(),
            need: window,
        });
    }
    for start in 0..=(series.len() - window) {
        let w = &series[start..start + window];
        let mean = w.iter().sum::<f64>() / window as f64;
        if !(mean > 0.0) {
            continue;
        }
        let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        if (max - min) / mean > params.band {
            continue;
        }
        let slope = least_squares_slope(w);
        if (slope * window as f64).abs() / mean > params.slope_limit {
            continue;
        }
        return Ok(Some(SteadySegment {
            start,
            len: window,
            mean,
        }));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_is_steady_from_the_start() {
        let series = [100.0; 5];
        let seg = detect_steady_state(&series, &SteadyParams::default())
            .unwrap()
            .unwrap();
        assert_eq!(seg.start, 0);
        assert_eq!(seg.mean, 100.0);
    }

    #[test]
    fn pure_ramp_yields_none() {
        // 10% growth per point violates the slope bound in every window.
        let series: Vec<f64> = (0..20).map(|i| 100.0 * 1.1f64.powi(i)).collect();
        assert_eq!(
            detect_steady_state(&series, &SteadyParams::default()).unwrap(),
            None
        );
    }

    #[test]
    fn short_series_is_an_error() {
        let err = detect_steady_state(&[1.0, 2.0], &SteadyParams::default()).unwrap_err();
        assert!(matches!(
            err,
            MeasureError::InsufficientData { have: 2, need: 5 }
        ));
    }

    /// Geometric ramp from 30% of the plateau: every in-ramp window has the
    /// same relative slope, well above the limit, so detection can only
    /// start at the transition.
    pub(crate) fn ramp_then_plateau(
        ramp_len: usize,
        plateau: f64,
        plateau_len: usize,
        noise_scale: f64,
    ) -> Vec<f64> {
        let growth = (1.0f64 / 0.3).powf(1.0 / ramp_len as f64);
        let mut series: Vec<f64> = (0..ramp_len)
            .map(|i| plateau * 0.3 * growth.powi(i as i32))
            .collect();
        for i in 0..plateau_len {
            let wobble = noise_scale * if i % 2 == 0 { 1.0 } else { -1.0 };
            series.push(plateau * (1.0 + wobble));
        }
        series
    }

    #[test]
    fn ramp_then_plateau_detects_near_the_transition() {
        let mut checked = 0;
        for ramp_len in [6usize, 10, 17] {
            for plateau in [800.0f64, 50_000.0] {
                for noise_scale in [0.0f64, 0.01, 0.02] {
                    let series = ramp_then_plateau(ramp_len, plateau, 10, noise_scale);
                    let seg = detect_steady_state(&series, &SteadyParams::default())
                        .unwrap()
                        .unwrap_or_else(|| {
                            panic!("no steady window for ramp {ramp_len}/{noise_scale}")
                        });
                    assert!(
                        seg.start.abs_diff(ramp_len) <= 1,
                        "ramp_len {ramp_len} plateau {plateau} noise {noise_scale}: start {}",
                        seg.start
                    );
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 18);
    }

    #[test]
    fn zero_mean_windows_are_skipped() {
        let series = [0.0, 0.0, 0.0, 0.0, 0.0, 50.0, 50.0, 50.0, 50.0, 50.0];
        let seg = detect_steady_state(&series, &SteadyParams::default())
            .unwrap()
            .unwrap();
        assert_eq!(seg.start, 5);
    }
}
