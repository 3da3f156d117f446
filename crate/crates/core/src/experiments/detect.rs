//! Detectors run on recorded series: echo departure, diffusion fits, and the
//! localization knee.

use crate::error::{Error, Result};
use crate::observables::ObservableSeries;

/// Relative `<n^2>` departure from a baseline, sustained over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResumeDetector {
    pub rho: f64,
    pub window: usize,
    /// The deviation is measured relative to `max(baseline, floor)` so that a
    /// baseline returning to `<n^2> = 0` does not amplify roundoff.
    pub floor: f64,
}

impl Default for ResumeDetector {
    fn default() -> Self {
        ResumeDetector {
            rho: 0.1,
            window: 5,
            floor: 1.0,
        }
    }
}

impl ResumeDetector {
    fn departs(&self, value: f64, base: f64) -> bool {
        (value - base).abs() > self.rho * base.max(self.floor)
    }
}

/// First kick of the first run of `window` consecutive samples in which the
/// series departs from the baseline. `None` if it never does.
pub fn detect_resume(
    series: &ObservableSeries,
    baseline: &ObservableSeries,
    detector: ResumeDetector,
) -> Result<Option<u64>> {
    if series.len() != baseline.len() {
        return Err(Error::LengthMismatch {
            left: series.len(),
            right: baseline.len(),
        });
    }
    let window = detector.window.max(1);
    let mut run = 0usize;
    for (i, (s, b)) in series.samples.iter().zip(&baseline.samples).enumerate() {
        if s.kick != b.kick {
            return Err(Error::InvalidParam(format!(
                "series and baseline sampled at different kicks ({} vs {})",
                s.kick, b.kick
            )));
        }
        if detector.departs(s.n2, b.n2) {
            run += 1;
            if run == window {
                return Ok(Some(series.samples[i + 1 - window].kick));
            }
        } else {
            run = 0;
        }
    }
    Ok(None)
}

/// Least-squares line with coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

/// Linear-growth test over the final 80% of a forward run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionCheck {
    pub fit: LinearFit,
    pub passes: bool,
}

pub fn diffusion_check(series: &ObservableSeries) -> Option<DiffusionCheck> {
    let last = series.samples.last()?.kick as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = series
        .samples
        .iter()
        .filter(|s| s.kick as f64 >= 0.2 * last)
        .map(|s| (s.kick as f64, s.n2))
        .unzip();
    let fit = linear_fit(&xs, &ys)?;
    Some(DiffusionCheck {
        fit,
        passes: fit.slope > 0.0 && fit.r2 > 0.9,
    })
}

/// Saturation test: mean `<n^2>` over the last 10% of kicks against the mean
/// over the 40-50% window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauCheck {
    pub late_mean: f64,
    pub mid_mean: f64,
    pub passes: bool,
}

pub fn plateau_check(series: &ObservableSeries) -> Option<PlateauCheck> {
    let last = series.samples.last()?.kick as f64;
    let mean_in = |lo: f64, hi: f64| {
        let v: Vec<f64> = series
            .samples
            .iter()
            .filter(|s| {
                let k = s.kick as f64;
                k >= lo * last && k <= hi * last
            })
            .map(|s| s.n2)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let mid_mean = mean_in(0.4, 0.5)?;
    let late_mean = mean_in(0.9, 1.0)?;
    Some(PlateauCheck {
        late_mean,
        mid_mean,
        passes: late_mean < 2.0 * mid_mean,
    })
}

/// Localization time: the end kick of the first trailing window whose
/// `<n^2>` slope falls below `fraction` of the slope over the first window.
pub fn detect_knee(series: &ObservableSeries, window: usize, fraction: f64) -> Option<u64> {
    let w = window.max(2);
    let s = &series.samples;
    if s.len() < 2 * w {
        return None;
    }
    let slope = |lo: usize| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = s[lo..lo + w].iter().map(|x| (x.kick as f64, x.n2)).unzip();
        linear_fit(&xs, &ys).map(|f| f.slope)
    };
    let initial = slope(0)?;
    if initial <= 0.0 {
        return None;
    }
    (w..=s.len() - w)
        .find(|&lo| slope(lo).is_some_and(|sl| sl < fraction * initial))
        .map(|lo| s[lo + w - 1].kick)
}
