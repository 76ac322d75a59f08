//! Per-frame phase detrending: remove the packet's linear phase-vs-index
//! trend so residual phase structure becomes comparable across packets.

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::frame::{CsiFrame, CsiSeries};
use crate::Complex64;

/// How the linear trend is fitted to the unwrapped phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetrendMethod {
    /// Least-squares line over all tones.
    Ls,
    /// Line through the two edge tones (the classic two-point fit): exact
    /// zero residual at the first and last tone, but all tilt noise lands on
    /// the two edge measurements.
    Pads,
}

impl DetrendMethod {
    /// CLI/config name of the method.
    pub fn name(self) -> &'static str {
        match self {
            DetrendMethod::Ls => "ls",
            DetrendMethod::Pads => "pads",
        }
    }
}

/// Unwrap phases along the tone axis: each successive difference is mapped
/// into `(-pi, pi]` and accumulated.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut prev = match phases.first() {
        Some(&p) => {
            out.push(p);
            p
        }
        None => return out,
    };
    for &p in &phases[1..] {
        let mut d = p - prev + std::f64::consts::PI;
        d = d.rem_euclid(std::f64::consts::TAU);
        if d == 0.0 {
            d = std::f64::consts::TAU;
        }
        let next = out.last().unwrap() + d - std::f64::consts::PI;
        out.push(next);
        prev = p;
    }
    out
}

/// Fit the linear trend `phase ~ slope * m + intercept` over subcarrier
/// indices and return `(slope, intercept)`.
fn fit_line(indices: &[f64], phases: &[f64], method: DetrendMethod) -> (f64, f64) {
    match method {
        DetrendMethod::Ls => {
            let n = indices.len() as f64;
            let mx = indices.iter().sum::<f64>() / n;
            let my = phases.iter().sum::<f64>() / n;
            let mut sxx = 0.0;
            let mut sxy = 0.0;
            for (&x, &y) in indices.iter().zip(phases) {
                sxx += (x - mx) * (x - mx);
                sxy += (x - mx) * (y - my);
            }
            let slope = sxy / sxx;
            (slope, my - slope * mx)
        }
        DetrendMethod::Pads => {
            let (x0, xk) = (indices[0], *indices.last().unwrap());
            let (y0, yk) = (phases[0], *phases.last().unwrap());
            let slope = (yk - y0) / (xk - x0);
            (slope, y0 - slope * x0)
        }
    }
}

/// Remove the linear phase trend of one frame; amplitudes are untouched.
pub fn detrend_frame(
    frame: &CsiFrame,
    method: DetrendMethod,
) -> Result<CsiFrame, PreprocessError> {
    if frame.csi.len() < 2 {
        return Err(PreprocessError::TooFewTones {
            need: 2,
            got: frame.csi.len(),
        });
    }
    let indices: Vec<f64> = frame.grid.indices().iter().map(|&m| f64::from(m)).collect();
    let phases = unwrap_phases(&frame.phases());
    let (slope, intercept) = fit_line(&indices, &phases, method);
    let mut out = frame.clone();
    for (k, z) in out.csi.iter_mut().enumerate() {
        *z *= Complex64::from_polar(1.0, -(slope * indices[k] + intercept));
    }
    Ok(out)
}

/// Detrend every frame of a series and record the method in the metadata.
pub fn detrend_series(
    series: &CsiSeries,
    method: DetrendMethod,
) -> Result<CsiSeries, PreprocessError> {
    if series.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    let frames = series
        .frames
        .iter()
        .map(|f| detrend_frame(f, method))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = series.with_frames(frames)?;
    out.meta.insert("detrend".into(), method.name().into());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SubcarrierGrid;
    use approx::assert_relative_eq;

    fn frame_with_phases(build: impl Fn(i32) -> f64) -> CsiFrame {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let csi = grid
            .indices()
            .iter()
            .map(|&m| Complex64::from_polar(1.0 + 0.001 * f64::from(m), build(m)))
            .collect();
        CsiFrame::new("rx", 0, 0, -40.0, grid, csi).unwrap()
    }

    #[test]
    fn unwrap_restores_a_steep_line() {
        // Oracle: a slope of 1.3 rad/index wraps repeatedly in (-pi, pi];
        // unwrapping must restore increments of exactly 1.3 (up to a global
        // 2 pi k offset on the first element).
        let raw: Vec<f64> = (0..20)
            .map(|i| {
                let phi = 1.3 * i as f64;
                (phi + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
                    - std::f64::consts::PI
            })
            .collect();
        let un = unwrap_phases(&raw);
        for pair in un.windows(2) {
            assert_relative_eq!(pair[1] - pair[0], 1.3, max_relative = 1e-12);
        }
    }

    #[test]
    fn pads_detrend_zeroes_the_edge_tones() {
        let f = frame_with_phases(|m| 0.4 * f64::from(m) + 1.0 + 0.02 * f64::from(m * m) / 100.0);
        let out = detrend_frame(&f, DetrendMethod::Pads).unwrap();
        let first = out.csi.first().unwrap().arg();
        let last = out.csi.last().unwrap().arg();
        assert!(first.abs() < 1e-12, "first-tone residual {first}");
        assert!(last.abs() < 1e-12, "last-tone residual {last}");
    }

    #[test]
    fn pure_linear_ramp_is_removed_entirely_by_both_methods() {
        for method in [DetrendMethod::Ls, DetrendMethod::Pads] {
            let f = frame_with_phases(|m| -0.7 * f64::from(m) + 2.1);
            let out = detrend_frame(&f, method).unwrap();
            for z in &out.csi {
                assert!(z.arg().abs() < 1e-9, "{method:?} residual {}", z.arg());
            }
        }
    }

    #[test]
    fn amplitudes_are_untouched() {
        let f = frame_with_phases(|m| 0.3 * f64::from(m));
        let out = detrend_frame(&f, DetrendMethod::Ls).unwrap();
        for (a, b) in f.csi.iter().zip(&out.csi) {
            assert_relative_eq!(a.norm(), b.norm(), max_relative = 1e-12);
        }
    }

    #[test]
    fn ls_detrend_is_idempotent() {
        let f = frame_with_phases(|m| {
            0.45 * f64::from(m) - 0.8 + 0.15 * (f64::from(m) * 0.4).sin()
        });
        let once = detrend_frame(&f, DetrendMethod::Ls).unwrap();
        let twice = detrend_frame(&once, DetrendMethod::Ls).unwrap();
        for (a, b) in once.csi.iter().zip(&twice.csi) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn ls_outperforms_edge_fit_under_edge_noise() {
        // A cubic phase wiggle plus a perturbed edge tone: the two-point fit
        // tilts the whole frame, the least-squares fit barely moves.
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let true_residual: Vec<f64> = grid
            .indices()
            .iter()
            .map(|&m| 0.05 * (f64::from(m) / 28.0).powi(3))
            .collect();
        let mut phases: Vec<f64> = grid
            .indices()
            .iter()
            .zip(&true_residual)
            .map(|(&m, r)| 0.2 * f64::from(m) + r)
            .collect();
        phases[0] += 0.3; // corrupted edge measurement
        let csi = phases
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect();
        let f = CsiFrame::new("rx", 0, 0, -40.0, grid, csi).unwrap();
        let rms = |frame: &CsiFrame| {
            let dev: f64 = frame
                .csi
                .iter()
                .zip(&true_residual)
                .skip(1) // skip the corrupted tone itself
                .map(|(z, r)| {
                    let d = z.arg() - r;
                    d * d
                })
                .sum();
            (dev / (frame.csi.len() - 1) as f64).sqrt()
        };
        let ls = detrend_frame(&f, DetrendMethod::Ls).unwrap();
        let pads = detrend_frame(&f, DetrendMethod::Pads).unwrap();
        assert!(
            rms(&ls) < 0.5 * rms(&pads),
            "ls rms {} vs edge-fit rms {}",
            rms(&ls),
            rms(&pads)
        );
    }
}
