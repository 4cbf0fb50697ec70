//! Lowpass Butterworth filtering as cascaded second-order sections.
//!
//! Coefficients come from the analog prototype through the bilinear
//! transform with the cutoff prewarped, so the digital response is exactly
//! `1/√2` at the requested cutoff. Zero-phase filtering runs the cascade
//! forward and backward over an odd-reflected extension of the signal, with
//! section states initialised to their steady state for the edge value.

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    ZeroPhase,
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    /// Cutoff as a fraction of the sampling rate, strictly inside `(0, 0.5)`.
    pub cutoff: f64,
    pub mode: FilterMode,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            order: 4,
            cutoff: 0.1,
            mode: FilterMode::ZeroPhase,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ORDER).contains(&self.order) {
            return invalid(format!(
                "filter order {} outside 1..={MAX_ORDER}",
                self.order
            ));
        }
        if !(self.cutoff > 0.0 && self.cutoff < 0.5) {
            return invalid(format!("cutoff {} outside (0, 0.5)", self.cutoff));
        }
        Ok(())
    }

    /// Edge extension used by the zero-phase pass.
    pub fn pad_len(&self) -> usize {
        3 * self.order
    }
}

/// One biquad, `a[0]` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Sos {
    fn response(&self, omega: f64) -> Complex<f64> {
        let z1 = Complex::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let num = Complex::from(self.b[0]) + z1 * self.b[1] + z2 * self.b[2];
        let den = Complex::from(self.a[0]) + z1 * self.a[1] + z2 * self.a[2];
        num / den
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Transposed direct form II states for a constant input `x` that has
    /// been flowing forever.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let y = self.dc_gain() * x;
        [y - self.b[0] * x, self.b[2] * x - self.a[2] * y]
    }
}

pub fn design_butterworth(order: usize, cutoff: f64) -> Result<Vec<Sos>> {
    FilterSpec {
        order,
        cutoff,
        mode: FilterMode::ZeroPhase,
    }
    .validate()?;
    let k = (PI * cutoff).tan();
    let k2 = k * k;
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        // -2 Re(p) for the i-th conjugate pole pair of the unit prototype
        let damping = 2.0 * (PI * (2 * i + 1) as f64 / (2 * order) as f64).sin();
        let a0 = 1.0 + damping * k + k2;
        sections.push(Sos {
            b: [k2 / a0, 2.0 * k2 / a0, k2 / a0],
            a: [1.0, (2.0 * k2 - 2.0) / a0, (1.0 - damping * k + k2) / a0],
        });
    }
    if order % 2 == 1 {
        let a0 = 1.0 + k;
        sections.push(Sos {
            b: [k / a0, k / a0, 0.0],
            a: [1.0, (k - 1.0) / a0, 0.0],
        });
    }
    Ok(sections)
}

/// Magnitude of the cascade at `freq` (fraction of the sampling rate).
pub fn magnitude_response(sections: &[Sos], freq: f64) -> f64 {
    let omega = 2.0 * PI * freq;
    sections
        .iter()
        .map(|s| s.response(omega))
        .fold(Complex::from(1.0), |acc, h| acc * h)
        .norm()
}

/// Runs the cascade once over `x`, starting every section at the steady
/// state for `x[0]`.
fn sosfilt_steady(sections: &[Sos], x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    let Some(&first) = x.first() else {
        return y;
    };
    let mut level = first;
    for s in sections {
        let [mut z1, mut z2] = s.steady_state(level);
        level *= s.dc_gain();
        for v in y.iter_mut() {
            let input = *v;
            let out = s.b[0] * input + z1;
            z1 = s.b[1] * input - s.a[1] * out + z2;
            z2 = s.b[2] * input - s.a[2] * out;
            *v = out;
        }
    }
    y
}

pub fn apply_filter(signal: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let pad = spec.pad_len();
    if signal.len() <= pad {
        return invalid(format!(
            "signal of length {} too short for order {} (need more than {pad})",
            signal.len(),
            spec.order
        ));
    }
    let sections = design_butterworth(spec.order, spec.cutoff)?;
    match spec.mode {
        FilterMode::Causal => Ok(sosfilt_steady(&sections, signal)),
        FilterMode::ZeroPhase => {
            let n = signal.len();
            let (x0, xn) = (signal[0], signal[n - 1]);
            let mut ext = Vec::with_capacity(n + 2 * pad);
            ext.extend((1..=pad).rev().map(|i| 2.0 * x0 - signal[i]));
            ext.extend_from_slice(signal);
            ext.extend((1..=pad).map(|i| 2.0 * xn - signal[n - 1 - i]));
            let mut y = sosfilt_steady(&sections, &ext);
            y.reverse();
            let mut y = sosfilt_steady(&sections, &y);
            y.reverse();
            Ok(y[pad..pad + n].to_vec())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn analog_magnitude(order: usize, cutoff: f64, f: f64) -> f64 {
        // prewarped Butterworth magnitude, the bilinear image of 1/√(1+(Ω/Ωc)^2N)
        let ratio = (PI * f).tan() / (PI * cutoff).tan();
        1.0 / (1.0 + ratio.powi(2 * order as i32)).sqrt()
    }

    fn sine(freq: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64).sin()).collect()
    }

    fn amplitude(x: &[f64], freq: f64) -> f64 {
        // least-squares amplitude at a known frequency
        let (mut s, mut c) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let w = 2.0 * PI * freq * i as f64;
            s += v * w.sin();
            c += v * w.cos();
        }
        2.0 * (s * s + c * c).sqrt() / x.len() as f64
    }

    #[test]
    fn dc_gain_and_section_count() {
        let s = design_butterworth(1, 0.1).unwrap();
        assert_eq!(s.len(), 1);
        assert!((magnitude_response(&s, 0.0) - 1.0).abs() < 1e-12);
        assert_eq!(design_butterworth(5, 0.2).unwrap().len(), 3);
    }

    #[test]
    fn minus_three_db_at_cutoff() {
        for order in 1..=MAX_ORDER {
            let s = design_butterworth(order, 0.1).unwrap();
            assert!((magnitude_response(&s, 0.1) - 0.5f64.sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn matches_prewarped_closed_form() {
        for order in [1, 2, 3, 4, 7] {
            let s = design_butterworth(order, 0.07).unwrap();
            for f in [0.0, 0.01, 0.05, 0.07, 0.2, 0.45] {
                let got = magnitude_response(&s, f);
                assert!(
                    (got - analog_magnitude(order, 0.07, f)).abs() < 1e-9,
                    "{order} {f}"
                );
            }
        }
    }

    #[test]
    fn tenfold_cutoff_is_suppressed() {
        // 10 × 0.05 lands on Nyquist where the bilinear response is zero.
        let s = design_butterworth(4, 0.05).unwrap();
        assert!(magnitude_response(&s, 0.5) <= 1.1e-4);
        let x: Vec<f64> = (0..2000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let y = apply_filter(
            &x,
            &FilterSpec {
                order: 4,
                cutoff: 0.05,
                mode: FilterMode::ZeroPhase,
            },
        )
        .unwrap();
        let interior = &y[400..1600];
        assert!(interior.iter().all(|v| v.abs() <= 1.1e-4));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(design_butterworth(0, 0.1).is_err());
        assert!(design_butterworth(9, 0.1).is_err());
        assert!(design_butterworth(2, 0.5).is_err());
        assert!(design_butterworth(2, 0.0).is_err());
        assert!(apply_filter(&[1.0; 12], &FilterSpec::default()).is_err());
        assert!(apply_filter(&[1.0; 13], &FilterSpec::default()).is_ok());
    }

    #[test]
    fn constant_and_zero_pass_through() {
        for mode in [FilterMode::ZeroPhase, FilterMode::Causal] {
            let spec = FilterSpec {
                mode,
                ..FilterSpec::default()
            };
            let y = apply_filter(&[3.7; 64], &spec).unwrap();
            assert!(y.iter().all(|v| (v - 3.7).abs() < 1e-9));
            assert!(apply_filter(&[0.0; 64], &spec)
                .unwrap()
                .iter()
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn two_tone_separation() {
        let spec = FilterSpec {
            order: 4,
            cutoff: 0.04,
            mode: FilterMode::ZeroPhase,
        };
        let (lo, hi) = (0.2 * spec.cutoff, 10.0 * spec.cutoff);
        let n = 5000;
        let x: Vec<f64> = sine(lo, n)
            .iter()
            .zip(sine(hi, n))
            .map(|(a, b)| a + b)
            .collect();
        let y = apply_filter(&x, &spec).unwrap();
        let mid = &y[500..4500];
        let low_amp = amplitude(mid, lo);
        let high_amp = amplitude(mid, hi);
        assert!((low_amp - 1.0).abs() < 0.02, "{low_amp}");
        assert!(high_amp < 1e-3, "{high_amp}");
    }

    #[test]
    fn zero_phase_has_no_lag() {
        let spec = FilterSpec::default();
        let x = sine(0.01, 2000);
        let y = apply_filter(&x, &spec).unwrap();
        let xcorr = |lag: i64| -> f64 {
            (200..1800)
                .map(|i| x[i] * y[(i as i64 + lag) as usize])
                .sum()
        };
        let best = (-20..=20)
            .max_by(|a, b| xcorr(*a).partial_cmp(&xcorr(*b)).unwrap())
            .unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn magnitude_is_monotone() {
        for order in 1..=MAX_ORDER {
            let s = design_butterworth(order, 0.13).unwrap();
            let mags: Vec<f64> = (0..=500)
                .map(|i| magnitude_response(&s, i as f64 * 0.001))
                .collect();
            assert!(mags.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    proptest! {
        #[test]
        fn filtering_is_linear(
            xs in proptest::collection::vec(-10.0f64..10.0, 40),
            ys in proptest::collection::vec(-10.0f64..10.0, 40),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let spec = FilterSpec::default();
            let mix: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
            let lhs = apply_filter(&mix, &spec).unwrap();
            let fx = apply_filter(&xs, &spec).unwrap();
            let fy = apply_filter(&ys, &spec).unwrap();
            for i in 0..40 {
                prop_assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
            }
        }
    }
}
