use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Event, PulseSequence};
use crate::error::{Error, Result};
use crate::signal::Signal;

/// g(t) on [0, T]: `signs[k]` on `[breakpoints[k], breakpoints[k+1])`, zero
/// outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityFunction {
    breakpoints: Vec<f64>,
    signs: Vec<f64>,
    /// Segment lengths taken from the sequence's own delays, so that
    /// symmetric sequences cancel exactly at DC.
    durations: Vec<f64>,
}

impl SensitivityFunction {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn total_time(&self) -> f64 {
        *self.breakpoints.last().expect("at least one segment")
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.signs)
            .map(|(w, &s)| (w[0], w[1], s))
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.total_time() {
            return 0.0;
        }
        let k = self.breakpoints.partition_point(|&b| b <= t).clamp(1, self.signs.len());
        self.signs[k - 1]
    }

    /// φ = ∫ g(t) Δ(t) dt, integrated segment by segment with the signal's
    /// own exact integral.
    pub fn phase(&self, signal: &Signal) -> Result<f64> {
        signal.ensure_covers(self.total_time())?;
        Ok(self.segments().map(|(a, b, s)| s * signal.integral(a, b)).sum())
    }

    /// g_n = ∫₀ᵀ g(t) e^{−i2πnt/T} dt.
    pub fn coefficient(&self, n: i64) -> Complex64 {
        let total = self.total_time();
        if n == 0 {
            let dc = self.durations.iter().zip(&self.signs).map(|(d, s)| s * d).sum();
            return Complex64::new(dc, 0.0);
        }
        let w = TAU * n as f64 / total;
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b, s) in self.segments() {
            let ea = Complex64::from_polar(1.0, -w * a);
            let eb = Complex64::from_polar(1.0, -w * b);
            acc += s * (ea - eb);
        }
        acc / Complex64::new(0.0, w)
    }
}

/// Builds g(t) for a π/2-bracketed sequence, treating pulses as instantaneous.
pub fn sensitivity_function(seq: &PulseSequence) -> Result<SensitivityFunction> {
    seq.validate_sensing()?;
    let total = seq.total_time();
    if !(total > 0.0) {
        return Err(Error::InvalidSequence("zero free-evolution time".into()));
    }
    let mut breakpoints = vec![0.0];
    let mut signs = vec![1.0];
    for t in seq.pi_pulse_times() {
        breakpoints.push(t);
        signs.push(-signs.last().unwrap());
    }
    breakpoints.push(total);

    let mut durations = vec![0.0];
    let inner = &seq.events()[1..seq.events().len() - 1];
    for e in inner {
        match e {
            Event::Pulse(p) => {
                *durations.last_mut().unwrap() += 0.5 * p.duration;
                durations.push(0.5 * p.duration);
            }
            Event::Delay(d) => *durations.last_mut().unwrap() += d,
        }
    }
    Ok(SensitivityFunction {
        breakpoints,
        signs,
        durations,
    })
}

pub fn phase_from_signal(g: &SensitivityFunction, signal: &Signal) -> Result<f64> {
    g.phase(signal)
}

/// Fourier coefficients of g on the harmonics ν_n = n/T, n ∈ [−n_max, n_max].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpectrum {
    total_time: f64,
    n_max: usize,
    coefficients: Vec<Complex64>,
}

impl FilterSpectrum {
    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn harmonics(&self) -> impl Iterator<Item = i64> {
        let n = self.n_max as i64;
        -n..=n
    }

    pub fn coefficient(&self, n: i64) -> Complex64 {
        self.coefficients[(n + self.n_max as i64) as usize]
    }

    pub fn frequency(&self, n: i64) -> f64 {
        n as f64 / self.total_time
    }

    /// S_g(ν_n) = |g_n|²/T, in s.
    pub fn weight(&self, n: i64) -> f64 {
        self.coefficient(n).norm_sqr() / self.total_time
    }

    /// Σ_n |g_n|²/T², which tends to 1 as n_max grows.
    pub fn parseval_sum(&self) -> f64 {
        let t2 = self.total_time * self.total_time;
        self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>() / t2
    }

    /// Non-negative harmonic with the largest weight.
    pub fn peak_harmonic(&self) -> i64 {
        (0..=self.n_max as i64)
            .max_by(|&a, &b| self.weight(a).total_cmp(&self.weight(b)))
            .unwrap_or(0)
    }
}

pub fn filter_spectrum(g: &SensitivityFunction, n_max: usize) -> Result<FilterSpectrum> {
    if n_max < 1 {
        return Err(Error::param("n_max", "must be at least 1"));
    }
    let n = n_max as i64;
    let positive: Vec<Complex64> = (0..=n).map(|k| g.coefficient(k)).collect();
    let mut coefficients: Vec<Complex64> = positive[1..].iter().rev().map(|c| c.conj()).collect();
    coefficients.extend(positive);
    Ok(FilterSpectrum {
        total_time: g.total_time(),
        n_max,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{cpmg, hahn, ramsey};
    use approx::assert_abs_diff_eq;
    use rustfft::FftPlanner;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn canonical_sensitivity_functions() {
        let tau = 2e-6;
        let r = sensitivity_function(&ramsey(tau).unwrap()).unwrap();
        assert_eq!(r.signs(), &[1.0]);
        assert_eq!(r.breakpoints(), &[0.0, tau]);

        let h = sensitivity_function(&hahn(tau).unwrap()).unwrap();
        assert_eq!(h.signs(), &[1.0, -1.0]);
        assert_eq!(h.breakpoints(), &[0.0, tau / 2.0, tau]);

        let c = sensitivity_function(&cpmg(2, tau).unwrap()).unwrap();
        assert_eq!(c.signs(), &[1.0, -1.0, 1.0]);
        assert_abs_diff_eq!(c.breakpoints()[1], tau / 2.0);
        assert_abs_diff_eq!(c.breakpoints()[2], 1.5 * tau);
        assert_eq!(c.value(-1.0), 0.0);
        assert_eq!(c.value(tau), -1.0);
    }

    #[test]
    fn unbracketed_sequence_is_rejected() {
        let seq = crate::sequence::dsl::parse_sequence("wait 1us; p2 y").unwrap();
        assert!(sensitivity_function(&seq).is_err());
    }

    #[test]
    fn constant_detuning_phases() {
        let d = Signal::constant(3.0e5);
        let tau = 1.7e-6;
        let h = sensitivity_function(&hahn(tau).unwrap()).unwrap();
        assert_abs_diff_eq!(phase_from_signal(&h, &d).unwrap(), 0.0, epsilon = 1e-12);
        let r = sensitivity_function(&ramsey(tau).unwrap()).unwrap();
        assert_abs_diff_eq!(phase_from_signal(&r, &d).unwrap(), 3.0e5 * tau, epsilon = 1e-12);
    }

    #[test]
    fn lock_in_factor_against_brute_force_quadrature() {
        let (n, tau, b) = (8, 1e-6, 1.0e5);
        let nu = 1.0 / (2.0 * tau);
        let g = sensitivity_function(&cpmg(n, tau).unwrap()).unwrap();
        let signal = Signal::Sinusoid {
            amplitude: b,
            frequency: nu,
            phase: FRAC_PI_2,
        };
        let total = g.total_time();
        let analytic = phase_from_signal(&g, &signal).unwrap();
        assert_abs_diff_eq!(analytic / (b * total), 2.0 / PI, epsilon = 1e-12);

        // midpoint rule on a fine grid as an independent check
        let steps = 400_000;
        let h = total / steps as f64;
        let brute: f64 = (0..steps)
            .map(|k| {
                let t = (k as f64 + 0.5) * h;
                g.value(t) * signal.value(t) * h
            })
            .sum();
        assert_abs_diff_eq!(brute / (b * total), 2.0 / PI, epsilon = 1e-6);
    }

    #[test]
    fn sampled_signal_must_cover_sequence() {
        let g = sensitivity_function(&ramsey(1e-6).unwrap()).unwrap();
        let short = Signal::sampled(1e-8, vec![0.0; 50]).unwrap();
        assert!(matches!(phase_from_signal(&g, &short), Err(Error::Coverage { .. })));
    }

    #[test]
    fn ramsey_is_lowpass() {
        let tau = 1e-6;
        let g = sensitivity_function(&ramsey(tau).unwrap()).unwrap();
        let f = filter_spectrum(&g, 50).unwrap();
        assert_abs_diff_eq!(f.coefficient(0).re, tau, epsilon = 1e-20);
        assert_eq!(f.peak_harmonic(), 0);
        for k in 1..=50 {
            assert!(f.coefficient(k).norm() < 1e-18);
        }
    }

    #[test]
    fn even_cpmg_has_no_dc_response() {
        let g = sensitivity_function(&cpmg(8, 1e-6).unwrap()).unwrap();
        let f = filter_spectrum(&g, 40).unwrap();
        assert_eq!(f.coefficient(0), Complex64::new(0.0, 0.0));
        for n in 1..=40 {
            let (a, b) = (f.coefficient(n), f.coefficient(-n));
            assert_eq!(a, b.conj());
        }
    }

    #[test]
    fn cpmg8_filter_peak_matches_fft_oracle() {
        let tau = 1e-6;
        let g = sensitivity_function(&cpmg(8, tau).unwrap()).unwrap();
        let f = filter_spectrum(&g, 64).unwrap();
        let peak = f.peak_harmonic();
        assert_abs_diff_eq!(f.frequency(peak), 1.0 / (2.0 * tau), epsilon = 1e-6);

        // dense sampled g(t), FFT, and compare |g_n| at low harmonics
        let samples = 1 << 14;
        let dt = g.total_time() / samples as f64;
        let mut buf: Vec<Complex64> = (0..samples)
            .map(|k| Complex64::new(g.value((k as f64 + 0.5) * dt) * dt, 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(samples).process(&mut buf);
        let oracle_peak = (0..64)
            .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
            .unwrap();
        assert_eq!(oracle_peak as i64, peak);
        for (n, b) in buf.iter().enumerate().take(20) {
            assert_abs_diff_eq!(b.norm(), f.coefficient(n as i64).norm(), epsilon = 1e-9);
        }
    }

    #[test]
    fn parseval_for_cpmg8() {
        let g = sensitivity_function(&cpmg(8, 1e-6).unwrap()).unwrap();
        let f = filter_spectrum(&g, 10_000).unwrap();
        assert!((f.parseval_sum() - 1.0).abs() < 0.01, "{}", f.parseval_sum());
    }
}
