//! Statistical cross-checks between the analytic formulas and sampled
//! simulations. Every test uses fixed seeds.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;

use spinsense::analysis::{phase_variance, predicted_population, static_envelope};
use spinsense::engine::{coherence_decay_curve, estimate_detuning, simulate_readout, ReadoutConfig};
use spinsense::rng::stream;
use spinsense::{
    cpmg, filter_spectrum, hahn, ramsey, reconstruct_spectrum, run_once, sensitivity_function, SequenceFamily,
    Signal, SignalModel,
};

fn ou(sigma: f64, tc: f64) -> SignalModel {
    SignalModel::OrnsteinUhlenbeck {
        std_dev: sigma,
        correlation_time: tc,
    }
}

fn mean_population(seq: &spinsense::PulseSequence, model: &SignalModel, n: u64, seed: u64) -> f64 {
    let total = seq.total_time();
    let dt = model.default_dt(total).unwrap_or(total);
    (0..n)
        .map(|r| {
            let signal = model.realize(&mut stream(seed, &[r]), total, dt).unwrap();
            run_once(seq, &signal).unwrap()
        })
        .sum::<f64>()
        / n as f64
}

#[test]
fn cpmg8_phase_variance_matches_sampled_trajectories() {
    let model = ou(TAU * 50e3, 5e-6);
    let seq = cpmg(8, 1e-6).unwrap();
    let g = sensitivity_function(&seq).unwrap();
    let analytic = phase_variance(&filter_spectrum(&g, 10_000).unwrap(), &model).unwrap();
    assert!(analytic.truncation_bound < 0.01 * analytic.value);

    let total = seq.total_time();
    let dt = model.default_dt(total).unwrap();
    let n = 10_000;
    let sampled = (0..n)
        .map(|r| {
            let signal = model.realize(&mut stream(21, &[r]), total, dt).unwrap();
            g.phase(&signal).unwrap().powi(2)
        })
        .sum::<f64>()
        / n as f64;
    let ratio = sampled / analytic.value;
    assert!((ratio - 1.0).abs() < 0.03, "sampled/analytic = {ratio}");
}

#[test]
fn predicted_population_matches_engine_for_gaussian_noise() {
    let cases: Vec<(spinsense::PulseSequence, SignalModel)> = vec![
        (ramsey(0.5e-6).unwrap(), SignalModel::StaticGaussian { mean: 0.0, std_dev: TAU * 300e3 }),
        (ramsey(1.5e-6).unwrap(), SignalModel::StaticGaussian { mean: 0.0, std_dev: TAU * 100e3 }),
        (hahn(3e-6).unwrap(), SignalModel::StaticGaussian { mean: 0.0, std_dev: TAU * 300e3 }),
        (cpmg(4, 1e-6).unwrap(), ou(TAU * 100e3, 5e-6)),
        (cpmg(8, 0.5e-6).unwrap(), ou(TAU * 200e3, 5e-6)),
        (cpmg(8, 1e-6).unwrap(), ou(TAU * 100e3, 5e-6)),
        (cpmg(8, 2e-6).unwrap(), ou(TAU * 50e3, 5e-6)),
        (
            cpmg(8, 1e-6).unwrap(),
            SignalModel::Composite {
                components: vec![
                    SignalModel::StaticGaussian { mean: 0.0, std_dev: TAU * 1e6 },
                    ou(TAU * 100e3, 5e-6),
                ],
            },
        ),
    ];
    for (i, (seq, model)) in cases.iter().enumerate() {
        let g = sensitivity_function(seq).unwrap();
        let v = phase_variance(&filter_spectrum(&g, 10_000).unwrap(), model).unwrap().value;
        let predicted = predicted_population(v);
        let simulated = mean_population(seq, model, 4000, 100 + i as u64);
        assert!(
            (simulated / predicted - 1.0).abs() < 0.03,
            "case {i}: simulated {simulated}, predicted {predicted}"
        );
    }
}

#[test]
fn gaussian_phase_histogram_reproduces_population() {
    for variance in [0.1f64, 1.0, 2.0, 5.0] {
        let mut rng = stream(8, &[]);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| {
                let phi: f64 = variance.sqrt() * rng.sample::<f64, _>(StandardNormal);
                0.5 * (1.0 + phi.cos())
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean / predicted_population(variance) - 1.0).abs() < 0.01);
    }
}

#[test]
fn ramsey_envelope_matches_static_formula() {
    let sigma = TAU * 159.155e3;
    let model = SignalModel::StaticGaussian { mean: 0.0, std_dev: sigma };
    let grid: Vec<f64> = (1..=10).map(|k| k as f64 * 0.3 / sigma).collect();
    let curve = coherence_decay_curve(SequenceFamily::Ramsey, &grid, &model, 100_000, 3).unwrap();
    for p in curve {
        assert!((p.coherence - static_envelope(p.time, sigma)).abs() < 0.01);
    }
}

#[test]
fn slope_estimator_covers_truth() {
    let tau = 1e-6;
    let truth = PI / (2.0 * tau) + 0.1 / tau;
    let p = run_once(&ramsey(tau).unwrap(), &Signal::constant(truth)).unwrap();
    let runs = 1000;
    let mut covered = 0;
    for seed in 0..runs {
        let cfg = ReadoutConfig {
            repetitions: 10_000,
            seed,
            ..Default::default()
        };
        let out = simulate_readout(p, &cfg, &mut stream(seed, &[0, 1]));
        let e = estimate_detuning(out.p_hat, out.std_error, tau).unwrap();
        if (e.estimate - truth).abs() <= 3.0 * e.std_error {
            covered += 1;
        }
    }
    assert!(covered >= 990, "coverage {covered}/{runs}");
}

#[test]
fn readout_penalty_equals_fewer_repetitions() {
    let variance = |cfg: &ReadoutConfig| {
        let trials = 1000;
        let draws: Vec<f64> = (0..trials)
            .map(|k| simulate_readout(0.5, cfg, &mut stream(cfg.seed, &[k])).p_hat)
            .collect();
        let m = draws.iter().sum::<f64>() / trials as f64;
        draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (trials - 1) as f64
    };
    let with_m0 = ReadoutConfig {
        repetitions: 8000,
        m0: 8.0,
        seed: 1,
        ..Default::default()
    };
    let fewer = ReadoutConfig {
        repetitions: 1000,
        seed: 2,
        ..Default::default()
    };
    let ratio = variance(&with_m0) / variance(&fewer);
    assert!((ratio - 1.0).abs() < 0.2, "variance ratio {ratio}");
}

#[test]
fn echo_outlasts_ramsey_under_slow_noise() {
    let model = ou(TAU * 100e3, 50e-6);
    let grid: Vec<f64> = (1..=8).map(|k| k as f64 * 0.5e-6).collect();
    let r = coherence_decay_curve(SequenceFamily::Ramsey, &grid, &model, 2000, 1).unwrap();
    let h = coherence_decay_curve(SequenceFamily::Hahn, &grid, &model, 2000, 1).unwrap();
    for (a, b) in r.iter().zip(&h) {
        assert!(b.coherence > a.coherence, "tau {}: ramsey {} hahn {}", a.time, a.coherence, b.coherence);
    }
}

/// Time at which C first falls below 1/e, linearly interpolated.
fn one_over_e_time(points: &[(f64, f64)]) -> f64 {
    let target = (-1.0f64).exp();
    for w in points.windows(2) {
        let ((t0, c0), (t1, c1)) = (w[0], w[1]);
        if c0 >= target && c1 < target {
            return t0 + (c0 - target) / (c0 - c1) * (t1 - t0);
        }
    }
    panic!("curve never crosses 1/e");
}

#[test]
fn decoupling_extends_coherence_under_ou_noise() {
    let model = ou(TAU * 100e3, 5e-6);
    let times: Vec<f64> = (1..=60).map(|k| k as f64 * 1e-6).collect();
    let curve = |family: SequenceFamily, scale: f64| {
        let grid: Vec<f64> = times.iter().map(|t| t / scale).collect();
        coherence_decay_curve(family, &grid, &model, 1000, 12)
            .unwrap()
            .iter()
            .map(|p| (p.total_time, p.coherence))
            .collect::<Vec<_>>()
    };
    let t_ramsey = one_over_e_time(&curve(SequenceFamily::Ramsey, 1.0));
    let t_hahn = one_over_e_time(&curve(SequenceFamily::Hahn, 1.0));
    let t_cpmg = one_over_e_time(&curve(SequenceFamily::Cpmg { pulses: 8 }, 8.0));
    assert!(t_ramsey < t_hahn && t_hahn < t_cpmg, "{t_ramsey} {t_hahn} {t_cpmg}");
}

#[test]
fn spectrum_analyzer_loop_at_moderate_noise() {
    // weaker noise than the headline case keeps C measurable over the band
    let (sigma, tc) = (TAU * 5e3, 5e-6);
    let model = ou(sigma, tc);
    let nu_c = 1.0 / (TAU * tc);
    let taus: Vec<f64> = (0..9)
        .map(|k| {
            let nu = nu_c * 10f64.powf(-0.5 + k as f64 / 8.0);
            1.0 / (2.0 * nu)
        })
        .rev()
        .collect();
    let curve = coherence_decay_curve(SequenceFamily::Cpmg { pulses: 8 }, &taus, &model, 4000, 2).unwrap();
    let coherence: Vec<f64> = curve.iter().map(|p| p.coherence).collect();
    let recon = reconstruct_spectrum(8, &taus, &coherence).unwrap();
    assert!(recon.diagnostics.is_empty(), "{:?}", recon.diagnostics);
    let spectrum = model.spectrum().unwrap();
    for p in &recon.points {
        let ratio = p.psd / spectrum.density(p.frequency);
        assert!((ratio - 1.0).abs() < 0.15, "nu = {:.3e} Hz: ratio {ratio}", p.frequency);
    }
}

#[test]
fn tone_reconstruction_peaks_at_tone_frequency() {
    let nu0 = 200e3;
    let model = SignalModel::Sinusoid {
        amplitude: TAU * 5e3,
        frequency: nu0,
        phase: spinsense::SinusoidPhase::Random,
    };
    let taus: Vec<f64> = (0..15).map(|k| 1.0 / (2.0 * (100e3 + k as f64 * 15e3))).rev().collect();
    let curve = coherence_decay_curve(SequenceFamily::Cpmg { pulses: 8 }, &taus, &model, 2000, 5).unwrap();
    let coherence: Vec<f64> = curve.iter().map(|p| p.coherence).collect();
    let recon = reconstruct_spectrum(8, &taus, &coherence).unwrap();
    let peak = recon
        .points
        .iter()
        .max_by(|a, b| a.psd.total_cmp(&b.psd))
        .unwrap();
    // the filter main lobe is 1/T wide, so that is the attainable resolution
    let resolution = 1.0 / (2.0 * 8.0 * peak.tau);
    assert!((peak.frequency - nu0).abs() < resolution, "peak at {} Hz", peak.frequency);
}
