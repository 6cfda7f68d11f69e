use cimsim::acim::{AnalogConfig, AnalogMode, MacroInstance};
use cimsim::backend::Backend;
use cimsim::csnr::{csnr_mean, predicted_csnr_gaussian, run_csnr_harness, InputSpec, QuantizationTerm, DEFAULT_TRIALS};
use cimsim::rng::stream_rng;
use cimsim::CimError;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn analog(cfg: AnalogConfig) -> Backend {
    Backend::Analog(MacroInstance::new(cfg).unwrap())
}

#[test]
fn digital_backend_is_error_free() {
    let spec = InputSpec::uniform(32, 4, 4);
    let r = run_csnr_harness(&Backend::Digital, &spec, 2000, 1).unwrap();
    assert_eq!(r.csnr_db, f64::INFINITY);
    assert_eq!(r.mean_noise_power, 0.0);
}

#[test]
fn noiseless_lossless_analog_is_error_free() {
    let spec = InputSpec::uniform(16, 4, 4);
    let r = run_csnr_harness(&analog(AnalogConfig::ideal(16)), &spec, 2000, 1).unwrap();
    assert_eq!(r.csnr_db, f64::INFINITY);
    assert_eq!(r.saturation_rate, 0.0);
}

#[test]
fn harness_is_deterministic_and_thread_independent() {
    let spec = InputSpec::uniform(16, 4, 4);
    let b = analog(AnalogConfig::ideal(16).with_noise(1.0));
    let a = run_csnr_harness(&b, &spec, 3000, 9).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let single = pool.install(|| run_csnr_harness(&b, &spec, 3000, 9).unwrap());
    assert_eq!(a, single);
    assert_ne!(a, run_csnr_harness(&b, &spec, 3000, 10).unwrap());
}

#[test]
fn gaussian_pairs_match_closed_form() {
    // DMAC uniform on [100, 200], additive N(0, 5^2): CSNR = 10 log10(E[D^2] / 25).
    let mut rng = stream_rng(4, &[]);
    let noise = Normal::<f64>::new(0.0, 5.0).unwrap();
    let pairs: Vec<(i64, i64)> = (0..DEFAULT_TRIALS)
        .map(|_| {
            let d: i64 = rng.random_range(100..=200);
            (d, d + noise.sample(&mut rng).round() as i64)
        })
        .collect();
    let e_d2 = (100..=200).map(|d: i64| (d * d) as f64).sum::<f64>() / 101.0;
    // Rounding adds 1/12 to the noise variance.
    let predicted = 10.0 * (e_d2 / (25.0 + 1.0 / 12.0)).log10();
    let measured = csnr_mean(&pairs).unwrap().csnr_db;
    assert!((measured - predicted).abs() < 0.5, "{measured} vs {predicted}");

    let mut shuffled = pairs.clone();
    shuffled.reverse();
    shuffled.swap(0, 17);
    assert_eq!(csnr_mean(&shuffled).unwrap(), csnr_mean(&pairs).unwrap());
}

#[test]
fn bit_serial_agrees_with_prediction_at_n16() {
    let spec = InputSpec::uniform(16, 4, 4);
    for sigma in [0.5, 1.0] {
        let cfg = AnalogConfig::ideal(16).with_noise(sigma);
        let measured = run_csnr_harness(&analog(cfg.clone()), &spec, DEFAULT_TRIALS, 21).unwrap();
        let predicted = predicted_csnr_gaussian(&spec, &cfg, QuantizationTerm::Uniform, DEFAULT_TRIALS, 21).unwrap();
        assert!(
            (measured.csnr_db - predicted).abs() <= 0.5,
            "sigma {sigma}: measured {} predicted {predicted}",
            measured.csnr_db
        );
    }
}

#[test]
fn single_plane_agreement() {
    // 1b x 1b at n = 16, R = 5: one conversion with unit weight.
    let spec = InputSpec::uniform(16, 1, 1);
    let mut cfg = AnalogConfig::ideal(16).with_noise(1.0);
    cfg.adc_bits = 5;
    let measured = run_csnr_harness(&analog(cfg.clone()), &spec, DEFAULT_TRIALS, 5).unwrap();
    let predicted = predicted_csnr_gaussian(&spec, &cfg, QuantizationTerm::Uniform, DEFAULT_TRIALS, 5).unwrap();
    assert!(
        (measured.csnr_db - predicted).abs() <= 0.5,
        "{} vs {predicted}",
        measured.csnr_db
    );
    // E[D^2] for Binomial(16, 1/4) is 3 + 16 = 19 in expectation; the noise term is 1 + 1/12.
    assert!((predicted - 10.0 * (19.0f64 / (13.0 / 12.0)).log10()).abs() < 0.3);
}

#[test]
fn predictor_scaling() {
    let spec = InputSpec::uniform(64, 4, 4);
    let p = |s: f64| {
        predicted_csnr_gaussian(
            &spec,
            &AnalogConfig::ideal(64).with_noise(s),
            QuantizationTerm::Neglected,
            500,
            2,
        )
        .unwrap()
    };
    assert!((p(1.0) - p(2.0) - 20.0 * 2f64.log10()).abs() < 1e-9);
    assert!((p(0.1) - p(1.0) - 20.0).abs() < 1e-9);
    assert_eq!(p(0.0), f64::INFINITY);
    assert!(p(1e-6) > 150.0);
}

#[test]
fn predictor_rejects_mismatch() {
    let mut cfg = AnalogConfig::ideal(16).with_noise(1.0);
    cfg.mismatch_sigma = 0.01;
    let spec = InputSpec::uniform(16, 4, 4);
    assert!(matches!(
        predicted_csnr_gaussian(&spec, &cfg, QuantizationTerm::Neglected, 10, 0),
        Err(CimError::NotApplicable(_))
    ));
}

#[test]
fn predictor_covers_other_modes() {
    let spec = InputSpec::uniform(32, 4, 4);
    for mode in [AnalogMode::BitParallel, AnalogMode::OneShotMultiBit] {
        let mut cfg = AnalogConfig::ideal(32).with_mode(mode).with_noise(1.0);
        cfg.dac_bits = 4;
        let measured = run_csnr_harness(&analog(cfg.clone()), &spec, DEFAULT_TRIALS, 8).unwrap();
        let predicted = predicted_csnr_gaussian(&spec, &cfg, QuantizationTerm::Uniform, DEFAULT_TRIALS, 8).unwrap();
        assert!(
            (measured.csnr_db - predicted).abs() <= 0.5,
            "{mode:?}: {} vs {predicted}",
            measured.csnr_db
        );
    }
}

#[test]
fn error_grows_with_sigma() {
    let spec = InputSpec::uniform(32, 4, 4);
    let errs: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 2.0]
        .iter()
        .map(|&s| {
            run_csnr_harness(&analog(AnalogConfig::ideal(32).with_noise(s)), &spec, 5000, 3)
                .unwrap()
                .mean_abs_error
        })
        .collect();
    assert_eq!(errs[0], 0.0);
    assert!(errs.windows(2).all(|w| w[0] <= w[1]), "{errs:?}");
}

#[test]
fn shape_mismatch_is_reported() {
    let spec = InputSpec::uniform(8, 4, 4);
    assert!(matches!(
        run_csnr_harness(&analog(AnalogConfig::ideal(16)), &spec, 10, 0),
        Err(CimError::Shape(_))
    ));
}
