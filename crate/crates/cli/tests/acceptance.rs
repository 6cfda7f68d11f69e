//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use cimsim::acim::{acim_mac, sparsity_known_zero_bits, AnalogConfig, AnalogMode, Converter, MacroInstance};
use cimsim::backend::Backend;
use cimsim::csnr::{predicted_csnr_gaussian, run_csnr_harness, InputSpec, QuantizationTerm};
use cimsim::dcim::{dat_rmse, dcim_mac, prob_mac_rmse, AdderTree, Preset, ProbMode};
use cimsim::hybrid::{calibrate_thresholds, hybrid_sweep, ose_saliency, select_boundary, SaliencyScore};
use cimsim::net::{accuracy_vs_csnr_sweep, infer_reference, load_dataset, load_model, SweepSettings};
use cimsim::quant::{dot_oracle, value_range, BitPlane, QuantVector};
use cimsim::rng::stream_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Plain i128 dot product, independent of the bit-plane machinery.
fn naive_dot(x: &[i64], w: &[i64]) -> i128 {
    x.iter().zip(w).map(|(&a, &b)| a as i128 * b as i128).sum()
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize, bits: u32, signed: bool) -> QuantVector {
    let (lo, hi) = value_range(bits, signed);
    QuantVector::new((0..n).map(|_| rng.random_range(lo..=hi)).collect(), bits, signed).unwrap()
}

/// Like [`random_vector`] with the signedness drawn as well.
fn random_any(rng: &mut ChaCha8Rng, n: usize, bits: u32) -> QuantVector {
    let signed = rng.random();
    random_vector(rng, n, bits, signed)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn oracle_equivalence() -> Outcome {
    let cases = 100_000u64;
    let bad: Vec<String> = (0..cases)
        .into_par_iter()
        .filter_map(|t| {
            let mut rng = stream_rng(1, &[t]);
            let n = rng.random_range(4..=256);
            let (m, p) = (rng.random_range(1..=12), rng.random_range(1..=12));
            let x = random_any(&mut rng, n, m);
            let w = random_any(&mut rng, n, p);
            let got = dcim_mac(&x, &w).ok()?;
            let want = naive_dot(x.values(), w.values());
            let oracle = dot_oracle(&x, &w).ok()? as i128;
            (got as i128 != want || oracle != want).then(|| format!("case {t}: {got} vs {want}"))
        })
        .collect();
    ensure(bad.is_empty(), || {
        format!("{} random mismatches, first {}", bad.len(), bad[0])
    })?;

    // Every vector pair at two bits, lengths 1 to 4, all signedness combinations.
    let mut exhaustive = 0u64;
    for n in 1..=4usize {
        for (xs, ws) in [(false, false), (false, true), (true, false), (true, true)] {
            let all = |signed: bool| -> Vec<Vec<i64>> {
                let (lo, hi) = value_range(2, signed);
                let mut out = vec![vec![]];
                for _ in 0..n {
                    out = out
                        .into_iter()
                        .flat_map(|v: Vec<i64>| {
                            (lo..=hi).map(move |d| {
                                let mut v = v.clone();
                                v.push(d);
                                v
                            })
                        })
                        .collect();
                }
                out
            };
            let (xa, wa) = (all(xs), all(ws));
            for xv in &xa {
                let x = QuantVector::new(xv.clone(), 2, xs).unwrap();
                for wv in &wa {
                    let w = QuantVector::new(wv.clone(), 2, ws).unwrap();
                    let got = dcim_mac(&x, &w).map_err(|e| e.to_string())? as i128;
                    ensure(got == naive_dot(xv, wv), || {
                        format!("exhaustive {xv:?} . {wv:?} gave {got}")
                    })?;
                    exhaustive += 1;
                }
            }
        }
    }
    Ok(format!(
        "{cases} random cases, {exhaustive} exhaustive cases, all exact"
    ))
}

fn noiseless_identity() -> Outcome {
    let cases = 10_000u64;
    let bad: Vec<String> = (0..cases)
        .into_par_iter()
        .filter_map(|t| {
            let mut rng = stream_rng(2, &[t]);
            let n = rng.random_range(1..=256usize);
            let lossless = Converter::lossless_bits(n as u64);
            let mut cfg = AnalogConfig::ideal(n);
            cfg.adc_bits = lossless;
            let (x, w) = match t % 3 {
                0 => {
                    cfg.mode = AnalogMode::BitSerial;
                    let (m, p) = (rng.random_range(1..=8), rng.random_range(1..=8));
                    let x = random_any(&mut rng, n, m);
                    (x, random_any(&mut rng, n, p))
                }
                1 => {
                    cfg.mode = AnalogMode::BitParallel;
                    let m = rng.random_range(1..=8);
                    cfg.dac_bits = rng.random_range(m..=8);
                    let x = random_vector(&mut rng, n, m, false);
                    let p = rng.random_range(1..=8);
                    (x, random_any(&mut rng, n, p))
                }
                _ => {
                    cfg.mode = AnalogMode::OneShotMultiBit;
                    let (m, p) = (rng.random_range(1..=8), rng.random_range(1..=8));
                    let x = random_any(&mut rng, n, m);
                    (x, random_vector(&mut rng, n, p, false))
                }
            };
            let mode = cfg.mode;
            let inst = MacroInstance::new(cfg).ok()?;
            let got = acim_mac(&x, &w, &inst, &mut rng).map(|r| r.value);
            let want = naive_dot(x.values(), w.values());
            match got {
                Ok(v) if v as i128 == want => None,
                other => Some(format!("case {t} ({}): {other:?} vs {want}", mode.name())),
            }
        })
        .collect();
    ensure(bad.is_empty(), || format!("{} mismatches, first {}", bad.len(), bad[0]))?;
    Ok(format!(
        "{cases} cases over bit_serial, bit_parallel and one_shot_multi_bit, all exact"
    ))
}

fn csnr_agreement() -> Outcome {
    let (n, trials, seed) = (256, 10_000, 7);
    let spec = InputSpec::uniform(n, 4, 4);
    let measure = |sigma: f64| -> Result<(f64, f64), String> {
        let mut cfg = AnalogConfig::ideal(n).with_noise(sigma);
        cfg.adc_bits = 9;
        let backend = Backend::Analog(MacroInstance::new(cfg.clone()).map_err(|e| e.to_string())?);
        let measured = run_csnr_harness(&backend, &spec, trials, seed)
            .map_err(|e| e.to_string())?
            .csnr_db;
        let predicted =
            predicted_csnr_gaussian(&spec, &cfg, QuantizationTerm::Uniform, trials, seed).map_err(|e| e.to_string())?;
        Ok((measured, predicted))
    };
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for sigma in [0.5, 1.0, 2.0, 4.0] {
        let (m1, p1) = measure(sigma)?;
        let (m10, _) = measure(sigma * 10.0)?;
        let shift = m1 - m10;
        if (m1 - p1).abs() > 0.5 {
            failures.push(format!("sigma {sigma}: measured {m1:.2} dB vs predicted {p1:.2} dB"));
        }
        if (shift - 20.0).abs() > 0.5 {
            failures.push(format!("sigma {sigma} -> {}: shift {shift:.2} dB", sigma * 10.0));
        }
        notes.push(format!("{sigma}: {m1:.2}/{p1:.2} dB, x10 shift {shift:.2} dB"));
    }
    if failures.is_empty() {
        Ok(notes.join("; "))
    } else {
        Err(format!("{} [{}]", failures.join("; "), notes.join("; ")))
    }
}

fn sparsity_losslessness() -> Outcome {
    let (n, r) = (256usize, 8u32);
    let z = sparsity_known_zero_bits(60, r, n as u64);
    ensure(z == 2, || format!("popcount 60 gives {z} known-zero bits, expected 2"))?;
    let conv = Converter::for_range(r, n as u64);
    let cases = 100_000u64;
    let bad = (0..cases)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = stream_rng(4, &[t]);
            // Densities up to one half: the regime where bits can be skipped.
            let ones = rng.random_range(0..=n / 2);
            let mut bits: Vec<bool> = (0..n).map(|i| i < ones).collect();
            bits.shuffle(&mut rng);
            let x = BitPlane::from_bits(bits);
            let w = BitPlane::from_bits((0..n).map(|_| rng.random()).collect());
            let partial = x.and(&w).unwrap().iter().filter(|&&b| b).count() as f64;
            let skip = sparsity_known_zero_bits(ones as u64, r, n as u64);
            conv.convert_reduced(partial, skip) != conv.convert(partial)
        })
        .count();
    ensure(bad == 0, || format!("{bad} of {cases} reduced conversions differ"))?;

    // The same property through whole MACs on sparse multi-bit inputs.
    let macs = 2_000u64;
    let mut dense_cfg = AnalogConfig::ideal(n);
    dense_cfg.adc_bits = r;
    let mut sparse_cfg = dense_cfg.clone();
    sparse_cfg.sparsity_adc = true;
    let (dense, sparse) = (
        MacroInstance::new(dense_cfg).unwrap(),
        MacroInstance::new(sparse_cfg).unwrap(),
    );
    let mut saved = 0u64;
    for t in 0..macs {
        let mut rng = stream_rng(4, &[cases, t]);
        let density = rng.random_range(0.0..0.3);
        let x = QuantVector::unsigned(
            (0..n)
                .map(|_| {
                    if rng.random_bool(density) {
                        rng.random_range(1..16)
                    } else {
                        0
                    }
                })
                .collect(),
            4,
        )
        .unwrap();
        let w = random_vector(&mut rng, n, 4, true);
        let a = acim_mac(&x, &w, &dense, &mut stream_rng(0, &[t])).unwrap();
        let b = acim_mac(&x, &w, &sparse, &mut stream_rng(0, &[t])).unwrap();
        ensure(a.value == b.value && a.partials == b.partials, || {
            format!("MAC {t} differs with sparsity on")
        })?;
        saved += a.adc_energy - b.adc_energy;
    }
    Ok(format!(
        "popcount 60 -> 2 known-zero bits; {cases} sparse conversions and {macs} sparse MACs identical, {saved} comparisons saved"
    ))
}

fn dat_band() -> Outcome {
    let exact = AdderTree::exact(64);
    let mid = AdderTree::preset(Preset::Mid, 64);
    let rmse = dat_rmse(&mid, &exact, 10_000, 5).map_err(|e| e.to_string())?;
    let reduction = 1.0 - mid.transistor_count() as f64 / exact.transistor_count() as f64;
    let detail = format!(
        "fan-in 64: rmse {rmse:.4}, transistor reduction {:.1}%",
        reduction * 100.0
    );
    ensure((0.05..=0.09).contains(&rmse) && reduction >= 0.4, || detail.clone())?;
    Ok(detail)
}

fn prob_convergence() -> Outcome {
    let ns = [16, 64, 256, 1024];
    let r: Vec<f64> = ns
        .iter()
        .map(|&n| prob_mac_rmse(n, ProbMode::Sampled, 10_000, 6))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = r.windows(2).map(|w| w[1] / w[0]).collect();
    let detail = format!("rmse {r:.4?}, ratios {ratios:.3?}");
    ensure(
        r.windows(2).all(|w| w[1] < w[0]) && ratios.iter().all(|q| (0.3..=0.8).contains(q)),
        || detail.clone(),
    )?;
    Ok(detail)
}

fn hybrid_dominance() -> Outcome {
    let (n, m, p) = (64, 4, 4);
    let mut cfg = AnalogConfig::ideal(n).with_noise(1.0);
    cfg.adc_bits = 7;
    let inst = MacroInstance::new(cfg).map_err(|e| e.to_string())?;
    let b_das: Vec<u32> = (0..=m + p).collect();
    let pts = hybrid_sweep(&inst, &InputSpec::uniform(n, m, p), &b_das, 10_000, 8).map_err(|e| e.to_string())?;
    let errs: Vec<f64> = pts.iter().map(|pt| pt.report.mean_abs_error).collect();
    let detail = format!("mean |hybrid - DMAC| over B_DA 0..=8: {errs:?}");
    // Lower B_DA moves plane pairs from Analog to Digital.
    ensure(errs[0] == 0.0, || format!("all-digital error {}", errs[0]))?;
    ensure(errs.windows(2).all(|w| w[0] <= w[1]), || detail.clone())?;
    ensure(errs[4] <= errs[(m + p) as usize], || detail.clone())?;
    Ok(detail)
}

fn ose_behavior() -> Outcome {
    // Boundary selection never hands a higher score a smaller digital share.
    let mut rng = stream_rng(9, &[]);
    for _ in 0..2_000 {
        let l = rng.random_range(1..=5);
        let mut thresholds: Vec<u64> = (0..l).map(|_| rng.random_range(0..1_000)).collect();
        thresholds.sort_unstable();
        thresholds.dedup();
        let mut ladder: Vec<u32> = (0..=thresholds.len()).map(|_| rng.random_range(0..=8)).collect();
        ladder.sort_unstable();
        let mut scores: Vec<u64> = (0..50).map(|_| rng.random_range(0..1_200)).collect();
        scores.sort_unstable();
        let picks: Vec<u32> = scores
            .iter()
            .map(|&s| select_boundary(&SaliencyScore { score: s, s: 1 }, &thresholds, &ladder))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        ensure(picks.windows(2).all(|w| w[1] <= w[0]), || {
            format!("thresholds {thresholds:?} ladder {ladder:?} gave {picks:?}")
        })?;
    }
    let lookup =
        select_boundary(&SaliencyScore { score: 50, s: 1 }, &[10, 100], &[0, 4, 8]).map_err(|e| e.to_string())?;
    ensure(lookup == 4, || {
        format!("score 50 on [10, 100] / [0, 4, 8] gave {lookup}")
    })?;

    // The score of a set of channels is the sum of the per-channel scores.
    for t in 0..500u64 {
        let mut rng = stream_rng(9, &[1, t]);
        let (n, m, pb) = (
            rng.random_range(1..=64),
            rng.random_range(1..=8),
            rng.random_range(1..=8),
        );
        let (xs, ws) = (rng.random(), rng.random());
        let s = rng.random_range(1..=m * pb);
        let ch = rng.random_range(1..=6);
        let inputs: Vec<_> = (0..ch).map(|_| random_vector(&mut rng, n, m, xs)).collect();
        let weights: Vec<_> = (0..ch).map(|_| random_vector(&mut rng, n, pb, ws)).collect();
        let whole = ose_saliency(&inputs, &weights, s).map_err(|e| e.to_string())?.score;
        let parts: u64 = (0..ch)
            .map(|c| ose_saliency(&inputs[c..=c], &weights[c..=c], s).map(|r| r.score))
            .sum::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        ensure(whole == parts, || format!("case {t}: {whole} vs {parts}"))?;
    }

    // Quantiles against the empirical CDF: the smallest sample v with
    // #{x <= v} >= q * N.
    for t in 0..500u64 {
        let mut rng = stream_rng(9, &[2, t]);
        let len = rng.random_range(1..=400);
        let samples: Vec<u64> = (0..len).map(|_| rng.random_range(0..100)).collect();
        let mut qs: Vec<f64> = (0..rng.random_range(1..=5))
            .map(|_| rng.random_range(1..1000) as f64 / 1000.0)
            .collect();
        qs.sort_by(f64::total_cmp);
        qs.dedup();
        let got = calibrate_thresholds(&samples, &qs).map_err(|e| e.to_string())?;
        let want: Vec<u64> = qs
            .iter()
            .map(|&q| {
                let mut candidates = samples.clone();
                candidates.sort_unstable();
                candidates.dedup();
                *candidates
                    .iter()
                    .find(|&&v| samples.iter().filter(|&&x| x <= v).count() as f64 >= q * len as f64)
                    .expect("q < 1")
            })
            .collect();
        ensure(got == want, || format!("case {t}: {got:?} vs {want:?}"))?;
    }
    Ok("2000 monotone ladders, 500 additivity cases, 500 quantile cases".into())
}

fn accuracy_trend() -> Outcome {
    let fixtures = workspace_root().join("crates/core/fixtures");
    let model = load_model(fixtures.join("mlp_16_8_3.json")).map_err(|e| e.to_string())?;
    let data = load_dataset(fixtures.join("blobs_600.csv"), model.input_bits()).map_err(|e| e.to_string())?;
    let reference = data
        .samples()
        .iter()
        .filter(|(x, label)| {
            let logits = infer_reference(&model, x).unwrap();
            // First maximum, written out independently of the library.
            let mut best = 0;
            for (i, &v) in logits.iter().enumerate() {
                if v > logits[best] {
                    best = i;
                }
            }
            best == *label
        })
        .count() as f64
        / data.len() as f64;
    let mut analog = AnalogConfig::ideal(model.layers()[0].rows());
    analog.adc_bits = 8;
    let settings = SweepSettings {
        analog,
        sigmas: vec![0.0, 0.1, 0.2, 0.3, 0.5, 1.0],
        repeats: 20,
        csnr_trials: 2_000,
        seed: 2024,
    };
    let curve = accuracy_vs_csnr_sweep(&model, &data, &settings).map_err(|e| e.to_string())?;
    let (first, last) = (&curve.points[0], curve.points.last().unwrap());
    let trend: Vec<String> = curve
        .points
        .iter()
        .map(|p| format!("{}:{:.3}", p.sigma_lsb, p.accuracy))
        .collect();
    let detail = format!("digital {reference:.3}; accuracy by sigma {}", trend.join(" "));
    ensure(curve.digital_accuracy == reference, || {
        format!("digital baseline {} vs {reference}", curve.digital_accuracy)
    })?;
    ensure(
        first.sigma_lsb == 0.0 && first.accuracy_min == reference && first.accuracy_max == reference,
        || {
            format!(
                "sigma 0 spans [{}, {}] vs {reference}",
                first.accuracy_min, first.accuracy_max
            )
        },
    )?;
    ensure(first.accuracy > last.accuracy, || detail.clone())?;
    Ok(detail)
}

fn reproducibility() -> Outcome {
    let root = workspace_root();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let exe = env!("CARGO_BIN_EXE_cimsim");
    let kinds = [
        "csnr-sweep",
        "dat-eval",
        "prob-eval",
        "sparsity-eval",
        "hybrid-sweep",
        "net-eval",
    ];
    for kind in kinds {
        let config = root.join("configs").join(format!("{}.json", kind.replace('-', "_")));
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{kind}-{run}.csv"));
            let o = Command::new(exe)
                .args([kind, "--config"])
                .arg(&config)
                .args(["--trials", "1000", "--out"])
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(o.status.success(), || {
                format!("{kind}: {}", String::from_utf8_lossy(&o.stderr))
            })?;
            let file = std::fs::read(&out).map_err(|e| e.to_string())?;
            ensure(file == o.stdout, || format!("{kind}: file differs from stdout"))?;
            outputs.push(file);
        }
        ensure(outputs[0] == outputs[1], || format!("{kind}: reruns differ"))?;
    }
    Ok(format!("{} experiments rerun byte-identically", kinds.len()))
}

fn main() {
    type Check = (u32, &'static str, fn() -> Outcome, u64);
    let criteria: [Check; 10] = [
        (1, "oracle equivalence", oracle_equivalence, 60),
        (2, "noiseless analog identity", noiseless_identity, 60),
        (3, "CSNR analytic agreement", csnr_agreement, 120),
        (4, "sparsity losslessness", sparsity_losslessness, 60),
        (5, "approximate adder tree band", dat_band, 60),
        (6, "probabilistic MAC convergence", prob_convergence, 60),
        (7, "hybrid dominance", hybrid_dominance, 120),
        (8, "saliency evaluator behavior", ose_behavior, 60),
        (9, "accuracy versus CSNR trend", accuracy_trend, 180),
        (10, "reproducibility", reproducibility, 300),
    ];
    let mut failed = 0;
    for (id, name, check, limit) in criteria {
        let start = Instant::now();
        let mut outcome = check();
        let took = start.elapsed();
        if outcome.is_ok() && took > Duration::from_secs(limit) {
            outcome = Err(format!("took {took:.1?}, limit {limit}s"));
        }
        match outcome {
            Ok(detail) => println!("PASS criterion {id}: {name} ({detail}; {took:.1?})"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id}: {name} ({why}; {took:.1?})");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
