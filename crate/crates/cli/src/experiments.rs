//! The experiment kinds. Each returns a [`Report`]: fixed CSV columns plus a
//! JSON summary with the full per-point results.

use cimsim::acim::{sparsity_known_zero_bits, AnalogConfig, Converter, MacroInstance};
use cimsim::backend::Backend;
use cimsim::csnr::{format_db, predicted_csnr_gaussian, run_csnr_harness, QuantizationTerm};
use cimsim::dcim::{dat_rmse, prob_mac_rmse, AdderTree, ApproxProfile};
use cimsim::hybrid::{hybrid_sweep, SaliencyGated};
use cimsim::net::{accuracy_vs_csnr_sweep, load_dataset, load_model, SweepSettings};
use cimsim::quant::BitPlane;
use cimsim::rng::stream_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{CsnrSweep, DatEval, Experiment, HybridSweep, NetEval, ProbEval, Resolved, SparsityEval};
use crate::report::Report;
use crate::CliError;

fn runtime(e: cimsim::CimError) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn execute(cfg: &Resolved) -> Result<Report, CliError> {
    let (seed, trials) = (cfg.seed, cfg.trials);
    let mut report = match &cfg.experiment {
        Experiment::CsnrSweep(c) => csnr_sweep(c, trials, seed),
        Experiment::DatEval(c) => dat_eval(c, trials, seed),
        Experiment::ProbEval(c) => prob_eval(c, trials, seed),
        Experiment::SparsityEval(c) => sparsity_eval(c, trials, seed),
        Experiment::HybridSweep(c) => hybrid(c, trials, seed),
        Experiment::NetEval(c) => net_eval(c, cfg, trials, seed),
    }?;
    report.set_meta(cfg.experiment.kind(), seed, trials);
    Ok(report)
}

fn csnr_sweep(c: &CsnrSweep, trials: usize, seed: u64) -> Result<Report, CliError> {
    let ns = if c.ns.is_empty() { vec![c.input.n] } else { c.ns.clone() };
    let rs = if c.adc_bits.is_empty() {
        vec![c.analog.adc_bits]
    } else {
        c.adc_bits.clone()
    };
    let grid: Vec<(usize, u32, f64)> = ns
        .iter()
        .flat_map(|&n| rs.iter().flat_map(move |&r| c.sigmas.iter().map(move |&s| (n, r, s))))
        .collect();
    let points: Vec<(usize, u32, f64, cimsim::csnr::CsnrReport, Option<f64>)> = grid
        .par_iter()
        .map(|&(n, r, sigma)| {
            let mut cfg: AnalogConfig = c.analog.clone().with_noise(sigma);
            cfg.rows = n;
            cfg.adc_bits = r;
            let mut input = c.input.clone();
            input.n = n;
            let backend = Backend::Analog(MacroInstance::new(cfg.clone()).map_err(runtime)?);
            let rep = run_csnr_harness(&backend, &input, trials, seed).map_err(runtime)?;
            let predicted = predicted_csnr_gaussian(&input, &cfg, QuantizationTerm::Uniform, trials, seed).ok();
            Ok((n, r, sigma, rep, predicted))
        })
        .collect::<Result<_, CliError>>()?;
    let mode = c.analog.mode.name();
    let mut report = Report::new(&["seed", "sigma_lsb", "n", "R", "mode", "csnr_db", "saturation_rate"]);
    let mut details = Vec::new();
    for (n, r, sigma, rep, predicted) in points {
        report.push(vec![
            seed.to_string(),
            sigma.to_string(),
            n.to_string(),
            r.to_string(),
            mode.to_string(),
            format_db(rep.csnr_db),
            rep.saturation_rate.to_string(),
        ]);
        details.push(json!({
            "sigma_lsb": sigma, "n": n, "R": r, "mode": mode,
            "report": rep,
            "predicted_csnr_db": predicted.map(format_db),
        }));
    }
    report.details = Value::Array(details);
    Ok(report)
}

fn dat_eval(c: &DatEval, trials: usize, seed: u64) -> Result<Report, CliError> {
    let mut jobs: Vec<(usize, String, AdderTree)> = Vec::new();
    for &n in &c.fan_ins {
        for &p in &c.presets {
            jobs.push((n, p.name().to_string(), AdderTree::preset(p, n).with_costs(c.costs)));
        }
        for p in &c.profiles {
            let profile = ApproxProfile::per_position(n, &p.positions);
            let tree = AdderTree::with_profile(n, profile)
                .map_err(|e| CliError::Config(e.to_string()))?
                .with_costs(c.costs);
            jobs.push((n, p.name.clone(), tree));
        }
    }
    let rows: Vec<Vec<String>> = jobs
        .par_iter()
        .map(|(n, name, tree)| {
            let exact = AdderTree::exact(*n).with_costs(c.costs);
            let rmse = dat_rmse(tree, &exact, trials, seed).map_err(runtime)?;
            Ok(vec![
                seed.to_string(),
                n.to_string(),
                name.clone(),
                rmse.to_string(),
                tree.transistor_count().to_string(),
                exact.transistor_count().to_string(),
                (tree.transistor_count() as f64 / exact.transistor_count().max(1) as f64).to_string(),
            ])
        })
        .collect::<Result<_, CliError>>()?;
    let mut report = Report::new(&[
        "seed",
        "fan_in",
        "profile",
        "rmse",
        "transistors",
        "exact_transistors",
        "transistor_ratio",
    ]);
    rows.into_iter().for_each(|r| report.push(r));
    Ok(report)
}

fn prob_eval(c: &ProbEval, trials: usize, seed: u64) -> Result<Report, CliError> {
    let grid: Vec<_> =
        c.ns.iter()
            .flat_map(|&n| c.modes.iter().map(move |&m| (n, m)))
            .collect();
    let rows: Vec<Vec<String>> = grid
        .par_iter()
        .map(|&(n, mode)| {
            let rmse = prob_mac_rmse(n, mode, trials, seed).map_err(runtime)?;
            Ok(vec![
                seed.to_string(),
                n.to_string(),
                mode.name().to_string(),
                rmse.to_string(),
            ])
        })
        .collect::<Result<_, CliError>>()?;
    let mut report = Report::new(&["seed", "n", "mode", "rmse"]);
    rows.into_iter().for_each(|r| report.push(r));
    Ok(report)
}

fn sparsity_eval(c: &SparsityEval, trials: usize, seed: u64) -> Result<Report, CliError> {
    let conv = Converter::for_range(c.adc_bits, c.n as u64);
    let mut report = Report::new(&[
        "seed",
        "n",
        "R",
        "ones",
        "known_zero_bits",
        "active_bits",
        "checks",
        "mismatches",
    ]);
    for &ones in &c.ones {
        let z = sparsity_known_zero_bits(ones, c.adc_bits, c.n as u64);
        let mismatches: usize = (0..trials as u64)
            .into_par_iter()
            .filter(|&t| {
                let mut rng = stream_rng(seed, &[ones, t]);
                let mut bits: Vec<bool> = (0..c.n).map(|i| (i as u64) < ones).collect();
                bits.shuffle(&mut rng);
                let x = BitPlane::from_bits(bits);
                let w = BitPlane::from_bits((0..c.n).map(|_| rng.random()).collect());
                let partial = x.and(&w).map(|v| v.iter().filter(|&&b| b).count()).unwrap_or(0) as f64;
                conv.convert_reduced(partial, z) != conv.convert(partial)
            })
            .count();
        report.push(vec![
            seed.to_string(),
            c.n.to_string(),
            c.adc_bits.to_string(),
            ones.to_string(),
            z.to_string(),
            (c.adc_bits - z).to_string(),
            trials.to_string(),
            mismatches.to_string(),
        ]);
    }
    Ok(report)
}

fn hybrid(c: &HybridSweep, trials: usize, seed: u64) -> Result<Report, CliError> {
    let (m, p) = (c.input.input_bits, c.input.weight_bits);
    let b_das = c.b_das.clone().unwrap_or_else(|| (0..=m + p).collect());
    let inst = MacroInstance::new(c.analog.clone()).map_err(runtime)?;
    let points = hybrid_sweep(&inst, &c.input, &b_das, trials, seed).map_err(runtime)?;
    let mut report = Report::new(&[
        "seed",
        "b_da",
        "digital_pairs",
        "mean_abs_error",
        "csnr_db",
        "mean_conversions",
    ]);
    let mut details = Vec::new();
    for pt in &points {
        report.push(vec![
            seed.to_string(),
            pt.b_da.to_string(),
            pt.digital_pairs.to_string(),
            pt.report.mean_abs_error.to_string(),
            format_db(pt.report.csnr_db),
            pt.report.mean_conversions.to_string(),
        ]);
        details.push(serde_json::to_value(pt).expect("points serialize"));
    }
    if let Some(ose) = &c.ose {
        let gated = SaliencyGated {
            s: ose.s,
            policy: ose.policy.clone(),
            instance: inst,
        };
        let rep = run_csnr_harness(&gated, &c.input, trials, seed).map_err(runtime)?;
        report.push(vec![
            seed.to_string(),
            "ose".into(),
            ((m * p) as f64 - rep.mean_conversions).to_string(),
            rep.mean_abs_error.to_string(),
            format_db(rep.csnr_db),
            rep.mean_conversions.to_string(),
        ]);
        details.push(json!({ "b_da": "ose", "s": ose.s, "policy": ose.policy, "report": rep }));
    }
    report.details = Value::Array(details);
    Ok(report)
}

fn net_eval(c: &NetEval, cfg: &Resolved, trials: usize, seed: u64) -> Result<Report, CliError> {
    let resolve = |p: &std::path::Path| {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            cfg.base_dir.join(p)
        }
    };
    let model = load_model(resolve(&c.model)).map_err(|e| CliError::Config(e.to_string()))?;
    let dataset = load_dataset(resolve(&c.dataset), model.input_bits()).map_err(|e| CliError::Config(e.to_string()))?;
    let settings = SweepSettings {
        analog: c.analog.clone(),
        sigmas: c.sigmas.clone(),
        repeats: c.repeats,
        csnr_trials: trials,
        seed,
    };
    let curve = accuracy_vs_csnr_sweep(&model, &dataset, &settings).map_err(runtime)?;
    let mut report = Report::new(&[
        "seed",
        "sigma_lsb",
        "layer_csnr_db",
        "accuracy",
        "accuracy_min",
        "accuracy_max",
        "digital_accuracy",
    ]);
    for pt in &curve.points {
        report.push(vec![
            seed.to_string(),
            pt.sigma_lsb.to_string(),
            format_db(pt.layer_csnr.csnr_db),
            pt.accuracy.to_string(),
            pt.accuracy_min.to_string(),
            pt.accuracy_max.to_string(),
            curve.digital_accuracy.to_string(),
        ]);
    }
    report.details = serde_json::to_value(&curve).expect("curve serializes");
    Ok(report)
}
