//! The subcommands. Each takes a validated config and returns a short
//! human-readable summary; all filesystem effects live here and in `store`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hamkoop::baselines::{opinf_fit, opinf_rollout};
use hamkoop::decoders::{fit_quad_decoder, linear_reconstruct, quad_reconstruct};
use hamkoop::eval::{
    benchmark_suite, mean_l2, summary_table, ErrorReport, FnPredictor, Metric, Predictor, CSV_HEADER,
};
use hamkoop::pod::{assemble_snapshots, energy_fraction, pod_basis};
use hamkoop::presets::{generate_dataset, Dataset};
use hamkoop::training::{latent_rollout, train, TrainingData};
use hamkoop::{SolverConfig, Trajectory};

use crate::config::{DecoderChoice, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::store::{
    fmt_f64, history_csv, load_dataset, load_json, require, save_dataset, save_json, trajectory_csv,
    write_text, Checkpoint, DecoderFile, PodFile,
};
use crate::svg::{line_chart, Series};

pub fn cmd_gen_data(cfg: &ExperimentConfig) -> CliResult<String> {
    let ds = generate_dataset::<f64>(&cfg.preset, cfg.seed)?;
    let dir = cfg.data_dir();
    save_dataset(&dir, &cfg.preset, &ds)?;
    Ok(format!(
        "wrote {} train and {} test trajectories for {} to {}",
        ds.train.len(),
        ds.test.len(),
        ds.system,
        dir.display()
    ))
}

fn dataset_for(cfg: &ExperimentConfig) -> CliResult<Dataset<f64>> {
    let dir = cfg.data_dir();
    require(&dir.join(crate::store::MANIFEST), "dataset")?;
    let (manifest, ds) = load_dataset(&dir)?;
    if manifest.system != cfg.system() {
        return Err(CliError::invalid(format!(
            "dataset in {} is for {}, config is for {}",
            dir.display(),
            manifest.system,
            cfg.system()
        )));
    }
    Ok(ds)
}

fn compute_pod(cfg: &ExperimentConfig, ds: &Dataset<f64>, r: usize) -> CliResult<PodFile> {
    let snapshots = assemble_snapshots(&ds.train)?;
    let basis = pod_basis(&snapshots, r)?;
    let energy = basis.energy_table();
    Ok(PodFile {
        system: cfg.system(),
        basis,
        energy,
    })
}

/// The stored basis when it matches the configured rank, else a fresh one.
fn pod_for(cfg: &ExperimentConfig, ds: &Dataset<f64>) -> CliResult<Option<PodFile>> {
    let Some(r) = cfg.preset.pod_rank() else {
        return Ok(None);
    };
    let path = cfg.pod_path();
    if path.exists() {
        let pod: PodFile = load_json(&path)?;
        if pod.basis.r == r && pod.system == cfg.system() {
            return Ok(Some(pod));
        }
        log::info!("stored basis has rank {}, recomputing rank {r}", pod.basis.r);
    }
    compute_pod(cfg, ds, r).map(Some)
}

/// Train and test trajectories in the coordinates the model sees: the raw
/// state, or POD coordinates with stencil derivatives.
fn model_coordinates(
    ds: &Dataset<f64>,
    pod: Option<&PodFile>,
) -> CliResult<(Vec<Trajectory<f64>>, Vec<Trajectory<f64>>)> {
    match pod {
        None => Ok((ds.train.clone(), ds.test.clone())),
        Some(p) => {
            let reduce = |ts: &[Trajectory<f64>]| {
                ts.iter()
                    .map(|t| p.basis.reduce(t).map(|r| r.with_id(t.ic_id.clone())))
                    .collect::<Result<Vec<_>, _>>()
            };
            Ok((reduce(&ds.train)?, reduce(&ds.test)?))
        }
    }
}

pub fn cmd_pod(cfg: &ExperimentConfig) -> CliResult<String> {
    let r = cfg.preset.pod_rank().ok_or_else(|| {
        CliError::invalid(format!("{} is not a field system; POD does not apply", cfg.system()))
    })?;
    let ds = dataset_for(cfg)?;
    let pod = compute_pod(cfg, &ds, r)?;
    save_json(&cfg.pod_path(), &pod)?;
    let mut table = String::from("rank,singular_value,energy\n");
    for (k, (s, e)) in pod.basis.singular_values.iter().zip(&pod.energy).enumerate() {
        let _ = writeln!(table, "{},{},{}", k + 1, fmt_f64(*s), fmt_f64(*e));
    }
    write_text(&cfg.out.join("pod-energy.csv"), &table)?;
    let at_r = energy_fraction(&pod.basis.singular_values, r)?;
    Ok(format!(
        "POD rank {r}: energy fraction {:.6} (basis written to {})",
        at_r,
        cfg.pod_path().display()
    ))
}

pub fn cmd_train(cfg: &ExperimentConfig) -> CliResult<String> {
    let ds = dataset_for(cfg)?;
    let pod = pod_for(cfg, &ds)?;
    let (train_set, _) = model_coordinates(&ds, pod.as_ref())?;
    let data = TrainingData::from_trajectories(&train_set)?;
    let (model, history) = train(&data, cfg.variant, cfg.m(), &cfg.preset.hidden, &cfg.training)?;
    let ckpt = Checkpoint {
        system: cfg.system(),
        variant: cfg.variant,
        pod_rank: pod.as_ref().map(|p| p.basis.r),
        training: cfg.training.clone(),
        model,
    };
    save_json(&cfg.model_path(), &ckpt)?;
    write_text(
        &cfg.out.join(format!("history-{}.csv", cfg.variant)),
        &history_csv(&history),
    )?;
    let last = history.last().expect("at least one epoch");
    Ok(format!(
        "trained {} for {} epochs: final loss {:.4e} (encdec {:.3e}, symp {:.3e}, deri {:.3e}); checkpoint {}",
        cfg.variant,
        history.len(),
        last.total,
        last.encdec,
        last.symp,
        last.deri,
        cfg.model_path().display()
    ))
}

fn checkpoint_for(cfg: &ExperimentConfig) -> CliResult<Checkpoint> {
    let path = require(&cfg.model_path(), "checkpoint")?;
    let ckpt: Checkpoint = load_json(&path)?;
    ckpt.model.validate()?;
    if ckpt.system != cfg.system() || ckpt.variant != cfg.variant {
        return Err(CliError::invalid(format!(
            "checkpoint is for {} / {}, config asks for {} / {}",
            ckpt.system,
            ckpt.variant,
            cfg.system(),
            cfg.variant
        )));
    }
    if ckpt.pod_rank != cfg.preset.pod_rank() {
        return Err(CliError::invalid("checkpoint POD rank differs from the configured rank"));
    }
    Ok(ckpt)
}

pub fn cmd_rollout(cfg: &ExperimentConfig) -> CliResult<String> {
    let ckpt = checkpoint_for(cfg)?;
    let ds = dataset_for(cfg)?;
    let pod = pod_for(cfg, &ds)?;
    let (_, test) = model_coordinates(&ds, pod.as_ref())?;
    if test.is_empty() {
        return Err(CliError::invalid("no test ICs"));
    }
    let dir = cfg.rollout_dir();
    let mut bounds = String::from("ic,status,bound,max_certified,violations\n");
    let mut failed = 0;
    for (k, gt) in test.iter().enumerate() {
        match latent_rollout(&ckpt.model, &gt.states[0], &gt.times, &SolverConfig::default()) {
            Ok(roll) => {
                write_text(&dir.join(format!("test-{k:03}.csv")), &trajectory_csv(&roll.decoded))?;
                let max_q = if ckpt.model.latent.is_certified() {
                    roll.latent
                        .states
                        .iter()
                        .map(|y| ckpt.model.latent.certified_quantity(y).unwrap_or(f64::NAN))
                        .fold(f64::NEG_INFINITY, f64::max)
                } else {
                    f64::NAN
                };
                let _ = writeln!(
                    bounds,
                    "{},ok,{},{},{}",
                    gt.ic_id,
                    roll.bound.map_or("NaN".into(), fmt_f64),
                    fmt_f64(max_q),
                    roll.violations.len()
                );
            }
            Err(e) => {
                failed += 1;
                log::warn!("rollout of {} failed: {e}", gt.ic_id);
                let _ = writeln!(bounds, "{},failed,NaN,NaN,0", gt.ic_id);
            }
        }
    }
    write_text(&dir.join("bounds.csv"), &bounds)?;
    Ok(format!(
        "rolled out {} test ICs ({failed} failed) into {}",
        test.len(),
        dir.display()
    ))
}

fn phase_and_series(test: &[Trajectory<f64>], preds: &[Option<Trajectory<f64>>]) -> (String, String) {
    let dim = test[0].dim();
    let half = dim / 2;
    let mut phase = String::from("ic,t,q_true,p_true,q_pred,p_pred\n");
    let mut series = String::from("ic,t");
    for i in 0..dim {
        let _ = write!(series, ",true{i}");
    }
    for i in 0..dim {
        let _ = write!(series, ",pred{i}");
    }
    series.push('\n');
    for (gt, pred) in test.iter().zip(preds) {
        let Some(pred) = pred else { continue };
        for k in 0..gt.len() {
            let (x, xp) = (&gt.states[k], &pred.states[k]);
            let _ = writeln!(
                phase,
                "{},{},{},{},{},{}",
                gt.ic_id,
                fmt_f64(gt.times[k]),
                fmt_f64(x[0]),
                fmt_f64(x[half]),
                fmt_f64(xp[0]),
                fmt_f64(xp[half])
            );
            let _ = write!(series, "{},{}", gt.ic_id, fmt_f64(gt.times[k]));
            for v in x.iter().chain(xp) {
                series.push(',');
                series.push_str(&fmt_f64(*v));
            }
            series.push('\n');
        }
    }
    (phase, series)
}

pub fn cmd_eval(cfg: &ExperimentConfig) -> CliResult<String> {
    let ckpt = checkpoint_for(cfg)?;
    let ds = dataset_for(cfg)?;
    if ds.test.is_empty() {
        return Err(CliError::invalid("no test ICs"));
    }
    let pod = pod_for(cfg, &ds)?;
    let (train_set, test) = model_coordinates(&ds, pod.as_ref())?;
    let preds: Vec<Option<Trajectory<f64>>> = test
        .iter()
        .map(|gt| {
            latent_rollout(&ckpt.model, &gt.states[0], &gt.times, &SolverConfig::default())
                .map(|r| r.decoded.with_id(gt.ic_id.clone()))
                .map_err(|e| log::warn!("rollout of {} failed: {e}", gt.ic_id))
                .ok()
        })
        .collect();
    let lookup = |gt: &Trajectory<f64>| -> Result<Trajectory<f64>, String> {
        test.iter()
            .position(|t| t.ic_id == gt.ic_id)
            .and_then(|k| preds[k].clone())
            .ok_or_else(|| "rollout failed".to_string())
    };
    let model_pred = FnPredictor {
        name: cfg.variant.to_string(),
        f: lookup,
    };
    let mut metrics = vec![Metric::TrajError];
    let reports = if pod.is_some() {
        metrics.push(Metric::RelativeL2);
        let reduced = TrainingData::from_trajectories(&train_set)?;
        let opinf = opinf_fit(&reduced.states, &reduced.derivs)?;
        let baseline = FnPredictor {
            name: "opinf-ham".to_string(),
            f: move |gt: &Trajectory<f64>| {
                opinf_rollout(&opinf, &gt.states[0], &gt.times).map_err(|e| e.to_string())
            },
        };
        let preds: [&dyn Predictor<f64>; 2] = [&model_pred, &baseline];
        benchmark_suite(&test, &preds, &metrics)?
    } else {
        benchmark_suite(&test, &[&model_pred as &dyn Predictor<f64>], &metrics)?
    };
    let dir = cfg.eval_dir();
    let mut csv = format!("{CSV_HEADER}\n");
    for r in &reports {
        csv.push_str(&r.csv_rows());
    }
    let mut summary = summary_table(&reports);
    if let Some(p) = &pod {
        let decoder_path = cfg.decoder_path();
        let dec: Option<DecoderFile> = if decoder_path.exists() {
            Some(load_json(&decoder_path)?)
        } else {
            None
        };
        let mut rows = String::from("decoder,coordinates,ic,mean_l2\n");
        let _ = writeln!(summary, "\nmean L2 reconstruction error of the full field");
        for (gt_full, (gt_red, pred)) in ds.test.iter().zip(test.iter().zip(&preds)) {
            let mut sources = vec![("projected", Some(gt_red))];
            sources.push(("predicted", pred.as_ref()));
            for (source, coords) in sources {
                let Some(coords) = coords else { continue };
                let mut decoders: Vec<(&str, Vec<Vec<f64>>)> = vec![(
                    "linear",
                    coords
                        .states
                        .iter()
                        .map(|y| linear_reconstruct(&p.basis, y))
                        .collect::<Result<_, _>>()?,
                )];
                if let Some(DecoderFile::Quadratic { decoder, .. }) = &dec {
                    decoders.push((
                        "quadratic",
                        coords
                            .states
                            .iter()
                            .map(|y| quad_reconstruct(decoder, y))
                            .collect::<Result<_, _>>()?,
                    ));
                }
                for (name, fields) in decoders {
                    let err = mean_l2(&gt_full.states, &fields)?;
                    let _ = writeln!(rows, "{name},{source},{},{}", gt_full.ic_id, fmt_f64(err));
                    let _ = writeln!(summary, "  {name:<10} {source:<10} {:<10} {:.4e}", gt_full.ic_id, err);
                }
            }
        }
        write_text(&dir.join("decoder-errors.csv"), &rows)?;
    }
    let (phase, series) = phase_and_series(&test, &preds);
    write_text(&dir.join("errors.csv"), &csv)?;
    write_text(&dir.join("summary.txt"), &summary)?;
    write_text(&dir.join("phase.csv"), &phase)?;
    write_text(&dir.join("timeseries.csv"), &series)?;
    if cfg.plot {
        render_plots(&dir, &reports[0], &test, &preds)?;
    }
    Ok(summary)
}

fn render_plots(
    dir: &Path,
    report: &ErrorReport<f64>,
    test: &[Trajectory<f64>],
    preds: &[Option<Trajectory<f64>>],
) -> CliResult<()> {
    let picks = [("best", report.best_ic), ("worst", report.worst_ic)];
    for (tag, idx) in picks {
        let Some(k) = idx else { continue };
        let (gt, Some(pred)) = (&test[k], &preds[k]) else { continue };
        let half = gt.dim() / 2;
        let col = |t: &Trajectory<f64>, i: usize| t.states.iter().map(|s| s[i]).collect::<Vec<f64>>();
        let (q, p, qp, pp) = (col(gt, 0), col(gt, half), col(pred, 0), col(pred, half));
        let phase = line_chart(
            &format!("phase space, {tag} IC ({})", gt.ic_id),
            "q",
            "p",
            &[
                Series { label: "truth", x: &q, y: &p },
                Series { label: "model", x: &qp, y: &pp },
            ],
        );
        write_text(&dir.join(format!("phase-{tag}.svg")), &phase)?;
        let series = line_chart(
            &format!("time series, {tag} IC ({})", gt.ic_id),
            "t",
            "q",
            &[
                Series { label: "truth", x: &gt.times, y: &q },
                Series { label: "model", x: &pred.times, y: &qp },
            ],
        );
        write_text(&dir.join(format!("timeseries-{tag}.svg")), &series)?;
    }
    Ok(())
}

/// Re-renders the SVGs of a finished evaluation from its CSV output.
pub fn cmd_plot(cfg: &ExperimentConfig) -> CliResult<String> {
    let dir = cfg.eval_dir();
    let phase_path = require(&dir.join("phase.csv"), "evaluation output")?;
    let errors_path = require(&dir.join("errors.csv"), "evaluation output")?;
    let mut rdr = csv::Reader::from_path(&errors_path)
        .map_err(|e| CliError::invalid(format!("{}: {e}", errors_path.display())))?;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::invalid(format!("{}: {e}", errors_path.display())))?;
        if &rec[0] == cfg.variant.as_str() && &rec[1] == Metric::TrajError.as_str() {
            ids.push(rec[2].to_string());
            values.push(rec[3].parse::<f64>().unwrap_or(f64::INFINITY));
        }
    }
    if ids.is_empty() {
        return Err(CliError::invalid(format!("no {} rows in {}", cfg.variant, errors_path.display())));
    }
    let report = ErrorReport::from_values(Metric::TrajError, cfg.variant.to_string(), ids, values);
    let text = fs::read_to_string(&phase_path).map_err(|e| CliError::io(&phase_path, e))?;
    // rebuild two-coordinate trajectories from the phase table
    let mut test = Vec::new();
    let mut preds = Vec::new();
    for id in &report.ic_ids {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .filter(|l| l.split(',').next() == Some(id.as_str()))
            .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap_or(f64::NAN)).collect())
            .collect();
        if rows.is_empty() {
            test.push(Trajectory::new(vec![0.0], vec![vec![0.0; 2]], None, id.clone()).expect("trivial"));
            preds.push(None);
            continue;
        }
        let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let gt = Trajectory::new(times.clone(), rows.iter().map(|r| vec![r[1], r[2]]).collect(), None, id.clone())
            .map_err(|e| CliError::invalid(format!("{}: {e}", phase_path.display())))?;
        let pred = Trajectory::new(times, rows.iter().map(|r| vec![r[3], r[4]]).collect(), None, id.clone())
            .map_err(|e| CliError::invalid(format!("{}: {e}", phase_path.display())))?;
        test.push(gt);
        preds.push(Some(pred));
    }
    render_plots(&dir, &report, &test, &preds)?;
    Ok(format!("wrote phase and time-series plots to {}", dir.display()))
}

pub fn cmd_fit_decoder(cfg: &ExperimentConfig) -> CliResult<String> {
    let r = cfg.preset.pod_rank().ok_or_else(|| {
        CliError::invalid(format!("{} is not a field system; decoders do not apply", cfg.system()))
    })?;
    let ds = dataset_for(cfg)?;
    let pod = pod_for(cfg, &ds)?.expect("field system has a basis");
    let xs: Vec<Vec<f64>> = ds.train.iter().flat_map(|t| t.states.iter().cloned()).collect();
    let ys: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| pod.basis.project(x))
        .collect::<Result<_, _>>()?;
    let (file, fields) = match cfg.decoder {
        DecoderChoice::Linear => {
            let fields: Vec<Vec<f64>> = ys
                .iter()
                .map(|y| linear_reconstruct(&pod.basis, y))
                .collect::<Result<_, _>>()?;
            (DecoderFile::Linear { r }, fields)
        }
        DecoderChoice::Quadratic => {
            let (decoder, history) = fit_quad_decoder(&ys, &xs, &cfg.decoder_fit)?;
            let fields: Vec<Vec<f64>> = ys
                .iter()
                .map(|y| quad_reconstruct(&decoder, y))
                .collect::<Result<_, _>>()?;
            (DecoderFile::Quadratic { decoder, history }, fields)
        }
    };
    save_json(&cfg.decoder_path(), &file)?;
    let err = mean_l2(&xs, &fields)?;
    Ok(format!(
        "{:?} decoder on {} training snapshots: mean L2 reconstruction error {:.4e}",
        cfg.decoder,
        xs.len(),
        err
    ))
}
