//! Acceptance checks. Each check runs one end-to-end property with its
//! tolerances fixed here and reports a single [`Outcome`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use hamkoop::baselines::{opinf_fit, opinf_rollout, OpInfModel};
use hamkoop::decoders::{fit_quad_decoder, quad_reconstruct, DecoderFitConfig, QuadDecoder};
use hamkoop::diffkit::Tape;
use hamkoop::eval::{benchmark_suite, relative_l2, EmbeddingPredictor, Metric, Predictor};
use hamkoop::hamsys::{apply_symplectic, symplectic_form};
use hamkoop::integrate::{integrate_states, linspace, midpoint_step, MidpointSolver};
use hamkoop::linalg::{Lu, Mat};
use hamkoop::pod::{assemble_snapshots, energy_fraction, pod_basis, PodBasis};
use hamkoop::presets::{generate_dataset, Preset};
use hamkoop::training::{total_loss, total_loss_grad, EmbeddingModel, TrainingData};
use hamkoop::{
    train, CanonicalSystem, CubicPoly, LatentHamiltonian, SolverConfig, SosHamiltonian, SosKind,
    SystemName, Variant, VectorField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

fn timed(id: u32, title: &'static str, f: impl FnOnce() -> Result<(bool, String), String>) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome {
        id,
        title,
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn uniform(rng: &mut ChaCha8Rng, dim: usize, lim: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-lim..lim)).collect()
}

// 1. gradients

pub const GRAD_TOL: f64 = 1e-6;
pub const GRAD_BUDGET_S: f64 = 60.0;

fn perturbed_model(variant: Variant, rng: &mut ChaCha8Rng) -> Result<EmbeddingModel<f64>, String> {
    let mut model = EmbeddingModel::init(variant, 1, 2, &[8, 8], rng).map_err(err)?;
    // keep |θ| away from its kink at zero
    let flat: Vec<f64> = model
        .param_vector()
        .values
        .iter()
        .map(|v| v + rng.gen_range(0.02..0.1) * if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    model.set_params(&flat);
    Ok(model)
}

fn fd_relative_error(
    model: &EmbeddingModel<f64>,
    xs: &[Vec<f64>],
    dxs: &[Vec<f64>],
    lambdas: [f64; 3],
    l1: f64,
    tape: &mut Tape<f64>,
) -> Result<f64, String> {
    let (_, g) = total_loss_grad(model, xs, dxs, lambdas, l1, tape).map_err(err)?;
    let base = model.param_vector().values;
    let h = 1e-6;
    let mut probe = model.clone();
    let mut p = base.clone();
    let mut diff = 0.0;
    let mut norm = 0.0;
    for k in 0..base.len() {
        p[k] = base[k] + h;
        probe.set_params(&p);
        let up = total_loss(&probe, xs, dxs, lambdas, l1).map_err(err)?.total;
        p[k] = base[k] - h;
        probe.set_params(&p);
        let dn = total_loss(&probe, xs, dxs, lambdas, l1).map_err(err)?.total;
        p[k] = base[k];
        let fd = (up - dn) / (2.0 * h);
        diff += (g[k] - fd).powi(2);
        norm += fd * fd;
    }
    Ok(diff.sqrt() / norm.sqrt().max(1e-12))
}

pub fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut out = timed(1, "gradient correctness", || {
        let losses: [(&str, [f64; 3], f64); 4] = [
            ("encdec", [1.0, 0.0, 0.0], 0.0),
            ("symp", [0.0, 1.0, 0.0], 0.0),
            ("deri", [0.0, 0.0, 1.0], 0.0),
            ("total", [0.1, 1.0, 1.0], 1e-4),
        ];
        let sys = CanonicalSystem::<f64>::pendulum();
        let mut tape = Tape::new();
        let mut worst = (0.0f64, String::new());
        let mut checks = 0;
        for variant in Variant::ALL {
            for seed in 0..5u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let model = perturbed_model(variant, &mut rng)?;
                for _ in 0..5 {
                    let xs: Vec<Vec<f64>> = (0..8).map(|_| uniform(&mut rng, 2, 2.0)).collect();
                    let dxs = xs
                        .iter()
                        .map(|x| sys.eval_vector_field(x).map_err(err))
                        .collect::<Result<Vec<_>, _>>()?;
                    for (name, lambdas, l1) in losses {
                        let e = fd_relative_error(&model, &xs, &dxs, lambdas, l1, &mut tape)?;
                        checks += 1;
                        if e > worst.0 {
                            worst = (e, format!("{variant}/{name}/seed {seed}"));
                        }
                    }
                }
            }
        }
        Ok((
            worst.0 < GRAD_TOL,
            format!(
                "max relative error {:.2e} ({}) over {checks} checks, tol {GRAD_TOL:e}",
                worst.0, worst.1
            ),
        ))
    });
    if out.pass && start.elapsed().as_secs_f64() >= GRAD_BUDGET_S {
        out.pass = false;
        out.detail.push_str(&format!("; over the {GRAD_BUDGET_S} s budget"));
    }
    out
}

// 2. symplectic integration

pub const QUAD_CONSERVATION_TOL: f64 = 1e-12;
pub const PENDULUM_DRIFT_TOL: f64 = 1e-6;
pub const CAYLEY_TOL: f64 = 1e-11;

/// `ẏ = JAy`, exposing `JA` to the solver.
struct LinearHamiltonian {
    ja: Mat<f64>,
}

impl VectorField<f64> for LinearHamiltonian {
    fn dim(&self) -> usize {
        self.ja.rows()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.ja.matvec(x).expect("square operator"));
    }

    fn stiff_linear_part(&self) -> Option<&Mat<f64>> {
        Some(&self.ja)
    }
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> Mat<f64> {
    let b = Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    b.transpose().matmul(&b).expect("square").add(&Mat::identity(d).scale(0.1)).expect("same shape")
}

fn quadratic_conservation() -> Result<(f64, bool), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let a = random_spd(&mut rng, 4);
        let j = symplectic_form::<f64>(2).map_err(err)?;
        let field = LinearHamiltonian {
            ja: j.matmul(&a).map_err(err)?,
        };
        let h = |y: &[f64]| 0.5 * hamkoop::linalg::dot(y, &a.matvec(y).expect("square"));
        let mut y = uniform(&mut rng, 4, 1.0);
        let h0 = h(&y);
        let mut solver = MidpointSolver::new(SolverConfig::default()).map_err(err)?;
        for _ in 0..10_000 {
            y = solver.step(&field, &y, 0.01).map_err(err)?;
            worst = worst.max((h(&y) - h0).abs() / h0);
        }
    }
    Ok((worst, worst < QUAD_CONSERVATION_TOL))
}

/// Relative energy drift of the pendulum from `(1, 0)` over 2500 samples on
/// `[0, 50]`, integrated as the data generator does (steps of at most 0.01,
/// subsampled to the `dt ≈ 0.02` grid).
fn pendulum_drift() -> Result<(f64, f64, bool), String> {
    let sys = CanonicalSystem::<f64>::pendulum();
    let times = linspace(0.0, 50.0, 2500);
    let x0 = [1.0, 0.0];
    let drift = |states: &[Vec<f64>]| -> Result<f64, String> {
        let h0 = sys.eval_hamiltonian(&states[0]).map_err(err)?;
        let mut worst = 0.0f64;
        for s in states {
            worst = worst.max((sys.eval_hamiltonian(s).map_err(err)? - h0).abs() / h0.abs());
        }
        Ok(worst)
    };
    let fine = drift(&integrate_states(&sys, &x0, &times, &SolverConfig::fine()).map_err(err)?)?;
    // the same grid without substeps, for reference
    let raw = drift(&integrate_states(&sys, &x0, &times, &SolverConfig::default()).map_err(err)?)?;
    Ok((fine, raw, fine < PENDULUM_DRIFT_TOL))
}

fn cayley_agreement() -> Result<(f64, bool), String> {
    let mut worst = 0.0f64;
    // f(z) = Jz, h = 0.2, z = (1, 0)
    let osc = LinearHamiltonian {
        ja: symplectic_form::<f64>(1).map_err(err)?,
    };
    let z = midpoint_step(&osc, &[1.0, 0.0], 0.2, &SolverConfig::default()).map_err(err)?;
    let expect = [0.99 / 1.01, -0.2 / 1.01];
    worst = worst.max((z[0] - expect[0]).abs().max((z[1] - expect[1]).abs()));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for d in [2usize, 4, 6, 8] {
        let a = random_spd(&mut rng, d);
        let j = symplectic_form::<f64>(d / 2).map_err(err)?;
        let m = j.matmul(&a).map_err(err)?;
        let field = LinearHamiltonian { ja: m.clone() };
        for h in [0.01, 0.1, 0.5] {
            let y = uniform(&mut rng, d, 1.0);
            let half = m.scale(0.5 * h);
            let lhs = Mat::identity(d).sub(&half).map_err(err)?;
            let rhs = Mat::identity(d).add(&half).map_err(err)?;
            let exact = Lu::factor(&lhs).map_err(err)?.solve(&rhs.matvec(&y).map_err(err)?).map_err(err)?;
            let step = midpoint_step(&field, &y, h, &SolverConfig::default()).map_err(err)?;
            let scale = exact.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let e = step.iter().zip(&exact).fold(0.0f64, |a, (u, v)| a.max((u - v).abs())) / scale;
            worst = worst.max(e);
        }
    }
    Ok((worst, worst < CAYLEY_TOL))
}

pub fn symplectic_integration() -> Outcome {
    timed(2, "symplectic integration", || {
        let (quad, ok_quad) = quadratic_conservation()?;
        let (drift, raw, ok_drift) = pendulum_drift()?;
        let (cayley, ok_cayley) = cayley_agreement()?;
        Ok((
            ok_quad && ok_drift && ok_cayley,
            format!(
                "quadratic H drift {quad:.2e} over 1e4 steps (tol {QUAD_CONSERVATION_TOL:e}); \
                 pendulum drift {drift:.2e} from (1, 0) on the dt=0.02 data grid (tol {PENDULUM_DRIFT_TOL:e}; \
                 {raw:.2e} without substeps); Cayley mismatch {cayley:.2e} (tol {CAYLEY_TOL:e})"
            ),
        ))
    })
}

// 3. stability certificates

pub const BOUND_SLACK: f64 = 1e-6;
pub const H_SAMPLES: usize = 100_000;

pub fn stability_certificates() -> Outcome {
    timed(3, "stability certificates", || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let times: Vec<f64> = (0..=500).map(|k| k as f64 * 0.02).collect();
        let mut worst_ratio = 0.0f64;
        let mut min_h = f64::INFINITY;
        let mut rollouts = 0;
        for kind in [SosKind::Quadratic, SosKind::Quartic] {
            for _ in 0..20 {
                let m = 2;
                let mut sos = SosHamiltonian::<f64>::init(kind, m, 0.5, &mut rng);
                sos.w = rng.gen_range(0.5..1.5);
                let model = LatentHamiltonian::Sos(sos);
                for _ in 0..10 {
                    let y0 = uniform(&mut rng, 2 * m, 1.0);
                    let bound = model.stability_bound(&y0).map_err(err)?;
                    let ys = integrate_states(&model, &y0, &times, &SolverConfig::default()).map_err(err)?;
                    for y in &ys {
                        worst_ratio = worst_ratio.max(model.certified_quantity(y).map_err(err)? / bound);
                    }
                    rollouts += 1;
                }
                for _ in 0..H_SAMPLES {
                    let y = uniform(&mut rng, 2 * m, 10.0);
                    min_h = min_h.min(model.latent_h(&y).map_err(err)?);
                }
            }
        }
        Ok((
            worst_ratio <= 1.0 + BOUND_SLACK && min_h >= 0.0,
            format!(
                "max certified quantity / bound {worst_ratio:.6} over {rollouts} rollouts \
                 (allowed 1 + {BOUND_SLACK:e}); min H {min_h:.3e} over 40 × {H_SAMPLES} points"
            ),
        ))
    })
}

// 4. instability witness

pub const BLOWUP_NORM: f64 = 1e3;

pub fn instability_witness() -> Outcome {
    timed(4, "instability witness", || {
        // H = p²/2 + q²/2 + q³/3 with y = [q, p]
        let mut poly = CubicPoly::<f64>::zeros(1);
        poly.set(&[0, 0], 0.5);
        poly.set(&[1, 1], 0.5);
        poly.set(&[0, 0, 0], 1.0 / 3.0);
        let model = LatentHamiltonian::Cubic(poly);
        let h = 1e-3;
        let mut solver = MidpointSolver::new(SolverConfig::default()).map_err(err)?;
        let mut y = vec![-3.0, -3.0];
        let mut t = 0.0;
        while t < 20.0 {
            y = solver.step(&model, &y, h).map_err(err)?;
            t += h;
            let norm = (y[0] * y[0] + y[1] * y[1]).sqrt();
            if norm > BLOWUP_NORM {
                return Ok((true, format!("‖x‖ = {norm:.3e} > {BLOWUP_NORM:e} at t = {t:.3} from (−3, −3)")));
            }
        }
        Ok((false, format!("‖x‖ stayed below {BLOWUP_NORM:e} up to t = 20")))
    })
}

// 5 and 6. POD

pub const NLS_ENERGY: f64 = 0.94;
pub const WAVE_ENERGY: f64 = 0.527;
pub const NLS_ENERGY_TOL: f64 = 0.02;
pub const WAVE_ENERGY_TOL: f64 = 0.03;
pub const POD_BUDGET_S: f64 = 120.0;
pub const COTANGENT_TOL: f64 = 1e-12;

pub struct PodRun {
    pub system: SystemName,
    pub energy: f64,
    pub seconds: f64,
    pub basis: PodBasis<f64>,
}

pub fn pod_run(system: SystemName) -> Result<PodRun, String> {
    let start = Instant::now();
    let preset = Preset::by_name(system);
    let r = preset.pod_rank().ok_or("not a field system")?;
    let ds = generate_dataset::<f64>(&preset, 0).map_err(err)?;
    let basis = pod_basis(&assemble_snapshots(&ds.train).map_err(err)?, r).map_err(err)?;
    let energy = energy_fraction(&basis.singular_values, r).map_err(err)?;
    Ok(PodRun {
        system,
        energy,
        seconds: start.elapsed().as_secs_f64(),
        basis,
    })
}

pub fn pod_energy(runs: &[Result<PodRun, String>]) -> Outcome {
    timed(5, "POD energy", || {
        let mut pass = true;
        let mut parts = Vec::new();
        for run in runs {
            let run = run.as_ref().map_err(Clone::clone)?;
            let (ok, target) = match run.system {
                SystemName::Nls => (
                    run.energy > NLS_ENERGY - NLS_ENERGY_TOL,
                    format!("> {NLS_ENERGY} − {NLS_ENERGY_TOL}"),
                ),
                _ => (
                    (run.energy - WAVE_ENERGY).abs() <= WAVE_ENERGY_TOL,
                    format!("{WAVE_ENERGY} ± {WAVE_ENERGY_TOL}"),
                ),
            };
            let ok = ok && run.seconds < POD_BUDGET_S;
            pass &= ok;
            parts.push(format!(
                "{} r={} energy {:.4} (target {target}, {:.0} s) {}",
                run.system,
                run.basis.r,
                run.energy,
                run.seconds,
                if ok { "ok" } else { "MISS" }
            ));
        }
        Ok((pass, parts.join("; ")))
    })
}

/// `‖𝒱ᵀJ𝒱 − J‖_max` for the cotangent lift `𝒱 = blkdiag(V, V)`.
pub fn cotangent_defect(basis: &PodBasis<f64>) -> Result<f64, String> {
    let lift = basis.v.block_diag2();
    let j_full = symplectic_form::<f64>(basis.n).map_err(err)?;
    let j_red = symplectic_form::<f64>(basis.r).map_err(err)?;
    let pulled = lift.transpose().matmul(&j_full.matmul(&lift).map_err(err)?).map_err(err)?;
    Ok(pulled.sub(&j_red).map_err(err)?.max_abs())
}

pub fn cotangent_symplecticity(runs: &[Result<PodRun, String>]) -> Outcome {
    timed(6, "cotangent-lift symplecticity", || {
        let mut worst = 0.0f64;
        let mut count = 0;
        for run in runs.iter().flatten() {
            for r in 1..=run.basis.r {
                let sub = PodBasis {
                    v: Mat::from_fn(run.basis.n, r, |i, j| run.basis.v[(i, j)]),
                    r,
                    ..run.basis.clone()
                };
                worst = worst.max(cotangent_defect(&sub)?);
                count += 1;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let (n, cols) = (rng.gen_range(4..40), rng.gen_range(4..30));
            let snaps = Mat::from_fn(n, cols, |_, _| rng.gen_range(-1.0..1.0));
            let r = rng.gen_range(1..=n.min(cols).min(6));
            worst = worst.max(cotangent_defect(&pod_basis(&snaps, r).map_err(err)?)?);
            count += 1;
        }
        Ok((
            count > 20 && worst < COTANGENT_TOL,
            format!("max |𝒱ᵀJ𝒱 − J| {worst:.2e} over {count} bases (tol {COTANGENT_TOL:e})"),
        ))
    })
}

// 7. OpInf-Ham

pub const OPINF_TOL: f64 = 1e-6;

pub fn opinf_recovery() -> Outcome {
    timed(7, "OpInf-Ham recovery", || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst_param = 0.0f64;
        let mut worst_roll = 0.0f64;
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        for m in 1..=4 {
            let d = 2 * m;
            let a0 = random_spd(&mut rng, d);
            let bias = uniform(&mut rng, d, 0.5);
            let truth = OpInfModel::from_parts(&a0, bias).map_err(err)?;
            let ys: Vec<Vec<f64>> = (0..500).map(|_| uniform(&mut rng, d, 1.0)).collect();
            let dys: Vec<Vec<f64>> = ys.iter().map(|y| apply_symplectic(&truth.grad(y))).collect();
            let fit = opinf_fit(&ys, &dys).map_err(err)?;
            let theta = |mdl: &OpInfModel<f64>| mdl.a_upper.iter().chain(&mdl.b).copied().collect::<Vec<f64>>();
            let (tf, tt) = (theta(&fit), theta(&truth));
            let num: f64 = tf.iter().zip(&tt).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            let den: f64 = tt.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst_param = worst_param.max(num / den);
            let y0 = uniform(&mut rng, d, 1.0);
            let gt = opinf_rollout(&truth, &y0, &times).map_err(err)?;
            let pred = opinf_rollout(&fit, &y0, &times).map_err(err)?;
            worst_roll = worst_roll.max(relative_l2(&gt.states, &pred.states).map_err(err)?);
        }
        Ok((
            worst_param < OPINF_TOL && worst_roll < OPINF_TOL,
            format!(
                "m=1..4, 500 samples: parameter error {worst_param:.2e}, rollout relative L2 {worst_roll:.2e} (tol {OPINF_TOL:e})"
            ),
        ))
    })
}

// 8. quadratic decoder

pub const DECODER_TOL: f64 = 1e-4;

pub fn decoder_identifiability() -> Outcome {
    timed(8, "quadratic-decoder identifiability", || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (full, d, samples) = (8, 3, 300);
        let truth = QuadDecoder {
            v: Mat::from_fn(full, d, |_, _| rng.gen_range(-1.0..1.0)),
            h: Mat::from_fn(full, d * d, |_, _| rng.gen_range(-1.0..1.0)),
            d,
        };
        let sample = |rng: &mut ChaCha8Rng, count: usize| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), String> {
            let ys: Vec<Vec<f64>> = (0..count).map(|_| uniform(rng, d, 1.0)).collect();
            let xs = ys.iter().map(|y| quad_reconstruct(&truth, y).map_err(err)).collect::<Result<_, _>>()?;
            Ok((ys, xs))
        };
        let (ys, xs) = sample(&mut rng, samples)?;
        let cfg = DecoderFitConfig::default();
        let (dec, _) = fit_quad_decoder(&ys, &xs, &cfg).map_err(err)?;
        let score = |ys: &[Vec<f64>], xs: &[Vec<f64>]| -> Result<f64, String> {
            let pred: Vec<Vec<f64>> = ys.iter().map(|y| quad_reconstruct(&dec, y).map_err(err)).collect::<Result<_, _>>()?;
            relative_l2(xs, &pred).map_err(err)
        };
        let fit_err = score(&ys, &xs)?;
        let (hy, hx) = sample(&mut rng, 200)?;
        let held_err = score(&hy, &hx)?;
        Ok((
            fit_err < DECODER_TOL && held_err < DECODER_TOL,
            format!(
                "{full}×{d} truth, {samples} samples, {} epochs: relative error {fit_err:.2e} on fit data, \
                 {held_err:.2e} held out (tol {DECODER_TOL:e})",
                cfg.epochs
            ),
        ))
    })
}

// 9. pendulum ordering

pub const PENDULUM_MEDIAN_CAP: f64 = 0.1;

pub fn pendulum_ordering() -> Outcome {
    timed(9, "end-to-end pendulum ordering", || {
        let preset = Preset::by_name(SystemName::Pendulum);
        let ds = generate_dataset::<f64>(&preset, 0).map_err(err)?;
        let data = TrainingData::from_trajectories(&ds.train).map_err(err)?;
        let cfg = preset.training_config::<f64>(0);
        let mut medians = Vec::new();
        for variant in [Variant::SCubic, Variant::SLinear] {
            let (model, _) = train(&data, variant, preset.latent_dim / 2, &preset.hidden, &cfg).map_err(err)?;
            let predictor = EmbeddingPredictor {
                model: &model,
                solver: SolverConfig::default(),
            };
            let preds: [&dyn Predictor<f64>; 1] = [&predictor];
            let report = benchmark_suite(&ds.test, &preds, &[Metric::TrajError])
                .map_err(err)?
                .remove(0);
            // failed ICs stay in as +∞
            let mut v = report.values.clone();
            v.sort_by(f64::total_cmp);
            let k = v.len() / 2;
            let med = if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) };
            medians.push((variant, med, report.failed));
        }
        let (sc, sl) = (medians[0].1, medians[1].1);
        Ok((
            sc < sl && sc < PENDULUM_MEDIAN_CAP,
            format!(
                "median traj_error s-cubic {sc:.3e} ({} failed), s-linear {sl:.3e} ({} failed); \
                 need s-cubic < s-linear and < {PENDULUM_MEDIAN_CAP}",
                medians[0].2, medians[1].2
            ),
        ))
    })
}

// 10. determinism

const DET_OSC: &str = r#"
system = "oscillator"
seed = 5

[training]
epochs = 20

[protocol]
kind = "sampled"
bounds = [[-2.0, 2.0], [-2.0, 2.0]]
energy_cap = 1.0
train_count = 4
train_grid = { t_end = 4.0, points = 40 }
test_count = 3
test_grid = { t_end = 5.0, points = 200 }
"#;

const DET_WAVE: &str = r#"
system = "wave"
seed = 2

[model]
hidden = [6]
latent_dim = 4

[training]
epochs = 10

[decoder]
epochs = 20

[protocol]
kind = "parametric"
grid_points = 32
mus = [0.5, 0.8, 1.0, 1.2]
test_mus = [1.0]
grid = { t_end = 2.0, points = 41 }
pod_rank = 2
"#;

fn cli(args: &[&str]) -> Result<(), String> {
    let cli = hamkoop_cli::Cli::try_parse_from(std::iter::once("hamkoop").chain(args.iter().copied()))
        .map_err(err)?;
    hamkoop_cli::run(&cli).map(|_| ()).map_err(err)
}

fn pipeline(root: &Path) -> Result<(), String> {
    let osc = root.join("osc.toml");
    let wave = root.join("wave.toml");
    fs::write(&osc, DET_OSC).map_err(err)?;
    fs::write(&wave, DET_WAVE).map_err(err)?;
    let (osc, wave) = (osc.to_string_lossy().into_owned(), wave.to_string_lossy().into_owned());
    let (osc_out, wave_out) = (
        root.join("out/osc").to_string_lossy().into_owned(),
        root.join("out/wave").to_string_lossy().into_owned(),
    );
    for cmd in ["gen-data", "train", "rollout", "eval", "plot"] {
        cli(&[cmd, "--config", &osc, "--out", &osc_out, "--plot"])?;
    }
    for cmd in ["gen-data", "pod", "fit-decoder", "train", "rollout", "eval"] {
        cli(&[cmd, "--config", &wave, "--out", &wave_out, "--plot"])?;
    }
    Ok(())
}

fn files_under(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).map_err(err)? {
            let p = e.map_err(err)?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).map_err(err)?.to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn determinism() -> Outcome {
    timed(10, "determinism", || {
        let a = tempfile::tempdir().map_err(err)?;
        let b = tempfile::tempdir().map_err(err)?;
        pipeline(a.path())?;
        pipeline(b.path())?;
        let (ra, rb) = (a.path().join("out"), b.path().join("out"));
        let fa = files_under(&ra)?;
        let fb = files_under(&rb)?;
        if fa != fb {
            return Ok((false, format!("file sets differ: {} vs {} files", fa.len(), fb.len())));
        }
        let differing: Vec<String> = fa
            .iter()
            .filter(|f| fs::read(ra.join(f)).ok() != fs::read(rb.join(f)).ok())
            .map(|f| f.display().to_string())
            .collect();
        Ok((
            differing.is_empty(),
            if differing.is_empty() {
                format!("{} output files byte-identical across two full pipeline runs", fa.len())
            } else {
                format!("{} of {} files differ: {}", differing.len(), fa.len(), differing.join(", "))
            },
        ))
    })
}
