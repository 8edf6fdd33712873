use hamkoop::baselines::{opinf_fit, opinf_rollout, OpInfModel};
use hamkoop::decoders::{decoder_loss, fit_quad_decoder, quad_reconstruct, DecoderFitConfig, QuadDecoder};
use hamkoop::eval::relative_l2;
use hamkoop::hamsys::apply_symplectic;
use hamkoop::linalg::Mat;
use hamkoop::presets::{generate_dataset, Preset};
use hamkoop::training::{latent_rollout, train, TrainingData, Variant};
use hamkoop::{SolverConfig, SystemName};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

#[test]
fn opinf_recovers_known_operator() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for m in 1..=4 {
        let d = 2 * m;
        let b0 = Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        let a0 = b0.transpose().matmul(&b0).unwrap();
        let bias: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let truth = OpInfModel::from_parts(&a0, bias).unwrap();
        let ys = random_points(&mut rng, 500, d);
        let dys: Vec<Vec<f64>> = ys.iter().map(|y| apply_symplectic(&truth.grad(y))).collect();
        let fit = opinf_fit(&ys, &dys).unwrap();
        let num: f64 = fit
            .a_upper
            .iter()
            .chain(&fit.b)
            .zip(truth.a_upper.iter().chain(&truth.b))
            .map(|(u, v)| (u - v).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = truth.a_upper.iter().chain(&truth.b).map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den < 1e-6, "m={m}: parameter error {:e}", num / den);
    }
}

#[test]
fn opinf_rollout_conserves_energy() {
    let a = Mat::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.5]]).unwrap();
    let model = OpInfModel::from_parts(&a, vec![0.0; 2]).unwrap();
    let times: Vec<f64> = (0..1000).map(|k| k as f64 * 0.01).collect();
    let traj = opinf_rollout(&model, &[1.0, -0.5], &times).unwrap();
    let h0 = model.hamiltonian(&traj.states[0]);
    for s in &traj.states {
        assert!((model.hamiltonian(s) - h0).abs() <= 1e-12 * h0);
    }
}

fn fit_and_score(truth: &QuadDecoder<f64>, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ys = random_points(&mut rng, samples, truth.d);
    let xs: Vec<Vec<f64>> = ys.iter().map(|y| quad_reconstruct(truth, y).unwrap()).collect();
    let (dec, _) = fit_quad_decoder(&ys, &xs, &DecoderFitConfig::default()).unwrap();
    let pred: Vec<Vec<f64>> = ys.iter().map(|y| quad_reconstruct(&dec, y).unwrap()).collect();
    (relative_l2(&xs, &pred).unwrap(), decoder_loss(&dec, &ys, &xs).unwrap())
}

#[test]
fn quad_decoder_recovers_linear_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth = QuadDecoder {
        v: Mat::from_fn(8, 4, |_, _| rng.gen_range(-1.0..1.0)),
        h: Mat::zeros(8, 16),
        d: 4,
    };
    let (rel, _) = fit_and_score(&truth, 400, 2);
    assert!(rel < 1e-4, "relative error {rel:e}");
}

#[test]
fn quad_decoder_recovers_quadratic_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = QuadDecoder {
        v: Mat::zeros(6, 2),
        h: Mat::from_fn(6, 4, |_, _| rng.gen_range(-1.0..1.0)),
        d: 2,
    };
    let (rel, loss) = fit_and_score(&truth, 200, 4);
    assert!(rel < 1e-4, "relative error {rel:e}");
    assert!(loss < 1e-6, "training loss {loss:e}");
}

#[test]
fn single_precision_pipeline() {
    let preset = Preset::by_name(SystemName::Oscillator);
    let ds = generate_dataset::<f32>(&preset, 0).unwrap();
    let data = TrainingData::from_trajectories(&ds.train).unwrap();
    let mut cfg = preset.training_config::<f32>(0);
    cfg.epochs = 3;
    let (model, hist) = train(&data, Variant::SLinear, preset.latent_dim / 2, &preset.hidden, &cfg).unwrap();
    assert_eq!(hist.len(), 3);
    assert!(hist.iter().all(|h| h.total.is_finite()));
    let test = &ds.test[0];
    let times = &test.times[..50];
    let roll = latent_rollout(&model, &test.states[0], times, &SolverConfig::default()).unwrap();
    assert_eq!(roll.decoded.len(), 50);
    assert!(roll.violations.is_empty());
}
