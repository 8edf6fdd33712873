use hamkoop::baselines::{opinf_fit, OpInfModel};
use hamkoop::decoders::{quad_reconstruct, QuadDecoder};
use hamkoop::diffkit::ParamVector;
use hamkoop::eval::{median, relative_l2, traj_error};
use hamkoop::hamsys::symplectic_form;
use hamkoop::integrate::{integrate_states, SolverConfig, Trajectory, VectorField};
use hamkoop::latentham::{LatentHamiltonian, SosHamiltonian, SosKind};
use hamkoop::linalg::Mat;
use hamkoop::pod::pod_basis;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn traj(states: Vec<Vec<f64>>) -> Trajectory<f64> {
    let times = (0..states.len()).map(|k| k as f64).collect();
    Trajectory::new(times, states, None, "").unwrap()
}

/// `ẏ = My` exposing `M` as its stiff part, so each step is one exact solve.
struct LinearField(Mat<f64>);

impl VectorField<f64> for LinearField {
    fn dim(&self) -> usize {
        self.0.rows()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0.matvec(x).unwrap());
    }

    fn stiff_linear_part(&self) -> Option<&Mat<f64>> {
        Some(&self.0)
    }
}

fn series(rows: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, dim), rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn traj_error_symmetric_and_zero_on_equal(a in series(4, 3), b in series(4, 3)) {
        let (ta, tb) = (traj(a), traj(b));
        let ab = traj_error(&ta, &tb).unwrap();
        prop_assert_eq!(ab, traj_error(&tb, &ta).unwrap());
        prop_assert_eq!(traj_error(&ta, &ta).unwrap(), 0.0);
        prop_assert_eq!(ab == 0.0, ta.states == tb.states);
    }

    #[test]
    fn relative_l2_scale_invariant(a in series(3, 2), b in series(3, 2), s in 0.01..100.0f64) {
        prop_assume!(a.iter().flatten().any(|v| v.abs() > 1e-3));
        let sc = |x: &Vec<Vec<f64>>| x.iter().map(|r| r.iter().map(|v| v * s).collect()).collect::<Vec<Vec<f64>>>();
        let e1 = relative_l2(&a, &b).unwrap();
        let e2 = relative_l2(&sc(&a), &sc(&b)).unwrap();
        prop_assert!((e1 - e2).abs() <= 1e-12 * e1.max(1.0));
    }

    #[test]
    fn median_matches_sorted_middle(mut v in prop::collection::vec(-1e3..1e3f64, 1..40)) {
        let m = median(&v).unwrap();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = v.len() / 2;
        let expect = if v.len() % 2 == 1 { v[k] } else { (v[k - 1] + v[k]) / 2.0 };
        prop_assert_eq!(m, expect);
    }

    #[test]
    fn sos_hamiltonians_are_nonnegative(seed in any::<u64>(), quartic in any::<bool>(), y in prop::collection::vec(-10.0..10.0f64, 4)) {
        let kind = if quartic { SosKind::Quartic } else { SosKind::Quadratic };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = LatentHamiltonian::Sos(SosHamiltonian::<f64>::init(kind, 2, 2.0, &mut rng));
        prop_assert!(h.latent_h(&y).unwrap() >= 0.0);
    }

    #[test]
    fn midpoint_conserves_quadratic_energy(entries in prop::collection::vec(-1.0..1.0f64, 16), y0 in prop::collection::vec(-2.0..2.0f64, 4)) {
        // A = BᵀB + I/2 is symmetric positive definite
        let b = Mat::from_row_major(4, 4, entries).unwrap();
        let a = b.transpose().matmul(&b).unwrap().add(&Mat::identity(4).scale(0.5)).unwrap();
        let model = OpInfModel::from_parts(&a, vec![0.0; 4]).unwrap();
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let cfg = SolverConfig { tol: 1e-14, ..SolverConfig::default() };
        let field = LinearField(model.system_matrix());
        let states = integrate_states(&field, &y0, &times, &cfg).unwrap();
        let h0 = model.hamiltonian(&y0);
        for s in &states {
            let drift = (model.hamiltonian(s) - h0).abs();
            prop_assert!(drift <= 1e-12 * h0, "drift {:e} of {:e}", drift, h0);
        }
    }

    #[test]
    fn quad_decoder_is_exactly_quadratic(v in prop::collection::vec(-1.0..1.0f64, 6), h in prop::collection::vec(-1.0..1.0f64, 12), y in prop::collection::vec(-2.0..2.0f64, 2), t in -3.0..3.0f64) {
        let dec = QuadDecoder { v: Mat::from_row_major(3, 2, v).unwrap(), h: Mat::from_row_major(3, 4, h).unwrap(), d: 2 };
        let zero_h = QuadDecoder { h: Mat::zeros(3, 4), ..dec.clone() };
        let lin = quad_reconstruct(&zero_h, &y).unwrap();
        let full = quad_reconstruct(&dec, &y).unwrap();
        let ty: Vec<f64> = y.iter().map(|u| t * u).collect();
        let scaled = quad_reconstruct(&dec, &ty).unwrap();
        for i in 0..3 {
            let quad = full[i] - lin[i];
            prop_assert!((scaled[i] - (t * lin[i] + t * t * quad)).abs() < 1e-11);
        }
    }

    #[test]
    fn cotangent_lift_is_symplectic(entries in prop::collection::vec(-1.0..1.0f64, 6 * 10), r in 1usize..4) {
        let x = Mat::from_row_major(6, 10, entries).unwrap();
        let basis = pod_basis(&x, r).unwrap();
        let p = basis.projector();
        let lhs = p.transpose().matmul(&symplectic_form::<f64>(6).unwrap()).unwrap().matmul(&p).unwrap();
        let err = lhs.sub(&symplectic_form(r).unwrap()).unwrap().max_abs();
        prop_assert!(err < 1e-12, "error {}", err);
    }

    #[test]
    fn opinf_invariant_to_sample_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let dys: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let a = opinf_fit(&ys, &dys).unwrap();
        let mut order: Vec<usize> = (0..30).collect();
        order.shuffle(&mut rng);
        let ys2: Vec<_> = order.iter().map(|k| ys[*k].clone()).collect();
        let dys2: Vec<_> = order.iter().map(|k| dys[*k].clone()).collect();
        let b = opinf_fit(&ys2, &dys2).unwrap();
        for (u, v) in a.a_upper.iter().chain(&a.b).zip(b.a_upper.iter().chain(&b.b)) {
            prop_assert!((u - v).abs() < 1e-9 * u.abs().max(1.0));
        }
    }

    #[test]
    fn param_vector_roundtrip(a in prop::collection::vec(-1.0..1.0f64, 0..8), b in prop::collection::vec(-1.0..1.0f64, 1..8)) {
        let pv = ParamVector::pack(vec![("a", a.clone()), ("b", b.clone())]).unwrap();
        let parts = pv.unpack();
        prop_assert_eq!(&parts[0].1, &a);
        prop_assert_eq!(&parts[1].1, &b);
    }
}

#[test]
fn opinf_fit_is_locally_optimal() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ys: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let dys: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let best = opinf_fit(&ys, &dys).unwrap();
    let r0 = best.residual(&ys, &dys);
    for _ in 0..100 {
        let mut cand = best.clone();
        for v in cand.a_upper.iter_mut().chain(cand.b.iter_mut()) {
            *v += rng.gen_range(-1e-3..1e-3);
        }
        assert!(cand.residual(&ys, &dys) >= r0 - 1e-12 * r0);
    }
}
