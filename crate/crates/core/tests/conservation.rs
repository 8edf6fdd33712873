use hamkoop::hamsys::nls_initial_state;
use hamkoop::integrate::{integrate_states, linspace};
use hamkoop::{CanonicalSystem, SolverConfig, SystemName};

#[test]
fn nls_energy_stays_bounded_at_coarse_step() {
    let sys = CanonicalSystem::<f64>::by_name(SystemName::Nls, 256).unwrap();
    let x0 = nls_initial_state(sys.params().grid.as_ref().unwrap());
    let times = linspace(0.0, 160.0, 3201);
    let states = integrate_states(&sys, &x0, &times, &SolverConfig::default()).unwrap();
    let h0 = sys.eval_hamiltonian(&x0).unwrap();
    let drift: Vec<f64> = states
        .iter()
        .map(|s| (sys.eval_hamiltonian(s).unwrap() - h0).abs() / h0.abs())
        .collect();
    let quarter = drift.len() / 4;
    let early = drift[..quarter].iter().cloned().fold(0.0, f64::max);
    let late = drift[3 * quarter..].iter().cloned().fold(0.0, f64::max);
    // quartic H: the midpoint rule keeps the error bounded, not at roundoff
    assert!(early < 1e-2 && late < 1e-2, "drift {early:e} / {late:e}");
    assert!(late < 1.5 * early, "secular growth: {early:e} -> {late:e}");
}
