//! Named experiment presets and their data-generation protocols.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamsys::{
    nls_initial_state, sample_initial_conditions, wave_initial_state, CanonicalSystem,
    InitialConditionSpec, SystemError, SystemName,
};
use crate::integrate::{integrate_trajectory, linspace, IntegrateError, SolverConfig, Trajectory};
use crate::scalar::Scalar;
use crate::training::TrainingConfig;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("trajectory {index}: {source}")]
    Integrate {
        index: usize,
        #[source]
        source: IntegrateError,
    },
    #[error("invalid protocol: {0}")]
    BadProtocol(String),
}

/// `points` equidistant samples on `[0, t_end]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_end: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn times<T: Scalar>(&self) -> Vec<T> {
        linspace(T::zero(), T::lit(self.t_end), self.points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Protocol {
    /// Random initial conditions from an energy-capped box.
    Sampled {
        bounds: Vec<(f64, f64)>,
        energy_cap: Option<f64>,
        train_count: usize,
        train_grid: TimeGrid,
        test_count: usize,
        test_grid: TimeGrid,
    },
    /// One long run from `sech(ζ/2)`, split in time.
    SingleRun {
        grid_points: usize,
        grid: TimeGrid,
        /// Number of leading samples used for training.
        train_points: usize,
        pod_rank: usize,
    },
    /// One run per `sech(μζ)` initial profile.
    Parametric {
        grid_points: usize,
        mus: Vec<f64>,
        test_mus: Vec<f64>,
        grid: TimeGrid,
        pod_rank: usize,
    },
}

/// Architecture and optimizer values for one benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub system: SystemName,
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    /// Latent coordinate dimension `2m`.
    pub latent_dim: usize,
    pub batch_size: usize,
    pub wd_a: f64,
    pub wd_h: f64,
    pub protocol: Protocol,
}

fn box2(lim: f64) -> Vec<(f64, f64)> {
    vec![(-lim, lim); 2]
}

impl Preset {
    pub fn by_name(name: SystemName) -> Self {
        let sampled = |lim, cap, train_pts, train_end, test_pts| Protocol::Sampled {
            bounds: box2(lim),
            energy_cap: Some(cap),
            train_count: 20,
            train_grid: TimeGrid {
                t_end: train_end,
                points: train_pts,
            },
            test_count: 25,
            test_grid: TimeGrid {
                t_end: 50.0,
                points: test_pts,
            },
        };
        match name {
            SystemName::Pendulum => Self {
                system: name,
                hidden: vec![8, 8, 8],
                latent_dim: 2,
                batch_size: 32,
                wd_a: 1e-5,
                wd_h: 1e-5,
                protocol: sampled(3.0, 2.0, 25, 20.0, 2500),
            },
            SystemName::Oscillator => Self {
                system: name,
                hidden: vec![8, 8, 8],
                latent_dim: 2,
                batch_size: 32,
                wd_a: 1e-5,
                wd_h: 1e-5,
                protocol: sampled(2.0, 1.0, 50, 4.0, 5000),
            },
            SystemName::LotkaVolterra => Self {
                system: name,
                hidden: vec![8, 8, 8],
                latent_dim: 4,
                batch_size: 64,
                wd_a: 1e-5,
                wd_h: 1e-4,
                protocol: sampled(1.5, 4.0, 100, 10.0, 10000),
            },
            SystemName::Nls => Self {
                system: name,
                hidden: vec![12, 12, 12],
                latent_dim: 4,
                batch_size: 32,
                wd_a: 1e-5,
                wd_h: 1e-3,
                protocol: Protocol::SingleRun {
                    grid_points: 256,
                    grid: TimeGrid {
                        t_end: 160.0,
                        points: 3200,
                    },
                    train_points: 1600,
                    pod_rank: 2,
                },
            },
            SystemName::Wave => Self {
                system: name,
                hidden: vec![12, 12, 12],
                latent_dim: 6,
                batch_size: 32,
                wd_a: 1e-5,
                wd_h: 1e-5,
                protocol: Protocol::Parametric {
                    grid_points: 256,
                    mus: (5..=14).map(|k| k as f64 / 10.0).collect(),
                    test_mus: vec![0.7, 1.0, 1.2],
                    grid: TimeGrid {
                        t_end: 25.0,
                        points: 501,
                    },
                    pod_rank: 3,
                },
            },
        }
    }

    /// Training hyperparameters with this preset's batch size and weight decay.
    pub fn training_config<T: Scalar>(&self, seed: u64) -> TrainingConfig<T> {
        TrainingConfig {
            batch_size: self.batch_size,
            wd_a: T::lit(self.wd_a),
            wd_h: T::lit(self.wd_h),
            seed,
            ..TrainingConfig::default()
        }
    }

    pub fn pod_rank(&self) -> Option<usize> {
        match &self.protocol {
            Protocol::Sampled { .. } => None,
            Protocol::SingleRun { pod_rank, .. } | Protocol::Parametric { pod_rank, .. } => {
                Some(*pod_rank)
            }
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: &str| Err(DataError::BadProtocol(msg.into()));
        if self.hidden.contains(&0) || self.latent_dim == 0 || !self.latent_dim.is_multiple_of(2)
        {
            return bad("hidden widths must be positive and latent_dim a positive even number");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.wd_a >= 0.0 && self.wd_h >= 0.0) {
            return bad("weight decay must be non-negative");
        }
        let grid_ok = |g: &TimeGrid| g.points >= 1 && g.t_end > 0.0 && g.t_end.is_finite();
        match &self.protocol {
            Protocol::Sampled {
                bounds,
                train_count,
                train_grid,
                test_grid,
                ..
            } => {
                if bounds.len() != 2 * self.system_n() {
                    return bad("bounds must cover every state coordinate");
                }
                if *train_count == 0 || !grid_ok(train_grid) || !grid_ok(test_grid) {
                    return bad("train_count and grids must be non-empty");
                }
            }
            Protocol::SingleRun {
                grid,
                train_points,
                pod_rank,
                ..
            } => {
                if !grid_ok(grid) || *train_points == 0 || *train_points > grid.points {
                    return bad("train_points must lie within the time grid");
                }
                if *pod_rank == 0 {
                    return bad("pod_rank must be at least 1");
                }
            }
            Protocol::Parametric {
                mus,
                test_mus,
                grid,
                pod_rank,
                ..
            } => {
                if !grid_ok(grid) || *pod_rank == 0 {
                    return bad("grid must be non-empty and pod_rank at least 1");
                }
                if mus.iter().all(|mu| test_mus.iter().any(|t| (t - mu).abs() < 1e-12)) {
                    return bad("every μ is held out for testing");
                }
            }
        }
        Ok(())
    }

    fn system_n(&self) -> usize {
        match &self.protocol {
            Protocol::Sampled { .. } => 1,
            Protocol::SingleRun { grid_points, .. } | Protocol::Parametric { grid_points, .. } => {
                *grid_points
            }
        }
    }

    /// Every preset, in registry order.
    pub fn all() -> Vec<Self> {
        SystemName::ALL.iter().map(|n| Self::by_name(*n)).collect()
    }
}

/// Generated train/test trajectories.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub system: SystemName,
    pub n: usize,
    pub seed: u64,
    pub train: Vec<Trajectory<T>>,
    pub test: Vec<Trajectory<T>>,
}

/// Seed of the test-IC stream, decorrelated from the training stream.
fn test_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

fn run<T: Scalar>(
    sys: &CanonicalSystem<T>,
    x0: &[T],
    times: &[T],
    index: usize,
    id: String,
) -> Result<Trajectory<T>, DataError> {
    integrate_trajectory(sys, x0, times, &SolverConfig::fine())
        .map(|t| t.with_id(id))
        .map_err(|source| DataError::Integrate { index, source })
}

/// Integrates the preset's protocol. Deterministic for a fixed seed.
pub fn generate_dataset<T: Scalar>(preset: &Preset, seed: u64) -> Result<Dataset<T>, DataError> {
    preset.validate()?;
    match &preset.protocol {
        Protocol::Sampled {
            bounds,
            energy_cap,
            train_count,
            train_grid,
            test_count,
            test_grid,
        } => {
            let sys = CanonicalSystem::<T>::by_name(preset.system, 0)?;
            let spec = |count, seed| InitialConditionSpec {
                bounds: bounds.iter().map(|(a, b)| (T::lit(*a), T::lit(*b))).collect(),
                energy_cap: energy_cap.map(T::lit),
                count,
                seed,
            };
            let train_ics = sample_initial_conditions(&sys, &spec(*train_count, seed))?;
            let test_ics = if *test_count > 0 {
                sample_initial_conditions(&sys, &spec(*test_count, test_seed(seed)))?
            } else {
                Vec::new()
            };
            let tr = train_grid.times::<T>();
            let te = test_grid.times::<T>();
            let train = train_ics
                .iter()
                .enumerate()
                .map(|(i, x0)| run(&sys, x0, &tr, i, format!("train-{i}")))
                .collect::<Result<_, _>>()?;
            let test = test_ics
                .iter()
                .enumerate()
                .map(|(i, x0)| run(&sys, x0, &te, i, format!("test-{i}")))
                .collect::<Result<_, _>>()?;
            Ok(Dataset {
                system: preset.system,
                n: sys.n(),
                seed,
                train,
                test,
            })
        }
        Protocol::SingleRun {
            grid_points,
            grid,
            train_points,
            ..
        } => {
            let sys = CanonicalSystem::<T>::by_name(preset.system, *grid_points)?;
            let pgrid = sys.params().grid.clone().expect("field system has a grid");
            let x0 = nls_initial_state(&pgrid);
            let full = run(&sys, &x0, &grid.times::<T>(), 0, "full".into())?;
            let (train, test) = split_in_time(full, *train_points)?;
            Ok(Dataset {
                system: preset.system,
                n: sys.n(),
                seed,
                train: vec![train],
                test: test.into_iter().collect(),
            })
        }
        Protocol::Parametric {
            grid_points,
            mus,
            test_mus,
            grid,
            ..
        } => {
            let sys = CanonicalSystem::<T>::by_name(preset.system, *grid_points)?;
            let pgrid = sys.params().grid.clone().expect("field system has a grid");
            let times = grid.times::<T>();
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (i, mu) in mus.iter().enumerate() {
                let x0 = wave_initial_state(&pgrid, T::lit(*mu));
                let traj = run(&sys, &x0, &times, i, format!("mu-{mu:.2}"))?;
                if test_mus.iter().any(|t| (t - mu).abs() < 1e-12) {
                    test.push(traj);
                } else {
                    train.push(traj);
                }
            }
            Ok(Dataset {
                system: preset.system,
                n: sys.n(),
                seed,
                train,
                test,
            })
        }
    }
}

/// Splits one trajectory into its first `k` samples and the rest.
fn split_in_time<T: Scalar>(
    traj: Trajectory<T>,
    k: usize,
) -> Result<(Trajectory<T>, Option<Trajectory<T>>), DataError> {
    let wrap = |source| DataError::Integrate { index: 0, source };
    let Trajectory {
        times,
        states,
        derivs,
        ..
    } = traj;
    let (d_head, d_tail) = match derivs {
        Some(mut d) => {
            let tail = d.split_off(k);
            (Some(d), Some(tail))
        }
        None => (None, None),
    };
    let mut times = times;
    let mut states = states;
    let t_tail = times.split_off(k);
    let s_tail = states.split_off(k);
    let head = Trajectory::new(times, states, d_head, "train").map_err(wrap)?;
    let tail = if t_tail.is_empty() {
        None
    } else {
        Some(Trajectory::new(t_tail, s_tail, d_tail, "test").map_err(wrap)?)
    };
    Ok((head, tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_values() {
        let p = Preset::by_name(SystemName::LotkaVolterra);
        assert_eq!(p.latent_dim, 4);
        assert_eq!(p.batch_size, 64);
        assert_eq!((p.wd_a, p.wd_h), (1e-5, 1e-4));
        let w = Preset::by_name(SystemName::Wave);
        match &w.protocol {
            Protocol::Parametric { mus, .. } => assert_eq!(mus.len(), 10),
            _ => panic!("wave is parametric"),
        }
        for p in Preset::all() {
            p.validate().unwrap();
        }
    }

    #[test]
    fn pendulum_dataset_shape() {
        let d = generate_dataset::<f64>(&Preset::by_name(SystemName::Pendulum), 0).unwrap();
        assert_eq!(d.train.len(), 20);
        assert!(d.train.iter().all(|t| t.len() == 25));
        assert_eq!(d.test.len(), 25);
        assert!(d.test.iter().all(|t| t.len() == 2500));
        let sys = CanonicalSystem::<f64>::pendulum();
        for t in d.train.iter().chain(&d.test) {
            assert!(sys.eval_hamiltonian(&t.states[0]).unwrap() <= 2.0);
        }
    }

    #[test]
    fn split_keeps_every_sample() {
        let t = Trajectory::new(
            vec![0.0, 1.0, 2.0],
            vec![vec![0.0], vec![1.0], vec![2.0]],
            Some(vec![vec![1.0]; 3]),
            "x",
        )
        .unwrap();
        let (a, b) = split_in_time(t, 2).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(b.unwrap().times, vec![2.0]);
    }
}
