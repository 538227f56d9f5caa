use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stefan_core::coefficients::{eval_drift, eval_sigma, ModelCoefficients};
use stefan_core::frame::reconstruct;
use stefan_core::grid::{boundary_trace, first_derivative, graph_norm, norm_sobolev};
use stefan_core::noise::NoiseIncrement;
use stefan_core::scenarios::{bump_state, gaussian_kernel, noisy_stefan};
use stefan_core::solver::{path_rng, run_trajectory, run_with_increments};
use stefan_core::{Grid1D, NoiseKernel, PhaseProfile, SolverConfig, SystemState};

fn distance(a: &SystemState, b: &SystemState) -> f64 {
    let d1 = a.u1.axpy(-1.0, &b.u1);
    let d2 = a.u2.axpy(-1.0, &b.u2);
    (d1.inner(&d1) + d2.inner(&d2) + (a.xstar - b.xstar).powi(2)).sqrt()
}

#[test]
fn strong_error_under_paired_noise_decreases() {
    let mc = noisy_stefan(1.0, 0.5).build().unwrap();
    let kernel = gaussian_kernel(0.5).unwrap();
    let g = Grid1D::new(79, 4.0).unwrap();
    let s0 = bump_state(g, 0.5, 0.2, 0.0).unwrap();
    let t_end: f64 = 0.1;
    let seeds = 16u64;
    let mut errors = Vec::new();
    for dt in [4e-3f64, 2e-3, 1e-3, 5e-4] {
        let fine_steps = (2.0 * t_end / dt).round() as usize;
        let mut acc = 0.0;
        for seed in 0..seeds {
            let mut rng = path_rng(77, seed);
            let fine: Vec<NoiseIncrement> =
                (0..fine_steps).map(|_| NoiseIncrement::sample(&kernel, dt / 2.0, &mut rng)).collect();
            let coarse: Vec<NoiseIncrement> = fine.chunks(2).map(|p| p[0].merged(&p[1])).collect();
            let cfg_f = SolverConfig { dt: dt / 2.0, t_end, record_stride: 0, ..Default::default() };
            let cfg_c = SolverConfig { dt, t_end, record_stride: 0, ..Default::default() };
            let a = run_with_increments(&cfg_f, &mc, &kernel, &s0, &fine).unwrap();
            let b = run_with_increments(&cfg_c, &mc, &kernel, &s0, &coarse).unwrap();
            acc += distance(&a.final_state, &b.final_state).powi(2);
        }
        errors.push((acc / seeds as f64).sqrt());
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let overall = (errors[0] / errors[3]).log2() / 3.0;
    println!("strong errors {errors:?} orders {orders:?} overall {overall:.3}");
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(overall >= 0.4, "{orders:?}");
}

/// `μ` outputs on a convergent input sequence converge in discrete H¹.
#[test]
fn nemytskii_outputs_converge_with_inputs() {
    let g = Grid1D::new(127, 2.0).unwrap();
    let presets: Vec<(&str, ModelCoefficients)> = vec![
        ("stefan", ModelCoefficients::stefan(1.0).build().unwrap()),
        ("burgers", ModelCoefficients::burgers().build().unwrap()),
        ("reaction", ModelCoefficients::reaction(|y| y - y * y * y).build().unwrap()),
    ];
    let base = |x: f64| x * (2.0 - x) * (1.0 + x).sin();
    let pert = |x: f64| (std::f64::consts::PI * x).sin();
    for (name, mc) in presets {
        let eval_mu = |p: &PhaseProfile| {
            let d = first_derivative(p);
            PhaseProfile::new(
                g,
                g.nodes()
                    .zip(p.values().iter().zip(d.values()))
                    .map(|(x, (&y, &z))| (mc.mu_plus)(x, y, z))
                    .collect(),
            )
            .unwrap()
        };
        let limit = eval_mu(&PhaseProfile::from_fn(g, base));
        let mut gaps = Vec::new();
        for k in 0..5 {
            let eps = 0.5f64.powi(k);
            let u = PhaseProfile::from_fn(g, |x| base(x) + eps * pert(x));
            let out = eval_mu(&u);
            assert!(norm_sobolev(&out, 1).unwrap().is_finite());
            gaps.push(norm_sobolev(&out.axpy(-1.0, &limit), 1).unwrap());
        }
        println!("{name}: {gaps:?}");
        if gaps[0] == 0.0 {
            assert!(gaps.iter().all(|&v| v == 0.0));
        } else {
            assert!(gaps.windows(2).all(|w| w[1] < 0.75 * w[0]), "{name}: {gaps:?}");
        }
    }
}

/// Largest `‖B(u) − B(w)‖_{H¹} / ‖u − w‖_A` over random pairs with `‖·‖_A ≤ N`.
fn empirical_lipschitz(n: usize, level: f64) -> f64 {
    let mc = ModelCoefficients::burgers().rho(|g1, g2| g2 - g1).build().unwrap();
    let gen = mc.generator();
    let g = Grid1D::new(n, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let random_state = |rng: &mut ChaCha8Rng| {
        let a: Vec<f64> = (1..=4).map(|k| rng.random_range(-1.0..1.0) / (k * k * k) as f64).collect();
        let b: Vec<f64> = (1..=4).map(|k| rng.random_range(-1.0..1.0) / (k * k * k) as f64).collect();
        let f = |c: &Vec<f64>| {
            let c = c.clone();
            move |x: f64| {
                c.iter()
                    .enumerate()
                    .map(|(i, v)| v * ((i + 1) as f64 * std::f64::consts::PI * x / 2.0).sin())
                    .sum::<f64>()
            }
        };
        let s = SystemState::new(PhaseProfile::from_fn(g, f(&a)), PhaseProfile::from_fn(g, f(&b)), 0.0).unwrap();
        let scale = level / graph_norm(&s, &gen).max(level);
        SystemState::new(s.u1.map(|v| v * scale), s.u2.map(|v| v * scale), 0.0).unwrap()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let u = random_state(&mut rng);
        let w = random_state(&mut rng);
        assert!(graph_norm(&u, &gen) <= level * (1.0 + 1e-12));
        let bu = eval_drift(&mc, &u, &boundary_trace(&u)).unwrap();
        let bw = eval_drift(&mc, &w, &boundary_trace(&w)).unwrap();
        let d1 = norm_sobolev(&bu.b1.axpy(-1.0, &bw.b1), 1).unwrap();
        let d2 = norm_sobolev(&bu.b2.axpy(-1.0, &bw.b2), 1).unwrap();
        let num = (d1 * d1 + d2 * d2 + (bu.front - bw.front).powi(2)).sqrt();
        let du = SystemState::new(u.u1.axpy(-1.0, &w.u1), u.u2.axpy(-1.0, &w.u2), 0.0).unwrap();
        worst = worst.max(num / graph_norm(&du, &gen));
    }
    worst
}

#[test]
fn assembled_drift_is_locally_lipschitz_uniformly_in_h() {
    let coarse = empirical_lipschitz(63, 5.0);
    let fine = empirical_lipschitz(127, 5.0);
    println!("empirical Lipschitz constants {coarse} {fine}");
    assert!(coarse.is_finite() && fine.is_finite());
    assert!(fine / coarse <= 2.0 && coarse / fine <= 2.0);
}

#[test]
fn deterministic_heat_energy_never_increases() {
    let mc = ModelCoefficients::heat().build().unwrap();
    let g = Grid1D::new(99, 3.0).unwrap();
    let s0 = bump_state(g, 2.0, 1.0, 0.0).unwrap();
    let cfg = SolverConfig { dt: 1e-3, t_end: 0.5, ..Default::default() };
    let traj = run_trajectory(&cfg, &mc, &NoiseKernel::zero(), &s0).unwrap();
    assert!(traj.l2_norms.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn convolution_kernel_covariance_is_shift_invariant() {
    let k = gaussian_kernel(0.4).unwrap();
    let base = k.covariance(0.0, 0.7);
    for s in [-2.0, -0.3, 1.1, 2.5] {
        assert!((k.covariance(s, s + 0.7) - base).abs() < 1e-8);
        assert!((k.covariance(s + 0.7, s) - base).abs() < 1e-8);
    }
}

#[test]
fn moving_frame_reconstruction_keeps_front_dirichlet_and_speed() {
    let mc = noisy_stefan(1.0, 0.3).build().unwrap();
    let kernel = gaussian_kernel(0.5).unwrap();
    let g = Grid1D::new(159, 4.0).unwrap();
    let s0 = bump_state(g, 0.5, 0.2, 0.0).unwrap();
    let cfg = SolverConfig { dt: 1e-3, t_end: 0.2, seed: 5, record_stride: 10, ..Default::default() };
    let traj = run_trajectory(&cfg, &mc, &kernel, &s0).unwrap();
    let mf = reconstruct(&traj, 0.25).unwrap();
    assert_eq!(mf.profiles.len(), traj.states.len());
    let max_trace = traj.traces.iter().map(|t| t.g1.abs().max(t.g2.abs())).fold(0.0, f64::max);
    let bound = 0.55 * g.h() * max_trace;
    assert!(mf.front_dirichlet_defect() <= bound, "{} > {bound}", mf.front_dirichlet_defect());
    for i in 0..traj.steps() {
        let speed = (traj.fronts[i + 1] - traj.fronts[i]) / traj.dt;
        assert!((speed - traj.rhos[i]).abs() <= 1e-9 * (1.0 + speed.abs()));
    }
    let (s1, _) = eval_sigma(&mc, &traj.final_state).unwrap();
    assert!(s1.is_finite());
}
