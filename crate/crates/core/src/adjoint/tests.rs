use super::*;
use crate::dynamics::{forward_chain, forward_euler_chain, forward_heun_chain, Scheme};
use crate::numerics::random::{gaussian_vector, rng_from_seed, uniform};
use crate::numerics::{relative_error, Vector};
use crate::residual::*;

fn scalar_linear(depth: usize) -> (LinearFamily, WeightSchedule<f64>) {
    (
        make_linear_family(1).unwrap(),
        WeightSchedule::constant(depth, &[1.0]).unwrap(),
    )
}

fn firsts(v: &[Vector<f64>]) -> Vec<f64> {
    v.iter().map(|g| g[0]).collect()
}

#[test]
fn exact_euler_by_hand() {
    let (f, s) = scalar_linear(2);
    let t = forward_euler_chain(&f, &s, &[1.0]).unwrap();
    let g = backprop_exact(&f, &s, &t, &[1.0]).unwrap();
    assert_eq!(firsts(&g.param_grads), vec![0.75, 0.75]);
    assert_eq!(firsts(&g.state_grads), vec![2.25, 1.5, 1.0]);
    assert_eq!(g.input_grad()[0], 2.25);
}

#[test]
fn adjoint_euler_by_hand() {
    let (f, s) = scalar_linear(2);
    let t = forward_euler_chain(&f, &s, &[1.0]).unwrap();
    let exact = backprop_exact(&f, &s, &t, &[1.0]).unwrap();
    let adj = backprop_adjoint_euler(&f, &s, t.output(), &[1.0]).unwrap();
    assert_eq!(firsts(&adj.param_grads), vec![0.421875, 0.5625]);
    let c = compare_gradients(&exact, &adj).unwrap();
    assert_eq!(c.per_layer_abs, vec![0.328125, 0.1875]);
}

#[test]
fn mlp_with_zero_weights() {
    let f = make_mlp_family(3, 4).unwrap();
    let s = WeightSchedule::constant(5, &vec![0.0; f.param_dim()]).unwrap();
    let t = forward_euler_chain(&f, &s, &[0.2, -0.1, 0.4]).unwrap();
    let out = [1.0, 2.0, -3.0];
    let g = backprop_exact(&f, &s, &t, &out).unwrap();
    for pg in &g.param_grads {
        assert!(pg[f.w2_offset()..].iter().all(|&v| v == 0.0));
    }
    assert!(g.state_grads.iter().all(|v| v.as_slice() == out));
}

fn random_schedule(f: &MlpFamily, depth: usize, seed: u64, terminal: bool) -> WeightSchedule<f64> {
    let mut rng = rng_from_seed(seed);
    let s = WeightSchedule::from_fn(depth, f.param_dim(), |_| {
        gaussian_vector(&mut rng, f.param_dim()).scaled(0.7)
    })
    .unwrap();
    if terminal {
        s.with_terminal(gaussian_vector(&mut rng, f.param_dim()).scaled(0.7))
            .unwrap()
    } else {
        s
    }
}

fn fd_relative_error(scheme: Scheme, f: &MlpFamily, s: &WeightSchedule<f64>) -> f64 {
    let x0 = [0.3, -0.6, 0.9];
    let target = [0.1, 0.2, -0.4];
    let t = forward_chain(scheme, f, s, &x0).unwrap();
    let (_, og) = quadratic_output_loss(t.output(), &target);
    let g = backprop_exact_for(f, s, &t, &og).unwrap();
    let fd = finite_difference_schedule_gradient(scheme, f, s, &x0, &target, 1e-6).unwrap();
    relative_error(&g.flat_params(), &fd, 1e-12)
}

#[test]
fn exact_gradients_match_finite_differences_on_a_random_mlp() {
    let f = make_mlp_family(3, 5).unwrap();
    for scheme in [Scheme::Euler, Scheme::Heun] {
        for terminal in [false, true] {
            let s = random_schedule(&f, 8, 17, terminal);
            let err = fd_relative_error(scheme, &f, &s);
            assert!(err <= 1e-6, "{scheme:?} terminal={terminal}: {err}");
        }
    }
}

#[test]
fn heun_single_step_by_hand() {
    let f = make_linear_family(1).unwrap();
    // x_1 = x_0 + ½(θ_0 x_0 + θ_1(x_0 + θ_0 x_0)) at N = 1
    let s = WeightSchedule::<f64>::constant(1, &[0.7])
        .unwrap()
        .with_terminal(Vector::from(vec![0.3]))
        .unwrap();
    let t = forward_heun_chain(&f, &s, &[2.0]).unwrap();
    let g = backprop_exact_heun(&f, &s, &t, &[1.0]).unwrap();
    assert!((g.param_grads[0][0] - 1.3).abs() < 1e-12);
    assert!((g.terminal_grad.as_ref().unwrap()[0] - 1.7).abs() < 1e-12);
    // padded: θ_1 = θ_0 = θ, dx_1/dθ = x_0(1 + θ)
    let s = WeightSchedule::<f64>::constant(1, &[0.7]).unwrap();
    let t = forward_heun_chain(&f, &s, &[2.0]).unwrap();
    let g = backprop_exact_heun(&f, &s, &t, &[1.0]).unwrap();
    assert!((g.param_grads[0][0] - 3.4).abs() < 1e-12);
    assert!(g.terminal_grad.is_none());
}

#[test]
fn heun_state_independent_family_matches_finite_differences() {
    let f = make_offset_family(2).unwrap();
    let mut rng = rng_from_seed(4);
    let s = WeightSchedule::from_fn(6, 2, |_| gaussian_vector(&mut rng, 2))
        .unwrap()
        .with_terminal(Vector::from(vec![0.5, -0.5]))
        .unwrap();
    let x0 = [0.1, 0.2];
    let target = [1.0, 1.0];
    let t = forward_heun_chain(&f, &s, &x0).unwrap();
    let (_, og) = quadratic_output_loss(t.output(), &target);
    let g = backprop_exact_heun(&f, &s, &t, &og).unwrap();
    let fd = finite_difference_schedule_gradient(Scheme::Heun, &f, &s, &x0, &target, 1e-5).unwrap();
    assert!(relative_error(&g.flat_params(), &fd, 1e-12) <= 1e-8);
}

#[test]
fn state_independent_adjoints_are_exact() {
    let f = make_square_family();
    for scheme in [Scheme::Euler, Scheme::Heun] {
        let s = make_alternating_sign_schedule::<f64>(7).unwrap();
        let t = forward_chain(scheme, &f, &s, &[0.5]).unwrap();
        let exact = backprop_exact_for(&f, &s, &t, &[0.8]).unwrap();
        let adj = backprop_adjoint(scheme, &f, &s, t.output(), &[0.8]).unwrap();
        let c = compare_gradients(&exact, &adj).unwrap();
        assert!(c.max_abs < 1e-15, "{scheme:?}");
        assert_eq!(exact.terminal_grad, adj.terminal_grad);
    }
}

#[test]
fn wrong_scheme_is_rejected() {
    let (f, s) = scalar_linear(2);
    let t = forward_heun_chain(&f, &s, &[1.0]).unwrap();
    assert!(backprop_exact(&f, &s, &t, &[1.0]).is_err());
    let t = forward_euler_chain(&f, &s, &[1.0]).unwrap();
    assert!(backprop_exact_heun(&f, &s, &t, &[1.0]).is_err());
    assert!(backprop_exact(&f, &s, &t, &[1.0, 2.0]).is_err());
}

#[test]
fn adjoint_state_grads_use_reconstructed_states() {
    let (f, s) = scalar_linear(2);
    let adj = backprop_adjoint_euler(&f, &s, &[2.25], &[1.0]).unwrap();
    // linear family: state gradients do not depend on the states
    assert_eq!(firsts(&adj.state_grads), vec![2.25, 1.5, 1.0]);
}

#[test]
fn heun_adjoint_beats_euler_on_a_smooth_schedule() {
    let f = make_mlp_family(3, 6).unwrap();
    let base = gaussian_vector::<f64>(&mut rng_from_seed(8), f.param_dim()).scaled(0.5);
    let depth = 64;
    let profile = |s: f64| {
        base.iter()
            .map(|b| b * (1.0 + (3.0 * s).sin() * 0.5))
            .collect::<Vector<f64>>()
    };
    let sched = WeightSchedule::from_fn(depth, f.param_dim(), |n| profile(n as f64 / depth as f64))
        .unwrap()
        .with_terminal(profile(1.0))
        .unwrap();
    let x0 = [0.5, -0.5, 0.25];
    let target = [0.0, 0.0, 1.0];
    let mut rel = Vec::new();
    for scheme in [Scheme::Euler, Scheme::Heun] {
        let t = forward_chain(scheme, &f, &sched, &x0).unwrap();
        let (_, og) = quadratic_output_loss(t.output(), &target);
        let exact = backprop_exact_for(&f, &sched, &t, &og).unwrap();
        let adj = backprop_adjoint(scheme, &f, &sched, t.output(), &og).unwrap();
        rel.push(compare_gradients(&exact, &adj).unwrap().max_rel);
    }
    assert!(rel[1] < rel[0], "heun {} vs euler {}", rel[1], rel[0]);
}

#[test]
fn heun_defect_matches_first_order_prediction() {
    let f = make_mlp_family(2, 4).unwrap();
    let mut rng = rng_from_seed(21);
    let a = gaussian_vector::<f64>(&mut rng, f.param_dim()).scaled(0.5);
    let b = gaussian_vector::<f64>(&mut rng, f.param_dim()).scaled(0.5);
    for depth in [128, 512] {
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let x = [uniform::<f64>(&mut rng, -1.0, 1.0), uniform::<f64>(&mut rng, -1.0, 1.0)];
            let (measured, predicted) = heun_step_defect(&f, &a, &b, &x, depth);
            worst = worst.max((measured - predicted).abs() / predicted);
        }
        assert!(worst <= 0.2, "depth {depth}: {worst}");
    }
}

/// A two-term Heun parameter gradient with shifted indices: the first term
/// pairs with `∇_{x_n}` and the second evaluates at `θ_{n−1}` against
/// `∇_{x_{n−1}}`. It is not the gradient of the forward step; its
/// finite-difference residual is printed next to the chain-rule one.
#[test]
fn shifted_index_two_term_residual() {
    let f = make_mlp_family(3, 5).unwrap();
    let s = random_schedule(&f, 8, 5, false);
    let x0 = [0.3, -0.6, 0.9];
    let target = [0.1, 0.2, -0.4];
    let depth = s.depth();
    let h = 1.0 / depth as f64;
    let t = forward_heun_chain(&f, &s, &x0).unwrap();
    let (_, og) = quadratic_output_loss(t.output(), &target);
    let exact = backprop_exact_heun(&f, &s, &t, &og).unwrap();
    let mids = t.midpoints.as_ref().unwrap();
    let gx = &exact.state_grads;
    let mut literal = Vec::new();
    for n in 0..depth {
        let th = s.layer(n);
        let inner = f.vjp_state(&mids[n], s.extended(n + 1), &gx[n]);
        let mut g1 = f.vjp_params(&t.nodes[n], th, &gx[n]).scaled(h / 2.0);
        g1 = g1.plus_scaled(h * h / 2.0, &f.vjp_params(&t.nodes[n], th, &inner));
        if n > 0 {
            let prev = s.layer(n - 1);
            let pulled = gx[n - 1]
                .clone()
                .plus_scaled(h, &f.vjp_state(&t.nodes[n - 1], prev, &gx[n - 1]));
            g1 = g1.plus_scaled(h / 2.0, &f.vjp_params(&mids[n - 1], prev, &pulled));
        }
        literal.extend_from_slice(&g1);
    }
    let fd = finite_difference_schedule_gradient(Scheme::Heun, &f, &s, &x0, &target, 1e-6).unwrap();
    let mechanical = relative_error(&exact.flat_params(), &fd, 1e-12);
    let shifted = relative_error(&literal, &fd, 1e-12);
    eprintln!("heun gradient fd residual: chain rule {mechanical:.3e}, shifted indices {shifted:.3e}");
    assert!(mechanical <= 1e-6);
    assert!(shifted > 1e-2, "shifted convention unexpectedly matches");
}
