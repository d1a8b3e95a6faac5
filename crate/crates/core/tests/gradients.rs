mod common;

use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;
use rft_inverse::inverse::{log_marginal_likelihood_gradient, NoiseModel, Objective, ParamLayout};
use rft_inverse::{fivebar_jacobian, force_to_torque, Exec, FiveBarParams, RftError};

fn central_difference(f: impl Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    (0..p.len())
        .map(|i| {
            let (mut up, mut dn) = (p.to_vec(), p.to_vec());
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn likelihood_gradient_matches_finite_differences(
        seed in any::<u64>(),
        t in 2usize..10,
        torque in any::<bool>(),
        per_channel in any::<bool>(),
        shared in any::<bool>(),
    ) {
        let mut rng = common::rng(seed);
        let ds = common::dataset(&mut rng, t, 3, torque);
        let mut hyper = common::hyper(&mut rng);
        if per_channel {
            hyper.noise = NoiseModel::PerChannel(vec![0.05, 0.2]);
        }
        if shared {
            hyper.kernel_x = hyper.kernel_z;
        }
        let (value, grad) = log_marginal_likelihood_gradient(&ds, &hyper, shared).unwrap();
        let layout = ParamLayout::for_hyper(&hyper, shared);
        let obj = Objective::new(&ds, layout, Exec::Sequential).unwrap();
        let p = layout.pack(&hyper);
        prop_assert!((obj.value(&p).unwrap() - value).abs() <= 1e-10 * (1.0 + value.abs()));
        let fd = central_difference(|q| obj.value(q).unwrap(), &p, 1e-5);
        prop_assert!(max_rel_error(&grad, &fd) <= 1e-5, "grad {grad:?} fd {fd:?}");
    }

    #[test]
    fn objective_is_execution_independent(seed in any::<u64>(), t in 2usize..10) {
        let mut rng = common::rng(seed);
        let ds = common::dataset(&mut rng, t, 3, false);
        let hyper = common::hyper(&mut rng);
        let layout = ParamLayout::for_hyper(&hyper, false);
        let p = layout.pack(&hyper);
        let a = Objective::new(&ds, layout, Exec::Sequential).unwrap().value_and_gradient(&p).unwrap();
        let b = Objective::new(&ds, layout, Exec::default()).unwrap().value_and_gradient(&p).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fivebar_jacobian_matches_finite_differences(
        l1 in 0.08f64..0.2,
        dl in 0.02f64..0.2,
        l3 in 0.0f64..0.05,
        theta in -0.8f64..0.8,
        gamma in 0.15f64..1.4,
    ) {
        let p = FiveBarParams { l1, l2: l1 + dl, l3, ..FiveBarParams::default() };
        let (p1, p2) = (theta - gamma, theta + gamma);
        let j = fivebar_jacobian(p1, p2, &p).unwrap();
        let fk = |q: &[f64]| p.forward_kinematics(q[0], q[1]).unwrap();
        let h = 1e-6;
        for row in 0..2 {
            let fd = central_difference(|q| fk(q)[row], &[p1, p2], h);
            let scale = j.abs().max();
            prop_assert!((j[(row, 0)] - fd[0]).abs() <= 1e-6 * scale);
            prop_assert!((j[(row, 1)] - fd[1]).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn inverse_kinematics_inverts_forward(theta in -0.8f64..0.8, gamma in 0.1f64..1.4) {
        let p = FiveBarParams::default();
        let xy = p.forward_kinematics(theta - gamma, theta + gamma).unwrap();
        let (a, b) = p.inverse_kinematics(xy[0], xy[1]).unwrap();
        prop_assert!((a - (theta - gamma)).abs() < 1e-9);
        prop_assert!((b - (theta + gamma)).abs() < 1e-9);
    }

    #[test]
    fn virtual_work_balances(theta in -0.8f64..0.8, gamma in 0.15f64..1.4, fx in -5.0f64..5.0, fy in -5.0f64..5.0) {
        // tau . dphi = F . dx for any small joint motion
        let p = FiveBarParams::default();
        let j = fivebar_jacobian(theta - gamma, theta + gamma, &p).unwrap();
        let f = Vector2::new(fx, fy);
        let tau = force_to_torque(&j, &f);
        let dphi = Vector2::new(0.3, -0.7);
        prop_assert!((tau.dot(&dphi) - f.dot(&(j * dphi))).abs() < 1e-12 * (1.0 + f.norm()));
    }
}

#[test]
fn coincident_motor_angles_are_singular() {
    let p = FiveBarParams::default();
    for phi in [-0.5, 0.0, 0.4, 1.0] {
        assert!(matches!(
            fivebar_jacobian(phi, phi, &p),
            Err(RftError::SingularJacobian { .. })
        ));
    }
    let j: Matrix2<f64> = p.jacobian_unchecked(0.2, 0.2).unwrap();
    assert!(j.determinant().abs() < 1e-15);
}
