#![allow(clippy::excessive_precision)]

mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rft_inverse::forward::{forward_sensor, ForwardOptions};
use rft_inverse::stress_field::uniform_axis;
use rft_inverse::{
    assemble_dataset, forward_force, make_toe, make_trajectory, segment_states, GridAxes,
    GridStressMap, ToeGeometry, Trajectory,
};

#[test]
fn c_toe_segments_on_the_arc() {
    let toe = make_toe(&ToeGeometry::c_toe(0.02, 0.008, 4)).unwrap();
    // centers at phi = -3pi/8, -pi/8, pi/8, 3pi/8 from straight down (30-digit reference)
    let expected = [
        [-0.018477590650225735, 0.012346331352698205],
        [-0.0076536686473017955, 0.0015224093497742649],
        [0.0076536686473017955, 0.0015224093497742649],
        [0.018477590650225735, 0.012346331352698205],
    ];
    for (s, e) in toe.segments.iter().zip(expected) {
        assert_relative_eq!(s.center[0], e[0], max_relative = 1e-14);
        assert_relative_eq!(s.center[1], e[1], max_relative = 1e-14);
        assert_relative_eq!(s.area, 1.2566370614359173e-4, max_relative = 1e-14);
    }
    assert_relative_eq!(toe.total_area(), 0.02 * PI * 0.008, max_relative = 1e-14);
}

fn wrap_beta(b: f64) -> f64 {
    b - PI * ((b + FRAC_PI_2) / PI).floor()
}

/// Independent bilinear lookup on a uniform grid.
fn lookup(v: &DMatrix<f64>, beta: f64, gamma: f64) -> f64 {
    let cell = |x: f64, n: usize| {
        let t = ((x + FRAC_PI_2) / PI * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        (i, t - i as f64)
    };
    let (i, u) = cell(wrap_beta(beta), v.nrows());
    let (j, w) = cell(gamma, v.ncols());
    (1.0 - u) * (1.0 - w) * v[(i, j)]
        + u * (1.0 - w) * v[(i + 1, j)]
        + (1.0 - u) * w * v[(i, j + 1)]
        + u * w * v[(i + 1, j + 1)]
}

fn toe_strategy() -> impl Strategy<Value = ToeGeometry> {
    (
        any::<bool>(),
        0.01f64..0.05,
        0.005f64..0.02,
        1usize..30,
        -0.5f64..0.5,
    )
        .prop_map(|(c, r, w, m, att)| {
            let mut t = if c {
                ToeGeometry::c_toe(r, w, m)
            } else {
                ToeGeometry::i_toe(r, w, m)
            };
            t.attitude = att;
            t
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn force_is_a_weighted_sum_of_lookups(
        toe in toe_strategy(),
        depth in 0.02f64..0.08,
        shear in 0.05f64..0.4,
        nb in 3usize..20,
        ng in 3usize..20,
        seed in any::<u64>(),
        leading in any::<bool>(),
    ) {
        let mut rng = common::rng(seed);
        use rand::Rng;
        let vz = DMatrix::from_fn(nb, ng, |_, _| rng.random_range(-1e6..1e6));
        let vx = DMatrix::from_fn(nb, ng, |_, _| rng.random_range(-1e6..1e6));
        let map = GridStressMap::new(uniform_axis(nb), uniform_axis(ng), vz.clone(), vx.clone()).unwrap();
        let traj = make_trajectory(&Trajectory::rectangle(depth, shear, depth, 40)).unwrap();
        let series = segment_states(&make_toe(&toe).unwrap(), &traj, 0.0);
        let opts = ForwardOptions { leading_edge_only: leading };
        for (i, step) in series.steps.iter().enumerate() {
            let f = forward_force(step, &map, opts, i);
            let (mut ez, mut ex, mut scale) = (0.0, 0.0, 0.0);
            for s in step {
                if !(s.depth > 0.0 && s.moving && (s.leading || !leading)) {
                    continue;
                }
                let w = s.depth * s.area;
                let (z, x) = (w * lookup(&vz, s.beta, s.gamma), w * lookup(&vx, s.beta, s.gamma));
                ez += z;
                ex += x;
                scale += z.abs() + x.abs();
            }
            prop_assert!((f.f_z - ez).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
            prop_assert!((f.f_x - ex).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn bilinear_reproduces_bilinear_functions(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, d in -5.0f64..5.0,
                                              beta in -1.5f64..1.5, gamma in -1.5f64..1.5) {
        // bilinear within each cell is exact for a + b beta + c gamma + d beta gamma
        let f = |x: f64, y: f64| a + b * x + c * y + d * x * y;
        let axes = GridAxes::uniform(13, 9);
        let map = GridStressMap::from_field(&axes, &|x, y| (f(x, y), -f(x, y))).unwrap();
        let (z, _, _) = map.eval_checked(beta, gamma);
        prop_assert!((z - f(beta, gamma)).abs() < 1e-12);
    }
}

#[test]
fn dataset_predictions_equal_forward_forces() {
    let series = segment_states(
        &make_toe(&ToeGeometry::c_toe(0.02, 0.008, 10)).unwrap(),
        &make_trajectory(&Trajectory::rectangle(0.05, 0.4, 0.05, 50)).unwrap(),
        0.0,
    );
    let map = GridStressMap::from_field(&GridAxes::uniform(19, 19), &|b: f64, g: f64| {
        (
            1e6 * (1.0 + 0.5 * (2.0 * b).cos() + g.sin()),
            1e6 * (0.3 * (2.0 * b).sin() + g.sin()),
        )
    })
    .unwrap();
    let opts = ForwardOptions::default();
    let obs: Vec<Vec<f64>> = series
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let f = forward_force(s, &map, opts, i);
            vec![f.f_z, f.f_x]
        })
        .collect();
    let ds = assemble_dataset(&series, &obs, 0.0, None, opts).unwrap();
    let predicted = ds.predict(&map);
    let flat: Vec<f64> = ds
        .steps
        .iter()
        .flat_map(|s| s.observation.clone())
        .collect();
    for (p, o) in predicted.iter().zip(&flat) {
        assert_relative_eq!(p, o, max_relative = 1e-12, epsilon = 1e-9);
    }

    // torque channels are the per-segment sensor projections of the same stresses
    let g = DMatrix::from_row_slice(2, 2, &[0.2, -0.1, 0.05, 0.3]);
    let sensors: Vec<Vec<DMatrix<f64>>> = series
        .steps
        .iter()
        .map(|s| vec![g.clone(); s.len()])
        .collect();
    let tau: Vec<Vec<f64>> = series
        .steps
        .iter()
        .zip(&sensors)
        .map(|(s, gs)| forward_sensor(s, gs, &map, opts))
        .collect();
    for (t, f) in tau.iter().zip(&obs) {
        assert_relative_eq!(
            t[0],
            g[(0, 0)] * f[0] + g[(1, 0)] * f[1],
            max_relative = 1e-12,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            t[1],
            g[(0, 1)] * f[0] + g[(1, 1)] * f[1],
            max_relative = 1e-12,
            epsilon = 1e-9
        );
    }
    let tds = assemble_dataset(&series, &tau, 0.0, Some(&sensors), opts).unwrap();
    let recorded: Vec<f64> = tds
        .steps
        .iter()
        .flat_map(|s| s.observation.clone())
        .collect();
    for (p, o) in tds.predict(&map).iter().zip(&recorded) {
        assert_relative_eq!(p, o, max_relative = 1e-12, epsilon = 1e-9);
    }
}
