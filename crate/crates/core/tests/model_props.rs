mod common;

use common::{random_orthogonal, sphere_state};
use islab::diagnostics::{diameters, dv_dot, energy_functionals, geometric_factor};
use islab::integrator::{reference_solve, ReferenceOptions};
use islab::model::{eval_accel_second_order, eval_rhs, kernel_weight, project_orthogonal};
use islab::scenario::KernelSpec;
use islab::{CommunicationKernel, MetricPsi, ModelParams, SwarmState, Vec3};
use proptest::prelude::*;

fn kernels(n: usize, seed: u64) -> Vec<CommunicationKernel> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 + ((i * 7 + j * 7 + i * j) % 5) as f64 * 0.1).collect())
        .collect();
    vec![
        CommunicationKernel::uniform(n, 1.0).unwrap(),
        CommunicationKernel::constant_matrix(rows).unwrap(),
        CommunicationKernel::Metric(MetricPsi::cucker_smale(1.5).unwrap()),
        CommunicationKernel::multiplicative((0..n).map(|i| 0.5 + 0.1 * i as f64).collect()).unwrap(),
        KernelSpec::TimeVarying { psi_m: 0.2, psi_max: 1.3, freq: 1.7, seed }.build(n).unwrap(),
    ]
}

fn params() -> impl Strategy<Value = ModelParams> {
    (0.05f64..3.0, 0.05f64..5.0, 0.05f64..4.0).prop_map(|(c, g, k)| ModelParams::new(c, g, k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn torque_is_orthogonal_to_velocity(seed in 0u64..10_000, n in 1usize..9, p in params()) {
        let st = sphere_state(n, seed, 2.0);
        for k in kernels(n, seed) {
            let d = eval_rhs(&p, &k, &st).unwrap();
            for (dv, v) in d.dv.iter().zip(&st.v) {
                prop_assert!(dv.dot(v).abs() <= 1e-14 * (1.0 + dv.norm()));
            }
        }
    }

    #[test]
    fn spin_forms_agree(seed in 0u64..10_000, p in params()) {
        let n = 4;
        let st = sphere_state(n, seed, 1.5);
        for k in kernels(n, seed) {
            let d = eval_rhs(&p, &k, &st).unwrap();
            let w = k.weight_matrix(&st).unwrap();
            for i in 0..n {
                let mut pull = Vec3::zeros();
                for j in 0..n {
                    pull += w[i * n + j] * (st.v[j] - st.v[i]);
                }
                let unexpanded = st.v[i].cross(&(p.k / n as f64 * pull - p.gamma * d.dv[i]));
                prop_assert!((unexpanded - d.ds[i]).norm() <= 1e-12 * (1.0 + d.ds[i].norm()));
            }
        }
    }

    #[test]
    fn rhs_is_rotation_equivariant(seed in 0u64..10_000, flip in any::<bool>(), p in params()) {
        let st = sphere_state(5, seed, 1.0);
        let o = random_orthogonal(seed + 1, flip);
        let det = o.determinant().signum();
        // constant weights; the metric kernel is rotation invariant as well
        for k in kernels(5, seed).into_iter().take(4) {
            let base = eval_rhs(&p, &k, &st).unwrap();
            let moved = eval_rhs(&p, &k, &st.transformed(&o)).unwrap();
            for i in 0..5 {
                prop_assert!((moved.dx[i] - o * base.dx[i]).norm() <= 1e-12);
                prop_assert!((moved.dv[i] - o * base.dv[i]).norm() <= 1e-12 * (1.0 + base.dv[i].norm()));
                prop_assert!((moved.ds[i] - det * (o * base.ds[i])).norm() <= 1e-12 * (1.0 + base.ds[i].norm()));
            }
        }
    }

    #[test]
    fn weights_are_symmetric_and_bounded(seed in 0u64..10_000, t in 0.0f64..20.0) {
        let n = 6;
        let mut st = sphere_state(n, seed, 0.0);
        st.t = t;
        for k in kernels(n, seed) {
            let (lo, hi) = k.bounds();
            for i in 0..n {
                for j in 0..n {
                    let wij = kernel_weight(&k, i, j, &st).unwrap();
                    prop_assert_eq!(wij, kernel_weight(&k, j, i, &st).unwrap());
                    prop_assert!(wij >= lo - 1e-15 && wij <= hi + 1e-15);
                }
            }
        }
    }

    #[test]
    fn projection_identity(seed in 0u64..10_000) {
        let st = sphere_state(2, seed, 0.0);
        let (a, b) = (st.v[0], st.v[1]);
        let g = project_orthogonal(&a, &b);
        prop_assert!(g.dot(&a).abs() <= 1e-15);
        prop_assert!((g.norm_squared() - (1.0 - a.dot(&b).powi(2))).abs() <= 1e-12);
    }

    #[test]
    fn cross_product_identity(seed in 0u64..10_000) {
        let st = sphere_state(2, seed, 0.0);
        let (a, b) = (st.v[0], st.v[1]);
        let d2 = (a - b).norm_squared();
        prop_assert!((a.cross(&b).norm_squared() - (d2 - 0.25 * d2 * d2)).abs() <= 1e-12);
    }

    #[test]
    fn geometric_factor_identity(seed in 0u64..10_000, angle in 0.01f64..1.5, n in 2usize..9) {
        let st = common::cone_state(n, seed, angle, 0.0);
        let a = geometric_factor(&st).unwrap();
        let brute = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| st.v[i].dot(&st.v[j]))
            .fold(f64::INFINITY, f64::min);
        prop_assert_eq!(a, brute);
        let dv = diameters(&st).v;
        prop_assert_eq!(a > 0.0, dv * dv < 2.0);
        if a > 0.0 {
            prop_assert!((a - (1.0 - 0.5 * dv * dv)).abs() <= 1e-12);
        }
    }

    #[test]
    fn diameters_match_pair_scan(seed in 0u64..10_000) {
        let st = sphere_state(6, seed, 1.0);
        let d = diameters(&st);
        let scan = |w: &[Vec3]| {
            let mut m: f64 = 0.0;
            for a in w {
                for b in w {
                    m = m.max((a - b).norm());
                }
            }
            m
        };
        prop_assert_eq!(d.x, scan(&st.x));
        prop_assert_eq!(d.v, scan(&st.v));
        prop_assert_eq!(d.s, scan(&st.s));
        prop_assert!(d.v <= 2.0 + 1e-15);
    }

    #[test]
    fn spin_diameter_bounded_by_mean_energy(seed in 0u64..10_000, n in 1usize..10) {
        let st = sphere_state(n, seed, 3.0);
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let en = energy_functionals(&st, &CommunicationKernel::uniform(n, 1.0).unwrap(), &p).unwrap();
        let brute = st.s.iter().map(|s| s.norm_squared()).sum::<f64>() / n as f64;
        prop_assert!((en.s - brute).abs() <= 1e-14 * (1.0 + brute));
        let ds = diameters(&st).s;
        let nf = n as f64;
        prop_assert!(ds * ds <= 2.0 * nf * en.s * (1.0 + 1e-12));
        let maxs = st.s.iter().map(|s| s.norm_squared()).fold(0.0, f64::max);
        prop_assert!(maxs <= nf * en.s * (1.0 + 1e-12));
    }
}

/// Reference trajectory with sample spacing `h` started from a seeded state.
fn reference(st: &SwarmState, p: &ModelParams, k: &CommunicationKernel, h: f64, t_end: f64) -> islab::Trajectory {
    let opts = ReferenceOptions { sample_interval: h, initial_dt: h / 4.0, tol: 1e-12, ..Default::default() };
    reference_solve(p, k, st, t_end, &opts).unwrap()
}

#[test]
fn second_order_form_matches_finite_difference_of_first_order_system() {
    let n = 4;
    let p = ModelParams::new(0.7, 1.3, 2.0).unwrap();
    let k = CommunicationKernel::uniform(n, 1.0).unwrap();
    let st = sphere_state(n, 21, 1.0);
    let mut gaps = Vec::new();
    for h in [2e-3, 1e-3] {
        let tr = reference(&st, &p, &k, h, 2.0 * h);
        let dv = |s: &SwarmState| eval_rhs(&p, &k, s).unwrap().dv;
        let (a, b) = (dv(&tr.samples[0]), dv(&tr.samples[2]));
        let acc = eval_accel_second_order(&p, &k, &tr.samples[1]).unwrap();
        let gap = (0..n)
            .map(|i| ((b[i] - a[i]) / (2.0 * h) - acc[i]).norm())
            .fold(0.0, f64::max);
        gaps.push(gap);
    }
    assert!(gaps[1] < 1e-4, "{gaps:?}");
    // centred difference: halving the step cuts the gap by about four
    let ratio = gaps[0] / gaps[1];
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}

#[test]
fn diameter_rate_matches_finite_difference() {
    let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
    let k = CommunicationKernel::uniform(5, 1.0).unwrap();
    let st = common::cone_state(5, 8, 0.6, 0.8);
    let mut gaps = Vec::new();
    for h in [2e-3, 1e-3] {
        let tr = reference(&st, &p, &k, h, 2.0 * h);
        let fd = (diameters(&tr.samples[2]).v - diameters(&tr.samples[0]).v) / (2.0 * h);
        gaps.push((fd - dv_dot(&tr.samples[1], &p)).abs());
    }
    assert!(gaps[1] < 1e-5, "{gaps:?}");
    assert!(gaps[0] / gaps[1] > 3.0, "{gaps:?}");
}
