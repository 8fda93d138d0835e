use std::f64::consts::PI;

use proptest::prelude::*;
use rhlab_core::curvature::{self, CurvaturePack};
use rhlab_core::extension::phi_values;
use rhlab_core::gronwall::{self, ComparisonProblem, LambdaFit};
use rhlab_core::localization::CutoffData;
use rhlab_core::monitor::{self, SampleFields};
use rhlab_core::warped::{warped_metric, Profile};
use rhlab_core::{MetricField, PeriodicGrid, ScalarField};

fn warped(grid: PeriodicGrid, amp: f64, mode: u32) -> MetricField {
    let b: Profile = format!("2 cos:{amp}:{mode}").parse().unwrap();
    let profiles: Vec<Profile> = if grid.dim() == 2 {
        vec![Profile::constant(1.0), b]
    } else {
        vec![Profile::constant(1.0), b, format!("1.5 sin:{}:1", 0.5 * amp).parse().unwrap()]
    };
    warped_metric(&grid, &profiles).unwrap()
}

fn nonneg(n: usize, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..hi, n)
}

#[derive(Debug, Clone)]
struct Fields {
    rm: Vec<f64>,
    ric: Vec<f64>,
    grad_u: Vec<f64>,
    hess: Vec<f64>,
    phi: Vec<f64>,
    weight: Vec<f64>,
    zero: Vec<f64>,
}

fn fields() -> impl Strategy<Value = Fields> {
    (4usize..40).prop_flat_map(|n| {
        (nonneg(n, 4.0), nonneg(n, 2.0), nonneg(n, 1.5), nonneg(n, 3.0), nonneg(n, 1.0), prop::collection::vec(1e-3..1.0, n))
            .prop_map(move |(rm, ric, grad_u, hess, phi, weight)| Fields {
                rm,
                ric,
                grad_u,
                hess,
                phi,
                weight,
                zero: vec![0.0; n],
            })
    })
}

fn sample(f: &Fields, p: f64) -> monitor::MonitorSample {
    let sf = SampleFields {
        rm: &f.rm,
        ric: &f.ric,
        grad_rm: &f.zero,
        grad_ric: &f.zero,
        grad_u: &f.grad_u,
        hess_u: &f.hess,
        phi: &f.phi,
        grad_phi: &f.zero,
        distance: &f.zero,
        weight: &f.weight,
    };
    monitor::sample_from_fields(0.0, &sf, p, 1.0, 1.0, &[]).unwrap()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolation_holds_on_random_fields(f in fields(), p in 3.0f64..6.5, c in 0.1f64..10.0) {
        let s = sample(&f, p);
        for k in 1..=p.floor() as usize {
            let chk = monitor::check_interpolation(&s, c, k).unwrap();
            prop_assert!(chk.pass, "k {} lhs {} rhs {}", k, chk.lhs, chk.rhs);
        }
    }

    #[test]
    fn samples_are_nonnegative_and_obey_their_bounds(f in fields(), p in 3.0f64..6.0) {
        let s = sample(&f, p);
        prop_assert!(s.values().iter().all(|v| *v >= 0.0));
        let viol = monitor::sample_bound_violations(&s, sup(&f.ric), sup(&f.grad_u));
        prop_assert!(viol.iter().all(|v| *v <= 1e-12), "{:?}", viol);
    }

    #[test]
    fn phi_is_at_least_one(f in fields(), c_m in 2.0f64..20.0) {
        let gsq: Vec<f64> = f.grad_u.iter().map(|x| x * x).collect();
        prop_assert!(phi_values(&f.rm, &gsq, c_m).iter().all(|v| *v >= 1.0));
    }

    #[test]
    fn flat_metric_has_no_curvature(
        nx in 8usize..24, ny in 8usize..24, lx in 1.0f64..10.0, ly in 1.0f64..10.0, s in 0.2f64..5.0,
    ) {
        let grid = PeriodicGrid::new(2, &[lx, ly], &[nx, ny]).unwrap();
        let g = MetricField::scaled_identity(grid, s);
        let pack = CurvaturePack::compute(&g, &ScalarField::constant(grid, 0.3)).unwrap();
        prop_assert!(pack.christoffel.max_abs() <= 1e-10);
        prop_assert!(pack.norms.rm.max() <= 1e-10);
        prop_assert!(pack.norms.ric.max() <= 1e-10);
    }

    #[test]
    fn riemann_symmetries_and_laplacian_trace(amp in 0.0f64..0.9, mode in 1u32..3, dim in 2usize..4) {
        let res: Vec<usize> = if dim == 2 { vec![48, 8] } else { vec![24, 8, 8] };
        let grid = PeriodicGrid::new(dim, &vec![2.0 * PI; dim], &res).unwrap();
        let g = warped(grid, amp, mode);
        let u = ScalarField::from_fn(grid, |x| (x[0] + 0.3).sin()).unwrap();
        let pack = CurvaturePack::compute(&g, &u).unwrap();
        let r = curvature::riemann_symmetry_residuals(&pack.riemann);
        prop_assert!(r.iter().all(|v| *v <= 1e-8), "{:?}", r);
        let (sym, _) = pack.ricci.symmetry_residual(0, 1);
        prop_assert!(sym <= 1e-12);
        let n = dim as f64;
        for q in 0..grid.len() {
            let lap = pack.norms.laplacian_u.values()[q];
            prop_assert!(lap.abs() <= n.sqrt() * pack.norms.hess_u.values()[q] * (1.0 + 1e-12) + 1e-14);
        }
    }

    #[test]
    fn cutoff_invariants(amp in 0.0f64..0.9, rho in 0.5f64..2.0, k in 0.5f64..3.0, x0 in 0usize..256) {
        let grid = PeriodicGrid::new(2, &[2.0 * PI, 2.0 * PI], &[32, 8]).unwrap();
        let g = warped(grid, amp, 1);
        let cut = match CutoffData::new(&g, x0, rho, k) {
            Ok(c) => c,
            Err(_) => return Ok(()),
        };
        let phi = cut.phi.values();
        let d = cut.distance.values();
        prop_assert!(phi.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(phi[x0], 1.0);
        prop_assert!(d.iter().zip(phi).all(|(d, v)| *d < cut.radius || *v == 0.0));
        prop_assert!(cut.lipschitz_ratio(&g) <= 1.0 + 1e-9, "{}", cut.lipschitz_ratio(&g));
    }

    #[test]
    fn gamma_constants_are_positive_and_monotone(
        k in 0.1f64..3.0, l in 0.0f64..2.0, t in 0.0f64..2.0, p in 3.0f64..6.0, rho in 0.5f64..3.0, c in 0.01f64..2.0,
        bump in 1.0f64..1.5,
    ) {
        let base = monitor::gamma_constants(k, l, t, p, rho, c).unwrap();
        let all = |g: &monitor::GammaConstants| [g.lambda1, g.lambda2, g.gamma1, g.gamma2];
        prop_assert!(all(&base).iter().all(|v| *v > 0.0 || (l == 0.0 && *v >= 0.0)));
        for g in [
            monitor::gamma_constants(k * bump, l, t, p, rho, c).unwrap(),
            monitor::gamma_constants(k, l * bump + 1e-3, t, p, rho, c).unwrap(),
            monitor::gamma_constants(k, l, t * bump + 1e-3, p, rho, c).unwrap(),
            monitor::gamma_constants(k, l, t, p, rho, c * bump).unwrap(),
        ] {
            for (a, b) in all(&base).iter().zip(all(&g)) {
                prop_assert!(b >= a * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn fitted_lambdas_always_verify(
        u in prop::collection::vec(0.0f64..5.0, 5..20), f in prop::collection::vec(0.1f64..3.0, 20),
    ) {
        let n = u.len();
        let times: Vec<f64> = (0..n).map(|i| 0.1 * i as f64).collect();
        let forcing = f[..n].to_vec();
        if let LambdaFit::Feasible { lambda1, lambda2 } = gronwall::fit_lambdas(&times, &u, &forcing).unwrap() {
            let rep = gronwall::verify_comparison(&ComparisonProblem {
                times, u, lambda1, lambda2, forcing,
            }).unwrap();
            prop_assert!(rep.pass());
        }
    }

    #[test]
    fn envelope_grows_with_the_rates(
        u0 in 0.0f64..3.0, f in prop::collection::vec(0.0f64..3.0, 8), l1 in 0.0f64..2.0, l2 in 0.0f64..2.0, d in 0.0f64..1.0,
    ) {
        let times: Vec<f64> = (0..8).map(|i| 0.2 * i as f64).collect();
        let mk = |a: f64, b: f64| ComparisonProblem {
            times: times.clone(), u: vec![u0; 8], lambda1: a, lambda2: b, forcing: f.clone(),
        };
        let base = gronwall::comparison_envelope(&mk(l1, l2)).unwrap();
        let up1 = gronwall::comparison_envelope(&mk(l1 + d, l2)).unwrap();
        let up2 = gronwall::comparison_envelope(&mk(l1, l2 + d)).unwrap();
        for i in 0..8 {
            prop_assert!(up1[i] >= base[i] * (1.0 - 1e-12));
            prop_assert!(up2[i] >= base[i] * (1.0 - 1e-12));
        }
        prop_assert!(base.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)));
    }
}
