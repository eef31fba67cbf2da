use fksim::feynman_kac::{deterministic_kernel, PotentialSpec, Resolution};
use fksim::noise::{uniform_grid, xi_covariance, CovarianceModel, GridNoisePath, NoiseSampler};
use fksim::paths::{local_time, sample_bridge, transition_kernel, Boundary, DomainSpec};
use fksim::quad::gauss_legendre_unit;
use fksim::rng::substream;
use fksim::spectral::{discretize_form, eigen_solve, FormNoise};
use fksim::stochint::{integrate_step, StepFunction};
use proptest::prelude::*;

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Dirichlet), (-1.0..3.0f64).prop_map(Boundary::Robin)]
}

fn domain() -> impl Strategy<Value = DomainSpec> {
    prop_oneof![
        Just(DomainSpec::FullLine),
        boundary().prop_map(|bc0| DomainSpec::HalfLine { bc0 }),
        (0.5..3.0f64, boundary(), boundary()).prop_map(|(b, bc0, bcb)| DomainSpec::Interval { b, bc0, bcb }),
    ]
}

/// A point strictly inside the domain, from a unit parameter.
fn interior(d: &DomainSpec, u: f64) -> f64 {
    match d {
        DomainSpec::FullLine => 4.0 * u - 2.0,
        DomainSpec::HalfLine { .. } => 0.05 + 2.0 * u,
        DomainSpec::Interval { b, .. } => b * (0.05 + 0.9 * u),
    }
}

fn covariance() -> impl Strategy<Value = CovarianceModel> {
    prop_oneof![
        (0.2..3.0f64).prop_map(CovarianceModel::white),
        (0.2..3.0f64, 0.05..0.95f64).prop_map(|(v, h)| CovarianceModel::fractional(v, h)),
    ]
}

fn noise_path(seed: u64) -> GridNoisePath {
    let grid = uniform_grid(-2.0, 2.0, 1.0 / 64.0).unwrap();
    NoiseSampler::new(&CovarianceModel::white(1.0), &grid)
        .unwrap()
        .sample(&mut substream(seed, &[]))
        .unwrap()
}

fn step() -> impl Strategy<Value = StepFunction> {
    (1usize..6)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(-1.9..1.9f64, k + 1),
                prop::collection::vec(-2.0..2.0f64, k),
            )
        })
        .prop_filter_map("distinct breakpoints", |(mut b, c)| {
            b.sort_by(f64::total_cmp);
            b.dedup();
            StepFunction::new(b, c).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric_and_nonnegative(d in domain(), t in 0.05..2.0f64, u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let (x, y) = (interior(&d, u), interior(&d, v));
        let kxy = transition_kernel(&d, t, x, y).unwrap();
        let kyx = transition_kernel(&d, t, y, x).unwrap();
        prop_assert!((kxy - kyx).abs() <= 1e-12 * kxy.abs().max(1e-300));
        prop_assert!(kxy.is_finite());
        if !matches!(d, DomainSpec::Interval { bc0: Boundary::Robin(_), .. } | DomainSpec::HalfLine { bc0: Boundary::Robin(_) })
            && !matches!(d, DomainSpec::Interval { bcb: Boundary::Robin(_), .. })
        {
            prop_assert!(kxy >= 0.0);
        }
    }

    #[test]
    fn neumann_box_kernel_conserves_mass(b in 0.5..2.0f64, t in 0.05..1.0f64, u in 0.0..1.0f64) {
        let d = DomainSpec::Interval { b, bc0: Boundary::Robin(0.0), bcb: Boundary::Robin(0.0) };
        let x = interior(&d, u);
        let (nodes, weights) = gauss_legendre_unit(48);
        // integrate on both sides of x separately: the kernel peaks there
        let mut total = 0.0;
        for (lo, hi) in [(0.0, x), (x, b)] {
            let half = 0.5 * (hi - lo);
            for (z, w) in nodes.iter().zip(&weights) {
                total += half * w * transition_kernel(&d, t, x, lo + half * (z + 1.0)).unwrap();
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-6, "total {}", total);
    }

    #[test]
    fn occupation_total_is_horizon(d in domain(), t in 0.05..2.0f64, u in 0.0..1.0f64, v in 0.0..1.0f64, seed in any::<u64>()) {
        let (x, y) = (interior(&d, u), interior(&d, v));
        let path = sample_bridge(&d, t, x, y, 128, &mut substream(seed, &[])).unwrap();
        let prof = local_time(&path, 0.02).unwrap();
        prop_assert!((prof.total() - t).abs() <= 1e-12 * t);
        prop_assert!(prof.masses().iter().all(|&m| m >= 0.0));
        prop_assert!(path.positions().iter().all(|&p| d.contains_closed(p)));
    }

    #[test]
    fn xi_covariance_is_symmetric_and_positive(cov in covariance(), x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let cxy = xi_covariance(x, y, &cov).unwrap();
        let cyx = xi_covariance(y, x, &cov).unwrap();
        prop_assert!((cxy - cyx).abs() <= 1e-12 * (1.0 + cxy.abs()));
        let vx = xi_covariance(x, x, &cov).unwrap();
        let vy = xi_covariance(y, y, &cov).unwrap();
        prop_assert!(vx >= 0.0 && vy >= 0.0);
        prop_assert!(cxy * cxy <= vx * vy * (1.0 + 1e-10) + 1e-14);
        prop_assert_eq!(xi_covariance(0.0, y, &cov).unwrap(), 0.0);
    }

    #[test]
    fn increments_ignore_offsets_and_add_up(seed in any::<u64>(), c in -50.0..50.0f64, a in -2.0..2.0f64, m in -2.0..2.0f64, b in -2.0..2.0f64) {
        let p = noise_path(seed);
        let q = p.with_offset(c);
        prop_assert_eq!(p.increment(a, b).unwrap(), q.increment(a, b).unwrap());
        let sum = p.increment(a, m).unwrap() + p.increment(m, b).unwrap();
        prop_assert!((sum - p.increment(a, b).unwrap()).abs() < 1e-12);
        prop_assert!((q.value_at(a).unwrap() - p.value_at(a).unwrap() - c).abs() < 1e-12);
    }

    #[test]
    fn step_integral_is_linear_and_offset_free(seed in any::<u64>(), f in step(), g in step(), s in -3.0..3.0f64, c in -10.0..10.0f64) {
        let p = noise_path(seed);
        let q = p.with_offset(c);
        let xf = integrate_step(&f, &p).unwrap();
        prop_assert_eq!(xf, integrate_step(&f, &q).unwrap());
        // s f + g on the common refinement
        let mut cuts: Vec<f64> = f.breakpoints().iter().chain(g.breakpoints()).copied().collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let at = |h: &StepFunction, x: f64| -> f64 {
            let bp = h.breakpoints();
            if x < bp[0] || x >= bp[bp.len() - 1] {
                return 0.0;
            }
            h.levels()[bp.partition_point(|&v| v <= x) - 1]
        };
        let levels: Vec<f64> = cuts.windows(2).map(|w| s * at(&f, w[0]) + at(&g, w[0])).collect();
        let combo = StepFunction::new(cuts, levels).unwrap();
        let want = s * xf + integrate_step(&g, &p).unwrap();
        prop_assert!((integrate_step(&combo, &p).unwrap() - want).abs() < 1e-10 * (1.0 + want.abs()));
    }

    #[test]
    fn indicator_integral_is_increment(seed in any::<u64>(), a in -1.9..1.9f64, len in 0.01..1.0f64) {
        let p = noise_path(seed);
        let b = (a + len).min(1.95);
        let f = StepFunction::indicator(a, b).unwrap();
        prop_assert!((integrate_step(&f, &p).unwrap() - p.increment(a, b).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn eigenvalues_ordered_and_monotone_in_boundary(b in 0.5..2.0f64, alpha in 0.0..5.0f64, amp in 0.0..20.0f64) {
        let v = PotentialSpec::callable(move |x| amp * (3.0 * x).sin().powi(2));
        let solve = |bc: Boundary| {
            let d = DomainSpec::Interval { b, bc0: bc, bcb: bc };
            eigen_solve(&discretize_form(&d, &v, FormNoise::None, 400, None).unwrap(), 6).unwrap().eigenvalues
        };
        let dir = solve(Boundary::Dirichlet);
        let rob = solve(Boundary::Robin(alpha));
        let neu = solve(Boundary::Robin(0.0));
        for ev in [&dir, &rob, &neu] {
            prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        }
        prop_assert!(neu[0] >= -1e-9, "lowest {}", neu[0]);
        // a positive Robin weight rewards boundary time
        for k in 0..6 {
            prop_assert!(dir[k] >= neu[k] - 1e-9, "k={} dirichlet {} neumann {}", k, dir[k], neu[k]);
            prop_assert!(neu[k] >= rob[k] - 1e-9, "k={} neumann {} robin {}", k, neu[k], rob[k]);
        }
    }

    #[test]
    fn potential_shift_is_exact_factor(c in 0.0..5.0f64, seed in any::<u64>()) {
        let d = DomainSpec::dirichlet_box(1.0);
        let v = PotentialSpec::linear();
        let res = Resolution::with_steps(64);
        let base = deterministic_kernel(&d, &v, 0.3, 0.4, 0.6, 64, &res, seed).unwrap();
        let shifted = deterministic_kernel(&d, &v.shifted(c), 0.3, 0.4, 0.6, 64, &res, seed).unwrap();
        prop_assert_eq!(shifted.mean, base.mean * (-c * 0.3).exp());
        prop_assert!(base.mean >= 0.0);
    }
}
