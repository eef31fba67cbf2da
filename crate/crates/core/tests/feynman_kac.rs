use std::f64::consts::PI;

use fksim::feynman_kac::{
    deterministic_kernel, hs_norm_check, laplace_transform_moment, mollified_kernel, random_kernel, semigroup_check,
    trace_estimate, CenterTable, HsBudget, NoiseSetup, NoiseTerm, PotentialSpec, QuadratureSpec, Resolution,
};
use fksim::noise::{
    mollified_derivative, mollified_value, sample_noise_path, uniform_grid, CovarianceModel, GridNoisePath,
    MollifierSpec, NoiseSampler,
};
use fksim::paths::{local_time, sample_bridge, Boundary, DomainSpec};
use fksim::rng::{substream, tags};
use fksim::spectral::{discretize_form, eigen_solve, form_grid, spectral_trace, FormNoise};
use fksim::stochint::{riemann_stieltjes, FnIntegrand};

fn gauss(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Dirichlet box on [0, 1]: eigenvalues k^2 pi^2 / 2 with modes sqrt(2) sin(k pi x).
fn box_kernel(t: f64, x: f64, y: f64) -> f64 {
    (1..400)
        .map(|k| {
            let kp = k as f64 * PI;
            2.0 * (-t * kp * kp / 2.0).exp() * (kp * x).sin() * (kp * y).sin()
        })
        .sum()
}

fn box_trace(t: f64) -> f64 {
    (1..400).map(|k| (-t * (k as f64 * PI).powi(2) / 2.0).exp()).sum()
}

fn white_path(seed: u64, lo: f64, hi: f64) -> GridNoisePath {
    sample_noise_path(
        &CovarianceModel::white(1.0),
        &uniform_grid(lo, hi, 1.0 / 512.0).unwrap(),
        &mut substream(seed, &[99]),
    )
    .unwrap()
}

#[test]
fn box_kernel_matches_sine_series() {
    let d = DomainSpec::dirichlet_box(1.0);
    let est = deterministic_kernel(
        &d,
        &PotentialSpec::zero(),
        0.5,
        0.5,
        0.5,
        40_000,
        &Resolution::default(),
        1,
    )
    .unwrap();
    let exact = box_kernel(0.5, 0.5, 0.5);
    assert!((exact - 0.169_60).abs() < 1e-4);
    assert!(
        est.z_score(exact).abs() < 3.0,
        "{} +- {} vs {exact}",
        est.mean,
        est.stderr
    );
}

#[test]
fn harmonic_kernel_matches_mehler() {
    let v = PotentialSpec::harmonic();
    let est = deterministic_kernel(
        &DomainSpec::FullLine,
        &v,
        1.0,
        0.0,
        0.0,
        40_000,
        &Resolution::default(),
        2,
    )
    .unwrap();
    let exact = 1.0 / (2.0 * PI * 1.0f64.sinh()).sqrt();
    assert!(
        est.z_score(exact).abs() < 3.0,
        "{} +- {} vs {exact}",
        est.mean,
        est.stderr
    );
}

#[test]
fn free_kernel_without_potential_is_exact() {
    let est = deterministic_kernel(
        &DomainSpec::FullLine,
        &PotentialSpec::zero(),
        0.8,
        0.1,
        -0.4,
        64,
        &Resolution::default(),
        3,
    )
    .unwrap();
    assert_eq!(est.stderr, 0.0);
    assert!((est.mean - gauss(0.8, 0.5)).abs() < 1e-15);
}

#[test]
fn zero_noise_is_bitwise_deterministic() {
    let d = DomainSpec::Interval {
        b: 1.0,
        bc0: Boundary::Dirichlet,
        bcb: Boundary::Robin(0.7),
    };
    let v = PotentialSpec::linear();
    let res = Resolution::with_steps(256);
    let zero = GridNoisePath::zero(uniform_grid(-1.0, 2.0, 0.01).unwrap()).unwrap();
    let m = MollifierSpec::new(0.1).unwrap();
    let a = deterministic_kernel(&d, &v, 0.4, 0.3, 0.6, 3000, &res, 4).unwrap();
    let b = random_kernel(&d, &v, &zero, 0.4, 0.3, 0.6, 3000, &res, 4).unwrap();
    let c = mollified_kernel(&d, &v, &zero, &m, 0.4, 0.3, 0.6, 3000, &res, 4).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.mean.to_bits(), c.mean.to_bits());
}

#[test]
fn potential_shift_scales_by_exact_factor() {
    let d = DomainSpec::dirichlet_box(1.0);
    let noise = white_path(5, -1.0, 2.0);
    let res = Resolution::with_steps(256);
    let v = PotentialSpec::zero();
    for c in [0.5, 2.0, -0.25] {
        let base = random_kernel(&d, &v, &noise, 0.5, 0.4, 0.5, 2000, &res, 6).unwrap();
        let shifted = random_kernel(&d, &v.shifted(c), &noise, 0.5, 0.4, 0.5, 2000, &res, 6).unwrap();
        assert_eq!(shifted.mean.to_bits(), (base.mean * (-c * 0.5f64).exp()).to_bits());
    }
}

#[test]
fn tabulated_mollified_noise_matches_mollified_weighting() {
    let d = DomainSpec::dirichlet_box(1.0);
    let noise = white_path(7, -0.5, 1.5);
    let m = MollifierSpec::new(0.1).unwrap();
    let t = 0.5;
    let res = Resolution::default();
    let (_, spec) = res.resolve(t).unwrap();
    let table = CenterTable::build(&noise, &m, &d, spec.bin_width).unwrap();
    let centers: Vec<f64> = table.centers().collect();
    let vals = mollified_derivative(&noise, &m, &centers).unwrap();
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let tab = PotentialSpec::tabulated(centers, vals.iter().map(|v| v - min).collect())
        .unwrap()
        .shifted(min);
    let quad = QuadratureSpec::gauss_legendre(16, 0.0, 1.0).unwrap();
    let a = trace_estimate(&d, &tab, NoiseTerm::Off, t, &quad, 300, &res, 8).unwrap();
    let b = trace_estimate(
        &d,
        &PotentialSpec::zero(),
        NoiseTerm::Mollified(&table),
        t,
        &quad,
        300,
        &res,
        8,
    )
    .unwrap();
    assert!((a.mean - b.mean).abs() < 1e-9 * b.mean, "{} vs {}", a.mean, b.mean);
}

#[test]
fn coupling_identity_for_local_time_profiles() {
    let d = DomainSpec::dirichlet_box(1.0);
    let noise = white_path(9, -0.5, 1.5);
    let eps = 0.1;
    let m = MollifierSpec::new(eps).unwrap();
    for s in 0..5 {
        let p = sample_bridge(&d, 0.5, 0.3, 0.6, 1024, &mut substream(s, &[30])).unwrap();
        let lt = local_time(&p, 0.01).unwrap();
        let edges = lt.edges();
        let dens = lt.densities();
        // <L, Xi'_eps> = sum_j density_j (Xi_eps(a_{j+1}) - Xi_eps(a_j))
        let xe = mollified_value(&noise, &m, &edges).unwrap();
        let left: f64 = dens.iter().enumerate().map(|(j, q)| q * (xe[j + 1] - xe[j])).sum();
        // xi(L * rho_eps) = -<(L * rho_eps)', Xi>
        let e2 = edges.clone();
        let d2 = dens.clone();
        let smooth = move |x: f64| -> f64 {
            d2.iter()
                .enumerate()
                .map(|(j, q)| q * (m.cdf(x - e2[j]) - m.cdf(x - e2[j + 1])))
                .sum()
        };
        let e3 = edges.clone();
        let d3 = dens.clone();
        let slope = move |x: f64| -> f64 {
            d3.iter()
                .enumerate()
                .map(|(j, q)| q * (m.density(x - e3[j]) - m.density(x - e3[j + 1])))
                .sum()
        };
        let support = (edges[0] - eps, edges[edges.len() - 1] + eps);
        let f = FnIntegrand::with_derivative(smooth, slope, support);
        let right = riemann_stieltjes(&f, &noise).unwrap();
        assert!((left - right).abs() < 1e-6, "{left} vs {right}");
    }
}

#[test]
fn box_trace_matches_eigen_series() {
    let d = DomainSpec::dirichlet_box(1.0);
    let quad = QuadratureSpec::gauss_legendre(32, 0.0, 1.0).unwrap();
    let est = trace_estimate(
        &d,
        &PotentialSpec::zero(),
        NoiseTerm::Off,
        0.5,
        &quad,
        1000,
        &Resolution::default(),
        10,
    )
    .unwrap();
    let exact = box_trace(0.5);
    assert!(
        est.z_score(exact).abs() < 3.0,
        "{} +- {} vs {exact}",
        est.mean,
        est.stderr
    );
}

#[test]
fn harmonic_trace_matches_geometric_sum_and_is_certified() {
    let quad = QuadratureSpec::gauss_legendre(48, -8.0, 8.0).unwrap();
    let est = trace_estimate(
        &DomainSpec::FullLine,
        &PotentialSpec::harmonic(),
        NoiseTerm::Off,
        1.0,
        &quad,
        400,
        &Resolution::default(),
        11,
    )
    .unwrap();
    let exact = 0.5 / 0.5f64.sinh();
    assert!(
        est.z_score(exact).abs() < 3.0,
        "{} +- {} vs {exact}",
        est.mean,
        est.stderr
    );
    let cert = est.truncation.expect("certificate on the line");
    assert!(cert.ratio < 1e-3);
}

#[test]
fn uncertified_truncation_is_rejected() {
    let quad = QuadratureSpec::gauss_legendre(16, -1.0, 1.0).unwrap();
    let r = trace_estimate(
        &DomainSpec::FullLine,
        &PotentialSpec::harmonic(),
        NoiseTerm::Off,
        1.0,
        &quad,
        10,
        &Resolution::default(),
        12,
    );
    assert!(r.is_err());
}

#[test]
fn hilbert_schmidt_identity_on_the_box() {
    let d = DomainSpec::dirichlet_box(1.0);
    let quad = QuadratureSpec::gauss_legendre(12, 0.0, 1.0).unwrap();
    let budget = HsBudget {
        paths_per_pair: 400,
        trace_paths_per_node: 1000,
    };
    let chk = hs_norm_check(
        &d,
        &PotentialSpec::zero(),
        NoiseTerm::Off,
        0.5,
        &quad,
        &budget,
        &Resolution::default(),
        13,
    )
    .unwrap();
    assert!(chk.within(3.0), "{:?}", chk);
    let exact = box_trace(0.5);
    assert!(chk.left.z_score(exact).abs() < 4.0);
}

#[test]
fn hilbert_schmidt_identity_for_truncated_oscillator() {
    let quad = QuadratureSpec::gauss_legendre(24, -5.0, 5.0).unwrap();
    let budget = HsBudget {
        paths_per_pair: 200,
        trace_paths_per_node: 600,
    };
    let chk = hs_norm_check(
        &DomainSpec::FullLine,
        &PotentialSpec::harmonic(),
        NoiseTerm::Off,
        1.0,
        &quad,
        &budget,
        &Resolution::with_steps(512),
        14,
    )
    .unwrap();
    assert!(chk.within(3.0), "{:?}", chk);
    assert!(chk.right.z_score(0.5 / 0.5f64.sinh()).abs() < 4.0);
}

#[test]
fn hilbert_schmidt_needs_eight_nodes() {
    let quad = QuadratureSpec::gauss_legendre(1, 0.0, 1.0).unwrap();
    let budget = HsBudget {
        paths_per_pair: 10,
        trace_paths_per_node: 10,
    };
    let d = DomainSpec::dirichlet_box(1.0);
    assert!(hs_norm_check(
        &d,
        &PotentialSpec::zero(),
        NoiseTerm::Off,
        0.5,
        &quad,
        &budget,
        &Resolution::default(),
        0
    )
    .is_err());
}

#[test]
fn free_semigroup_is_gaussian_convolution() {
    let quad = QuadratureSpec::gauss_legendre(96, -12.0, 12.0).unwrap();
    let chk = semigroup_check(
        &DomainSpec::FullLine,
        &PotentialSpec::zero(),
        NoiseTerm::Off,
        0.6,
        0.9,
        0.3,
        -0.2,
        &quad,
        8,
        &Resolution::default(),
        15,
    )
    .unwrap();
    assert!((chk.left.mean - gauss(1.5, 0.5)).abs() < 1e-8);
    assert!((chk.right.mean - gauss(1.5, 0.5)).abs() < 1e-15);
}

#[test]
fn box_semigroup_agrees_with_eigen_series() {
    let d = DomainSpec::dirichlet_box(1.0);
    let quad = QuadratureSpec::gauss_legendre(16, 0.0, 1.0).unwrap();
    let chk = semigroup_check(
        &d,
        &PotentialSpec::zero(),
        NoiseTerm::Off,
        0.25,
        0.25,
        0.5,
        0.5,
        &quad,
        3000,
        &Resolution::default(),
        16,
    )
    .unwrap();
    assert!(chk.within(3.0), "{chk:?}");
    let exact = box_kernel(0.5, 0.5, 0.5);
    assert!(chk.right.z_score(exact).abs() < 3.0);
}

#[test]
fn semigroup_with_fixed_white_noise() {
    let d = DomainSpec::dirichlet_box(1.0);
    let noise = white_path(17, -1.0, 2.0);
    let quad = QuadratureSpec::gauss_legendre(16, 0.0, 1.0).unwrap();
    let chk = semigroup_check(
        &d,
        &PotentialSpec::zero(),
        NoiseTerm::Raw(&noise),
        0.25,
        0.25,
        0.4,
        0.6,
        &quad,
        2000,
        &Resolution::default(),
        18,
    )
    .unwrap();
    assert!(chk.within(4.0), "{chk:?}");
}

#[test]
fn laplace_without_noise_is_the_deterministic_trace() {
    let d = DomainSpec::dirichlet_box(1.0);
    let quad = QuadratureSpec::gauss_legendre(24, 0.0, 1.0).unwrap();
    let setup = NoiseSetup {
        n_noise: 5,
        spacing: 1.0 / 256.0,
        span: (-0.5, 1.5),
        mollifier: None,
    };
    let est = laplace_transform_moment(
        &d,
        &PotentialSpec::zero(),
        None,
        &[0.5],
        &setup,
        &quad,
        800,
        &Resolution::default(),
        19,
    )
    .unwrap();
    assert_eq!(est.n_noise, 1);
    let exact = box_trace(0.5);
    assert!(
        (est.mean - exact).abs() < 3.0 * est.stderr,
        "{} +- {} vs {exact}",
        est.mean,
        est.stderr
    );
}

#[test]
fn laplace_first_moment_matches_oracle_average_over_shared_noise() {
    let d = DomainSpec::dirichlet_box(1.0);
    let cov = CovarianceModel::white(1.0);
    let eps = 0.05;
    let m = MollifierSpec::new(eps).unwrap();
    let setup = NoiseSetup {
        n_noise: 6,
        spacing: 1.0 / 512.0,
        span: (-0.5, 1.5),
        mollifier: Some(m),
    };
    let quad = QuadratureSpec::gauss_legendre(32, 0.0, 1.0).unwrap();
    let seed = 20;
    let est = laplace_transform_moment(
        &d,
        &PotentialSpec::zero(),
        Some(&cov),
        &[0.5],
        &setup,
        &quad,
        600,
        &Resolution::default(),
        seed,
    )
    .unwrap();
    let grid = uniform_grid(setup.span.0, setup.span.1, setup.spacing).unwrap();
    let sampler = NoiseSampler::new(&cov, &grid).unwrap();
    let mut oracle = 0.0;
    for j in 0..setup.n_noise {
        let noise = sampler
            .sample(&mut substream(seed, &[tags::LAPLACE, tags::NOISE, j as u64]))
            .unwrap();
        let nodes = form_grid(&d, 2000, None).unwrap();
        let q = mollified_derivative(&noise, &m, &nodes).unwrap();
        let form = discretize_form(&d, &PotentialSpec::zero(), FormNoise::Nodes(&q), 2000, None).unwrap();
        let spec = eigen_solve(&form, 40).unwrap();
        oracle += spectral_trace(&spec, 0.5, 40).unwrap().value;
    }
    oracle /= setup.n_noise as f64;
    let se = (est.inner_variance / est.n_noise as f64).sqrt();
    assert!(
        (est.mean - oracle).abs() < 3.0 * se,
        "{} vs {oracle} (inner se {se})",
        est.mean
    );
}

#[test]
fn laplace_second_moment_dominates_squared_first() {
    let d = DomainSpec::dirichlet_box(1.0);
    let cov = CovarianceModel::white(1.0);
    let setup = NoiseSetup {
        n_noise: 6,
        spacing: 1.0 / 256.0,
        span: (-0.5, 1.5),
        mollifier: None,
    };
    let quad = QuadratureSpec::gauss_legendre(16, 0.0, 1.0).unwrap();
    let est = laplace_transform_moment(
        &d,
        &PotentialSpec::zero(),
        Some(&cov),
        &[0.5, 0.5],
        &setup,
        &quad,
        200,
        &Resolution::with_steps(512),
        21,
    )
    .unwrap();
    let first: f64 = est.traces.iter().map(|t| t[0]).sum::<f64>() / est.n_noise as f64;
    assert!(est.mean >= first * first - 3.0 * est.stderr);
}

#[test]
fn dirichlet_kernel_vanishes_near_the_boundary() {
    let d = DomainSpec::half_line_dirichlet();
    let est = deterministic_kernel(
        &d,
        &PotentialSpec::zero(),
        1.0,
        1.0,
        0.01,
        20_000,
        &Resolution::default(),
        22,
    )
    .unwrap();
    let exact = gauss(1.0, 0.99) - gauss(1.0, 1.01);
    assert!(est.mean <= exact + 4.0 * est.stderr, "{} vs {exact}", est.mean);
    assert!(est.mean < 0.01);
}

#[test]
fn robin_weight_is_monotone_in_alpha() {
    let mut prev = 0.0;
    for a in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let d = DomainSpec::Interval {
            b: 1.0,
            bc0: Boundary::Robin(a),
            bcb: Boundary::Robin(0.2),
        };
        let est = deterministic_kernel(
            &d,
            &PotentialSpec::zero(),
            0.5,
            0.2,
            0.3,
            2000,
            &Resolution::with_steps(256),
            23,
        )
        .unwrap();
        assert!(est.mean >= prev, "alpha {a}: {} < {prev}", est.mean);
        prev = est.mean;
    }
}
