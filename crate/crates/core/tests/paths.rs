use std::f64::consts::PI;

use fksim::paths::{
    boundary_local_time, dirichlet_survival, effective_bin_width, local_time, sample_bridge, sample_free_path,
    transition_kernel, Boundary, BoundaryRule, BridgePath, DomainSpec,
};
use fksim::rng::substream;

fn gauss(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn robin_box(a: f64, b: f64) -> DomainSpec {
    DomainSpec::Interval {
        b: 1.0,
        bc0: Boundary::Robin(a),
        bcb: Boundary::Robin(b),
    }
}

#[test]
fn kernel_examples() {
    let v = transition_kernel(&DomainSpec::FullLine, 1.0, 0.0, 0.0).unwrap();
    assert!((v - 0.398_942_3).abs() < 1e-7);
    let v = transition_kernel(&DomainSpec::half_line_dirichlet(), 1.0, 1.0, 1.0).unwrap();
    assert!((v - 0.452_933_3).abs() < 1e-7, "{v}");
    assert!(transition_kernel(&DomainSpec::FullLine, 0.0, 0.0, 0.0).is_err());
}

#[test]
fn interval_kernel_matches_brute_force_theta_sum() {
    for (t, x, y) in [(1.0, 0.5, 0.5), (0.1, 0.2, 0.9), (3.0, 0.05, 0.7)] {
        let brute: f64 = (-50..=50)
            .map(|k| {
                let c = 2.0 * k as f64;
                gauss(t, x - (c + y)) + gauss(t, x - (c - y))
            })
            .sum();
        for d in [DomainSpec::dirichlet_box(1.0), robin_box(0.3, -0.2)] {
            let v = transition_kernel(&d, t, x, y).unwrap();
            assert!((v - brute).abs() < 1e-14 * brute.max(1.0), "t={t}: {v} vs {brute}");
        }
    }
    let v = transition_kernel(&DomainSpec::dirichlet_box(1.0), 1.0, 0.5, 0.5).unwrap();
    assert!((v - 1.0).abs() < 1e-5);
}

#[test]
fn bridge_midpoint_variance() {
    let n = 100_000;
    let mids: Vec<f64> = (0..n)
        .map(|i| {
            let p = sample_bridge(&DomainSpec::FullLine, 1.0, 0.0, 0.0, 2, &mut substream(i, &[10])).unwrap();
            p.positions()[1]
        })
        .collect();
    let sq: Vec<f64> = mids.iter().map(|m| m * m).collect();
    let (v, se) = mean_se(&sq);
    assert!((v - 0.25).abs() < 3.0 * se, "{v} (se {se})");
}

#[test]
fn bridge_endpoints_are_exact() {
    let domains = [
        DomainSpec::FullLine,
        DomainSpec::half_line_dirichlet(),
        robin_box(0.0, 1.0),
    ];
    for (i, d) in domains.iter().enumerate() {
        let p = sample_bridge(d, 0.7, 0.3, 0.8, 50, &mut substream(3, &[i as u64])).unwrap();
        assert_eq!(p.positions()[0], 0.3);
        assert_eq!(p.positions()[50], 0.8);
    }
}

#[test]
fn half_line_terminal_sign_fraction() {
    let d = DomainSpec::HalfLine {
        bc0: Boundary::Robin(0.0),
    };
    let n = 100_000;
    let flips: Vec<f64> = (0..n)
        .map(|i| {
            let p = sample_bridge(&d, 1.0, 1.0, 1.0, 4, &mut substream(i, &[11])).unwrap();
            if p.free_positions()[4] < 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let (f, se) = mean_se(&flips);
    let expected = gauss(1.0, 2.0) / (gauss(1.0, 0.0) + gauss(1.0, 2.0));
    assert!((expected - 0.119_20).abs() < 1e-5);
    assert!((f - expected).abs() < 3.0 * se, "{f} vs {expected}");
}

#[test]
fn folded_local_time_equals_folded_free_masses() {
    let d = robin_box(0.0, 0.0);
    let width = effective_bin_width(&d, 0.013);
    for s in 0..20 {
        let p = sample_bridge(&d, 2.0, 0.2, 0.9, 4096, &mut substream(s, &[12])).unwrap();
        let folded = local_time(&p, width).unwrap();
        let free = BridgePath::from_free(DomainSpec::FullLine, 2.0, p.free_positions().to_vec()).unwrap();
        let lt = local_time(&free, width).unwrap();
        let nb = folded.masses().len();
        let mut acc = vec![0.0; nb];
        for (c, m) in lt.centers().zip(lt.masses()) {
            let k = (d.fold(c) / width).floor() as usize;
            acc[k.min(nb - 1)] += m;
        }
        let max_mass = folded.masses().iter().cloned().fold(0.0, f64::max);
        for (a, b) in acc.iter().zip(folded.masses()) {
            assert!((a - b).abs() <= 2.0 * max_mass);
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn reflection_inequality() {
    // F(path) = exp(-int_0^t path(s) ds) on the half line
    let functional = |p: &BridgePath, abs: bool| {
        let x = p.positions();
        let f = |v: f64| if abs { v.abs() } else { v };
        let s: f64 = x.windows(2).map(|w| 0.5 * (f(w[0]) + f(w[1]))).sum();
        (-s * p.dt()).exp()
    };
    let n = 20_000;
    let hl = DomainSpec::HalfLine {
        bc0: Boundary::Robin(0.0),
    };
    let (t, x, y) = (1.0, 0.4, 0.6);
    let reflected: Vec<f64> = (0..n)
        .map(|i| {
            functional(
                &sample_bridge(&hl, t, x, y, 256, &mut substream(i, &[13, 0])).unwrap(),
                false,
            )
        })
        .collect();
    let free: Vec<f64> = (0..n)
        .map(|i| {
            functional(
                &sample_bridge(&DomainSpec::FullLine, t, x, y, 256, &mut substream(i, &[13, 1])).unwrap(),
                true,
            )
        })
        .collect();
    let (a, sa) = mean_se(&reflected);
    let (b, sb) = mean_se(&free);
    let joint = (sa * sa + 4.0 * sb * sb).sqrt();
    assert!(a <= 2.0 * b + 4.0 * joint, "{a} vs 2 x {b}");
}

#[test]
fn survival_matches_bridge_no_crossing_probability() {
    let n = 40_000;
    let alive: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = substream(i, &[14]);
            let p = sample_bridge(&DomainSpec::FullLine, 1.0, 0.0, 0.0, 64, &mut rng).unwrap();
            if dirichlet_survival(&p, -1.0, &mut rng).unwrap() {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let (m, se) = mean_se(&alive);
    let exact = 1.0 - (-2.0f64).exp();
    assert!((m - exact).abs() < 3.0 * se, "{m} vs {exact} (se {se})");
}

#[test]
fn boundary_local_time_first_moment_from_origin() {
    let d = DomainSpec::HalfLine {
        bc0: Boundary::Robin(0.0),
    };
    let n = 20_000;
    let lts: Vec<f64> = (0..n)
        .map(|i| {
            let p = sample_free_path(&d, 1.0, 1e-6, 2048, &mut substream(i, &[15])).unwrap();
            boundary_local_time(&p, 0.0, 1e-3, BoundaryRule::BridgeExpectation).unwrap()
        })
        .collect();
    let (m, se) = mean_se(&lts);
    let exact = (2.0 / PI).sqrt();
    assert!((m - exact).abs() < 3.0 * se, "{m} vs {exact} (se {se})");
}

#[test]
fn boundary_local_time_rejects_full_line() {
    let p = sample_free_path(&DomainSpec::FullLine, 1.0, 0.0, 16, &mut substream(0, &[16])).unwrap();
    assert!(boundary_local_time(&p, 0.0, 0.1, BoundaryRule::default()).is_err());
}
