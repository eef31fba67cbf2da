use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::report::{Payload, RunReport, Verdict};
use super::run::convergence_verdict;
use crate::error::Result;
use crate::exec::{map_indexed, with_workers};
use crate::feynman_kac::{
    deterministic_kernel, hs_norm_check, joint_stderr, mollified_kernel, random_kernel, trace_estimate, HsBudget,
    NoiseTerm, PotentialSpec, QuadratureSpec, Resolution,
};
use crate::noise::{gamma_seminorm_sq, uniform_grid, CovarianceModel, MollifierSpec, NoiseSampler};
use crate::paths::{
    boundary_local_time, local_time, sample_bridge, sample_free_path, transition_kernel_with, Boundary, BoundaryRule,
    DomainSpec, Truncation,
};
use crate::quad::{integrate_split, Tolerance};
use crate::rng::{substream, tags};
use crate::spectral::{discretize_form, eigen_solve, epsilon_convergence, oracle_equivalence, FormNoise, OracleBudget};
use crate::stochint::{integrate_step, StepFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    /// Exact invariants plus reduced-budget statistical checks.
    Fast,
    /// Acceptance budgets.
    Full,
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Truncation of the interval transition kernel in the Chapman-Kolmogorov
    /// check; replace with [`Truncation::broken`] to inject a fault.
    pub truncation: Truncation,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 20_240_601,
            truncation: Truncation::default(),
        }
    }
}

/// The numbered acceptance criteria.
pub const CRITERIA: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

/// `sum_k exp(-t k^2 pi^2 / 2)`: the Dirichlet box trace on `[0, 1]`.
pub fn box_trace_series(t: f64) -> f64 {
    (1..200).map(|k| (-t * (k * k) as f64 * PI * PI / 2.0).exp()).sum()
}

/// `sum_k exp(-t (k - 1/2)) = 1 / (2 sinh(t/2))`.
pub fn harmonic_trace(t: f64) -> f64 {
    0.5 / (0.5 * t).sinh()
}

/// `2^{-1/3} |a_1|` with `a_1` the first zero of Airy Ai.
pub const AIRY_GROUND_STATE: f64 = 1.855_757_081_489_498_5;

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let s = Instant::now();
    let v = f()?;
    Ok((v, s.elapsed().as_secs_f64()))
}

fn runtime(name: &str, secs: f64, limit: f64) -> Verdict {
    Verdict {
        name: format!("{name} runtime"),
        pass: secs <= limit,
        observed: secs,
        expected: limit,
        stderr: 0.0,
        detail: format!("{secs:.1} s against a limit of {limit} s"),
    }
}

/// Runs acceptance criterion `n` (1 to 9) and returns its verdicts.
pub fn criterion(n: u8, level: Level, opts: &SuiteOptions) -> Result<Vec<Verdict>> {
    let full = level == Level::Full;
    let seed = opts.seed;
    let res = Resolution::default();
    let boxd = DomainSpec::dirichlet_box(1.0);
    let zero = PotentialSpec::zero();
    match n {
        1 => {
            let per_node = if full { 1563 } else { 200 };
            let q = QuadratureSpec::gauss_legendre(64, 0.0, 1.0)?;
            let (e, secs) = timed(|| {
                with_workers(1, || {
                    trace_estimate(&boxd, &zero, NoiseTerm::Off, 0.5, &q, per_node, &res, seed)
                })
            })?;
            let mut v = vec![Verdict::statistical(
                "1 box trace",
                e.mean,
                box_trace_series(0.5),
                e.stderr,
                3.0,
            )];
            if full {
                v.push(Verdict::flag(
                    "1 box trace stderr",
                    e.stderr <= 2e-3,
                    format!("stderr {:.2e} <= 2e-3", e.stderr),
                ));
                v.push(runtime("1 box trace single-threaded", secs, 120.0));
            }
            Ok(v)
        }
        2 => {
            let per_node = if full { 2000 } else { 150 };
            let q = QuadratureSpec::gauss_legendre(64, -8.0, 8.0)?;
            let h = PotentialSpec::harmonic();
            let (e, secs) =
                timed(|| trace_estimate(&DomainSpec::FullLine, &h, NoiseTerm::Off, 1.0, &q, per_node, &res, seed))?;
            let mut v = vec![Verdict::statistical(
                "2 harmonic trace",
                e.mean,
                harmonic_trace(1.0),
                e.stderr,
                3.0,
            )];
            if let Some(c) = e.truncation {
                v[0] = v[0]
                    .clone()
                    .with_detail(&format!("truncation tail/trace {:.1e}", c.ratio));
            }
            if full {
                v.push(runtime("2 harmonic trace", secs, 300.0));
            }
            Ok(v)
        }
        3 => {
            let budget = OracleBudget {
                paths_per_node: if full { 2000 } else { 300 },
                ..OracleBudget::default()
            };
            let seeds = if full { 20 } else { 4 };
            let white = CovarianceModel::white(1.0);
            let (rep, secs) =
                timed(|| oracle_equivalence(&boxd, &zero, Some(&white), Some(0.1), 0.5, seeds, &budget, seed))?;
            let agree = rep.comparisons.iter().filter(|c| c.agree).count();
            let mut v = vec![Verdict {
                name: "3 oracle equivalence".into(),
                pass: rep.pass,
                observed: rep.agreement_fraction,
                expected: rep.required_fraction,
                stderr: 0.0,
                detail: format!("{agree}/{} seeds within 3 joint standard errors", rep.comparisons.len()),
            }];
            if full {
                v.push(runtime("3 oracle equivalence", secs, 900.0));
            }
            Ok(v)
        }
        4 => {
            let budget = OracleBudget {
                paths_per_node: if full { 2000 } else { 300 },
                ..OracleBudget::default()
            };
            let seeds = if full { 20 } else { 4 };
            let white = CovarianceModel::white(1.0);
            let rep = epsilon_convergence(&boxd, &zero, &white, &[0.4, 0.2, 0.1], 0.5, seeds, &budget, seed)?;
            let mut v = convergence_verdict(&rep);
            v.name = format!("4 {}", v.name);
            Ok(vec![v])
        }
        5 => {
            let draws = if full { 10_000 } else { 2000 };
            let (v, secs) = timed(|| {
                let mut out = Vec::new();
                for (name, cov) in [
                    ("white", CovarianceModel::white(1.0)),
                    ("fractional", CovarianceModel::fractional(1.0, 0.75)),
                ] {
                    out.push(isometry(name, &cov, draws, seed)?);
                }
                Ok(out)
            })?;
            let mut v = v;
            if full {
                v.push(runtime("5 isometry", secs, 60.0));
            }
            Ok(v)
        }
        6 => {
            let paths = if full { 100_000 } else { 10_000 };
            Ok(vec![boundary_local_time_moment(paths, seed)?])
        }
        7 => {
            let (mut v, secs) = timed(|| exact_invariants(opts))?;
            v.push(runtime("7 exact invariants", secs, 60.0));
            Ok(v)
        }
        8 => {
            let (nodes, pair, trace) = if full { (16, 2000, 4000) } else { (8, 300, 600) };
            let q = QuadratureSpec::gauss_legendre(nodes, 0.0, 1.0)?;
            let b = HsBudget {
                paths_per_pair: pair,
                trace_paths_per_node: trace,
            };
            let chk = hs_norm_check(&boxd, &zero, NoiseTerm::Off, 0.5, &q, &b, &res, seed)?;
            Ok(vec![Verdict::statistical(
                "8 trace equals squared Hilbert-Schmidt norm",
                chk.left.mean,
                chk.right.mean,
                chk.joint_stderr,
                3.0,
            )])
        }
        9 => {
            let (v, secs) = timed(|| {
                let f = discretize_form(&boxd, &zero, FormNoise::None, 2000, None)?;
                let l1 = eigen_solve(&f, 1)?.eigenvalues[0];
                let target = PI * PI / 2.0;
                let mut out = vec![Verdict::exact("9 box ground state (relative)", l1 / target, 1.0, 1e-3)];
                let f = discretize_form(
                    &DomainSpec::half_line_dirichlet(),
                    &PotentialSpec::linear(),
                    FormNoise::None,
                    6000,
                    Some(12.0),
                )?;
                let a1 = eigen_solve(&f, 1)?.eigenvalues[0];
                out.push(Verdict::exact("9 Airy ground state", a1, AIRY_GROUND_STATE, 1e-3));
                Ok(out)
            })?;
            let mut v = v;
            v.push(runtime("9 spectral oracle", secs, 60.0));
            Ok(v)
        }
        _ => crate::error::invalid(format!("no acceptance criterion {n}")),
    }
}

/// Sample variance of `xi(1_[0,1))` against `||1_[0,1)||_gamma^2`.
pub fn isometry(name: &str, cov: &CovarianceModel, draws: usize, seed: u64) -> Result<Verdict> {
    let grid = uniform_grid(0.0, 1.0, 1.0 / 64.0)?;
    let sampler = NoiseSampler::new(cov, &grid)?;
    let f = StepFunction::indicator(0.0, 1.0)?;
    let samples = map_indexed(draws, |i| -> Result<f64> {
        let path = sampler.sample(&mut substream(seed, &[tags::NOISE, 5, i as u64]))?;
        integrate_step(&f, &path)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let n = draws as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let se = ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt();
    let expected = gamma_seminorm_sq(&f, cov)?;
    Ok(Verdict::statistical(
        &format!("5 isometry ({name})"),
        var,
        expected,
        se,
        4.0,
    ))
}

/// Mean boundary local time at 0 over `[0, 1]` of reflected motion from `1e-6`.
pub fn boundary_local_time_moment(paths: u64, seed: u64) -> Result<Verdict> {
    const BLOCK: u64 = 1024;
    let d = DomainSpec::HalfLine {
        bc0: Boundary::Robin(0.0),
    };
    let blocks = paths.div_ceil(BLOCK);
    let sums = map_indexed(blocks as usize, |b| -> Result<(f64, f64, u64)> {
        let mut rng = substream(seed, &[tags::NOISE, 6, b as u64]);
        let count = BLOCK.min(paths - b as u64 * BLOCK);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let p = sample_free_path(&d, 1.0, 1e-6, 2048, &mut rng)?;
            let l = boundary_local_time(&p, 0.0, 1e-3, BoundaryRule::BridgeExpectation)?;
            s += l;
            s2 += l * l;
        }
        Ok((s, s2, count))
    });
    let (mut s, mut s2, mut n) = (0.0, 0.0, 0u64);
    for r in sums {
        let (a, b, c) = r?;
        s += a;
        s2 += b;
        n += c;
    }
    let nf = n as f64;
    let mean = s / nf;
    let se = ((s2 / nf - mean * mean) / (nf - 1.0)).sqrt();
    Ok(Verdict::statistical(
        "6 boundary local time moment",
        mean,
        (2.0 / PI).sqrt(),
        se,
        3.0,
    ))
}

fn domains() -> Vec<(&'static str, DomainSpec)> {
    vec![
        ("line", DomainSpec::FullLine),
        (
            "half line",
            DomainSpec::HalfLine {
                bc0: Boundary::Robin(0.5),
            },
        ),
        (
            "interval",
            DomainSpec::Interval {
                b: 1.0,
                bc0: Boundary::Robin(0.0),
                bcb: Boundary::Robin(0.3),
            },
        ),
    ]
}

fn span(d: &DomainSpec) -> (f64, f64, Vec<f64>) {
    match d {
        DomainSpec::FullLine => (-30.0, 30.0, vec![]),
        DomainSpec::HalfLine { .. } => (0.0, 30.0, vec![]),
        DomainSpec::Interval { b, .. } => (0.0, *b, vec![]),
    }
}

fn exact_invariants(opts: &SuiteOptions) -> Result<Vec<Verdict>> {
    let seed = opts.seed;
    let tol = Tolerance {
        abs: 1e-13,
        rel: 1e-11,
        max_intervals: 20_000,
    };
    let mut out = Vec::new();
    // occupation total
    let mut worst: f64 = 0.0;
    for (i, (_, d)) in domains().iter().enumerate() {
        let mut rng = substream(seed, &[tags::KERNEL, 70, i as u64]);
        for _ in 0..20 {
            let t = 0.7;
            let p = sample_bridge(d, t, 0.4, 0.6, 700, &mut rng)?;
            worst = worst.max((local_time(&p, 0.01)?.total() - t).abs());
        }
    }
    out.push(Verdict::exact("7 occupation total <L_t, 1> = t", worst, 0.0, 1e-12));
    // normalization and Chapman-Kolmogorov
    for (name, d) in domains() {
        let trunc = if d.is_bounded() {
            opts.truncation
        } else {
            Truncation::default()
        };
        let (lo, hi, _) = span(&d);
        let (x, y) = (0.3, 0.7);
        let (mass, _) = integrate_split(
            |z| transition_kernel_with(&d, 0.5, x, z, trunc).unwrap_or(f64::NAN),
            lo,
            hi,
            &[x],
            tol,
        )?;
        out.push(Verdict::exact(
            &format!("7 transition kernel normalization ({name})"),
            mass,
            1.0,
            1e-8,
        ));
        let (conv, _) = integrate_split(
            |z| {
                let a = transition_kernel_with(&d, 0.5, x, z, trunc).unwrap_or(f64::NAN);
                let b = transition_kernel_with(&d, 0.3, z, y, trunc).unwrap_or(f64::NAN);
                a * b
            },
            lo,
            hi,
            &[x, y],
            tol,
        )?;
        let direct = transition_kernel_with(&d, 0.8, x, y, trunc)?;
        out.push(Verdict::exact(
            &format!("7 Chapman-Kolmogorov ({name})"),
            conv,
            direct,
            1e-6,
        ));
    }
    // symmetry, with and without noise
    let res = Resolution::with_steps(512);
    let white = CovarianceModel::white(1.0);
    let grid = uniform_grid(-1.0, 2.0, 1.0 / 256.0)?;
    let noise = NoiseSampler::new(&white, &grid)?.sample(&mut substream(seed, &[tags::NOISE, 7]))?;
    let moll = MollifierSpec::new(0.1)?;
    let harm = PotentialSpec::harmonic();
    for (name, d) in domains() {
        let (x, y) = (0.25, 0.6);
        let a = deterministic_kernel(&d, &harm, 0.5, x, y, 4000, &res, seed)?;
        let b = deterministic_kernel(&d, &harm, 0.5, y, x, 4000, &res, seed + 1)?;
        out.push(Verdict::statistical(
            &format!("7 kernel symmetry ({name})"),
            a.mean,
            b.mean,
            joint_stderr(&a, &b),
            4.0,
        ));
    }
    let boxd = DomainSpec::dirichlet_box(1.0);
    let zero = PotentialSpec::zero();
    let a = random_kernel(&boxd, &zero, &noise, 0.5, 0.25, 0.6, 4000, &res, seed)?;
    let b = random_kernel(&boxd, &zero, &noise, 0.5, 0.6, 0.25, 4000, &res, seed + 1)?;
    out.push(Verdict::statistical(
        "7 kernel symmetry (box, noise)",
        a.mean,
        b.mean,
        joint_stderr(&a, &b),
        4.0,
    ));
    // bitwise invariances
    let shifted = noise.with_offset(3.7);
    let r1 = random_kernel(&boxd, &harm, &noise, 0.5, 0.3, 0.5, 512, &res, seed)?;
    let r2 = random_kernel(&boxd, &harm, &shifted, 0.5, 0.3, 0.5, 512, &res, seed)?;
    let m1 = mollified_kernel(&boxd, &harm, &noise, &moll, 0.5, 0.3, 0.5, 512, &res, seed)?;
    let m2 = mollified_kernel(&boxd, &harm, &shifted, &moll, 0.5, 0.3, 0.5, 512, &res, seed)?;
    out.push(Verdict::flag(
        "7 noise constant shift (bitwise)",
        r1.mean.to_bits() == r2.mean.to_bits() && m1.mean.to_bits() == m2.mean.to_bits(),
        format!("raw {} vs {}, mollified {} vs {}", r1.mean, r2.mean, m1.mean, m2.mean),
    ));
    let c = 0.75;
    let mut all = true;
    for (_, d) in domains() {
        let k = deterministic_kernel(&d, &harm, 0.5, 0.3, 0.5, 512, &res, seed)?;
        let ks = deterministic_kernel(&d, &harm.shifted(c), 0.5, 0.3, 0.5, 512, &res, seed)?;
        all &= ks.mean.to_bits() == (k.mean * (-c * 0.5f64).exp()).to_bits();
    }
    out.push(Verdict::flag(
        "7 potential shift scales by exp(-ct) (bitwise)",
        all,
        "all domains",
    ));
    Ok(out)
}

/// Runs the suite. `Fast` covers every criterion at reduced Monte Carlo
/// budgets; `Full` uses the acceptance budgets.
pub fn validate_suite(level: Level, opts: &SuiteOptions) -> Result<RunReport> {
    let start = Instant::now();
    let mut payload = Payload::default();
    for n in CRITERIA {
        let verdicts = criterion(n, level, opts)?;
        for v in &verdicts {
            log::info!("{}", v.line());
        }
        payload.verdicts.extend(verdicts);
    }
    let payload_digest = payload.digest()?;
    let config = format!("validate {level:?} seed {} truncation {:?}", opts.seed, opts.truncation);
    Ok(RunReport {
        operation: "validate".into(),
        config_digest: hex::encode(Sha256::digest(config.as_bytes())),
        seed: opts.seed,
        payload,
        payload_digest,
        wall_time_s: start.elapsed().as_secs_f64(),
        tables: Vec::new(),
    })
}
