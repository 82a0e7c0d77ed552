//! Self-contained verification suites: exact algebra, grading, the
//! closed-form BCH limits, and the Brownian driver. The CLI `selftest`
//! subcommand runs all four; the acceptance tests assert on the same
//! results.
//!
//! Oracle values are recomputed here from independent routes (raw
//! exponential series, direct fine-grid integration) rather than asserted
//! from constants, so a regression in either route trips a check.

use crate::driver::{chen_strichartz_c, sample_path, DriverConfig, DriverPath, MultiIndex};
use crate::graded::{
    angular, bch_alpha_beta, dilate, graded_dimension, hnorm, relative_coords, GradedLayout,
};
use crate::lorentz::{
    basis_element, bracket, exp_algebra, group_inv, group_mul, log_group, AlgebraElement,
    BasisKind, GroupElement,
};
use crate::rng::{par_reduce, splitmix64, stream_seed, tag};
use serde::Serialize;
use std::time::Instant;

/// One named check with its measured value.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// One suite: a bundle of checks plus wall time.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub elapsed_ms: u128,
    pub checks: Vec<CheckResult>,
}

impl SuiteResult {
    fn finish(name: &str, start: Instant, checks: Vec<CheckResult>) -> Self {
        SuiteResult {
            name: name.into(),
            passed: checks.iter().all(|c| c.passed),
            elapsed_ms: start.elapsed().as_millis(),
            checks,
        }
    }
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail,
    }
}

fn sample_algebra(d: usize, seed: u64, scale: f64) -> AlgebraElement {
    let mut state = splitmix64(seed ^ 0x5851_F42D_4C95_7F2D);
    let mut next = || {
        state = splitmix64(state);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut a = AlgebraElement::zero(d);
    for i in 1..=d {
        a.set_first(i, scale * next());
        a.set_spat(i, scale * next());
    }
    a.set_time(scale * next());
    for i in 1..d {
        for j in (i + 1)..=d {
            a.set_rot(i, j, scale * next());
        }
    }
    a
}

/// Exact algebra suite: bracket table, Jacobi identity, exp/log round trips.
pub fn suite_algebra(seed: u64) -> SuiteResult {
    let start = Instant::now();
    let mut checks = Vec::new();

    // bracket table over all supported dimensions
    let mut table_ok = true;
    let mut table_worst = 0.0f64;
    for d in 2..=6 {
        let e = |k| basis_element(k, d).unwrap();
        for i in 1..=d {
            for j in (i + 1)..=d {
                let diff = bracket(&e(BasisKind::First(i)), &e(BasisKind::First(j)))
                    .max_abs_diff(&e(BasisKind::Rotation(i, j)));
                table_worst = table_worst.max(diff);
            }
            let diff = bracket(&e(BasisKind::First(i)), &e(BasisKind::TimeTranslation))
                .max_abs_diff(&e(BasisKind::SpaceTranslation(i)));
            table_worst = table_worst.max(diff);
            let inner = bracket(&e(BasisKind::First(i)), &e(BasisKind::TimeTranslation));
            let diff = bracket(&e(BasisKind::First(i)), &inner)
                .max_abs_diff(&e(BasisKind::TimeTranslation));
            table_worst = table_worst.max(diff);
        }
        table_ok &= table_worst == 0.0;
    }
    checks.push(check(
        "bracket table ([Ei,Ej]=Eij, [Ei,E0]=Ei0, [Ei,[Ei,E0]]=E0)",
        table_ok,
        format!("worst deviation {table_worst:.1e}"),
    ));

    // Jacobi identity on random triples
    let mut jac_worst = 0.0f64;
    for k in 0..200u64 {
        let d = 2 + (k % 5) as usize;
        let a = sample_algebra(d, seed ^ (3 * k), 1.0);
        let b = sample_algebra(d, seed ^ (3 * k + 1), 1.0);
        let c = sample_algebra(d, seed ^ (3 * k + 2), 1.0);
        let s = bracket(&a, &bracket(&b, &c))
            .add(&bracket(&b, &bracket(&c, &a)))
            .add(&bracket(&c, &bracket(&a, &b)));
        jac_worst = jac_worst.max(s.max_abs_diff(&AlgebraElement::zero(d)));
    }
    checks.push(check(
        "Jacobi identity",
        jac_worst <= 1e-12,
        format!("worst {jac_worst:.2e}"),
    ));

    // exp/log round trips
    let mut rt_worst = 0.0f64;
    for k in 0..300u64 {
        let d = 2 + (k % 5) as usize;
        let a = sample_algebra(d, seed ^ (1000 + k), 0.3);
        let w = match log_group(&exp_algebra(&a)) {
            Ok(w) => w,
            Err(_) => {
                rt_worst = f64::INFINITY;
                break;
            }
        };
        rt_worst = rt_worst.max(w.max_abs_diff(&a));
    }
    checks.push(check(
        "exp/log round trip",
        rt_worst <= 1e-9,
        format!("worst {rt_worst:.2e}"),
    ));

    // group inverse and isometry preservation
    let mut inv_worst = 0.0f64;
    for k in 0..100u64 {
        let d = 2 + (k % 5) as usize;
        let g = exp_algebra(&sample_algebra(d, seed ^ (7000 + k), 0.8));
        let p = group_mul(&g, &group_inv(&g));
        inv_worst = inv_worst.max(p.matrix().max_abs_diff(&GroupElement::identity(d).matrix()));
        inv_worst = inv_worst.max(g.isometry_defect());
    }
    checks.push(check(
        "inverse and isometry",
        inv_worst <= 1e-10,
        format!("worst {inv_worst:.2e}"),
    ));

    SuiteResult::finish("algebra", start, checks)
}

/// Grading suite: graded dimension, homogeneity, angular idempotence,
/// quasi-triangle constant.
pub fn suite_grading(seed: u64) -> SuiteResult {
    let start = Instant::now();
    let mut checks = Vec::new();

    let q_ok = (2..=6).all(|d| {
        let (l1, l2, l3) = GradedLayout::new(d).unwrap().layer_sizes();
        graded_dimension(d) == d * d + 3 * d + 2 && l1 + 2 * l2 + 3 * l3 == graded_dimension(d)
    });
    checks.push(check(
        "graded dimension Q(d) = d^2+3d+2 for d in 2..=6",
        q_ok,
        format!("Q(2)={}, Q(3)={}", graded_dimension(2), graded_dimension(3)),
    ));

    let mut hom_worst = 0.0f64;
    for k in 0..2000u64 {
        let d = 2 + (k % 5) as usize;
        let a = sample_algebra(d, seed ^ (30_000 + k), 1.0);
        let eps = 0.01 + (k % 97) as f64 * 0.07;
        let lhs = hnorm(&dilate(eps, &a));
        let rhs = eps * hnorm(&a);
        if rhs > 0.0 {
            hom_worst = hom_worst.max(((lhs - rhs) / rhs).abs());
        }
    }
    checks.push(check(
        "hnorm homogeneity",
        hom_worst <= 1e-12,
        format!("worst rel {hom_worst:.2e}"),
    ));

    let mut ang_worst = 0.0f64;
    for k in 0..2000u64 {
        let d = 2 + (k % 5) as usize;
        let a = sample_algebra(d, seed ^ (60_000 + k), 1.0);
        if hnorm(&a) > 1e-9 {
            let th = angular(&a).unwrap();
            ang_worst = ang_worst.max((hnorm(&th) - 1.0).abs());
            ang_worst = ang_worst.max(th.max_abs_diff(&angular(&th).unwrap()));
        }
    }
    checks.push(check(
        "angular idempotence",
        ang_worst <= 1e-12,
        format!("worst {ang_worst:.2e}"),
    ));

    // quasi-triangle constant on random triples in a small chart
    let n_triples = 100_000usize;
    let worst_ratio = par_reduce(
        n_triples,
        1024,
        || 0.0f64,
        |acc, i| {
            let i = i as u64;
            let w = exp_algebra(&sample_algebra(2, seed ^ (90_000 + 3 * i), 0.05));
            let y = exp_algebra(&sample_algebra(2, seed ^ (90_001 + 3 * i), 0.05));
            let z = exp_algebra(&sample_algebra(2, seed ^ (90_002 + 3 * i), 0.05));
            let yw = hnorm(&relative_coords(&w, &y).unwrap());
            let zw = hnorm(&relative_coords(&w, &z).unwrap());
            let zy = hnorm(&relative_coords(&y, &z).unwrap());
            if zw + zy > 1e-12 {
                let r = yw / (zw + zy);
                if r > *acc {
                    *acc = r;
                }
            }
        },
        |a, b| {
            if b > *a {
                *a = b;
            }
        },
    );
    checks.push(check(
        "quasi-triangle constant < 10 (100k triples)",
        worst_ratio < 10.0,
        format!("empirical constant {worst_ratio:.3}"),
    ));

    SuiteResult::finish("grading", start, checks)
}

/// Closed-form BCH limit suite: alpha and beta against the numeric
/// extrapolation through the matrix logarithm at eps = 2^-7.
pub fn suite_bch(seed: u64) -> SuiteResult {
    suite_bch_sized(seed, 1000)
}

/// [`suite_bch`] with a custom pair count.
pub fn suite_bch_sized(seed: u64, n_pairs: usize) -> SuiteResult {
    let start = Instant::now();
    let mut checks = Vec::new();
    let eps = 2f64.powi(-7);
    let (worst_alpha, worst_beta, degenerate) = par_reduce(
        n_pairs,
        64,
        || (0.0f64, 0.0f64, 0usize),
        |acc, i| {
            let i = i as u64;
            let u = sample_algebra(2, seed ^ (200_000 + 2 * i), 1.0);
            let v = sample_algebra(2, seed ^ (200_001 + 2 * i), 1.0);
            let (alpha, beta) = match bch_alpha_beta(&u, &v) {
                Ok(x) => x,
                Err(_) => {
                    acc.2 += 1;
                    return;
                }
            };
            let ue = exp_algebra(&dilate(eps, &u));
            let ve = exp_algebra(&dilate(eps, &v));
            let w = relative_coords(&ue, &ve).unwrap();
            let alpha_num = hnorm(&w) / eps;
            let rel = (alpha_num / alpha - 1.0).abs();
            if rel > acc.0 {
                acc.0 = rel;
            }
            let beta_num = angular(&dilate(1.0 / eps, &w)).unwrap();
            let bdiff = beta_num.max_abs_diff(&beta);
            if bdiff > acc.1 {
                acc.1 = bdiff;
            }
        },
        |a, b| {
            a.0 = a.0.max(b.0);
            a.1 = a.1.max(b.1);
            a.2 += b.2;
        },
    );
    checks.push(check(
        &format!("alpha vs numeric log at eps=2^-7 ({n_pairs} pairs)"),
        worst_alpha < 1e-2 && degenerate == 0,
        format!("worst rel err {worst_alpha:.3e}, degenerate {degenerate}"),
    ));
    checks.push(check(
        "beta vs numeric log at eps=2^-7",
        worst_beta < 5e-2,
        format!("worst componentwise err {worst_beta:.3e}"),
    ));

    SuiteResult::finish("bch-limits", start, checks)
}

/// Driver suite: increment law, Lévy-area second moment against the direct
/// oracle, the coefficient identities, and grid-refinement consistency.
pub fn suite_driver(seed: u64) -> SuiteResult {
    let start = Instant::now();
    let mut checks = Vec::new();

    // Levy-area second moment: driver route and independent fine-grid route
    let n_paths = 100_000usize;
    let (sum_drv, sum_orc) = par_reduce(
        n_paths,
        256,
        || (0.0f64, 0.0f64),
        |acc, i| {
            let c = DriverConfig {
                seed: stream_seed(seed, tag::DRIVER, i as u64),
                horizon: 1.0,
                step: 1e-3,
                m: 2,
                substep: 8,
            };
            let p = sample_path(&c).unwrap();
            let mut area = 0.0;
            let mut b = [0.0f64; 2];
            for r in &p.records {
                area += r.area_at(0, 1, 2) + 0.5 * (b[0] * r.db[1] - b[1] * r.db[0]);
                b[0] += r.db[0];
                b[1] += r.db[1];
            }
            acc.0 += area * area;
            // independent oracle: raw midpoint accumulation, fresh stream
            use rand::Rng;
            use rand_chacha::rand_core::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(stream_seed(
                seed ^ 0xABCD,
                tag::DRIVER,
                i as u64,
            ));
            let n_fine = 1000usize;
            let hf = 1.0 / n_fine as f64;
            let sq = hf.sqrt();
            let (mut b1, mut b2, mut a) = (0.0f64, 0.0f64, 0.0f64);
            for _ in 0..n_fine {
                let z1: f64 = rng.sample(rand_distr::StandardNormal);
                let z2: f64 = rng.sample(rand_distr::StandardNormal);
                let (d1, d2) = (sq * z1, sq * z2);
                a += 0.5 * ((b1 + 0.5 * d1) * d2 - (b2 + 0.5 * d2) * d1);
                b1 += d1;
                b2 += d2;
            }
            acc.1 += a * a;
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    );
    let m_drv = sum_drv / n_paths as f64;
    let m_orc = sum_orc / n_paths as f64;
    checks.push(check(
        "Levy area second moment = 1/4 (driver, 100k paths)",
        (m_drv / 0.25 - 1.0).abs() < 0.02,
        format!("driver {m_drv:.5}"),
    ));
    checks.push(check(
        "Levy area second moment = 1/4 (direct oracle)",
        (m_orc / 0.25 - 1.0).abs() < 0.02,
        format!("oracle {m_orc:.5}"),
    ));

    // coefficient identities and refinement consistency on a fixed path
    let fine = sample_path(&DriverConfig {
        seed: stream_seed(seed, tag::DRIVER, 777),
        horizon: 1.0,
        step: 2.5e-4,
        m: 2,
        substep: 1,
    })
    .unwrap();
    let coarse = fine.coarsen(4);
    let b1: f64 = fine.records.iter().map(|r| r.db[0]).sum();
    let c1 = chen_strichartz_c(&MultiIndex::new(&[1]), &fine, 1.0).unwrap();
    let c0 = chen_strichartz_c(&MultiIndex::new(&[0]), &fine, 1.0).unwrap();
    checks.push(check(
        "c^(i) = B^i and c^(0) = t",
        (c1 - b1).abs() < 1e-12 && (c0 - 1.0).abs() < 1e-12,
        format!(
            "|c1-B1|={:.1e}, |c0-1|={:.1e}",
            (c1 - b1).abs(),
            (c0 - 1.0).abs()
        ),
    ));
    let anti = |p: &DriverPath| {
        let c12 = chen_strichartz_c(&MultiIndex::new(&[1, 2]), p, 1.0).unwrap();
        let c21 = chen_strichartz_c(&MultiIndex::new(&[2, 1]), p, 1.0).unwrap();
        (c12 - c21, c12 + c21)
    };
    let (area_fine, antisym_fine) = anti(&fine);
    let (area_coarse, _) = anti(&coarse);
    // direct accumulation from the same records
    let mut direct = 0.0;
    let mut b = [0.0f64; 2];
    for r in &fine.records {
        direct += r.area_at(0, 1, 2) + 0.5 * (b[0] * r.db[1] - b[1] * r.db[0]);
        b[0] += r.db[0];
        b[1] += r.db[1];
    }
    checks.push(check(
        "c^(12)-c^(21) equals the direct area, refinement-consistent",
        (area_fine - direct).abs() < 1e-12
            && (area_fine - area_coarse).abs() < 1e-12
            && antisym_fine.abs() < 1e-15,
        format!(
            "|c-direct|={:.1e}, |fine-coarse|={:.1e}",
            (area_fine - direct).abs(),
            (area_fine - area_coarse).abs()
        ),
    ));

    SuiteResult::finish("driver", start, checks)
}

/// Runs suites 1 through 4.
pub fn run_selftest(seed: u64) -> Vec<SuiteResult> {
    vec![
        suite_algebra(seed),
        suite_grading(seed),
        suite_bch(seed),
        suite_driver(seed),
    ]
}
