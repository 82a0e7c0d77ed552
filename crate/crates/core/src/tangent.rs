//! The explicit algebra-valued tangent process, its scaling-law and coupled
//! Taylor-remainder harnesses, and occupation-density estimation of the
//! tangent Green function on the future half space.
//!
//! The tangent process has coordinates
//! `u_i = B^i_t`, `u_0 = t`,
//! `u_ij = (1/2)(int B^i o dB^j - int B^j o dB^i)`,
//! `u_i0 = (1/2)(int B^i ds - int s o dB^i)`,
//! accumulated exactly from the driver's per-step records. The time
//! coordinate equals elapsed time identically, which the occupation
//! estimator uses for exact horizon truncation.

use crate::driver::{chen_strichartz_c, DriverPath, MultiIndex, StepGen, StepRecord};
use crate::error::{Error, Result};
use crate::graded::{dilate, hnorm, GradedLayout};
use crate::lorentz::AlgebraElement;
use crate::rng::{par_reduce, stream_seed, tag};
use crate::stats::{ks_critical, ks_statistic, mean_stderr_from_moments, quantile};
use crate::{check_dim, diffusion};
use serde::Serialize;

/// Tangent-process state at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentState {
    pub t: f64,
    pub u: AlgebraElement,
}

/// Streaming accumulator for the tangent coordinates.
#[derive(Debug, Clone)]
pub struct TangentAccumulator {
    d: usize,
    t: f64,
    b: [f64; 6],
    ibds: [f64; 6],
    isdb: [f64; 6],
    rot: [f64; 15],
}

impl TangentAccumulator {
    pub fn new(d: usize) -> Self {
        TangentAccumulator {
            d,
            t: 0.0,
            b: [0.0; 6],
            ibds: [0.0; 6],
            isdb: [0.0; 6],
            rot: [0.0; 15],
        }
    }

    pub fn step(&mut self, rec: &StepRecord) {
        let d = self.d;
        for i in 0..d {
            self.ibds[i] += rec.tb[i] + self.b[i] * rec.dt;
            self.isdb[i] += rec.sb[i] + self.t * rec.db[i];
            for j in (i + 1)..d {
                self.rot[crate::driver::pair_index(i, j, d)] += rec.area
                    [crate::driver::pair_index(i, j, d)]
                    + 0.5 * (self.b[i] * rec.db[j] - self.b[j] * rec.db[i]);
            }
        }
        for i in 0..d {
            self.b[i] += rec.db[i];
        }
        self.t += rec.dt;
    }

    pub fn state(&self) -> TangentState {
        let d = self.d;
        let mut u = AlgebraElement::zero(d);
        for i in 1..=d {
            u.set_first(i, self.b[i - 1]);
            u.set_spat(i, 0.5 * (self.ibds[i - 1] - self.isdb[i - 1]));
        }
        u.set_time(self.t);
        for i in 1..d {
            for j in (i + 1)..=d {
                u.set_rot(i, j, self.rot[crate::driver::pair_index(i - 1, j - 1, d)]);
            }
        }
        TangentState { t: self.t, u }
    }
}

/// Accumulates the tangent process along a stored driver path.
pub fn tangent_simulate(driver: &DriverPath) -> Vec<TangentState> {
    let d = driver.m();
    let mut acc = TangentAccumulator::new(d);
    let mut out = Vec::with_capacity(driver.records.len() + 1);
    out.push(acc.state());
    for rec in &driver.records {
        acc.step(rec);
        out.push(acc.state());
    }
    out
}

/// Assembles the tangent coordinates at time `t` from the descent-weighted
/// combinations: `u_i = c^(i)`, `u_0 = c^(0)`, `u_ij = c^(i,j) - c^(j,i)`,
/// `u_i0 = c^(i,0) - c^(0,i)`.
///
/// Agrees with [`tangent_simulate`] identically on the same driver; kept as
/// an independent assembly route for the consistency suite.
pub fn tangent_from_chen(driver: &DriverPath, t: f64) -> Result<AlgebraElement> {
    let d = driver.m();
    let mut u = AlgebraElement::zero(d);
    for i in 1..=d {
        u.set_first(i, chen_strichartz_c(&MultiIndex::new(&[i]), driver, t)?);
        let ci0 = chen_strichartz_c(&MultiIndex::new(&[i, 0]), driver, t)?;
        let c0i = chen_strichartz_c(&MultiIndex::new(&[0, i]), driver, t)?;
        u.set_spat(i, ci0 - c0i);
    }
    u.set_time(chen_strichartz_c(&MultiIndex::new(&[0]), driver, t)?);
    for i in 1..d {
        for j in (i + 1)..=d {
            let cij = chen_strichartz_c(&MultiIndex::new(&[i, j]), driver, t)?;
            let cji = chen_strichartz_c(&MultiIndex::new(&[j, i]), driver, t)?;
            u.set_rot(i, j, cij - cji);
        }
    }
    Ok(u)
}

/// Axis-aligned box in slot coordinates with per-layer half-widths.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlotBox {
    /// Center in canonical slot coordinates (as an algebra element).
    #[serde(skip)]
    pub center: AlgebraElement,
    /// Half-widths for layers 1, 2, 3.
    pub half: [f64; 3],
}

impl SlotBox {
    /// Box at a probe with relative half-widths scaled to the probe gauge:
    /// layer-k half-width is `rel_half[k-1] * r^k` with `r = hnorm(probe)`
    /// (unit scale for a zero probe).
    pub fn at_probe(probe: &AlgebraElement, rel_half: [f64; 3]) -> Self {
        let r = hnorm(probe);
        let r = if r > 0.0 { r } else { 1.0 };
        SlotBox {
            center: *probe,
            half: [
                rel_half[0] * r,
                rel_half[1] * r * r,
                rel_half[2] * r * r * r,
            ],
        }
    }

    /// The image of the box under the dilation `T_eps` (center dilated,
    /// half-widths scaled per layer).
    pub fn dilated(&self, eps: f64) -> Self {
        SlotBox {
            center: dilate(eps, &self.center),
            half: [
                self.half[0] * eps,
                self.half[1] * eps * eps,
                self.half[2] * eps * eps * eps,
            ],
        }
    }

    pub fn contains(&self, u: &AlgebraElement) -> bool {
        let d = self.center.dim();
        for i in 1..=d {
            if (u.first(i) - self.center.first(i)).abs() > self.half[0] {
                return false;
            }
        }
        if (u.time() - self.center.time()).abs() > self.half[1] {
            return false;
        }
        for i in 1..d {
            for j in (i + 1)..=d {
                if (u.rot(i, j) - self.center.rot(i, j)).abs() > self.half[1] {
                    return false;
                }
            }
        }
        for i in 1..=d {
            if (u.spat(i) - self.center.spat(i)).abs() > self.half[2] {
                return false;
            }
        }
        true
    }

    /// Lebesgue volume in slot coordinates.
    pub fn volume(&self) -> f64 {
        let d = self.center.dim();
        let (l1, l2, l3) = GradedLayout::new(d).expect("valid dim").layer_sizes();
        (2.0 * self.half[0]).powi(l1 as i32)
            * (2.0 * self.half[1]).powi(l2 as i32)
            * (2.0 * self.half[2]).powi(l3 as i32)
    }

    /// Time window during which the tangent process can be inside the box.
    pub fn time_window(&self) -> (f64, f64) {
        (
            self.center.time() - self.half[1],
            self.center.time() + self.half[1],
        )
    }
}

/// Configuration of the tangent occupation estimator.
#[derive(Debug, Clone)]
pub struct PhiConfig {
    pub d: usize,
    pub n_paths: usize,
    pub step: f64,
    pub substep: usize,
    pub seed: u64,
    /// Relative per-layer half-widths, scaled to each probe's gauge.
    pub rel_half: [f64; 3],
}

/// One row of the occupation-density table.
#[derive(Debug, Clone, Serialize)]
pub struct PhiRow {
    pub probe_slots: Vec<f64>,
    pub phi: f64,
    pub stderr: f64,
    /// One-sided 95% upper bound when no path hit the box.
    pub upper95: Option<f64>,
    pub hits: usize,
    pub n_paths: usize,
    pub box_half: [f64; 3],
    pub horizon: f64,
}

/// Estimates the occupation density of the tangent process at probe points
/// by box counting.
///
/// The horizon is truncated exactly at the end of the box's time window
/// because the time coordinate of the process equals elapsed time. Probes
/// whose window lies entirely in the past report an exact zero.
pub fn phi_estimate(cfg: &PhiConfig, probes: &[AlgebraElement]) -> Result<Vec<PhiRow>> {
    check_dim(cfg.d)?;
    if cfg.n_paths == 0 {
        return Err(Error::InsufficientPaths { needed: 1, got: 0 });
    }
    let layout = GradedLayout::new(cfg.d)?;
    let mut rows = Vec::with_capacity(probes.len());
    for (pi, probe) in probes.iter().enumerate() {
        let b = SlotBox::at_probe(probe, cfg.rel_half);
        let (_, t_hi) = b.time_window();
        let volume = b.volume();
        if t_hi <= 0.0 {
            // the process lives on {u_0 = t >= 0}
            rows.push(PhiRow {
                probe_slots: layout.to_slots(probe),
                phi: 0.0,
                stderr: 0.0,
                upper95: None,
                hits: 0,
                n_paths: cfg.n_paths,
                box_half: b.half,
                horizon: 0.0,
            });
            continue;
        }
        let n_steps = (t_hi / cfg.step).ceil() as usize;
        let (sum, sum_sq, hits) = par_reduce(
            cfg.n_paths,
            128,
            || (0.0f64, 0.0f64, 0usize),
            |acc, i| {
                let seed = stream_seed(cfg.seed, tag::TANGENT, (pi as u64) << 40 | i as u64);
                let mut gen = StepGen::new(seed, cfg.d, cfg.substep);
                let mut tacc = TangentAccumulator::new(cfg.d);
                let mut occ = 0.0;
                for _ in 0..n_steps {
                    let rec = gen.next_step(cfg.step);
                    tacc.step(&rec);
                    let st = tacc.state();
                    if b.contains(&st.u) {
                        occ += rec.dt;
                    }
                }
                if occ > 0.0 {
                    acc.2 += 1;
                }
                acc.0 += occ;
                acc.1 += occ * occ;
            },
            |a, c| {
                a.0 += c.0;
                a.1 += c.1;
                a.2 += c.2;
            },
        );
        let (mean, se) = mean_stderr_from_moments(sum, sum_sq, cfg.n_paths);
        let upper95 = if hits == 0 {
            // all-zero sample: bound the hit probability by 3/N and the
            // per-path occupancy by the window length
            Some(3.0 / cfg.n_paths as f64 * (2.0 * b.half[1]) / volume)
        } else {
            None
        };
        rows.push(PhiRow {
            probe_slots: layout.to_slots(probe),
            phi: mean / volume,
            stderr: se / volume,
            upper95,
            hits,
            n_paths: cfg.n_paths,
            box_half: b.half,
            horizon: t_hi,
        });
    }
    Ok(rows)
}

/// Configuration of the law-scaling test.
#[derive(Debug, Clone)]
pub struct ScalingTestConfig {
    pub d: usize,
    pub eps: f64,
    pub t: f64,
    pub n_paths: usize,
    pub step: f64,
    pub substep: usize,
    pub seed: u64,
}

/// Per-coordinate two-sample KS comparison of `u_(eps^2 t)` against
/// `T_eps u_t`.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub eps: f64,
    pub t: f64,
    pub n_paths: usize,
    pub coord_names: Vec<String>,
    pub ks_stats: Vec<f64>,
    pub ks_critical_1pct: f64,
    /// Deterministic coordinate check: max |u_0(eps^2 t) - eps^2 u_0(t)|.
    pub time_coord_defect: f64,
}

impl ScalingReport {
    pub fn all_below_critical(&self) -> bool {
        self.ks_stats.iter().all(|s| *s < self.ks_critical_1pct)
    }
}

fn stochastic_slots(layout: &GradedLayout) -> Vec<usize> {
    // all slots except the deterministic time coordinate
    let d = layout.dim();
    (0..layout.n_slots()).filter(|&s| s != d).collect()
}

/// Samples the tangent state at a fixed time over fresh drivers, returning
/// the selected slot coordinates per path.
#[allow(clippy::too_many_arguments)]
fn sample_marginal(
    d: usize,
    t: f64,
    step: f64,
    substep: usize,
    n: usize,
    seed: u64,
    stream: u64,
    slots: &[usize],
) -> Vec<Vec<f64>> {
    let layout = GradedLayout::new(d).expect("valid dim");
    let n_steps = (t / step).round().max(1.0) as usize;
    let h = t / n_steps as f64;
    let cols = slots.len();
    let flat: Vec<f64> = par_reduce(
        n,
        128,
        Vec::new,
        |acc, i| {
            let mut gen = StepGen::new(stream_seed(seed, stream, i as u64), d, substep);
            let mut tacc = TangentAccumulator::new(d);
            for _ in 0..n_steps {
                let rec = gen.next_step(h);
                tacc.step(&rec);
            }
            let all = layout.to_slots(&tacc.state().u);
            acc.extend(slots.iter().map(|&s| all[s]));
        },
        |a, b| a.extend_from_slice(&b),
    );
    let n_rows = flat.len() / cols;
    (0..cols)
        .map(|c| (0..n_rows).map(|r| flat[r * cols + c]).collect())
        .collect()
}

/// Compares the marginal law of `u_(eps^2 t)` with the dilated law
/// `T_eps u_t`, coordinate by coordinate, on independent path batches.
pub fn scaling_law_test(cfg: &ScalingTestConfig) -> Result<ScalingReport> {
    check_dim(cfg.d)?;
    if !(cfg.eps > 0.0 && cfg.eps <= 1.0) {
        return Err(Error::InvalidParams("eps must lie in (0, 1]".into()));
    }
    let layout = GradedLayout::new(cfg.d)?;
    let slots = stochastic_slots(&layout);
    let e2 = cfg.eps * cfg.eps;
    // short-time marginal
    let a = sample_marginal(
        cfg.d,
        e2 * cfg.t,
        cfg.step * e2,
        cfg.substep,
        cfg.n_paths,
        cfg.seed,
        tag::SCALING_A,
        &slots,
    );
    // dilated long-time marginal
    let b_raw = sample_marginal(
        cfg.d,
        cfg.t,
        cfg.step,
        cfg.substep,
        cfg.n_paths,
        cfg.seed,
        tag::SCALING_B,
        &slots,
    );
    // apply T_eps per slot layer
    let b: Vec<Vec<f64>> = b_raw
        .iter()
        .zip(slots.iter())
        .map(|(col, &s)| {
            let k = layout.slot_layer(s) as i32;
            let f = cfg.eps.powi(k);
            col.iter().map(|x| f * x).collect()
        })
        .collect();
    let names = layout.slot_names();
    let ks_stats: Vec<f64> = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| ks_statistic(x, y))
        .collect();
    // deterministic coordinate: u_0(eps^2 t) = eps^2 t exactly
    let n_steps = (e2 * cfg.t / (cfg.step * e2)).round().max(1.0) as usize;
    let h = e2 * cfg.t / n_steps as f64;
    let time_coord_defect = (h * n_steps as f64 - e2 * cfg.t).abs();
    Ok(ScalingReport {
        eps: cfg.eps,
        t: cfg.t,
        n_paths: cfg.n_paths,
        coord_names: slots.iter().map(|&s| names[s].clone()).collect(),
        ks_stats,
        ks_critical_1pct: ks_critical(0.01, cfg.n_paths, cfg.n_paths),
        time_coord_defect,
    })
}

/// Two-sided occupation-scaling check: mean time spent in the dilated box
/// `T_eps A` against `eps^2` times the mean time spent in `A`.
#[derive(Debug, Clone, Serialize)]
pub struct OccupationScalingReport {
    pub eps: f64,
    pub occ_box: f64,
    pub occ_box_stderr: f64,
    pub occ_dilated: f64,
    pub occ_dilated_stderr: f64,
    /// `occ_dilated / (eps^2 occ_box)`.
    pub ratio: f64,
}

fn mean_box_occupancy(
    d: usize,
    b: &SlotBox,
    step: f64,
    substep: usize,
    n_paths: usize,
    seed: u64,
    stream: u64,
) -> (f64, f64) {
    let (_, t_hi) = b.time_window();
    let n_steps = (t_hi.max(0.0) / step).ceil() as usize;
    let (sum, sum_sq) = par_reduce(
        n_paths,
        128,
        || (0.0f64, 0.0f64),
        |acc, i| {
            let mut gen = StepGen::new(stream_seed(seed, stream, i as u64), d, substep);
            let mut tacc = TangentAccumulator::new(d);
            let mut o = 0.0;
            for _ in 0..n_steps {
                let rec = gen.next_step(step);
                tacc.step(&rec);
                if b.contains(&tacc.state().u) {
                    o += rec.dt;
                }
            }
            acc.0 += o;
            acc.1 += o * o;
        },
        |a, c| {
            a.0 += c.0;
            a.1 += c.1;
        },
    );
    mean_stderr_from_moments(sum, sum_sq, n_paths)
}

pub fn occupation_scaling_test(
    cfg: &PhiConfig,
    probe: &AlgebraElement,
    eps: f64,
) -> Result<OccupationScalingReport> {
    let base = SlotBox::at_probe(probe, cfg.rel_half);
    let (m_base, se_base) = mean_box_occupancy(
        cfg.d,
        &base,
        cfg.step,
        cfg.substep,
        cfg.n_paths,
        cfg.seed,
        tag::SCALING_A,
    );
    // the dilated run shrinks the step by eps^2 so the box time window keeps
    // the same number of grid points
    let dil = base.dilated(eps);
    let (m_dil, se_dil) = mean_box_occupancy(
        cfg.d,
        &dil,
        cfg.step * eps * eps,
        cfg.substep,
        cfg.n_paths,
        cfg.seed,
        tag::SCALING_B,
    );
    let e2 = eps * eps;
    Ok(OccupationScalingReport {
        eps,
        occ_box: m_base,
        occ_box_stderr: se_base,
        occ_dilated: m_dil,
        occ_dilated_stderr: se_dil,
        ratio: if m_base > 0.0 {
            m_dil / (e2 * m_base)
        } else {
            f64::NAN
        },
    })
}

/// Configuration of the coupled Taylor-remainder harness.
#[derive(Debug, Clone)]
pub struct TaylorConfig {
    pub d: usize,
    /// Decreasing ladder of zoom scales.
    pub eps_ladder: Vec<f64>,
    /// Rescaled horizon.
    pub t: f64,
    pub n_paths: usize,
    /// Step on the rescaled clock.
    pub step: f64,
    pub seed: u64,
}

/// Quantiles of the per-path sup remainder at one zoom scale.
#[derive(Debug, Clone, Serialize)]
pub struct TaylorRung {
    pub eps: f64,
    pub median: f64,
    pub q90: f64,
    pub censored: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaylorReport {
    pub rungs: Vec<TaylorRung>,
}

/// Couples the rescaled diffusion and the tangent process on shared drivers
/// and reports quantiles of `sup_t ||v^(eps)_t - u_t|| / eps`.
///
/// Both processes are exact functionals of the same piecewise-linear driver,
/// so the remainder measures the zoom expansion itself, not grid noise.
/// Chart overflows censor a path at the overflow time.
pub fn taylor_remainder_test(cfg: &TaylorConfig) -> Result<TaylorReport> {
    check_dim(cfg.d)?;
    if cfg.eps_ladder.is_empty() || cfg.eps_ladder.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::InvalidParams("eps ladder must lie in (0, 1]".into()));
    }
    let n_steps = (cfg.t / cfg.step).round().max(1.0) as usize;
    let h = cfg.t / n_steps as f64;
    let mut rungs = Vec::new();
    for &eps in &cfg.eps_ladder {
        let e2 = eps * eps;
        let diff_cfg = diffusion::DiffusionConfig {
            d: cfg.d,
            sigma: 1.0,
            step: h * e2,
            horizon: cfg.t * e2,
            radius: None,
            scheme: diffusion::Scheme::ExponentialEuler,
        };
        let (mut sups, censored) = par_reduce(
            cfg.n_paths,
            64,
            || (Vec::new(), 0usize),
            |acc, i| {
                let mut gen = StepGen::new(stream_seed(cfg.seed, tag::TANGENT, i as u64), cfg.d, 1);
                let mut walker = diffusion::Walker::new(&diff_cfg);
                let mut tacc = TangentAccumulator::new(cfg.d);
                let mut sup = 0.0f64;
                let mut cens = false;
                for _ in 0..n_steps {
                    let rec = gen.next_step(h);
                    tacc.step(&rec);
                    // same Brownian letters on the micro clock
                    let mut micro = rec;
                    micro.dt = rec.dt * e2;
                    for k in 0..cfg.d {
                        micro.db[k] = rec.db[k] * eps;
                        micro.tb[k] = rec.tb[k] * eps * e2;
                        micro.sb[k] = rec.sb[k] * eps * e2;
                    }
                    for a in micro.area.iter_mut() {
                        *a *= e2;
                    }
                    match walker.step(&micro, true) {
                        Ok(Some(w)) => {
                            let v = dilate(1.0 / eps, &w);
                            let r = v.sub(&tacc.state().u).euclid_norm() / eps;
                            sup = sup.max(r);
                        }
                        Ok(None) => unreachable!(),
                        Err(_) => {
                            cens = true;
                            break;
                        }
                    }
                }
                acc.0.push(sup);
                if cens {
                    acc.1 += 1;
                }
            },
            |a, b| {
                a.0.extend_from_slice(&b.0);
                a.1 += b.1;
            },
        );
        sups.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rungs.push(TaylorRung {
            eps,
            median: quantile(&sups, 0.5),
            q90: quantile(&sups, 0.9),
            censored,
        });
    }
    Ok(TaylorReport { rungs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{sample_path, DriverConfig};
    use crate::graded::{angular, slot_basis_kinds};
    use crate::lorentz::{basis_element, bracket, BasisKind};

    #[test]
    fn zero_driver_gives_pure_time_flow() {
        let d = 2;
        let driver = DriverPath {
            cfg: DriverConfig {
                seed: 0,
                horizon: 1.0,
                step: 0.1,
                m: d,
                substep: 1,
            },
            records: (0..10).map(|_| StepRecord::zero(0.1)).collect(),
        };
        let states = tangent_simulate(&driver);
        let last = states.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-15);
        assert!((last.u.time() - 1.0).abs() < 1e-15);
        assert_eq!(last.u.first(1), 0.0);
        assert_eq!(last.u.rot(1, 2), 0.0);
        assert_eq!(last.u.spat(1), 0.0);
    }

    #[test]
    fn time_coordinate_is_exact() {
        let driver = sample_path(&DriverConfig {
            seed: 3,
            horizon: 1.0,
            step: 0.01,
            m: 2,
            substep: 2,
        })
        .unwrap();
        for (k, st) in tangent_simulate(&driver).iter().enumerate() {
            // elapsed time accumulates the same dt sums on both sides
            assert_eq!(st.u.time(), st.t, "step {k}");
        }
    }

    #[test]
    fn chen_assembly_matches_direct_accumulation() {
        // the two routes are algebraically identical on the interpolated path
        for seed in 0..5 {
            let driver = sample_path(&DriverConfig {
                seed,
                horizon: 1.0,
                step: 0.02,
                m: 2,
                substep: 4,
            })
            .unwrap();
            let direct = tangent_simulate(&driver).last().unwrap().u;
            let assembled = tangent_from_chen(&driver, 1.0).unwrap();
            assert!(
                assembled.max_abs_diff(&direct) < 1e-12,
                "seed {seed}: {:?}",
                assembled.max_abs_diff(&direct)
            );
        }
    }

    #[test]
    fn bracket_table_confirms_assembly_coefficients() {
        // X^(i,j) = E_ij, X^(i,0) = E_i0, X^(0,i) = -E_i0, and length-3
        // bracket monomials stay in the first layer
        let d = 3;
        let e = |k| basis_element(k, d).unwrap();
        for i in 1..=d {
            for j in 1..=d {
                if i == j {
                    continue;
                }
                let x_ij = bracket(&e(BasisKind::First(i)), &e(BasisKind::First(j)));
                let expect = if i < j {
                    e(BasisKind::Rotation(i, j))
                } else {
                    e(BasisKind::Rotation(j, i)).scale(-1.0)
                };
                assert_eq!(x_ij, expect);
            }
            let x_i0 = bracket(&e(BasisKind::First(i)), &e(BasisKind::TimeTranslation));
            assert_eq!(x_i0, e(BasisKind::SpaceTranslation(i)));
            let x_0i = bracket(&e(BasisKind::TimeTranslation), &e(BasisKind::First(i)));
            assert_eq!(x_0i, e(BasisKind::SpaceTranslation(i)).scale(-1.0));
        }
        // [E_i, [E_j, E_k]] has no component outside layer 1
        for i in 1..=d {
            for j in 1..=d {
                for k in 1..=d {
                    if j == k {
                        continue;
                    }
                    let x = bracket(
                        &e(BasisKind::First(i)),
                        &bracket(&e(BasisKind::First(j)), &e(BasisKind::First(k))),
                    );
                    assert_eq!(x.time(), 0.0);
                    for a in 1..=d {
                        assert_eq!(x.spat(a), 0.0);
                        for b in (a + 1)..=d {
                            assert_eq!(x.rot(a, b), 0.0);
                        }
                    }
                }
            }
        }
        let _ = slot_basis_kinds(d);
    }

    #[test]
    fn rotation_coordinate_antisymmetry() {
        let driver = sample_path(&DriverConfig {
            seed: 9,
            horizon: 0.5,
            step: 0.01,
            m: 3,
            substep: 2,
        })
        .unwrap();
        let u = tangent_simulate(&driver).last().unwrap().u;
        for i in 1..=3 {
            for j in 1..=3 {
                if i != j {
                    assert_eq!(u.rot(i, j), -u.rot(j, i));
                }
            }
        }
    }

    #[test]
    fn second_moments_match_fine_grid_oracle() {
        // E[u_12(1)^2] = 1/4 and E[u_10(1)^2] = 1/12; the driver-based values
        // must agree with the independent fine-grid oracle within 2%
        let n = 30_000usize;
        let (s12, s10, o12, o10) = par_reduce(
            n,
            128,
            || (0.0f64, 0.0f64, 0.0f64, 0.0f64),
            |acc, i| {
                let driver = sample_path(&DriverConfig {
                    seed: stream_seed(71, tag::TANGENT, i as u64),
                    horizon: 1.0,
                    step: 0.01,
                    m: 2,
                    substep: 8,
                })
                .unwrap();
                let u = tangent_simulate(&driver).last().unwrap().u;
                acc.0 += u.rot(1, 2) * u.rot(1, 2);
                acc.1 += u.spat(1) * u.spat(1);
                // oracle: direct midpoint/trapezoid accumulation on a fine grid,
                // no driver bookkeeping
                use rand::Rng;
                use rand_chacha::rand_core::SeedableRng;
                let mut rng =
                    rand_chacha::ChaCha8Rng::seed_from_u64(stream_seed(72, tag::TANGENT, i as u64));
                let n_fine = 800usize;
                let hf = 1.0 / n_fine as f64;
                let sq = hf.sqrt();
                let (mut b1, mut b2, mut area, mut ibds, mut isdb) = (0.0, 0.0, 0.0, 0.0, 0.0);
                let mut tau = 0.0;
                for _ in 0..n_fine {
                    let z1: f64 = rng.sample(rand_distr::StandardNormal);
                    let z2: f64 = rng.sample(rand_distr::StandardNormal);
                    let (d1, d2) = (sq * z1, sq * z2);
                    area += 0.5 * ((b1 + 0.5 * d1) * d2 - (b2 + 0.5 * d2) * d1);
                    ibds += (b1 + 0.5 * d1) * hf;
                    isdb += (tau + 0.5 * hf) * d1;
                    b1 += d1;
                    b2 += d2;
                    tau += hf;
                }
                acc.2 += area * area;
                let u10 = 0.5 * (ibds - isdb);
                acc.3 += u10 * u10;
            },
            |a, b| {
                a.0 += b.0;
                a.1 += b.1;
                a.2 += b.2;
                a.3 += b.3;
            },
        );
        let nf = n as f64;
        let (m12, m10, or12, or10) = (s12 / nf, s10 / nf, o12 / nf, o10 / nf);
        assert!((m12 / 0.25 - 1.0).abs() < 0.02, "E[u12^2] = {m12}");
        assert!((m10 / (1.0 / 12.0) - 1.0).abs() < 0.02, "E[u10^2] = {m10}");
        assert!((or12 / 0.25 - 1.0).abs() < 0.02, "oracle E[u12^2] = {or12}");
        assert!(
            (or10 / (1.0 / 12.0) - 1.0).abs() < 0.02,
            "oracle E[u10^2] = {or10}"
        );
    }

    #[test]
    fn slot_box_membership_and_volume() {
        let d = 2;
        let mut probe = AlgebraElement::zero(d);
        probe.set_time(1.0);
        let b = SlotBox::at_probe(&probe, [0.2, 0.1, 0.05]);
        assert_eq!(b.half, [0.2, 0.1, 0.05]);
        // d=2: 2 + 2 + 2 slots
        let vol = (0.4f64).powi(2) * (0.2f64).powi(2) * (0.1f64).powi(2);
        assert!((b.volume() - vol).abs() < 1e-15);
        assert!(b.contains(&probe));
        let mut off = probe;
        off.set_time(1.2);
        assert!(!b.contains(&off));
        // dilation scales the window per layer
        let bd = b.dilated(0.5);
        assert!((bd.half[0] - 0.1).abs() < 1e-15);
        assert!((bd.half[1] - 0.025).abs() < 1e-15);
        assert!((bd.half[2] - 0.00625).abs() < 1e-15);
    }

    #[test]
    fn phi_zero_in_the_past_and_positive_on_axis() {
        let d = 2;
        let cfg = PhiConfig {
            d,
            n_paths: 3000,
            step: 2e-3,
            substep: 2,
            seed: 17,
            rel_half: [0.4, 0.2, 0.3],
        };
        let mut past = AlgebraElement::zero(d);
        past.set_time(-1.0);
        let mut axis = AlgebraElement::zero(d);
        axis.set_time(1.0);
        let rows = phi_estimate(&cfg, &[past, axis]).unwrap();
        assert_eq!(rows[0].phi, 0.0);
        assert_eq!(rows[0].hits, 0);
        assert!(rows[1].phi > 0.0, "axis probe must have positive density");
        assert!(rows[1].hits > 10);
        assert!(rows[1].stderr < rows[1].phi, "stderr too large");
    }

    #[test]
    fn phi_rescaling_consistency() {
        // Phi(T_(1/2) probe) * (1/2)^(Q-2) consistent with Phi(probe)
        // within 3 combined standard errors (Q = 12 at d = 2)
        let d = 2;
        let cfg = PhiConfig {
            d,
            n_paths: 60_000,
            step: 2e-3,
            substep: 2,
            seed: 23,
            rel_half: [0.45, 0.25, 0.5],
        };
        let mut probe = AlgebraElement::zero(d);
        probe.set_time(1.0);
        let half_probe = dilate(0.5, &probe);
        let rows = phi_estimate(&cfg, &[probe, half_probe]).unwrap();
        let (phi, se) = (rows[0].phi, rows[0].stderr);
        let (phi_h, se_h) = (rows[1].phi, rows[1].stderr);
        let q = crate::graded::graded_dimension(d) as i32;
        let scale = 0.5f64.powi(q - 2);
        let lhs = phi_h * scale;
        let lhs_se = se_h * scale;
        let comb = (se * se + lhs_se * lhs_se).sqrt();
        assert!(
            (lhs - phi).abs() < 3.0 * comb,
            "rescaled {lhs} +- {lhs_se} vs {phi} +- {se}"
        );
    }

    #[test]
    fn scaling_law_ks_at_small_sample() {
        // smoke test against gross law mismatch (a wrong layer exponent gives
        // KS around 0.1 or worse); the acceptance suite runs the repeated
        // 1%-level tally
        let cfg = ScalingTestConfig {
            d: 2,
            eps: 0.5,
            t: 1.0,
            n_paths: 4000,
            step: 5e-3,
            substep: 4,
            seed: 31,
        };
        let rep = scaling_law_test(&cfg).unwrap();
        assert_eq!(rep.coord_names, ["u1", "u2", "u12", "u10", "u20"]);
        assert!(rep.time_coord_defect < 1e-12);
        let loose = crate::stats::ks_critical(0.001, cfg.n_paths, cfg.n_paths);
        for (name, s) in rep.coord_names.iter().zip(&rep.ks_stats) {
            assert!(*s < loose, "{name}: KS {s} vs 0.1% critical {loose}");
        }
    }

    #[test]
    fn first_layer_marginal_matches_direct_normal_oracle() {
        // u_1(t) is exactly a sum of Gaussian increments, so its marginal
        // must match direct N(0, t) sampling at the KS level
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let (t, n) = (0.81f64, 4000usize);
        let mut sim = Vec::with_capacity(n);
        for i in 0..n {
            let mut gen = StepGen::new(stream_seed(97, tag::SCALING_A, i as u64), 2, 1);
            let mut acc = TangentAccumulator::new(2);
            for _ in 0..81 {
                acc.step(&gen.next_step(0.01));
            }
            sim.push(acc.state().u.first(1));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
        let direct: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                t.sqrt() * z
            })
            .collect();
        let ks = crate::stats::ks_statistic(&sim, &direct);
        let crit = crate::stats::ks_critical(0.001, n, n);
        assert!(ks < crit, "KS {ks} vs 0.1% critical {crit}");
    }

    #[test]
    fn occupation_mass_conservation() {
        // the compact set is a union of pairwise disjoint boxes; over one
        // shared batch of paths, per-box occupancies must sum to the time
        // spent in the set (bookkeeping identity for the accumulators)
        let d = 2;
        let mut centers = Vec::new();
        for k in 0..4 {
            let mut c = AlgebraElement::zero(d);
            c.set_time(0.55 + 0.25 * k as f64);
            centers.push(c);
        }
        // u0 windows [0.45,0.65], [0.70,0.90], ... are separated by gaps
        let boxes: Vec<SlotBox> = centers
            .iter()
            .map(|c| SlotBox {
                center: *c,
                half: [0.6, 0.1, 0.5],
            })
            .collect();
        let mut sum_parts = 0.0;
        let mut sum_union = 0.0;
        for i in 0..200u64 {
            let mut gen = StepGen::new(stream_seed(99, tag::TANGENT, i), d, 1);
            let mut acc = TangentAccumulator::new(d);
            for _ in 0..800 {
                let rec = gen.next_step(2e-3);
                acc.step(&rec);
                let u = acc.state().u;
                let mut inside = 0usize;
                for b in &boxes {
                    if b.contains(&u) {
                        sum_parts += rec.dt;
                        inside += 1;
                    }
                }
                assert!(inside <= 1, "boxes must be disjoint");
                if inside > 0 {
                    sum_union += rec.dt;
                }
            }
        }
        assert!(sum_union > 0.0);
        assert!(
            (sum_parts - sum_union).abs() < 1e-12,
            "cover {sum_parts} vs union {sum_union}"
        );
    }

    #[test]
    fn occupation_scaling_ratio_near_one() {
        let d = 2;
        let cfg = PhiConfig {
            d,
            n_paths: 40_000,
            step: 2e-3,
            substep: 2,
            seed: 37,
            rel_half: [0.5, 0.3, 0.6],
        };
        let mut probe = AlgebraElement::zero(d);
        probe.set_time(1.0);
        let rep = occupation_scaling_test(&cfg, &probe, 0.5).unwrap();
        assert!(
            (rep.ratio - 1.0).abs() < 0.05,
            "occupation scaling ratio {} (box {} +- {}, dilated {} +- {})",
            rep.ratio,
            rep.occ_box,
            rep.occ_box_stderr,
            rep.occ_dilated,
            rep.occ_dilated_stderr
        );
    }

    #[test]
    fn taylor_remainder_zero_driver() {
        // deterministic flow: the time flows compose exactly, so the coupled
        // remainder vanishes identically
        let d = 2;
        for (eps, bound) in [(0.5, 0.2), (0.25, 0.1)] {
            let cfgd = diffusion::DiffusionConfig {
                d,
                sigma: 1.0,
                step: 1e-3 * eps * eps,
                horizon: eps * eps,
                radius: None,
                scheme: diffusion::Scheme::ExponentialEuler,
            };
            let mut walker = diffusion::Walker::new(&cfgd);
            let mut tacc = TangentAccumulator::new(d);
            let mut sup = 0.0f64;
            for _ in 0..1000 {
                let rec = StepRecord::zero(1e-3);
                tacc.step(&rec);
                let mut micro = rec;
                micro.dt *= eps * eps;
                let w = walker.step(&micro, true).unwrap().unwrap();
                let v = dilate(1.0 / eps, &w);
                sup = sup.max(v.sub(&tacc.state().u).euclid_norm() / eps);
            }
            // pure time flow is exactly linear: exp(t E0) has no higher terms
            assert!(sup <= bound, "eps={eps}: sup {sup}");
        }
    }

    #[test]
    fn taylor_remainder_ladder_is_bounded() {
        let cfg = TaylorConfig {
            d: 2,
            eps_ladder: vec![0.2, 0.1, 0.05],
            t: 1.0,
            n_paths: 500,
            step: 2e-3,
            seed: 41,
        };
        let rep = taylor_remainder_test(&cfg).unwrap();
        assert_eq!(rep.rungs.len(), 3);
        for r in &rep.rungs {
            assert!(r.median.is_finite() && r.median > 0.0);
            assert_eq!(r.censored, 0, "eps={}", r.eps);
        }
        // medians stay of the same order as eps halves
        for w in rep.rungs.windows(2) {
            let ratio = w[1].median / w[0].median;
            assert!(ratio > 0.4 && ratio < 1.6, "median ratio {ratio}");
        }
        let _ = angular(&AlgebraElement::zero(2)).is_err();
    }
}
