//! Occupation-time Green-function estimation for the killed diffusion,
//! diagonal-scaling checks, cone hitting experiments, slice capacities via
//! the variational characterization, the boundary functional built from the
//! closed-form BCH limits, and the Wiener-sum diagnostic.
//!
//! All estimators work in the exponential chart at the start point (where
//! the chart Jacobian is exactly 1 at the origin): occupation times are
//! accumulated in axis-aligned slot boxes and divided by chart volume.

use crate::check_dim;
use crate::diffusion::{DiffusionConfig, Scheme, Walker};
use crate::driver::StepGen;
use crate::error::{Error, Result};
use crate::graded::{bch_alpha_beta, dilate, graded_dimension, hnorm, ConeSpec, GradedLayout};
use crate::lorentz::{exp_algebra, AlgebraElement, GroupElement};
use crate::rng::{par_reduce, stream_seed, tag};
use crate::stats::mean_stderr_from_moments;
use crate::tangent::{phi_estimate, PhiConfig, SlotBox};
use serde::Serialize;

/// Box-indexed occupation accumulator; merges associatively.
#[derive(Debug, Clone)]
pub struct OccupationHistogram {
    pub boxes: Vec<SlotBox>,
    /// Per-box sums of per-path occupation times.
    pub time: Vec<f64>,
    /// Per-box sums of squared per-path occupation times.
    pub time_sq: Vec<f64>,
    /// Per-box counts of paths with positive occupancy.
    pub hits: Vec<usize>,
    /// Sum over paths of the occupancy of all boxes together (the union,
    /// when boxes are disjoint), and its square.
    pub union_time: f64,
    pub union_time_sq: f64,
    pub n_paths: usize,
    /// Paths that left the log chart before exiting the ball.
    pub overflows: usize,
    /// Paths still inside the ball at the safety horizon.
    pub censored: usize,
}

impl OccupationHistogram {
    pub fn new(boxes: Vec<SlotBox>) -> Self {
        let n = boxes.len();
        OccupationHistogram {
            boxes,
            time: vec![0.0; n],
            time_sq: vec![0.0; n],
            hits: vec![0; n],
            union_time: 0.0,
            union_time_sq: 0.0,
            n_paths: 0,
            overflows: 0,
            censored: 0,
        }
    }

    pub fn merge(&mut self, other: OccupationHistogram) {
        debug_assert_eq!(self.boxes.len(), other.boxes.len());
        for k in 0..self.time.len() {
            self.time[k] += other.time[k];
            self.time_sq[k] += other.time_sq[k];
            self.hits[k] += other.hits[k];
        }
        self.union_time += other.union_time;
        self.union_time_sq += other.union_time_sq;
        self.n_paths += other.n_paths;
        self.overflows += other.overflows;
        self.censored += other.censored;
    }

    /// Mean occupation time and standard error for one box.
    pub fn mean_stderr(&self, k: usize) -> (f64, f64) {
        mean_stderr_from_moments(self.time[k], self.time_sq[k], self.n_paths)
    }
}

/// Runs killed-diffusion paths and accumulates box occupancies.
///
/// Paths start at the relative position `start_rel` (identity for the
/// diagonal estimator), are killed at the first grid time where the relative
/// gauge reaches `radius`, and censored at the safety `horizon`.
#[allow(clippy::too_many_arguments)]
fn occupancy_run(
    d: usize,
    sigma: f64,
    start_rel: &GroupElement,
    radius: f64,
    step: f64,
    horizon: f64,
    boxes: &[SlotBox],
    n_paths: usize,
    seed: u64,
    stream: u64,
) -> OccupationHistogram {
    let cfg = DiffusionConfig {
        d,
        sigma,
        step,
        horizon,
        radius: Some(radius),
        scheme: Scheme::ExponentialEuler,
    };
    let n_steps = (horizon / step).ceil() as usize;
    let n_boxes = boxes.len();
    par_reduce(
        n_paths,
        32,
        || OccupationHistogram::new(boxes.to_vec()),
        |acc, i| {
            let mut gen = StepGen::new(stream_seed(seed, stream, i as u64), d, 1);
            let mut walker = Walker::new(&cfg);
            walker.set_rel(start_rel);
            let mut occ = [0.0f64; 64];
            let mut alive_at_horizon = true;
            for _ in 0..n_steps {
                let rec = gen.next_step(step);
                match walker.step(&rec, true) {
                    Ok(Some(w)) => {
                        if crate::graded::hnorm_at_least(&w, radius) {
                            alive_at_horizon = false;
                            break;
                        }
                        for (k, b) in boxes.iter().enumerate() {
                            if b.contains(&w) {
                                occ[k] += rec.dt;
                            }
                        }
                    }
                    Ok(None) => unreachable!(),
                    Err(_) => {
                        acc.overflows += 1;
                        alive_at_horizon = false;
                        break;
                    }
                }
            }
            if alive_at_horizon {
                acc.censored += 1;
            }
            let mut union = 0.0;
            for k in 0..n_boxes {
                acc.time[k] += occ[k];
                acc.time_sq[k] += occ[k] * occ[k];
                if occ[k] > 0.0 {
                    acc.hits[k] += 1;
                }
                union += occ[k];
            }
            acc.union_time += union;
            acc.union_time_sq += union * union;
            acc.n_paths += 1;
        },
        |a, b| a.merge(b),
    )
}

/// Configuration of the diagonal Green estimator.
#[derive(Debug, Clone)]
pub struct GreenConfig {
    pub d: usize,
    pub sigma: f64,
    /// Kill radius of the homogeneous ball.
    pub radius: f64,
    pub n_paths: usize,
    pub step: f64,
    pub seed: u64,
    /// Relative per-layer box half-widths, scaled to each probe's gauge.
    pub rel_half: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenRow {
    pub probe_slots: Vec<f64>,
    pub green: f64,
    pub stderr: f64,
    pub hits: usize,
    pub n_paths: usize,
    pub box_half: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenTable {
    pub rows: Vec<GreenRow>,
    pub overflows: usize,
    pub censored: usize,
    pub radius: f64,
}

/// Estimates the Green function of the diffusion killed outside the
/// homogeneous ball, at probe points in the exponential chart of the start.
pub fn green_estimate(cfg: &GreenConfig, probes: &[AlgebraElement]) -> Result<GreenTable> {
    check_dim(cfg.d)?;
    if probes.len() > 64 {
        return Err(Error::InvalidParams("at most 64 probes per run".into()));
    }
    let layout = GradedLayout::new(cfg.d)?;
    let mut boxes = Vec::with_capacity(probes.len());
    for p in probes {
        let r = hnorm(p);
        if r == 0.0 {
            return Err(Error::InvalidParams("probes must be nonzero".into()));
        }
        if r >= cfg.radius {
            return Err(Error::InvalidParams(format!(
                "probe at gauge {r} lies outside the kill ball of radius {}",
                cfg.radius
            )));
        }
        boxes.push(SlotBox::at_probe(p, cfg.rel_half));
    }
    // the chart time coordinate is bounded by the squared gauge, so paths
    // cannot survive much past radius^2; keep a generous safety horizon
    let horizon = 4.0 * cfg.radius * cfg.radius;
    let hist = occupancy_run(
        cfg.d,
        cfg.sigma,
        &GroupElement::identity(cfg.d),
        cfg.radius,
        cfg.step,
        horizon,
        &boxes,
        cfg.n_paths,
        cfg.seed,
        tag::GREEN,
    );
    let rows = probes
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let (mean, se) = hist.mean_stderr(k);
            let vol = boxes[k].volume();
            GreenRow {
                probe_slots: layout.to_slots(p),
                green: mean / vol,
                stderr: se / vol,
                hits: hist.hits[k],
                n_paths: hist.n_paths,
                box_half: boxes[k].half,
            }
        })
        .collect();
    Ok(GreenTable {
        rows,
        overflows: hist.overflows,
        censored: hist.censored,
        radius: cfg.radius,
    })
}

/// Configuration of the diagonal-scaling check.
#[derive(Debug, Clone)]
pub struct Theorem1Config {
    pub d: usize,
    /// Angular probe on the unit homogeneous sphere (future region).
    pub theta: AlgebraElement,
    /// Decreasing ladder of gauges at which the rescaled Green value is read.
    pub eps_ladder: Vec<f64>,
    pub n_paths: usize,
    /// Kill radius for the Green runs.
    pub radius: f64,
    /// Step at gauge 1; rung at gauge eps uses `step * eps^2`.
    pub step: f64,
    pub seed: u64,
    pub rel_half: [f64; 3],
    /// Substep refinement for the tangent reference estimate.
    pub substep: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Rung {
    pub eps: f64,
    /// `eps^(Q-2)` times the Green estimate at the dilated probe.
    pub s_value: f64,
    pub s_stderr: f64,
    pub hits: usize,
    pub overflows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Report {
    pub rungs: Vec<Theorem1Rung>,
    pub phi: f64,
    pub phi_stderr: f64,
    /// `|S(eps) - phi|` per rung.
    pub gaps: Vec<f64>,
    /// Gaps non-increasing along the ladder.
    pub monotone: bool,
    /// Final gap within 3 combined standard errors.
    pub final_within_3se: bool,
}

/// Reads the rescaled Green value `S(eps) = eps^(Q-2) G(x, exp(T_eps theta))`
/// along the ladder and compares against the tangent occupation density at
/// `theta`. Both sides use boxes that correspond exactly under the dilation,
/// so the box-averaging bias cancels in the comparison.
pub fn theorem1_check(cfg: &Theorem1Config) -> Result<Theorem1Report> {
    check_dim(cfg.d)?;
    let q = graded_dimension(cfg.d) as i32;
    if (hnorm(&cfg.theta) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParams(
            "theta must have unit homogeneous norm".into(),
        ));
    }
    let mut rungs = Vec::new();
    for (k, &eps) in cfg.eps_ladder.iter().enumerate() {
        if !(eps > 0.0) || eps >= cfg.radius {
            return Err(Error::InvalidParams(format!(
                "rung eps={eps} must lie strictly inside the kill ball {}",
                cfg.radius
            )));
        }
        let probe = dilate(eps, &cfg.theta);
        let gcfg = GreenConfig {
            d: cfg.d,
            sigma: 1.0,
            radius: cfg.radius,
            n_paths: cfg.n_paths,
            step: cfg.step * eps * eps,
            seed: stream_seed(cfg.seed, tag::THEOREM1_GREEN, k as u64),
            rel_half: cfg.rel_half,
        };
        let table = green_estimate(&gcfg, &[probe])?;
        let row = &table.rows[0];
        let scale = eps.powi(q - 2);
        rungs.push(Theorem1Rung {
            eps,
            s_value: scale * row.green,
            s_stderr: scale * row.stderr,
            hits: row.hits,
            overflows: table.overflows,
        });
    }
    let pcfg = PhiConfig {
        d: cfg.d,
        n_paths: cfg.n_paths,
        step: cfg.step,
        substep: cfg.substep,
        seed: stream_seed(cfg.seed, tag::THEOREM1_PHI, 0),
        rel_half: cfg.rel_half,
    };
    let prow = phi_estimate(&pcfg, &[cfg.theta])?.remove(0);
    let gaps: Vec<f64> = rungs.iter().map(|r| (r.s_value - prow.phi).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    let final_within_3se = if let Some(last) = rungs.last() {
        let comb = (last.s_stderr.powi(2) + prow.stderr.powi(2)).sqrt();
        gaps.last().unwrap() <= &(3.0 * comb)
    } else {
        false
    };
    Ok(Theorem1Report {
        rungs,
        phi: prow.phi,
        phi_stderr: prow.stderr,
        gaps,
        monotone,
        final_within_3se,
    })
}

/// Configuration of the cone hitting experiment.
#[derive(Debug, Clone)]
pub struct ConeHitConfig {
    pub d: usize,
    pub cone: ConeSpec,
    /// Ascending probe times.
    pub t_grid: Vec<f64>,
    pub n_paths: usize,
    /// Descending ladder of step sizes.
    pub h_ladder: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeHitReport {
    pub t_grid: Vec<f64>,
    /// One row per step size: hitting fractions by each probe time.
    pub h_ladder: Vec<f64>,
    pub prob: Vec<Vec<f64>>,
    pub overflows: usize,
}

/// Fraction of paths started at the cone vertex that enter the cone by each
/// probe time, for each step size in the ladder.
pub fn cone_hit(cfg: &ConeHitConfig) -> Result<ConeHitReport> {
    check_dim(cfg.d)?;
    if cfg.t_grid.is_empty() || cfg.t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams(
            "t grid must be ascending and nonempty".into(),
        ));
    }
    let t_max = *cfg.t_grid.last().unwrap();
    let mut prob = Vec::new();
    let mut overflows_total = 0usize;
    for (hi, &h) in cfg.h_ladder.iter().enumerate() {
        let dcfg = DiffusionConfig {
            d: cfg.d,
            sigma: 1.0,
            step: h,
            horizon: t_max,
            radius: None,
            scheme: Scheme::ExponentialEuler,
        };
        let n_steps = (t_max / h).ceil() as usize;
        let cone = cfg.cone;
        let (hit_counts, overflows) = par_reduce(
            cfg.n_paths,
            32,
            || (vec![0usize; cfg.t_grid.len()], 0usize),
            |acc, i| {
                let mut gen = StepGen::new(
                    stream_seed(cfg.seed, tag::CONE, (hi as u64) << 40 | i as u64),
                    cfg.d,
                    1,
                );
                let mut walker = Walker::new(&dcfg);
                let mut hit_time = f64::INFINITY;
                for _ in 0..n_steps {
                    let rec = gen.next_step(h);
                    match walker.step(&rec, true) {
                        Ok(Some(w)) => {
                            if cone.contains_coords(&w) {
                                hit_time = walker.t;
                                break;
                            }
                        }
                        Ok(None) => unreachable!(),
                        Err(_) => {
                            acc.1 += 1;
                            break;
                        }
                    }
                }
                for (k, &t) in cfg.t_grid.iter().enumerate() {
                    if hit_time <= t + 1e-12 {
                        acc.0[k] += 1;
                    }
                }
            },
            |a, b| {
                for (x, y) in a.0.iter_mut().zip(b.0) {
                    *x += y;
                }
                a.1 += b.1;
            },
        );
        overflows_total += overflows;
        prob.push(
            hit_counts
                .iter()
                .map(|&c| c as f64 / cfg.n_paths as f64)
                .collect(),
        );
    }
    Ok(ConeHitReport {
        t_grid: cfg.t_grid.clone(),
        h_ladder: cfg.h_ladder.clone(),
        prob,
        overflows: overflows_total,
    })
}

/// Slice specification: a cone, a ratio `lambda`, and slice indices.
#[derive(Debug, Clone)]
pub struct SliceSpec {
    pub cone_min_u0: f64,
    pub lambda: f64,
    pub n_lo: usize,
    pub n_hi: usize,
}

/// Configuration of the slice-capacity estimator.
#[derive(Debug, Clone)]
pub struct CapacityConfig {
    pub d: usize,
    pub slices: SliceSpec,
    /// Kill radius of the ambient domain (ball at the vertex).
    pub radius: f64,
    pub n_paths: usize,
    /// Step at gauge 1; slice n uses `step * lambda^(2n)`.
    pub step: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityRow {
    pub n: usize,
    /// Gauge range `[lambda^(n+1), lambda^n)` of the slice.
    pub gauge_lo: f64,
    pub gauge_hi: f64,
    /// Total cell volume (the mass of the uniform measure).
    pub mass: f64,
    /// Max over sources of the estimated potential, and its stderr.
    pub max_potential: f64,
    pub max_potential_stderr: f64,
    pub capacity: f64,
    pub capacity_stderr: f64,
    pub overflows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityReport {
    pub rows: Vec<CapacityRow>,
    pub lambda: f64,
    pub n_cells: usize,
}

/// Deterministic point cloud on the unit sole of the axis cone: the axis
/// point plus single-coordinate perturbations that stay inside the cone.
fn unit_sole_cloud(d: usize, min_u0: f64) -> Vec<AlgebraElement> {
    let layout = GradedLayout::new(d).expect("valid dim");
    let mut axis = AlgebraElement::zero(d);
    axis.set_time(1.0);
    let mut cloud = vec![axis];
    let delta = 0.35;
    for slot in 0..layout.n_slots() {
        if slot == d {
            continue; // the time slot itself
        }
        for sign in [1.0, -1.0] {
            let mut slots = layout.to_slots(&axis);
            slots[slot] += sign * delta;
            let p = layout.from_slots(&slots).expect("slot count");
            let theta = crate::graded::angular(&p).expect("nonzero");
            if theta.time() >= min_u0 {
                cloud.push(theta);
            }
        }
    }
    cloud
}

/// Estimates slice capacities via the variational characterization: a
/// uniform measure on a union of disjoint cells inside the slice, with the
/// potential `G mu` evaluated as the expected occupation time of the cell
/// union from each cell center, and the capacity as mass over max potential.
///
/// This is a lower-bound style estimator; its scaling across consecutive
/// slices follows the `lambda^(Q-2)` law of small compact sets.
pub fn slice_capacity(cfg: &CapacityConfig) -> Result<CapacityReport> {
    check_dim(cfg.d)?;
    let s = &cfg.slices;
    if !(s.lambda > 0.0 && s.lambda < 1.0) {
        return Err(Error::InvalidParams("lambda must lie in (0,1)".into()));
    }
    if s.n_hi < s.n_lo {
        return Err(Error::InvalidParams("slice range must be nonempty".into()));
    }
    // base cells inside the unit shell [lambda, 1)
    let sole = unit_sole_cloud(cfg.d, s.cone_min_u0);
    if sole.len() < 2 {
        return Err(Error::InsufficientCloud(format!(
            "sole cloud has {} points; widen the cone",
            sole.len()
        )));
    }
    let radii = [s.lambda.powf(0.75), s.lambda.powf(0.25)];
    // small relative widths keep the cells disjoint
    let rel_half = [0.08, 0.05, 0.05];
    let base_cells: Vec<SlotBox> = radii
        .iter()
        .flat_map(|&r| {
            sole.iter()
                .map(move |th| SlotBox::at_probe(&dilate(r, th), rel_half))
        })
        .collect();
    if base_cells.len() > 64 {
        return Err(Error::InvalidParams("cell budget exceeded".into()));
    }
    let mut rows = Vec::new();
    for n in s.n_lo..=s.n_hi {
        let scale = s.lambda.powi(n as i32);
        let cells: Vec<SlotBox> = base_cells.iter().map(|c| c.dilated(scale)).collect();
        let mass: f64 = cells.iter().map(|c| c.volume()).sum();
        let step = cfg.step * scale * scale;
        let horizon = 30.0 * scale * scale;
        let mut max_potential = 0.0f64;
        let mut max_se = 0.0f64;
        let mut overflows = 0usize;
        for (src_idx, src) in cells.iter().enumerate() {
            let start_rel = exp_algebra(&src.center);
            let src_seed = stream_seed(cfg.seed, tag::CAPACITY, (n as u64) << 32 | src_idx as u64);
            let hist = occupancy_run(
                cfg.d,
                1.0,
                &start_rel,
                cfg.radius,
                step,
                horizon,
                &cells,
                cfg.n_paths,
                src_seed,
                tag::CAPACITY,
            );
            overflows += hist.overflows;
            // potential of the uniform measure = expected time in the union
            let (mean, se) =
                mean_stderr_from_moments(hist.union_time, hist.union_time_sq, hist.n_paths);
            if mean > max_potential {
                max_potential = mean;
                max_se = se;
            }
        }
        let capacity = if max_potential > 0.0 {
            mass / max_potential
        } else {
            0.0
        };
        let cap_se = if max_potential > 0.0 {
            capacity * max_se / max_potential
        } else {
            0.0
        };
        rows.push(CapacityRow {
            n,
            gauge_lo: s.lambda.powi(n as i32 + 1),
            gauge_hi: scale,
            mass,
            max_potential,
            max_potential_stderr: max_se,
            capacity,
            capacity_stderr: cap_se,
            overflows,
        });
    }
    Ok(CapacityReport {
        rows,
        lambda: s.lambda,
        n_cells: base_cells.len(),
    })
}

/// Quadrature of the boundary functional
/// `q(H) = m(H) / max_{u in dH} sum_v Phi(beta(u,v)) alpha(u,v)^(2-Q) m(v)`.
///
/// `cloud` carries the quadrature points and weights; `boundary` indexes the
/// points treated as boundary sources. Self-pairs are excluded (the kernel
/// singularity is integrable and belongs to a vanishing cell). Returns
/// infinity when the denominator vanishes.
pub fn q_functional(
    d: usize,
    cloud: &[(AlgebraElement, f64)],
    boundary: &[usize],
    phi: impl Fn(&AlgebraElement) -> f64,
) -> Result<f64> {
    check_dim(d)?;
    if cloud.len() < 2 || boundary.is_empty() {
        return Err(Error::InsufficientCloud(
            "need at least two points and one boundary source".into(),
        ));
    }
    let q = graded_dimension(d) as f64;
    let mass: f64 = cloud.iter().map(|(_, m)| m).sum();
    let mut max_denom = 0.0f64;
    for &ui in boundary {
        let (u, _) = &cloud[ui];
        let mut denom = 0.0;
        for (vi, (v, mv)) in cloud.iter().enumerate() {
            if vi == ui {
                continue;
            }
            match bch_alpha_beta(u, v) {
                Ok((alpha, beta)) => {
                    denom += phi(&beta) * alpha.powf(2.0 - q) * mv;
                }
                Err(Error::DegeneratePair) => return Err(Error::SingularPair),
                Err(e) => return Err(e),
            }
        }
        max_denom = max_denom.max(denom);
    }
    if max_denom <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(mass / max_denom)
}

/// Weighted partial sums of slice capacities and a divergence heuristic.
#[derive(Debug, Clone, Serialize)]
pub struct WienerReport {
    /// Weight exponent `e`: term `n` is `lambda^(n e) C(B_n)`.
    pub weight_exponent: f64,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub verdict: String,
}

/// Builds the Wiener diagnostic from a capacity table.
///
/// The default weight exponent is `-(Q-2)`, the classical normalization
/// under which the slices of a homogeneous cone contribute near-constant
/// terms and the series diverges. The verdict compares late and early
/// partial-sum increments; it is a heuristic, not a proof.
pub fn wiener_sum(
    d: usize,
    lambda: f64,
    n_lo: usize,
    capacities: &[f64],
    weight_exponent: Option<f64>,
) -> Result<WienerReport> {
    check_dim(d)?;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParams("lambda must lie in (0,1)".into()));
    }
    let q = graded_dimension(d) as f64;
    let e = weight_exponent.unwrap_or(-(q - 2.0));
    let terms: Vec<f64> = capacities
        .iter()
        .enumerate()
        .map(|(k, c)| lambda.powf((n_lo + k) as f64 * e) * c)
        .collect();
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        partial_sums.push(acc);
    }
    let half = terms.len() / 2;
    let head: f64 = terms[..half.max(1).min(terms.len())].iter().sum();
    let tail: f64 = terms[half..].iter().sum();
    let verdict = if tail > 0.0 && head > 0.0 && tail >= 0.3 * head {
        "diverges"
    } else {
        "converges"
    };
    Ok(WienerReport {
        weight_exponent: e,
        terms,
        partial_sums,
        verdict: verdict.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded::{angular, SolePredicate};

    fn axis_probe(d: usize, u0: f64) -> AlgebraElement {
        let mut a = AlgebraElement::zero(d);
        a.set_time(u0);
        a
    }

    #[test]
    fn histogram_merge_is_associative_and_commutative() {
        let b = vec![SlotBox::at_probe(&axis_probe(2, 0.3), [0.1, 0.1, 0.1])];
        let mk = |t: f64| {
            let mut h = OccupationHistogram::new(b.clone());
            h.time[0] = t;
            h.time_sq[0] = t * t;
            h.n_paths = 1;
            h
        };
        let mut ab = mk(0.1);
        ab.merge(mk(0.2));
        let mut ba = mk(0.2);
        ba.merge(mk(0.1));
        assert!((ab.time[0] - ba.time[0]).abs() < 1e-9);
        let mut abc = mk(0.1);
        abc.merge(mk(0.2));
        abc.merge(mk(0.3));
        let mut bc = mk(0.2);
        bc.merge(mk(0.3));
        let mut a_bc = mk(0.1);
        a_bc.merge(bc);
        assert!((abc.time[0] - a_bc.time[0]).abs() < 1e-9);
        assert_eq!(abc.n_paths, 3);
    }

    #[test]
    fn green_validates_probes() {
        let cfg = GreenConfig {
            d: 2,
            sigma: 1.0,
            radius: 0.5,
            n_paths: 10,
            step: 1e-3,
            seed: 1,
            rel_half: [0.3, 0.2, 0.3],
        };
        // zero probe rejected
        assert!(green_estimate(&cfg, &[AlgebraElement::zero(2)]).is_err());
        // probe outside the ball rejected
        assert!(green_estimate(&cfg, &[axis_probe(2, 1.0)]).is_err());
    }

    #[test]
    fn green_positive_on_axis_zero_in_past() {
        let cfg = GreenConfig {
            d: 2,
            sigma: 1.0,
            radius: 1.0,
            n_paths: 4000,
            step: 5e-4,
            seed: 5,
            rel_half: [0.5, 0.35, 0.6],
        };
        let future = axis_probe(2, 0.09); // gauge 0.3
        let past = axis_probe(2, -0.09);
        let table = green_estimate(&cfg, &[future, past]).unwrap();
        assert!(table.rows[0].green > 0.0, "future probe must be visited");
        assert!(table.rows[0].hits > 20, "hits {}", table.rows[0].hits);
        assert_eq!(table.rows[1].green, 0.0, "past probe must never be visited");
        assert_eq!(table.overflows, 0);
        // essentially no path should survive the safety horizon
        assert!(table.censored <= cfg.n_paths / 100);
    }

    #[test]
    fn theorem1_small_smoke() {
        let d = 2;
        let theta = angular(&axis_probe(d, 1.0)).unwrap();
        let cfg = Theorem1Config {
            d,
            theta,
            eps_ladder: vec![0.3, 0.2],
            n_paths: 3000,
            radius: 0.6,
            step: 1.5e-3,
            seed: 9,
            rel_half: [0.5, 0.3, 0.6],
            substep: 2,
        };
        let rep = theorem1_check(&cfg).unwrap();
        assert_eq!(rep.rungs.len(), 2);
        assert!(rep.phi > 0.0);
        for r in &rep.rungs {
            assert!(r.s_value > 0.0, "eps={} produced no occupancy", r.eps);
        }
        // at this sample size the values must at least be the same order
        for r in &rep.rungs {
            assert!(r.s_value / rep.phi > 0.2 && r.s_value / rep.phi < 5.0);
        }
    }

    #[test]
    fn past_region_rescaled_green_vanishes() {
        let d = 2;
        let mut theta = AlgebraElement::zero(d);
        theta.set_time(-1.0);
        let theta = angular(&theta).unwrap();
        let probe = dilate(0.2, &theta);
        let cfg = GreenConfig {
            d,
            sigma: 1.0,
            radius: 0.6,
            n_paths: 2000,
            step: 1e-4,
            seed: 13,
            rel_half: [0.4, 0.25, 0.5],
        };
        let table = green_estimate(&cfg, &[probe]).unwrap();
        assert_eq!(table.rows[0].green, 0.0);
    }

    #[test]
    fn cone_hit_contract() {
        let d = 2;
        let cone = ConeSpec {
            vertex: GroupElement::identity(d),
            sole: SolePredicate::AxisFuture { min_u0: 0.3 },
            sole_in_future: true,
        };
        let cfg = ConeHitConfig {
            d,
            cone,
            t_grid: vec![0.002, 0.005, 0.01],
            n_paths: 400,
            h_ladder: vec![1e-4],
            seed: 21,
        };
        let rep = cone_hit(&cfg).unwrap();
        assert_eq!(rep.prob.len(), 1);
        let probs = &rep.prob[0];
        // non-decreasing in t
        for w in probs.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(probs[2] > 0.5, "wide cone should be hit quickly: {probs:?}");
        // past cone is never hit
        let past = ConeHitConfig {
            cone: ConeSpec {
                vertex: GroupElement::identity(d),
                sole: SolePredicate::AxisPast { max_u0: -0.1 },
                sole_in_future: false,
            },
            ..cfg
        };
        let rep2 = cone_hit(&past).unwrap();
        assert!(rep2.prob[0].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn q_functional_contract() {
        let d = 2;
        // axis-box cloud in the future half space
        let mut cloud = Vec::new();
        for k in 0..4 {
            let mut p = AlgebraElement::zero(d);
            p.set_time(1.0 + 0.2 * k as f64);
            p.set_first(1, 0.1 * k as f64);
            cloud.push((p, 1.0));
        }
        let boundary = [0usize, 3];
        let phi_mock = |th: &AlgebraElement| 1.0 + th.time().max(0.0);
        let q1 = q_functional(d, &cloud, &boundary, phi_mock).unwrap();
        assert!(q1.is_finite() && q1 > 0.0);
        // weight homogeneity: doubling all weights leaves q unchanged
        let doubled: Vec<_> = cloud.iter().map(|(p, m)| (*p, 2.0 * m)).collect();
        let q2 = q_functional(d, &doubled, &boundary, phi_mock).unwrap();
        assert!((q1 - q2).abs() < 1e-12 * q1.abs());
        // a vanishing kernel trips the divergence guard
        let q3 = q_functional(d, &cloud, &boundary, |_| 0.0).unwrap();
        assert!(q3.is_infinite());
        // coincident distinct points are singular
        let mut bad = cloud.clone();
        bad[1] = bad[0];
        assert_eq!(
            q_functional(d, &bad, &[0], phi_mock),
            Err(Error::SingularPair)
        );
    }

    #[test]
    fn q_functional_quadrature_self_convergence() {
        // a full-dimensional axis box H in the future half space, midpoint
        // quadrature over a slot grid with Haar weights; the boundary
        // sources are fixed physical points carried with zero weight so
        // both resolutions evaluate the same functional. The set must be
        // full-dimensional: the kernel alpha^(2-Q) is only integrable
        // against the full Haar measure.
        let d = 2;
        let phi_mock = |th: &AlgebraElement| {
            let t = th.time();
            (1.0 + t).max(0.0) / (1.0 + th.first(1) * th.first(1))
        };
        // slot ranges: u1, u2 in +-0.2, u0 in [0.8, 1.2], u12 in +-0.1,
        // u10, u20 in +-0.1
        let lo = [-0.2, -0.2, 0.8, -0.1, -0.1, -0.1];
        let hi = [0.2, 0.2, 1.2, 0.1, 0.1, 0.1];
        let layout = GradedLayout::new(d).unwrap();
        let build = |n_grid: usize| {
            let mut cloud = Vec::new();
            let widths: Vec<f64> = (0..6).map(|k| (hi[k] - lo[k]) / n_grid as f64).collect();
            let cell_vol: f64 = widths.iter().product();
            let mut idx = vec![0usize; 6];
            loop {
                let slots: Vec<f64> = (0..6)
                    .map(|k| lo[k] + (idx[k] as f64 + 0.5) * widths[k])
                    .collect();
                let p = layout.from_slots(&slots).unwrap();
                cloud.push((p, cell_vol * crate::graded::exp_jacobian_det(&p)));
                // odometer
                let mut k = 0;
                loop {
                    idx[k] += 1;
                    if idx[k] < n_grid {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                    if k == 6 {
                        return cloud;
                    }
                }
            }
        };
        // fixed boundary sources, zero quadrature weight
        let sources: Vec<AlgebraElement> = [
            [0.0, 0.0, 0.8, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.2, 0.0, 0.0, 0.0],
            [0.2, 0.0, 1.0, 0.0, 0.0, 0.0],
            [-0.2, -0.2, 0.9, -0.1, 0.05, 0.0],
        ]
        .iter()
        .map(|s| layout.from_slots(s).unwrap())
        .collect();
        let q_at = |n_grid: usize| {
            let mut cloud = build(n_grid);
            let boundary: Vec<usize> = (cloud.len()..cloud.len() + sources.len()).collect();
            cloud.extend(sources.iter().map(|s| (*s, 0.0)));
            q_functional(d, &cloud, &boundary, phi_mock).unwrap()
        };
        let q_coarse = q_at(3);
        let q_fine = q_at(6);
        assert!(q_coarse.is_finite() && q_fine.is_finite() && q_fine > 0.0);
        assert!(
            (q_coarse / q_fine - 1.0).abs() < 0.05,
            "coarse {q_coarse} vs fine {q_fine}"
        );
    }

    #[test]
    fn green_upper_bound_ladder() {
        // sup over a probe ladder of G(probe) hnorm(probe)^(Q-2) stays
        // within a factor 10 of the median (diagonal upper-bound sanity)
        let d = 2;
        let q = graded_dimension(d) as f64;
        let probes: Vec<AlgebraElement> = [0.1, 0.2, 0.4]
            .iter()
            .map(|&g| dilate(g, &angular(&axis_probe(d, 1.0)).unwrap()))
            .collect();
        let cfg = GreenConfig {
            d,
            sigma: 1.0,
            radius: 0.8,
            n_paths: 20_000,
            step: 2e-4,
            seed: 71,
            rel_half: [0.5, 0.3, 0.6],
        };
        let table = green_estimate(&cfg, &probes).unwrap();
        let vals: Vec<f64> = table
            .rows
            .iter()
            .zip(&probes)
            .map(|(row, p)| row.green * hnorm(p).powf(q - 2.0))
            .collect();
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[1];
        let sup = sorted[2];
        assert!(sup.is_finite() && median > 0.0, "{vals:?}");
        assert!(
            sup < 10.0 * median,
            "sup {sup} vs median {median}: {vals:?}"
        );
    }

    #[test]
    fn wiener_sum_verdicts() {
        let d = 2;
        // constant weighted terms: capacities lambda^(n(Q-2)) with default
        // weight -(Q-2) give terms == 1
        let lambda: f64 = 0.5;
        let q = graded_dimension(d) as f64;
        let caps: Vec<f64> = (0..6).map(|n| lambda.powf(n as f64 * (q - 2.0))).collect();
        let rep = wiener_sum(d, lambda, 0, &caps, None).unwrap();
        assert_eq!(rep.verdict, "diverges");
        for t in &rep.terms {
            assert!((t - 1.0).abs() < 1e-12);
        }
        // linear growth of partial sums
        for (k, s) in rep.partial_sums.iter().enumerate() {
            assert!((s - (k + 1) as f64).abs() < 1e-9);
        }
        // all-zero capacities converge
        let rep0 = wiener_sum(d, lambda, 0, &[0.0; 6], None).unwrap();
        assert_eq!(rep0.verdict, "converges");
        assert_eq!(*rep0.partial_sums.last().unwrap(), 0.0);
        // a single early nonzero slice converges
        let mut caps1 = vec![0.0; 6];
        caps1[0] = 1e-6;
        let rep1 = wiener_sum(d, lambda, 0, &caps1, None).unwrap();
        assert_eq!(rep1.verdict, "converges");
    }

    #[test]
    fn slice_capacity_smoke_scaling() {
        // two consecutive slices at modest samples: the capacity ratio should
        // be within a factor 4 of lambda^(Q-2) (the acceptance suite runs the
        // full-size version with factor 2)
        let d = 2;
        let cfg = CapacityConfig {
            d,
            slices: SliceSpec {
                cone_min_u0: 0.4,
                lambda: 0.5,
                n_lo: 1,
                n_hi: 2,
            },
            radius: 1.2,
            n_paths: 600,
            step: 4e-3,
            seed: 33,
        };
        let rep = slice_capacity(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for row in &rep.rows {
            assert!(row.capacity > 0.0, "slice {} capacity zero", row.n);
            assert!(row.mass > 0.0);
        }
        let q = graded_dimension(d) as f64;
        let expected = 0.5f64.powf(q - 2.0);
        let ratio = rep.rows[1].capacity / rep.rows[0].capacity;
        assert!(
            ratio / expected < 4.0 && ratio / expected > 0.25,
            "ratio {ratio} vs lambda^(Q-2) = {expected}"
        );
    }
}
