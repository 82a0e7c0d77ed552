//! Group-valued integrator for the left-invariant Stratonovich equation
//! `d(g, xi) = sigma sum_i X_i o dB^i + X_0 dt`, the projection to hyperbolic
//! Brownian motion plus its time integral, rescaled views, and exit-time
//! detection in the homogeneous ball.
//!
//! The integrator multiplies the state on the right by the exponential of the
//! algebra increment of each step, which is the exact flow of the
//! piecewise-linear interpolated driver; the group structure is preserved to
//! rounding, never repaired.

use crate::driver::{pair_index, StepGen, StepRecord};
use crate::error::{Error, Result};
use crate::graded::{hnorm, relative_coords};
use crate::lorentz::{
    exp_algebra, exp_first_layer_drift, group_mul, hyperbolic_distance, log_group, AlgebraElement,
    GroupElement, MinkowskiVector,
};
use crate::rng::{par_reduce, stream_seed, tag};
use crate::stats::mean_stderr_from_moments;
use crate::{check_dim, dilate};

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Per-step increment `sigma sum dB^i E_i + dt E_0` (exponential Euler).
    ExponentialEuler,
    /// Adds the step's level-2 log-signature terms (Lévy areas and
    /// time-area cross terms); used as a convergence diagnostic.
    ExponentialMidpoint,
}

/// Configuration of a diffusion run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionConfig {
    pub d: usize,
    /// Noise scale; the generator is `sigma^2/2 sum X_i^2 + X_0`.
    pub sigma: f64,
    pub step: f64,
    pub horizon: f64,
    /// Kill radius of the homogeneous ball around the start; `None` disables
    /// exit detection (and the per-step relative logarithm).
    pub radius: Option<f64>,
    pub scheme: Scheme,
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.d)?;
        if !(self.step > 0.0 && self.horizon >= self.step) {
            return Err(Error::InvalidParams("need 0 < h <= T".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParams("sigma must be positive".into()));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0) {
                return Err(Error::InvalidParams("radius must be positive".into()));
            }
        }
        Ok(())
    }
}

/// How a path ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExitStatus {
    /// First grid time at which the relative gauge reached the radius.
    Exited { time: f64, step: usize },
    /// Still inside the ball at the horizon.
    Censored,
}

/// A simulated trajectory.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub cfg: DiffusionConfig,
    pub start: GroupElement,
    /// Grid times, starting at 0.
    pub times: Vec<f64>,
    /// States along the grid, starting at `start`.
    pub states: Vec<GroupElement>,
    /// Relative exponential-chart coordinates from `start` (empty when exit
    /// detection is off).
    pub rel: Vec<AlgebraElement>,
    pub exit: ExitStatus,
}

/// Dedicated `d = 2` step kernel: the 3x3 Lorentz block and translation as
/// inline arrays, with closed-form per-step exponential and relative
/// logarithm (the boost block satisfies `L^3 = mu^2 L`). Agrees with the
/// generic route to rounding; exists because the killed Monte Carlo loops
/// spend nearly all their time here.
#[derive(Debug, Clone, Copy)]
struct KernelD2 {
    g: [f64; 9],
    xi: [f64; 3],
}

impl KernelD2 {
    fn identity() -> Self {
        KernelD2 {
            g: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            xi: [0.0; 3],
        }
    }

    fn from_group(el: &GroupElement) -> Self {
        debug_assert_eq!(el.dim(), 2);
        let mut g = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                g[3 * r + c] = el.lorentz().get(r, c);
            }
        }
        let xi = [
            el.translation().get(0),
            el.translation().get(1),
            el.translation().get(2),
        ];
        KernelD2 { g, xi }
    }

    fn to_group(self) -> GroupElement {
        let mut g = crate::mat::Mat::zeros(3);
        for r in 0..3 {
            for c in 0..3 {
                g.set(r, c, self.g[3 * r + c]);
            }
        }
        let xi = MinkowskiVector::from_coords(&self.xi).expect("finite");
        GroupElement::new(g, xi)
    }

    /// Right-multiplies by `exp(b1 E_1 + b2 E_2 + dt E_0)`.
    fn step(&mut self, b1: f64, b2: f64, dt: f64) {
        let x = b1 * b1 + b2 * b2;
        let (c0, s1, c2, s3) = crate::lorentz::phi_factors(x);
        let inc = [
            c0,
            s1 * b1,
            s1 * b2,
            s1 * b1,
            1.0 + c2 * b1 * b1,
            c2 * b1 * b2,
            s1 * b2,
            c2 * b1 * b2,
            1.0 + c2 * b2 * b2,
        ];
        let t = [dt * (1.0 + s3 * x), dt * c2 * b1, dt * c2 * b2];
        let g = &mut self.g;
        for r in 0..3 {
            self.xi[r] += g[3 * r] * t[0] + g[3 * r + 1] * t[1] + g[3 * r + 2] * t[2];
        }
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[3 * r + c] =
                    g[3 * r] * inc[c] + g[3 * r + 1] * inc[3 + c] + g[3 * r + 2] * inc[6 + c];
            }
        }
        *g = out;
    }

    /// Relative log-chart coordinates; errors outside the principal chart.
    fn log(&self) -> Result<AlgebraElement> {
        let g = &self.g;
        let chi = 0.5 * (g[0] + g[4] + g[8] - 1.0);
        let w = chi - 1.0;
        let (s1, c2, s3) = if w > 1e-4 {
            let mu = chi.acosh();
            let mu2 = mu * mu;
            let sh = (chi * chi - 1.0).sqrt();
            (sh / mu, (chi - 1.0) / mu2, (sh - mu) / (mu2 * mu))
        } else if w < -1e-4 {
            if chi <= -0.9 {
                // rotation angle near pi: outside the principal chart
                return Err(Error::NonConvergent);
            }
            let nu = chi.acos();
            let sn = (1.0 - chi * chi).sqrt();
            (sn / nu, (1.0 - chi) / (nu * nu), (nu - sn) / (nu * nu * nu))
        } else {
            // cosh(mu) = 1 + w inverted as a series in w
            let mu2 = 2.0 * w - w * w / 3.0 + 4.0 / 45.0 * w * w * w;
            let (_, s1, c2, s3) = crate::lorentz::phi_factors(mu2);
            (s1, c2, s3)
        };
        let inv = 0.5 / s1;
        let u1 = (g[1] + g[3]) * inv;
        let u2 = (g[2] + g[6]) * inv;
        let u12 = (g[5] - g[7]) * inv;
        // phi1(L) = I + c2 L + s3 L^2 with L = [[0,u1,u2],[u1,0,u12],[u2,-u12,0]]
        let l = [0.0, u1, u2, u1, 0.0, u12, u2, -u12, 0.0];
        let mut l2 = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                l2[3 * r + c] = l[3 * r] * l[c] + l[3 * r + 1] * l[3 + c] + l[3 * r + 2] * l[6 + c];
            }
        }
        let mut p = [0.0; 9];
        for k in 0..9 {
            p[k] = c2 * l[k] + s3 * l2[k];
        }
        p[0] += 1.0;
        p[4] += 1.0;
        p[8] += 1.0;
        // Cramer solve p v = xi (p is a chart-sized perturbation of I)
        let det = p[0] * (p[4] * p[8] - p[5] * p[7]) - p[1] * (p[3] * p[8] - p[5] * p[6])
            + p[2] * (p[3] * p[7] - p[4] * p[6]);
        if det.abs() < 1e-12 {
            return Err(Error::NonConvergent);
        }
        let b = &self.xi;
        let v0 = (b[0] * (p[4] * p[8] - p[5] * p[7]) - p[1] * (b[1] * p[8] - p[5] * b[2])
            + p[2] * (b[1] * p[7] - p[4] * b[2]))
            / det;
        let v1 = (p[0] * (b[1] * p[8] - p[5] * b[2]) - b[0] * (p[3] * p[8] - p[5] * p[6])
            + p[2] * (p[3] * b[2] - b[1] * p[6]))
            / det;
        let v2 = (p[0] * (p[4] * b[2] - b[1] * p[7]) - p[1] * (p[3] * b[2] - b[1] * p[6])
            + b[0] * (p[3] * p[7] - p[4] * p[6]))
            / det;
        let mut out = AlgebraElement::zero(2);
        out.set_first(1, u1);
        out.set_first(2, u2);
        out.set_rot(1, 2, u12);
        out.set_time(v0);
        out.set_spat(1, v1);
        out.set_spat(2, v2);
        Ok(out)
    }
}

#[allow(clippy::large_enum_variant)] // one walker per worker, never collections
enum RelState {
    Generic(GroupElement),
    D2(KernelD2),
}

/// Incremental walker: keeps the state relative to the start so exit
/// detection and occupation functionals read directly off the log chart.
pub struct Walker {
    d: usize,
    sigma: f64,
    scheme: Scheme,
    rel: RelState,
    pub t: f64,
}

impl Walker {
    pub fn new(cfg: &DiffusionConfig) -> Self {
        let rel = if cfg.d == 2 && cfg.scheme == Scheme::ExponentialEuler {
            RelState::D2(KernelD2::identity())
        } else {
            RelState::Generic(GroupElement::identity(cfg.d))
        };
        Walker {
            d: cfg.d,
            sigma: cfg.sigma,
            scheme: cfg.scheme,
            rel,
            t: 0.0,
        }
    }

    /// Overrides the relative starting position.
    pub fn set_rel(&mut self, el: &GroupElement) {
        match &mut self.rel {
            RelState::Generic(g) => *g = *el,
            RelState::D2(k) => *k = KernelD2::from_group(el),
        }
    }

    /// Current relative state as a group element.
    pub fn rel(&self) -> GroupElement {
        match &self.rel {
            RelState::Generic(g) => *g,
            RelState::D2(k) => k.to_group(),
        }
    }

    /// Advances one step. Returns the relative log-chart coordinates when
    /// `with_log` is set (required for exit detection).
    pub fn step(&mut self, rec: &StepRecord, with_log: bool) -> Result<Option<AlgebraElement>> {
        let d = self.d;
        self.t += rec.dt;
        if let RelState::D2(k) = &mut self.rel {
            k.step(self.sigma * rec.db[0], self.sigma * rec.db[1], rec.dt);
            if with_log {
                return match k.log() {
                    Ok(w) => Ok(Some(w)),
                    Err(Error::NonConvergent) => Err(Error::ChartOverflow),
                    Err(e) => Err(e),
                };
            }
            return Ok(None);
        }
        let inc = match self.scheme {
            Scheme::ExponentialEuler => {
                let mut b = [0.0f64; 6];
                for i in 0..d {
                    b[i] = self.sigma * rec.db[i];
                }
                exp_first_layer_drift(d, &b[..d], rec.dt)
            }
            Scheme::ExponentialMidpoint => {
                let mut a = AlgebraElement::zero(d);
                for i in 1..=d {
                    a.set_first(i, self.sigma * rec.db[i - 1]);
                    a.set_spat(i, self.sigma * 0.5 * (rec.tb[i - 1] - rec.sb[i - 1]));
                }
                a.set_time(rec.dt);
                let s2 = self.sigma * self.sigma;
                for i in 1..d {
                    for j in (i + 1)..=d {
                        a.set_rot(i, j, s2 * rec.area[pair_index(i - 1, j - 1, d)]);
                    }
                }
                exp_algebra(&a)
            }
        };
        let RelState::Generic(rel) = &mut self.rel else {
            unreachable!()
        };
        *rel = group_mul(rel, &inc);
        if with_log {
            match log_group(match &self.rel {
                RelState::Generic(g) => g,
                RelState::D2(_) => unreachable!(),
            }) {
                Ok(w) => Ok(Some(w)),
                Err(Error::NonConvergent) => Err(Error::ChartOverflow),
                Err(e) => Err(e),
            }
        } else {
            Ok(None)
        }
    }
}

/// Integrates one driver path from `start`, storing the trajectory.
///
/// Stops at the first grid time where the relative homogeneous gauge reaches
/// the configured radius, or at the horizon. Fails with
/// [`Error::ChartOverflow`] if the relative state leaves the log chart before
/// exiting, which signals a radius too large for the chart.
pub fn integrate(
    cfg: &DiffusionConfig,
    driver: &crate::driver::DriverPath,
    start: &GroupElement,
) -> Result<PathSample> {
    cfg.validate()?;
    if driver.m() != cfg.d {
        return Err(Error::InvalidParams(format!(
            "driver has m={} components, diffusion needs d={}",
            driver.m(),
            cfg.d
        )));
    }
    let track_rel = cfg.radius.is_some();
    let mut walker = Walker::new(cfg);
    let mut times = vec![0.0];
    let mut states = vec![*start];
    let mut rel = Vec::new();
    if track_rel {
        rel.push(AlgebraElement::zero(cfg.d));
    }
    let mut exit = ExitStatus::Censored;
    for (k, recd) in driver.records.iter().enumerate() {
        if walker.t + recd.dt > cfg.horizon + 1e-12 {
            break;
        }
        let w = walker.step(recd, track_rel)?;
        times.push(walker.t);
        states.push(group_mul(start, &walker.rel()));
        if let Some(w) = w {
            rel.push(w);
            if hnorm(&w) >= cfg.radius.unwrap() {
                exit = ExitStatus::Exited {
                    time: walker.t,
                    step: k + 1,
                };
                break;
            }
        }
    }
    Ok(PathSample {
        cfg: *cfg,
        start: *start,
        times,
        states,
        rel,
        exit,
    })
}

/// Projection to Dudley's state space: the velocity `g_t e_0` on the unit
/// hyperboloid and the spacetime position `xi_t` (the time integral of the
/// velocity, up to the step-level quadrature of the exact flow).
pub fn dudley_project(p: &PathSample) -> Vec<(MinkowskiVector, MinkowskiVector)> {
    p.states
        .iter()
        .map(|s| (s.velocity(), *s.translation()))
        .collect()
}

/// Rescaled view of a path started at `x`: `T_{1/eps}` of the relative
/// exponential-chart coordinates along the grid. Entry `k` is the rescaled
/// diffusion at rescaled time `times[k] / eps^2`.
pub fn rescaled_view(p: &PathSample, eps: f64, x: &GroupElement) -> Result<Vec<AlgebraElement>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParams("eps must be positive".into()));
    }
    let mut out = Vec::with_capacity(p.states.len());
    for s in &p.states {
        let w = match relative_coords(x, s) {
            Ok(w) => w,
            Err(Error::NonConvergent) => return Err(Error::ChartOverflow),
            Err(e) => return Err(e),
        };
        out.push(dilate(1.0 / eps, &w));
    }
    Ok(out)
}

/// Mean normalized hyperbolic displacement `d_H(e_0, g_T e_0) / T` over a
/// batch of stored paths. Needs at least 1000 paths with horizon >= 20; the
/// expected value is `(d-1)/2`.
pub fn radial_diagnostic(paths: &[PathSample]) -> Result<f64> {
    if paths.len() < 1000 {
        return Err(Error::InsufficientPaths {
            needed: 1000,
            got: paths.len(),
        });
    }
    let e0 = MinkowskiVector::basis(0, paths[0].cfg.d);
    let mut acc = 0.0;
    for p in paths {
        let t = *p.times.last().unwrap();
        // tolerance for accumulated grid time
        if t < 20.0 - 1e-6 {
            return Err(Error::InvalidParams(format!(
                "horizon {t} < 20 for the radial diagnostic"
            )));
        }
        let last = p.states.last().unwrap();
        acc += hyperbolic_distance(&e0, &last.velocity()) / t;
    }
    Ok(acc / paths.len() as f64)
}

/// Monte Carlo radial speed without storing paths: mean and standard error
/// of `d_H(e_0, g_T e_0)/T` over `n_paths` fresh drivers.
pub fn radial_speed_mc(
    d: usize,
    sigma: f64,
    n_paths: usize,
    horizon: f64,
    step: f64,
    root_seed: u64,
) -> Result<(f64, f64)> {
    let cfg = DiffusionConfig {
        d,
        sigma,
        step,
        horizon,
        radius: None,
        scheme: Scheme::ExponentialEuler,
    };
    cfg.validate()?;
    let n_steps = (horizon / step).round() as usize;
    let e0 = MinkowskiVector::basis(0, d);
    let (sum, sum_sq) = par_reduce(
        n_paths,
        64,
        || (0.0f64, 0.0f64),
        |acc, i| {
            let mut gen = StepGen::new(stream_seed(root_seed, tag::DIFFUSION, i as u64), d, 1);
            let mut w = Walker::new(&cfg);
            for _ in 0..n_steps {
                let rec = gen.next_step(step);
                w.step(&rec, false).expect("no chart use");
            }
            let v = hyperbolic_distance(&e0, &w.rel().velocity()) / horizon;
            acc.0 += v;
            acc.1 += v * v;
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    );
    Ok(mean_stderr_from_moments(sum, sum_sq, n_paths))
}

/// Monte Carlo mean exit time from the homogeneous ball of the given radius.
/// Chart overflows are counted and treated as exits at the overflow time.
pub fn mean_exit_time_mc(
    d: usize,
    sigma: f64,
    radius: f64,
    n_paths: usize,
    step: f64,
    horizon: f64,
    root_seed: u64,
) -> Result<(f64, f64, usize)> {
    let cfg = DiffusionConfig {
        d,
        sigma,
        step,
        horizon,
        radius: Some(radius),
        scheme: Scheme::ExponentialEuler,
    };
    cfg.validate()?;
    let n_steps = (horizon / step).ceil() as usize;
    let (sum, sum_sq, overflows) = par_reduce(
        n_paths,
        64,
        || (0.0f64, 0.0f64, 0usize),
        |acc, i| {
            let mut gen = StepGen::new(stream_seed(root_seed, tag::DIFFUSION, i as u64), d, 1);
            let mut w = Walker::new(&cfg);
            let mut tau = horizon;
            for _ in 0..n_steps {
                let rec = gen.next_step(step);
                match w.step(&rec, true) {
                    Ok(Some(coords)) => {
                        if crate::graded::hnorm_at_least(&coords, radius) {
                            tau = w.t;
                            break;
                        }
                    }
                    Ok(None) => unreachable!(),
                    Err(_) => {
                        acc.2 += 1;
                        tau = w.t;
                        break;
                    }
                }
            }
            acc.0 += tau;
            acc.1 += tau * tau;
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
            a.2 += b.2;
        },
    );
    let (mean, se) = mean_stderr_from_moments(sum, sum_sq, n_paths);
    Ok((mean, se, overflows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{sample_path, DriverConfig, DriverPath};
    use crate::graded::angular;
    use crate::lorentz::GROUP_TOL;

    fn zero_driver(d: usize, n: usize, h: f64) -> DriverPath {
        DriverPath {
            cfg: DriverConfig {
                seed: 0,
                horizon: n as f64 * h,
                step: h,
                m: d,
                substep: 1,
            },
            records: (0..n).map(|_| StepRecord::zero(h)).collect(),
        }
    }

    fn euler_cfg(d: usize, h: f64, t: f64, r: Option<f64>) -> DiffusionConfig {
        DiffusionConfig {
            d,
            sigma: 1.0,
            step: h,
            horizon: t,
            radius: r,
            scheme: Scheme::ExponentialEuler,
        }
    }

    #[test]
    fn zero_driver_is_the_geodesic_flow() {
        let d = 2;
        let cfg = euler_cfg(d, 0.01, 1.0, None);
        let start = GroupElement::identity(d);
        let p = integrate(&cfg, &zero_driver(d, 100, 0.01), &start).unwrap();
        let last = p.states.last().unwrap();
        // xi_t = t e_0, g_t = I
        assert!((last.translation().get(0) - 1.0).abs() < 1e-12);
        assert!(last.translation().spatial_norm() < 1e-15);
        assert!((last.lorentz().get(0, 0) - 1.0).abs() < 1e-15);
        // hyperbolic displacement stays zero
        let e0 = MinkowskiVector::basis(0, d);
        assert_eq!(hyperbolic_distance(&e0, &last.velocity()), 0.0);
    }

    #[test]
    fn geodesic_from_boosted_start() {
        // from (g0, 0): xi_t = t g0 e_0
        let d = 2;
        let b = [0.7, -0.2];
        let start = exp_first_layer_drift(d, &b, 0.0);
        let cfg = euler_cfg(d, 0.01, 1.0, None);
        let p = integrate(&cfg, &zero_driver(d, 100, 0.01), &start).unwrap();
        let last = p.states.last().unwrap();
        let expect = start.velocity();
        for mu in 0..=d {
            assert!((last.translation().get(mu) - expect.get(mu)).abs() < 1e-12);
        }
    }

    #[test]
    fn invariants_along_noisy_path() {
        let d = 2;
        let driver = sample_path(&DriverConfig {
            seed: 5,
            horizon: 10.0,
            step: 1e-3,
            m: d,
            substep: 1,
        })
        .unwrap();
        let cfg = euler_cfg(d, 1e-3, 10.0, None);
        let p = integrate(&cfg, &driver, &GroupElement::identity(d)).unwrap();
        assert_eq!(p.states.len(), 10_001);
        let mut worst_defect = 0.0f64;
        let mut worst_q = 0.0f64;
        let mut prev_xi0 = -1.0;
        for s in &p.states {
            worst_defect = worst_defect.max(s.isometry_defect());
            worst_q = worst_q.max((s.velocity().q() - 1.0).abs());
            // xi^0 strictly increasing with increments >= h
            let xi0 = s.translation().get(0);
            assert!(xi0 > prev_xi0);
            prev_xi0 = xi0;
        }
        assert!(worst_defect < 1e-8, "isometry defect {worst_defect}");
        assert!(worst_q < 1e-8, "q defect {worst_q}");
        // future-cone support: xi is a sum of future-causal increments
        let last = p.states.last().unwrap().translation();
        assert!(last.q() > 0.0);
        assert!(last.get(0) - last.spatial_norm() > -10.0 * 1e-3);
    }

    #[test]
    fn dudley_projection_contract() {
        let d = 2;
        let driver = sample_path(&DriverConfig {
            seed: 8,
            horizon: 1.0,
            step: 1e-3,
            m: d,
            substep: 1,
        })
        .unwrap();
        let cfg = euler_cfg(d, 1e-3, 1.0, None);
        let start = GroupElement::identity(d);
        let p = integrate(&cfg, &driver, &start).unwrap();
        let proj = dudley_project(&p);
        // starts at (e_0, 0)
        assert_eq!(proj[0].0.coords(), &[1.0, 0.0, 0.0]);
        assert_eq!(proj[0].1.coords(), &[0.0, 0.0, 0.0]);
        for (k, (v, xi)) in proj.iter().enumerate() {
            assert!((v.q() - 1.0).abs() < 1e-8);
            // xi^0 >= t since the velocity time component is at least 1
            assert!(xi.get(0) >= p.times[k] - 1e-9);
        }
    }

    #[test]
    fn exit_detection_and_monotone_gauge_exit() {
        let d = 2;
        let driver = sample_path(&DriverConfig {
            seed: 42,
            horizon: 4.0,
            step: 1e-3,
            m: d,
            substep: 1,
        })
        .unwrap();
        let cfg = euler_cfg(d, 1e-3, 4.0, Some(0.5));
        let p = integrate(&cfg, &driver, &GroupElement::identity(d)).unwrap();
        match p.exit {
            ExitStatus::Exited { time, step } => {
                assert!(time > 0.0 && step == p.times.len() - 1);
                // all earlier gauges below the radius, final one at or above
                for w in &p.rel[..p.rel.len() - 1] {
                    assert!(hnorm(w) < 0.5);
                }
                assert!(hnorm(p.rel.last().unwrap()) >= 0.5);
                // the time coordinate of the chart bounds the gauge from below,
                // so exit happens no later than radius^2 plus fluctuation slack
                assert!(time < 1.0, "exit time {time}");
            }
            ExitStatus::Censored => panic!("expected an exit from the 0.5 ball within T=4"),
        }
    }

    #[test]
    fn midpoint_scheme_stays_close_to_euler() {
        // both schemes are driven by the same records; over a short horizon
        // the level-2 correction is small but nonzero
        let d = 2;
        let driver = sample_path(&DriverConfig {
            seed: 3,
            horizon: 0.2,
            step: 1e-3,
            m: d,
            substep: 4,
        })
        .unwrap();
        let start = GroupElement::identity(d);
        let pe = integrate(&euler_cfg(d, 1e-3, 0.2, None), &driver, &start).unwrap();
        let mut cfg_m = euler_cfg(d, 1e-3, 0.2, None);
        cfg_m.scheme = Scheme::ExponentialMidpoint;
        let pm = integrate(&cfg_m, &driver, &start).unwrap();
        let diff = pe
            .states
            .last()
            .unwrap()
            .matrix()
            .max_abs_diff(&pm.states.last().unwrap().matrix());
        assert!(diff > 0.0, "midpoint must differ from Euler");
        assert!(diff < 0.05, "schemes diverged: {diff}");
        pm.states
            .last()
            .unwrap()
            .check_invariants(GROUP_TOL)
            .unwrap();
    }

    #[test]
    fn rescaled_view_basics() {
        let d = 2;
        let driver = sample_path(&DriverConfig {
            seed: 4,
            horizon: 0.25,
            step: 1e-3,
            m: d,
            substep: 1,
        })
        .unwrap();
        let start = GroupElement::identity(d);
        let cfg = euler_cfg(d, 1e-3, 0.25, None);
        let p = integrate(&cfg, &driver, &start).unwrap();
        // eps = 1: plain chart coordinates
        let v1 = rescaled_view(&p, 1.0, &start).unwrap();
        assert!(v1[0].max_abs_diff(&AlgebraElement::zero(d)) < 1e-15);
        let w_direct = relative_coords(&start, p.states.last().unwrap()).unwrap();
        assert!(v1.last().unwrap().max_abs_diff(&w_direct) < 1e-12);
        // eps = 0.5 dilates layers by 2, 4, 8
        let vh = rescaled_view(&p, 0.5, &start).unwrap();
        let wl = v1.last().unwrap();
        let vl = vh.last().unwrap();
        assert!((vl.first(1) - 2.0 * wl.first(1)).abs() < 1e-12);
        assert!((vl.time() - 4.0 * wl.time()).abs() < 1e-12);
        assert!((vl.spat(1) - 8.0 * wl.spat(1)).abs() < 1e-12);
    }

    #[test]
    fn radial_diagnostic_needs_enough_paths() {
        assert_eq!(
            radial_diagnostic(&[]).err(),
            Some(Error::InsufficientPaths {
                needed: 1000,
                got: 0
            })
        );
    }

    #[test]
    fn d2_kernel_matches_generic_route() {
        // the dedicated kernel must reproduce the generic exponential/log
        // route step for step
        let d = 2;
        let driver = sample_path(&DriverConfig {
            seed: 91,
            horizon: 0.5,
            step: 1e-3,
            m: d,
            substep: 1,
        })
        .unwrap();
        let cfg = euler_cfg(d, 1e-3, 0.5, Some(5.0));
        let mut fast = Walker::new(&cfg);
        let mut slow_rel = GroupElement::identity(d);
        let mut worst_state = 0.0f64;
        let mut worst_log = 0.0f64;
        for rec in &driver.records {
            let w_fast = fast.step(rec, true).unwrap().unwrap();
            let inc = exp_first_layer_drift(d, &[rec.db[0], rec.db[1]], rec.dt);
            slow_rel = group_mul(&slow_rel, &inc);
            let w_slow = log_group(&slow_rel).unwrap();
            worst_state = worst_state.max(fast.rel().matrix().max_abs_diff(&slow_rel.matrix()));
            worst_log = worst_log.max(w_fast.max_abs_diff(&w_slow));
        }
        assert!(worst_state < 1e-11, "state deviation {worst_state}");
        assert!(worst_log < 1e-10, "log deviation {worst_log}");
    }

    #[test]
    fn d2_kernel_set_rel_round_trip() {
        let cfg = euler_cfg(2, 1e-3, 1.0, Some(1.0));
        let start = exp_first_layer_drift(2, &[0.3, -0.1], 0.05);
        let mut w = Walker::new(&cfg);
        w.set_rel(&start);
        assert!(w.rel().matrix().max_abs_diff(&start.matrix()) < 1e-15);
    }

    #[test]
    fn exit_time_is_stable_under_step_halving() {
        // law-level self-convergence at 2000 paths (the acceptance suite
        // runs the full 10^4-path version)
        let (m1, s1, o1) = mean_exit_time_mc(2, 1.0, 0.5, 2000, 5e-4, 4.0, 101).unwrap();
        let (m2, s2, o2) = mean_exit_time_mc(2, 1.0, 0.5, 2000, 2.5e-4, 4.0, 102).unwrap();
        assert_eq!(o1 + o2, 0);
        let diff = (m1 - m2).abs();
        let comb = (s1 * s1 + s2 * s2).sqrt();
        assert!(diff < 3.0 * comb, "diff {diff} vs 3 stderr {comb}");
    }

    #[test]
    fn future_cone_support_fraction() {
        // every sampled path stays in the strict future cone
        let d = 2;
        let n = 200;
        for i in 0..n {
            let driver = sample_path(&DriverConfig {
                seed: 7000 + i,
                horizon: 1.0,
                step: 1e-2,
                m: d,
                substep: 1,
            })
            .unwrap();
            let cfg = euler_cfg(d, 1e-2, 1.0, None);
            let p = integrate(&cfg, &driver, &GroupElement::identity(d)).unwrap();
            for (k, s) in p.states.iter().enumerate().skip(1) {
                let xi = s.translation();
                assert!(xi.get(0) > 0.0, "path {i} step {k}");
                assert!(xi.q() > 0.0, "path {i} step {k}: q = {}", xi.q());
            }
        }
    }

    #[test]
    fn relative_time_coordinate_tracks_elapsed_time() {
        // the chart time coordinate of the relative state stays within
        // fluctuation slack of elapsed time (used by the occupancy horizon)
        let d = 2;
        let driver = sample_path(&DriverConfig {
            seed: 55,
            horizon: 0.5,
            step: 1e-3,
            m: d,
            substep: 1,
        })
        .unwrap();
        let cfg = euler_cfg(d, 1e-3, 0.5, Some(2.0));
        let p = integrate(&cfg, &driver, &GroupElement::identity(d)).unwrap();
        for (k, w) in p.rel.iter().enumerate() {
            let t = p.times[k];
            assert!(
                (w.time() - t).abs() < 0.2 * t.max(1e-6) + 1e-9,
                "t={t} w0={}",
                w.time()
            );
            if t > 0.0 {
                // angular time component is positive along the support
                let th = angular(w).unwrap();
                assert!(th.time() > 0.0);
            }
        }
    }
}
