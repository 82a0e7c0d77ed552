//! Minkowski space, the Lorentz group `SO0(1,d)`, the Poincaré group and its
//! Lie algebra.
//!
//! Conventions. Minkowski space `R^{1,d}` carries the quadratic form
//! `q(xi) = (xi^0)^2 - sum_i (xi^i)^2`. A Poincaré group element is a pair
//! `(g, xi)` with `g` an orthochronous Lorentz matrix and `xi` a translation,
//! multiplying as `(g, xi)(g', xi') = (g g', xi + g xi')`; its matrix
//! realization is the `(d+2) x (d+2)` block matrix `[[g, xi], [0, 1]]`.
//!
//! Algebra elements are stored in graded coordinates: boosts `u_i` (layer 1),
//! the time translation `u_0` and rotations `u_ij` (layer 2), and spatial
//! translations `u_i0` (layer 3). The matrix realization is
//!
//! ```text
//! [ 0      u_i^T   u_0  ]
//! [ u_i    u_ij    u_i0 ]
//! [ 0      0       0    ]
//! ```
//!
//! with the rotation block antisymmetric. Layer indices follow the bracket
//! grading: boosts generate rotations at order two and spatial translations
//! at order three.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::{check_dim, MAX_DIM};

/// Tolerance for the Lorentz-invariance checks `g^T eta g = eta`, `det g = 1`.
pub const GROUP_TOL: f64 = 1e-10;

const CAP_D: usize = MAX_DIM; // per-layer coordinate capacity
const CAP_ROT: usize = MAX_DIM * (MAX_DIM - 1) / 2;

/// A point of `R^{1,d}`, coordinates `(xi^0, ..., xi^d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinkowskiVector {
    d: usize,
    c: [f64; MAX_DIM + 1],
}

impl MinkowskiVector {
    pub fn zeros(d: usize) -> Self {
        MinkowskiVector {
            d,
            c: [0.0; MAX_DIM + 1],
        }
    }

    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        let d = coords.len().checked_sub(1).ok_or_else(|| {
            Error::InvalidParams("a Minkowski vector needs at least one coordinate".into())
        })?;
        check_dim(d)?;
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams(
                "non-finite Minkowski coordinate".into(),
            ));
        }
        let mut v = MinkowskiVector::zeros(d);
        v.c[..=d].copy_from_slice(coords);
        Ok(v)
    }

    /// Canonical basis vector `e_mu`, `0 <= mu <= d`.
    pub fn basis(mu: usize, d: usize) -> Self {
        assert!(mu <= d);
        let mut v = MinkowskiVector::zeros(d);
        v.c[mu] = 1.0;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, mu: usize) -> f64 {
        debug_assert!(mu <= self.d);
        self.c[mu]
    }

    #[inline]
    pub fn set(&mut self, mu: usize, v: f64) {
        debug_assert!(mu <= self.d);
        self.c[mu] = v;
    }

    pub fn coords(&self) -> &[f64] {
        &self.c[..=self.d]
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.d, other.d);
        let mut out = *self;
        for mu in 0..=self.d {
            out.c[mu] += other.c[mu];
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for mu in 0..=self.d {
            out.c[mu] *= s;
        }
        out
    }

    /// Minkowski inner product `<x, y> = x^0 y^0 - sum_i x^i y^i`.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.d, other.d);
        let mut s = self.c[0] * other.c[0];
        for i in 1..=self.d {
            s -= self.c[i] * other.c[i];
        }
        s
    }

    /// The quadratic form `q(xi)`.
    pub fn q(&self) -> f64 {
        self.inner(self)
    }

    /// Euclidean norm of the spatial part.
    pub fn spatial_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 1..=self.d {
            s += self.c[i] * self.c[i];
        }
        s.sqrt()
    }
}

/// The Minkowski quadratic form as a free function.
pub fn minkowski_q(xi: &MinkowskiVector) -> f64 {
    xi.q()
}

/// Hyperbolic distance on the upper unit hyperboloid, `arccosh <x, y>`.
pub fn hyperbolic_distance(x: &MinkowskiVector, y: &MinkowskiVector) -> f64 {
    x.inner(y).max(1.0).acosh()
}

/// Basis elements of the Lie algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Boost generator `E_i`, `1 <= i <= d` (layer 1).
    First(usize),
    /// Time translation generator `E_0` (layer 2).
    TimeTranslation,
    /// Rotation generator `E_ij = [E_i, E_j]`, `1 <= i < j <= d` (layer 2).
    Rotation(usize, usize),
    /// Spatial translation generator `E_i0 = [E_i, E_0]`, `1 <= i <= d` (layer 3).
    SpaceTranslation(usize),
}

/// Element of the Poincaré Lie algebra in graded coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraElement {
    d: usize,
    /// Boost coordinates `u_i`, `i = 1..=d`.
    first: [f64; CAP_D],
    /// Time translation coordinate `u_0`.
    time: f64,
    /// Rotation coordinates `u_ij` for `i < j`, lexicographic.
    rot: [f64; CAP_ROT],
    /// Spatial translation coordinates `u_i0`.
    spat: [f64; CAP_D],
}

/// Index of the pair `(i, j)`, `1 <= i < j <= d`, in lexicographic order.
#[inline]
pub fn rot_index(i: usize, j: usize, d: usize) -> usize {
    debug_assert!(1 <= i && i < j && j <= d);
    // pairs (1,2),(1,3),...,(1,d),(2,3),...
    (i - 1) * d - (i - 1) * i / 2 + (j - i) - 1
}

impl AlgebraElement {
    pub fn zero(d: usize) -> Self {
        AlgebraElement {
            d,
            first: [0.0; CAP_D],
            time: 0.0,
            rot: [0.0; CAP_ROT],
            spat: [0.0; CAP_D],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn first(&self, i: usize) -> f64 {
        debug_assert!(1 <= i && i <= self.d);
        self.first[i - 1]
    }

    #[inline]
    pub fn set_first(&mut self, i: usize, v: f64) {
        debug_assert!(1 <= i && i <= self.d);
        self.first[i - 1] = v;
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.time
    }

    #[inline]
    pub fn set_time(&mut self, v: f64) {
        self.time = v;
    }

    /// Rotation coordinate `u_ij` with the antisymmetric convention for `i > j`.
    #[inline]
    pub fn rot(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i != j);
        if i < j {
            self.rot[rot_index(i, j, self.d)]
        } else {
            -self.rot[rot_index(j, i, self.d)]
        }
    }

    #[inline]
    pub fn set_rot(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i != j);
        if i < j {
            self.rot[rot_index(i, j, self.d)] = v;
        } else {
            self.rot[rot_index(j, i, self.d)] = -v;
        }
    }

    #[inline]
    pub fn spat(&self, i: usize) -> f64 {
        debug_assert!(1 <= i && i <= self.d);
        self.spat[i - 1]
    }

    #[inline]
    pub fn set_spat(&mut self, i: usize, v: f64) {
        debug_assert!(1 <= i && i <= self.d);
        self.spat[i - 1] = v;
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.d, other.d);
        let mut out = *self;
        for k in 0..CAP_D {
            out.first[k] += other.first[k];
            out.spat[k] += other.spat[k];
        }
        for k in 0..CAP_ROT {
            out.rot[k] += other.rot[k];
        }
        out.time += other.time;
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for k in 0..CAP_D {
            out.first[k] *= s;
            out.spat[k] *= s;
        }
        for k in 0..CAP_ROT {
            out.rot[k] *= s;
        }
        out.time *= s;
        out
    }

    /// Euclidean norm of all graded coordinates.
    pub fn euclid_norm(&self) -> f64 {
        let mut s = self.time * self.time;
        for i in 1..=self.d {
            s += self.first(i) * self.first(i) + self.spat(i) * self.spat(i);
        }
        for i in 1..self.d {
            for j in (i + 1)..=self.d {
                s += self.rot(i, j) * self.rot(i, j);
            }
        }
        s.sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.d, other.d);
        let mut m: f64 = (self.time - other.time).abs();
        for i in 1..=self.d {
            m = m.max((self.first(i) - other.first(i)).abs());
            m = m.max((self.spat(i) - other.spat(i)).abs());
        }
        for i in 1..self.d {
            for j in (i + 1)..=self.d {
                m = m.max((self.rot(i, j) - other.rot(i, j)).abs());
            }
        }
        m
    }

    /// The `(d+2) x (d+2)` matrix realization.
    pub fn matrix(&self) -> Mat {
        let d = self.d;
        let mut m = Mat::zeros(d + 2);
        for i in 1..=d {
            m.set(0, i, self.first(i));
            m.set(i, 0, self.first(i));
            m.set(i, d + 1, self.spat(i));
        }
        m.set(0, d + 1, self.time);
        for i in 1..=d {
            for j in 1..=d {
                if i != j {
                    m.set(i, j, self.rot(i, j));
                }
            }
        }
        m
    }

    /// Reads graded coordinates back from a matrix realization, symmetrizing
    /// away floating-point noise. The structural entries (last row, corner)
    /// are ignored; callers validate them where it matters.
    pub fn from_matrix(m: &Mat, d: usize) -> Self {
        debug_assert_eq!(m.dim(), d + 2);
        let mut a = AlgebraElement::zero(d);
        for i in 1..=d {
            a.set_first(i, 0.5 * (m.get(0, i) + m.get(i, 0)));
            a.set_spat(i, m.get(i, d + 1));
        }
        a.set_time(m.get(0, d + 1));
        for i in 1..d {
            for j in (i + 1)..=d {
                a.set_rot(i, j, 0.5 * (m.get(i, j) - m.get(j, i)));
            }
        }
        a
    }

    /// The `(d+1) x (d+1)` Lorentz block (boosts and rotations only).
    pub fn lorentz_block(&self) -> Mat {
        let d = self.d;
        let mut m = Mat::zeros(d + 1);
        for i in 1..=d {
            m.set(0, i, self.first(i));
            m.set(i, 0, self.first(i));
            for j in 1..=d {
                if i != j {
                    m.set(i, j, self.rot(i, j));
                }
            }
        }
        m
    }

    /// Translation part as a Minkowski vector `(u_0, u_10, ..., u_d0)`.
    pub fn translation_part(&self) -> MinkowskiVector {
        let mut v = MinkowskiVector::zeros(self.d);
        v.set(0, self.time);
        for i in 1..=self.d {
            v.set(i, self.spat(i));
        }
        v
    }
}

/// Builds the exact matrix of a basis element.
pub fn basis_element(kind: BasisKind, d: usize) -> Result<AlgebraElement> {
    check_dim(d)?;
    let mut a = AlgebraElement::zero(d);
    match kind {
        BasisKind::First(i) => {
            if !(1..=d).contains(&i) {
                return Err(Error::IndexOutOfRange(format!("boost index {i} for d={d}")));
            }
            a.set_first(i, 1.0);
        }
        BasisKind::TimeTranslation => a.set_time(1.0),
        BasisKind::Rotation(i, j) => {
            if !(1 <= i && i < j && j <= d) {
                return Err(Error::IndexOutOfRange(format!(
                    "rotation indices ({i},{j}) for d={d}"
                )));
            }
            a.set_rot(i, j, 1.0);
        }
        BasisKind::SpaceTranslation(i) => {
            if !(1..=d).contains(&i) {
                return Err(Error::IndexOutOfRange(format!(
                    "translation index {i} for d={d}"
                )));
            }
            a.set_spat(i, 1.0);
        }
    }
    Ok(a)
}

/// Lie bracket `[A, B] = AB - BA`, computed on matrix realizations and
/// decomposed back into graded coordinates. Closed on the algebra, so the
/// structural zeros are exact.
pub fn bracket(a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
    debug_assert_eq!(a.dim(), b.dim());
    let ma = a.matrix();
    let mb = b.matrix();
    let c = ma.mul(&mb).sub(&mb.mul(&ma));
    AlgebraElement::from_matrix(&c, a.dim())
}

/// Element of the Poincaré group: a Lorentz matrix and a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    d: usize,
    g: Mat,
    xi: MinkowskiVector,
}

impl GroupElement {
    pub fn identity(d: usize) -> Self {
        GroupElement {
            d,
            g: Mat::identity(d + 1),
            xi: MinkowskiVector::zeros(d),
        }
    }

    pub fn new(g: Mat, xi: MinkowskiVector) -> Self {
        debug_assert_eq!(g.dim(), xi.dim() + 1);
        GroupElement { d: xi.dim(), g, xi }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    /// The Lorentz part.
    pub fn lorentz(&self) -> &Mat {
        &self.g
    }

    /// The translation part.
    pub fn translation(&self) -> &MinkowskiVector {
        &self.xi
    }

    /// The `(d+2) x (d+2)` matrix realization `[[g, xi], [0, 1]]`.
    pub fn matrix(&self) -> Mat {
        let d = self.d;
        let mut m = Mat::zeros(d + 2);
        for r in 0..=d {
            for c in 0..=d {
                m.set(r, c, self.g.get(r, c));
            }
            m.set(r, d + 1, self.xi.get(r));
        }
        m.set(d + 1, d + 1, 1.0);
        m
    }

    /// Applies the Lorentz part to a vector.
    pub fn apply_lorentz(&self, v: &MinkowskiVector) -> MinkowskiVector {
        let mut out = MinkowskiVector::zeros(self.d);
        let mut buf = [0.0; MAX_DIM + 2];
        self.g.apply(v.coords(), &mut buf);
        for mu in 0..=self.d {
            out.set(mu, buf[mu]);
        }
        out
    }

    /// Image of the time axis, `g e_0`; lies on the unit hyperboloid.
    pub fn velocity(&self) -> MinkowskiVector {
        self.apply_lorentz(&MinkowskiVector::basis(0, self.d))
    }

    /// Worst violation of `g^T eta g = eta`.
    pub fn isometry_defect(&self) -> f64 {
        let d = self.d;
        let mut eta = Mat::identity(d + 1);
        for i in 1..=d {
            eta.set(i, i, -1.0);
        }
        let gtg = self.g.transpose().mul(&eta).mul(&self.g);
        gtg.max_abs_diff(&eta)
    }

    /// Checks the group invariants: isometry, unit determinant, orthochronicity.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        if self.isometry_defect() > tol {
            return Err(Error::InvalidParams(format!(
                "Lorentz part violates g^T eta g = eta by {:.3e}",
                self.isometry_defect()
            )));
        }
        if (self.g.det() - 1.0).abs() > tol {
            return Err(Error::InvalidParams(format!(
                "det g = {} is not 1",
                self.g.det()
            )));
        }
        if self.g.get(0, 0) < 1.0 - tol {
            return Err(Error::InvalidParams(format!(
                "g_00 = {} < 1: not orthochronous",
                self.g.get(0, 0)
            )));
        }
        Ok(())
    }
}

/// Group law `(g, xi)(g', xi') = (g g', xi + g xi')`.
pub fn group_mul(a: &GroupElement, b: &GroupElement) -> GroupElement {
    debug_assert_eq!(a.dim(), b.dim());
    GroupElement {
        d: a.d,
        g: a.g.mul(&b.g),
        xi: a.xi.add(&a.apply_lorentz(&b.xi)),
    }
}

/// Group inverse `(g, xi)^{-1} = (g^{-1}, -g^{-1} xi)`.
///
/// The Lorentz inverse is `eta g^T eta`, exact up to rounding.
pub fn group_inv(a: &GroupElement) -> GroupElement {
    let d = a.d;
    let mut gi = Mat::zeros(d + 1);
    // eta g^T eta: flips sign of mixed time-space entries
    for r in 0..=d {
        for c in 0..=d {
            let sign = if (r == 0) ^ (c == 0) { -1.0 } else { 1.0 };
            gi.set(r, c, sign * a.g.get(c, r));
        }
    }
    let mut buf = [0.0; MAX_DIM + 2];
    gi.apply(a.xi.coords(), &mut buf);
    let mut xi = MinkowskiVector::zeros(d);
    for mu in 0..=d {
        xi.set(mu, -buf[mu]);
    }
    GroupElement { d, g: gi, xi }
}

// phi-functions as even power series in mu, evaluated at x = mu^2 (either
// sign): c0 = cosh(mu), s1 = sinh(mu)/mu, c2 = (cosh(mu)-1)/mu^2,
// s3 = (sinh(mu)-mu)/mu^3. Negative x is the circular branch. The series
// branch covers |x| <= 0.04 to machine precision, which is almost every
// integrator step, so the hyperbolic calls are rare.
pub(crate) fn phi_factors(x: f64) -> (f64, f64, f64, f64) {
    if x.abs() <= 0.04 {
        let mut c0 = 1.0;
        let mut s1 = 1.0;
        let mut c2 = 0.5;
        let mut s3 = 1.0 / 6.0;
        // coefficients 1/(k!) laid out by parity: terms x^j / (2j + p)!
        let mut xj = 1.0;
        let mut f2 = 1.0; // (2j)!
        let mut f3 = 1.0; // (2j+1)!
        for j in 1..=6u32 {
            xj *= x;
            f2 *= ((2 * j - 1) * (2 * j)) as f64;
            f3 *= ((2 * j) * (2 * j + 1)) as f64;
            c0 += xj / f2;
            s1 += xj / f3;
            c2 += xj / (f2 * ((2 * j + 1) * (2 * j + 2)) as f64);
            s3 += xj / (f3 * ((2 * j + 2) * (2 * j + 3)) as f64);
        }
        (c0, s1, c2, s3)
    } else if x > 0.0 {
        let mu = x.sqrt();
        let (ch, sh) = (mu.cosh(), mu.sinh());
        (ch, sh / mu, (ch - 1.0) / x, (sh - mu) / (x * mu))
    } else {
        let nu = (-x).sqrt();
        let (cs, sn) = (nu.cos(), nu.sin());
        (
            cs,
            sn / nu,
            (1.0 - cs) / (nu * nu),
            (nu - sn) / (nu * nu * nu),
        )
    }
}

/// Closed-form exponential of a first-layer-plus-drift element
/// `sum_i b_i E_i + a0 E_0`.
///
/// The boost block `L` satisfies `L^3 = |b|^2 L`, so the exponential and the
/// translation factor are hyperbolic functions of `|b|`; this is the
/// integrator's per-step fast path and agrees with [`exp_algebra`] to
/// machine precision.
pub fn exp_first_layer_drift(d: usize, b: &[f64], a0: f64) -> GroupElement {
    debug_assert_eq!(b.len(), d);
    let beta_sq: f64 = b.iter().map(|x| x * x).sum();
    let (c0, s1, c2, s3) = phi_factors(beta_sq);
    let mut g = Mat::zeros(d + 1);
    // exp(L) = I + s1 L + c2 L^2 with L = [[0, b^T], [b, 0]]
    g.set(0, 0, c0);
    for i in 1..=d {
        g.set(0, i, s1 * b[i - 1]);
        g.set(i, 0, s1 * b[i - 1]);
        for j in 1..=d {
            let lij = c2 * b[i - 1] * b[j - 1];
            g.set(i, j, if i == j { 1.0 + lij } else { lij });
        }
    }
    // translation = phi1(L) (a0 e_0), phi1(L) = I + c2 L + s3 L^2
    let mut xi = MinkowskiVector::zeros(d);
    xi.set(0, a0 * (1.0 + s3 * beta_sq));
    for i in 1..=d {
        xi.set(i, a0 * c2 * b[i - 1]);
    }
    GroupElement { d, g, xi }
}

/// Matrix exponential of an algebra element.
///
/// Scaling-and-squaring on the `(d+2)` realization; structurally the result
/// is `[[exp(L), phi1(L) v], [0, 1]]`, so the group invariants hold to
/// rounding by construction.
pub fn exp_algebra(a: &AlgebraElement) -> GroupElement {
    let d = a.dim();
    let e = a.matrix().expm();
    let mut g = Mat::zeros(d + 1);
    let mut xi = MinkowskiVector::zeros(d);
    for r in 0..=d {
        for c in 0..=d {
            g.set(r, c, e.get(r, c));
        }
        xi.set(r, e.get(r, d + 1));
    }
    GroupElement { d, g, xi }
}

// Closed-form principal log of the Lorentz block for d = 2, where every
// L in so(1,2) satisfies L^3 = mu^2 L with mu^2 = u1^2 + u2^2 - u12^2.
// From g = I + s1 L + c2 L^2: tr g = 3 + c2 tr L^2 = 3 + 2 c2 mu^2, and
// (g - g^{-1})/2 = s1 L.
fn lorentz_log_d2(g: &Mat) -> Option<Mat> {
    debug_assert_eq!(g.dim(), 3);
    let tr = g.get(0, 0) + g.get(1, 1) + g.get(2, 2);
    let w = (tr - 3.0) / 2.0; // = c2 * mu^2 = cosh(mu) - 1
                              // cosh(mu) = 1 + w; hyperbolic for w > 0, elliptic for w < 0
    let (mu_sq, s1) = if w > 1e-12 {
        let mu = (1.0 + w).acosh();
        (mu * mu, (w * (2.0 + w)).sqrt() / mu)
    } else if w < -1e-12 {
        let cos_nu = 1.0 + w;
        if cos_nu <= -0.9 {
            // rotation angle near pi: principal log ill-conditioned
            return None;
        }
        let nu = cos_nu.acos();
        (-(nu * nu), (1.0 - cos_nu * cos_nu).max(0.0).sqrt() / nu)
    } else {
        // parabolic / near-identity: s1 = 1 + mu^2/6 with mu^2 ~ 2w
        let mu_sq = 2.0 * w;
        (mu_sq, 1.0 + mu_sq / 6.0)
    };
    let _ = mu_sq;
    // g^{-1} = eta g^T eta
    let mut ginv = Mat::zeros(3);
    for r in 0..3 {
        for c in 0..3 {
            let sign = if (r == 0) ^ (c == 0) { -1.0 } else { 1.0 };
            ginv.set(r, c, sign * g.get(c, r));
        }
    }
    Some(g.sub(&ginv).scale(0.5 / s1))
}

// phi1(L) = sum L^k/(k+1)!, truncated power series; converges fast for
// chart-sized blocks.
fn phi1_series(l: &Mat) -> Mat {
    let n = l.dim();
    let mut term = Mat::identity(n);
    let mut sum = Mat::identity(n);
    for k in 1..=30 {
        term = term.mul(l).scale(1.0 / (k + 1) as f64);
        sum.add_assign_scaled(&term, 1.0);
        if term.norm_inf() < 1e-18 {
            break;
        }
    }
    sum
}

// Closed form of phi1 for so(1,2), where L^3 = mu^2 L with
// mu^2 = u1^2 + u2^2 - u12^2: phi1(L) = I + c2 L + s3 L^2.
fn phi1_d2(l: &Mat) -> Mat {
    debug_assert_eq!(l.dim(), 3);
    let (u1, u2, u12) = (l.get(0, 1), l.get(0, 2), l.get(1, 2));
    let mu_sq = u1 * u1 + u2 * u2 - u12 * u12;
    let (_, _, c2, s3) = phi_factors(mu_sq);
    let l2 = l.mul(l);
    let mut out = Mat::identity(3);
    out.add_assign_scaled(l, c2);
    out.add_assign_scaled(&l2, s3);
    out
}

/// Principal logarithm of a group element, in graded coordinates.
///
/// The Lorentz block is handled closed-form for `d = 2` and by inverse
/// scaling-and-squaring otherwise; the translation coordinates solve
/// `phi1(L) v = xi`. Fails with [`Error::NonConvergent`] outside the chart.
pub fn log_group(a: &GroupElement) -> Result<AlgebraElement> {
    let d = a.dim();
    let (l, phi1) = if d == 2 {
        let l = lorentz_log_d2(&a.g).ok_or(Error::NonConvergent)?;
        let p = phi1_d2(&l);
        (l, p)
    } else {
        let l = a.g.logm().ok_or(Error::NonConvergent)?;
        let p = phi1_series(&l);
        (l, p)
    };
    let v = phi1.solve(a.xi.coords()).ok_or(Error::NonConvergent)?;
    let mut out = AlgebraElement::zero(d);
    for i in 1..=d {
        out.set_first(i, 0.5 * (l.get(0, i) + l.get(i, 0)));
        out.set_spat(i, v[i]);
    }
    out.set_time(v[0]);
    for i in 1..d {
        for j in (i + 1)..=d {
            out.set_rot(i, j, 0.5 * (l.get(i, j) - l.get(j, i)));
        }
    }
    Ok(out)
}
