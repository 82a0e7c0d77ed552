//! Graded structure: slot layout, dilations, homogeneous norm, angular
//! variable, exponential-chart relative coordinates and the closed-form
//! first-order limits of the relative norm and angle.
//!
//! The canonical slot order is `(u_1..u_d, u_0, (u_ij)_{i<j lex}, u_10..u_d0)`
//! with layers `1, 2, 2, 3`; file formats and all flat-vector views use this
//! order. Dilations multiply layer-k coordinates by `eps^k`, and the
//! homogeneous norm is the layer-wise gauge
//! `((sum u_i^2)^{Q/2} + (u_0^2 + sum u_ij^2)^{Q/4} + (sum u_i0^2)^{Q/6})^{1/Q}`
//! with `Q = d^2 + 3d + 2` the graded dimension.

use crate::error::{Error, Result};
use crate::lorentz::{
    basis_element, bracket, group_inv, group_mul, log_group, rot_index, AlgebraElement, BasisKind,
    GroupElement,
};
use crate::mat::Mat;
use crate::{check_dim, Result as CrateResult};

/// Slot layout of the graded coordinates for one spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradedLayout {
    d: usize,
}

impl GradedLayout {
    pub fn new(d: usize) -> CrateResult<Self> {
        check_dim(d)?;
        Ok(GradedLayout { d })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of slots `n = 2d + 1 + d(d-1)/2`.
    #[inline]
    pub fn n_slots(&self) -> usize {
        2 * self.d + 1 + self.d * (self.d - 1) / 2
    }

    /// Sizes of the three layers: `(d, 1 + d(d-1)/2, d)`.
    pub fn layer_sizes(&self) -> (usize, usize, usize) {
        (self.d, 1 + self.d * (self.d - 1) / 2, self.d)
    }

    /// Layer (1, 2 or 3) of a slot index.
    pub fn slot_layer(&self, slot: usize) -> usize {
        let (l1, l2, _) = self.layer_sizes();
        if slot < l1 {
            1
        } else if slot < l1 + l2 {
            2
        } else {
            3
        }
    }

    /// Column names in the canonical order, e.g. `u1,u2,u0,u12,u10,u20` for d=2.
    pub fn slot_names(&self) -> Vec<String> {
        let d = self.d;
        let mut names: Vec<String> = (1..=d).map(|i| format!("u{i}")).collect();
        names.push("u0".into());
        for i in 1..d {
            for j in (i + 1)..=d {
                names.push(format!("u{i}{j}"));
            }
        }
        for i in 1..=d {
            names.push(format!("u{i}0"));
        }
        names
    }

    /// Flattens an element into the canonical slot order.
    pub fn to_slots(&self, a: &AlgebraElement) -> Vec<f64> {
        debug_assert_eq!(a.dim(), self.d);
        let d = self.d;
        let mut out = Vec::with_capacity(self.n_slots());
        for i in 1..=d {
            out.push(a.first(i));
        }
        out.push(a.time());
        for i in 1..d {
            for j in (i + 1)..=d {
                out.push(a.rot(i, j));
            }
        }
        for i in 1..=d {
            out.push(a.spat(i));
        }
        out
    }

    /// Rebuilds an element from canonical slot order.
    pub fn from_slots(&self, slots: &[f64]) -> CrateResult<AlgebraElement> {
        if slots.len() != self.n_slots() {
            return Err(Error::InvalidParams(format!(
                "expected {} slots for d={}, got {}",
                self.n_slots(),
                self.d,
                slots.len()
            )));
        }
        let d = self.d;
        let mut a = AlgebraElement::zero(d);
        for i in 1..=d {
            a.set_first(i, slots[i - 1]);
        }
        a.set_time(slots[d]);
        for i in 1..d {
            for j in (i + 1)..=d {
                a.set_rot(i, j, slots[d + 1 + rot_index(i, j, d)]);
            }
        }
        let off = d + 1 + d * (d - 1) / 2;
        for i in 1..=d {
            a.set_spat(i, slots[off + i - 1]);
        }
        Ok(a)
    }
}

/// Graded dimension `Q = d^2 + 3d + 2`.
pub fn graded_dimension(d: usize) -> usize {
    d * d + 3 * d + 2
}

/// Anisotropic dilation: layer-1 coordinates scale by `eps`, layer-2 by
/// `eps^2`, layer-3 by `eps^3`.
pub fn dilate(eps: f64, a: &AlgebraElement) -> AlgebraElement {
    debug_assert!(eps > 0.0);
    let d = a.dim();
    let e2 = eps * eps;
    let e3 = e2 * eps;
    let mut out = AlgebraElement::zero(d);
    for i in 1..=d {
        out.set_first(i, eps * a.first(i));
        out.set_spat(i, e3 * a.spat(i));
    }
    out.set_time(e2 * a.time());
    for i in 1..d {
        for j in (i + 1)..=d {
            out.set_rot(i, j, e2 * a.rot(i, j));
        }
    }
    out
}

// Euclidean norm with rescaling by the max entry, immune to squaring
// overflow for extreme coordinates.
fn scaled_norm(max_abs: f64, sum_sq_of_scaled: f64) -> f64 {
    if max_abs == 0.0 {
        0.0
    } else {
        max_abs * sum_sq_of_scaled.sqrt()
    }
}

// Layer Euclidean norms (n1, n2, n3).
fn layer_norms(a: &AlgebraElement) -> (f64, f64, f64) {
    let d = a.dim();
    let (mut m1, mut m2, mut m3) = (0.0f64, a.time().abs(), 0.0f64);
    for i in 1..=d {
        m1 = m1.max(a.first(i).abs());
        m3 = m3.max(a.spat(i).abs());
        for j in (i + 1)..=d {
            m2 = m2.max(a.rot(i, j).abs());
        }
    }
    let (mut s1, mut s3) = (0.0, 0.0);
    for i in 1..=d {
        if m1 > 0.0 {
            let r = a.first(i) / m1;
            s1 += r * r;
        }
        if m3 > 0.0 {
            let r = a.spat(i) / m3;
            s3 += r * r;
        }
    }
    let mut s2 = 0.0;
    if m2 > 0.0 {
        let r = a.time() / m2;
        s2 += r * r;
        for i in 1..d {
            for j in (i + 1)..=d {
                let r = a.rot(i, j) / m2;
                s2 += r * r;
            }
        }
    }
    (
        scaled_norm(m1, s1),
        scaled_norm(m2, s2),
        scaled_norm(m3, s3),
    )
}

/// Homogeneous norm `(n1^Q + n2^{Q/2} + n3^{Q/3})^{1/Q}` where `n_k` is the
/// Euclidean norm of layer k.
///
/// Evaluated in scaled form (factoring out the max-gauge) so that tiny and
/// huge elements do not underflow the high powers.
pub fn hnorm(a: &AlgebraElement) -> f64 {
    let (n1, n2, n3) = layer_norms(a);
    let m = n1.max(n2.sqrt()).max(n3.cbrt());
    if m == 0.0 || !m.is_finite() {
        return if m == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let q = graded_dimension(a.dim()) as f64;
    let r1 = n1 / m;
    let r2 = n2 / (m * m);
    let r3 = n3 / (m * m * m);
    let sum = r1.powf(q) + r2.powf(q / 2.0) + r3.powf(q / 3.0);
    m * sum.powf(1.0 / q)
}

/// Decides `hnorm(a) >= r` cheaply away from the boundary.
///
/// The max gauge `m = max(n1, n2^(1/2), n3^(1/3))` brackets the homogeneous
/// norm as `m <= hnorm <= 3^(1/Q) m`, so the fractional powers of the exact
/// norm are only evaluated inside the narrow bracketing band. The decision
/// equals `hnorm(a) >= r` exactly.
pub fn hnorm_at_least(a: &AlgebraElement, r: f64) -> bool {
    let (n1, n2, n3) = layer_norms(a);
    let m = n1.max(n2.sqrt()).max(n3.cbrt());
    if m >= r {
        return true;
    }
    let q = graded_dimension(a.dim()) as f64;
    if m * 3f64.powf(1.0 / q) < r {
        return false;
    }
    hnorm(a) >= r
}

/// Angular part: the dilation of `a` onto the unit homogeneous sphere.
pub fn angular(a: &AlgebraElement) -> Result<AlgebraElement> {
    let r = hnorm(a);
    if r == 0.0 {
        return Err(Error::ZeroElement);
    }
    Ok(dilate(1.0 / r, a))
}

/// Exponential-chart coordinates of `target` relative to `base`:
/// `w = log(base^{-1} target)`. The homogeneous norm of the result is the
/// relative gauge `|target|_base`.
pub fn relative_coords(base: &GroupElement, target: &GroupElement) -> Result<AlgebraElement> {
    log_group(&group_mul(&group_inv(base), target))
}

/// First-order relative matrix of the pair `(u, v)` under joint dilation:
/// the limit of `T_{1/eps} log(exp(T_eps u)^{-1} exp(T_eps v))`.
///
/// Componentwise:
/// `w_i = v_i - u_i`, `w_0 = v_0 - u_0`,
/// `w_ij = v_ij - u_ij - (u_i v_j - u_j v_i)/2`,
/// `w_i0 = v_i0 - u_i0 - (u_i v_0 - u_0 v_i)/2`.
pub fn bch_limit_matrix(u: &AlgebraElement, v: &AlgebraElement) -> AlgebraElement {
    debug_assert_eq!(u.dim(), v.dim());
    let d = u.dim();
    let mut w = AlgebraElement::zero(d);
    for i in 1..=d {
        w.set_first(i, v.first(i) - u.first(i));
        w.set_spat(
            i,
            v.spat(i) - u.spat(i) - 0.5 * (u.first(i) * v.time() - u.time() * v.first(i)),
        );
    }
    w.set_time(v.time() - u.time());
    for i in 1..d {
        for j in (i + 1)..=d {
            let corr = 0.5 * (u.first(i) * v.first(j) - u.first(j) * v.first(i));
            w.set_rot(i, j, v.rot(i, j) - u.rot(i, j) - corr);
        }
    }
    w
}

/// Closed-form limits of the rescaled relative norm and angle of the pair
/// `(u, v)`: `alpha = lim |v_eps|_{u_eps}/eps` and `beta = lim` of the
/// angular variable, where `u_eps = exp(T_eps u)`, `v_eps = exp(T_eps v)`.
pub fn bch_alpha_beta(u: &AlgebraElement, v: &AlgebraElement) -> Result<(f64, AlgebraElement)> {
    let w = bch_limit_matrix(u, v);
    let alpha = hnorm(&w);
    if alpha == 0.0 {
        return Err(Error::DegeneratePair);
    }
    Ok((alpha, dilate(1.0 / alpha, &w)))
}

/// Predicate on the unit homogeneous sphere defining a cone's sole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolePredicate {
    /// Sole `{theta : theta.u_0 >= min_u0}`; future-pointing for `min_u0 > 0`.
    AxisFuture { min_u0: f64 },
    /// Sole `{theta : theta.u_0 <= max_u0}`; past-pointing for `max_u0 < 0`.
    AxisPast { max_u0: f64 },
}

impl SolePredicate {
    pub fn eval(&self, theta: &AlgebraElement) -> bool {
        match self {
            SolePredicate::AxisFuture { min_u0 } => theta.time() >= *min_u0,
            SolePredicate::AxisPast { max_u0 } => theta.time() <= *max_u0,
        }
    }
}

/// Homogeneous cone: vertex plus a predicate on the unit sole.
///
/// Membership is dilation-invariant by construction since it is evaluated on
/// the angular part of the relative coordinates. The vertex itself is not a
/// member (its angular part is undefined).
#[derive(Debug, Clone, Copy)]
pub struct ConeSpec {
    pub vertex: GroupElement,
    pub sole: SolePredicate,
    /// Asserts the sole lies in the future half space `{u_0 > 0}`.
    pub sole_in_future: bool,
}

impl ConeSpec {
    /// Membership test on relative coordinates already in the chart.
    pub fn contains_coords(&self, w: &AlgebraElement) -> bool {
        match angular(w) {
            Ok(theta) => self.sole.eval(&theta),
            Err(_) => false,
        }
    }
}

/// Cone membership for a group point: true iff the angular part of the
/// relative coordinates satisfies the sole predicate.
pub fn cone_contains(cone: &ConeSpec, p: &GroupElement) -> Result<bool> {
    let w = relative_coords(&cone.vertex, p)?;
    Ok(cone.contains_coords(&w))
}

/// Determinant of the exponential-chart Jacobian at `v`, i.e. the density of
/// the Haar measure pulled back through `exp` with respect to slot-Lebesgue.
///
/// Equals `det phi1(ad_v)` with `phi1(x) = (e^x - 1)/x`; the algebra is
/// unimodular so the determinant at 0 is exactly 1.
pub fn exp_jacobian_det(v: &AlgebraElement) -> f64 {
    let layout = GradedLayout { d: v.dim() };
    let n = layout.n_slots();
    // ad_v in the canonical slot basis
    let mut ad = Mat::zeros(n);
    let basis_kinds = slot_basis_kinds(v.dim());
    for (col, kind) in basis_kinds.iter().enumerate() {
        let e = basis_element(*kind, v.dim()).expect("valid basis slot");
        let br = bracket(v, &e);
        for (row, x) in layout.to_slots(&br).iter().enumerate() {
            ad.set(row, col, *x);
        }
    }
    // phi1(ad) = sum ad^k/(k+1)!
    let mut term = Mat::identity(n);
    let mut sum = Mat::identity(n);
    for k in 1..=30 {
        term = term.mul(&ad).scale(1.0 / (k + 1) as f64);
        sum.add_assign_scaled(&term, 1.0);
        if term.norm_inf() < 1e-18 {
            break;
        }
    }
    sum.det()
}

/// Basis kind of each canonical slot.
pub fn slot_basis_kinds(d: usize) -> Vec<BasisKind> {
    let mut kinds: Vec<BasisKind> = (1..=d).map(BasisKind::First).collect();
    kinds.push(BasisKind::TimeTranslation);
    for i in 1..d {
        for j in (i + 1)..=d {
            kinds.push(BasisKind::Rotation(i, j));
        }
    }
    for i in 1..=d {
        kinds.push(BasisKind::SpaceTranslation(i));
    }
    kinds
}
