//! Small dense matrices with a fixed 8x8 capacity.
//!
//! Every matrix in the toolkit is at most `(d+2) x (d+2)` with `d <= 6`, so a
//! `Copy` type with inline storage avoids allocation in the Monte Carlo hot
//! loops.

/// Capacity bound: matrices are at most 8x8.
pub const MAX_N: usize = 8;

/// Row-major `n x n` matrix backed by a fixed array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat {
    n: usize,
    a: [f64; MAX_N * MAX_N],
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_N);
        Mat {
            n,
            a: [0.0; MAX_N * MAX_N],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.n && c < self.n);
        self.a[r * MAX_N + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.n && c < self.n);
        self.a[r * MAX_N + c] = v;
    }

    #[inline]
    pub fn add_assign_scaled(&mut self, other: &Mat, s: f64) {
        debug_assert_eq!(self.n, other.n);
        for r in 0..self.n {
            for c in 0..self.n {
                self.a[r * MAX_N + c] += s * other.a[r * MAX_N + c];
            }
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut out = *self;
        for r in 0..self.n {
            for c in 0..self.n {
                out.a[r * MAX_N + c] *= s;
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        let mut out = *self;
        out.add_assign_scaled(other, 1.0);
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        let mut out = *self;
        out.add_assign_scaled(other, -1.0);
        out
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let v = self.a[r * MAX_N + k];
                if v == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out.a[r * MAX_N + c] += v * other.a[k * MAX_N + c];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.n);
        for r in 0..self.n {
            for c in 0..self.n {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// Applies the matrix to a vector (first `n` entries of `v`).
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for r in 0..n {
            let mut acc = 0.0;
            for c in 0..n {
                acc += self.a[r * MAX_N + c] * v[c];
            }
            out[r] = acc;
        }
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..self.n {
            for c in 0..self.n {
                let v = self.a[r * MAX_N + c];
                s += v * v;
            }
        }
        s.sqrt()
    }

    /// Max-abs entry norm.
    pub fn norm_inf(&self) -> f64 {
        let mut s: f64 = 0.0;
        for r in 0..self.n {
            for c in 0..self.n {
                s = s.max(self.a[r * MAX_N + c].abs());
            }
        }
        s
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut s: f64 = 0.0;
        for r in 0..self.n {
            for c in 0..self.n {
                s = s.max((self.get(r, c) - other.get(r, c)).abs());
            }
        }
        s
    }

    /// Solves `self * x = b` by LU with partial pivoting. Returns `None` when singular.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let mut lu = *self;
        let mut x: Vec<f64> = b[..n].to_vec();
        let mut perm: [usize; MAX_N] = [0; MAX_N];
        for (i, p) in perm.iter_mut().enumerate().take(n) {
            *p = i;
        }
        for col in 0..n {
            let mut piv = col;
            let mut best = lu.get(col, col).abs();
            for r in (col + 1)..n {
                let v = lu.get(r, col).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-300 {
                return None;
            }
            if piv != col {
                for c in 0..n {
                    let t = lu.get(col, c);
                    lu.set(col, c, lu.get(piv, c));
                    lu.set(piv, c, t);
                }
                x.swap(col, piv);
            }
            let d = lu.get(col, col);
            for r in (col + 1)..n {
                let f = lu.get(r, col) / d;
                if f == 0.0 {
                    continue;
                }
                lu.set(r, col, f);
                for c in (col + 1)..n {
                    lu.set(r, c, lu.get(r, c) - f * lu.get(col, c));
                }
                x[r] -= f * x[col];
            }
        }
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in (r + 1)..n {
                acc -= lu.get(r, c) * x[c];
            }
            x[r] = acc / lu.get(r, r);
        }
        Some(x)
    }

    /// Matrix inverse via LU; `None` when singular.
    pub fn inverse(&self) -> Option<Mat> {
        let n = self.n;
        let mut out = Mat::zeros(n);
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.solve(&e)?;
            for r in 0..n {
                out.set(r, c, col[r]);
            }
        }
        Some(out)
    }

    /// Determinant via LU.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut lu = *self;
        let mut det = 1.0;
        for col in 0..n {
            let mut piv = col;
            let mut best = lu.get(col, col).abs();
            for r in (col + 1)..n {
                let v = lu.get(r, col).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return 0.0;
            }
            if piv != col {
                det = -det;
                for c in 0..n {
                    let t = lu.get(col, c);
                    lu.set(col, c, lu.get(piv, c));
                    lu.set(piv, c, t);
                }
            }
            let d = lu.get(col, col);
            det *= d;
            for r in (col + 1)..n {
                let f = lu.get(r, col) / d;
                for c in (col + 1)..n {
                    lu.set(r, c, lu.get(r, c) - f * lu.get(col, c));
                }
            }
        }
        det
    }

    /// Matrix exponential by scaling and squaring with a truncated series.
    ///
    /// Sized for 8x8 inputs of moderate norm; the series on the scaled matrix
    /// is summed to machine precision.
    pub fn expm(&self) -> Mat {
        let norm = self.norm_inf();
        let s = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as i32
        } else {
            0
        };
        let scaled = self.scale(0.5f64.powi(s));
        let mut term = Mat::identity(self.n);
        let mut sum = Mat::identity(self.n);
        for k in 1..=24 {
            term = term.mul(&scaled).scale(1.0 / k as f64);
            sum.add_assign_scaled(&term, 1.0);
            if term.norm_inf() < 1e-18 * sum.norm_inf().max(1.0) {
                break;
            }
        }
        for _ in 0..s {
            sum = sum.mul(&sum);
        }
        sum
    }

    /// Principal matrix logarithm by inverse scaling and squaring.
    ///
    /// Square roots (Denman–Beavers) are taken until the iterate is close to
    /// the identity, then a Mercator series finishes the job. Returns `None`
    /// when either stage fails to converge, which signals a point outside the
    /// principal-log chart.
    pub fn logm(&self) -> Option<Mat> {
        let n = self.n;
        let id = Mat::identity(n);
        let mut x = *self;
        let mut k = 0u32;
        while x.sub(&id).norm_fro() > 0.3 {
            x = x.sqrtm()?;
            k += 1;
            if k > 40 {
                return None;
            }
        }
        let e = x.sub(&id);
        let mut pow = e;
        let mut sum = e;
        let mut converged = false;
        for j in 2..=60 {
            pow = pow.mul(&e);
            let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
            sum.add_assign_scaled(&pow, sign / j as f64);
            if pow.norm_fro() / j as f64 <= 1e-17 * sum.norm_fro().max(1e-300) {
                converged = true;
                break;
            }
        }
        if !converged {
            return None;
        }
        Some(sum.scale(2f64.powi(k as i32)))
    }

    /// Principal square root by the Denman–Beavers iteration.
    pub fn sqrtm(&self) -> Option<Mat> {
        let mut y = *self;
        let mut z = Mat::identity(self.n);
        let mut prev_delta = f64::INFINITY;
        for _ in 0..60 {
            let yi = y.inverse()?;
            let zi = z.inverse()?;
            let y_next = y.add(&zi).scale(0.5);
            let z_next = z.add(&yi).scale(0.5);
            let delta = y_next.max_abs_diff(&y);
            y = y_next;
            z = z_next;
            let scale = y.norm_inf().max(1.0);
            // quadratic convergence stalls at rounding level; accept either
            if delta <= 1e-14 * scale || (delta <= 1e-10 * scale && delta >= prev_delta) {
                return Some(y);
            }
            prev_delta = delta;
        }
        None
    }
}
