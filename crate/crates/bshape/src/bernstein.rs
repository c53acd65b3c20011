//! Bernstein-polynomial calculus for shape-restricted profiles.
//!
//! A profile is a curve on `[0, 1]` that is identically zero up to an onset
//! `c`, then rises and stays positive. Such curves are written as
//!
//! ```text
//! F(t) = Σ_{i=2..n} b_i · φ_{i,n}((t − c) / (1 − c))   for t > c,   0 otherwise,
//! ```
//!
//! with `φ_{i,n}(u) = C(n,i) u^i (1−u)^{n−i}` the Bernstein basis and
//! `b_0 = b_1 = 0` implicit. Nonnegative coefficients with a positive
//! maximum guarantee the zero/rise/positive shape and continuous
//! differentiability at the onset; sampling a smooth profile at
//! `c + i(1−c)/n` yields coefficients whose curve converges to the profile
//! (and its derivative) in sup norm as `n` grows.
//!
//! Everything here is generic over the scalar type; the crate root exposes
//! `f64` aliases used by the statistical pipeline.

use num_traits::Float;
use thiserror::Error;

use crate::special;

/// Cells in the first-pass sign grid used for derivative root isolation.
const ROOT_GRID: usize = 4096;
/// Derivative magnitudes within this band count as zero for sign analysis;
/// plateaus from repeated coefficients land here.
const ZERO_TOL: f64 = 1e-10;
/// Target interval width for bisection refinement of isolated roots.
const BISECT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum BernsteinError {
    #[error("basis index {i} outside [0, {n}]")]
    IndexOutOfRange { i: usize, n: usize },
    #[error("order {0} below the minimum of 3")]
    OrderTooSmall(usize),
    #[error("coefficients and onset do not describe a zero-then-rising curve")]
    InvalidShape,
    #[error("integration bounds are reversed")]
    ReversedBounds,
}

/// ln C(n, i), computed in log space so that orders up to at least 60 do not
/// overflow intermediate factorials.
pub fn ln_binomial(n: usize, i: usize) -> f64 {
    special::ln_gamma(n as f64 + 1.0)
        - special::ln_gamma(i as f64 + 1.0)
        - special::ln_gamma((n - i) as f64 + 1.0)
}

/// Bernstein basis value `φ_{i,n}(t) = C(n,i) t^i (1−t)^{n−i}`.
pub fn basis_eval<T: Float>(i: usize, n: usize, t: T) -> Result<T, BernsteinError> {
    if i > n {
        return Err(BernsteinError::IndexOutOfRange { i, n });
    }
    let zero = T::zero();
    let one = T::one();
    debug_assert!(t >= zero && t <= one);
    // endpoints first: the log-space form would produce 0·∞ there
    if t == zero {
        return Ok(if i == 0 { one } else { zero });
    }
    if t == one {
        return Ok(if i == n { one } else { zero });
    }
    let ln_c = T::from(ln_binomial(n, i)).unwrap();
    let i_t = T::from(i).unwrap();
    let rest = T::from(n - i).unwrap();
    Ok((ln_c + i_t * t.ln() + rest * (one - t).ln()).exp())
}

/// Membership test for the zero-then-rising shape class: onset in `[0, 1)`,
/// all coefficients nonnegative, and (with the implicit `b_0 = b_1 = 0`)
/// the minimum over all indices strictly below the maximum, i.e. at least
/// one coefficient strictly positive.
pub fn validate_shape<T: Float>(coeffs: &[T], onset: T) -> bool {
    if !(T::zero()..T::one()).contains(&onset) {
        return false;
    }
    if coeffs.is_empty() || coeffs.iter().any(|&b| b < T::zero() || !b.is_finite()) {
        return false;
    }
    coeffs.iter().any(|&b| b > T::zero())
}

/// Evaluate a Bernstein-form polynomial `Σ coeffs[i] φ_{i,m}(u)` by de
/// Casteljau's algorithm. Stable; O(m²).
fn de_casteljau<T: Float>(coeffs: &[T], u: T) -> T {
    let mut work = coeffs.to_vec();
    let s = T::one() - u;
    for round in (1..work.len()).rev() {
        for j in 0..round {
            work[j] = s * work[j] + u * work[j + 1];
        }
    }
    work[0]
}

/// Fast O(m) evaluation of a Bernstein-form polynomial via the term-ratio
/// recurrence. Used by the grid scans where de Casteljau would dominate the
/// feature-extraction cost.
fn bernstein_value_fast<T: Float>(coeffs: &[T], u: T) -> T {
    let m = coeffs.len() - 1;
    let zero = T::zero();
    let one = T::one();
    if u == zero {
        return coeffs[0];
    }
    if u == one {
        return coeffs[m];
    }
    let s = one - u;
    let ratio = u / s;
    let mut weight = s.powi(m as i32);
    let mut acc = zero;
    for (i, &c) in coeffs.iter().enumerate() {
        acc = acc + c * weight;
        if i < m {
            weight = weight * ratio * T::from(m - i).unwrap() / T::from(i + 1).unwrap();
        }
    }
    acc
}

/// All basis values φ_{i,n}(u) for i = 0..=n written into `out` (length
/// n+1), via the same O(n) term-ratio recurrence as the fast evaluator.
/// Callers that repeatedly evaluate curves at fixed points cache these rows.
pub fn basis_values<T: Float>(n: usize, u: T, out: &mut [T]) {
    assert_eq!(out.len(), n + 1, "output slice must have length n+1");
    let zero = T::zero();
    let one = T::one();
    if u == zero {
        out.fill(zero);
        out[0] = one;
        return;
    }
    if u == one {
        out.fill(zero);
        out[n] = one;
        return;
    }
    let s = one - u;
    let ratio = u / s;
    let mut weight = s.powi(n as i32);
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = weight;
        if i < n {
            weight = weight * ratio * T::from(n - i).unwrap() / T::from(i + 1).unwrap();
        }
    }
}

/// A shape-restricted curve: zero on `[0, onset]`, positive on `(onset, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinCurve<T> {
    onset: T,
    coeffs: Vec<T>,
}

/// Profile features of one curve.
///
/// `tend` is the largest time point such that the curve is unimodal on
/// `[0, tend]`; `tmax`, `max_val`, `tslope` and `slope` describe the rise and
/// peak inside that window, so `ton ≤ tslope ≤ tmax ≤ tend` holds for every
/// valid curve, multimodal ones included. `l1_norm` is the area under the
/// curve on `[0, tend]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSet<T> {
    pub ton: T,
    pub tmax: T,
    pub max_val: T,
    pub tslope: T,
    pub slope: T,
    pub l1_norm: T,
    pub tend: T,
}

impl<T: Float> BernsteinCurve<T> {
    /// Build a curve of order `coeffs.len() + 1` (coefficients are
    /// `b_2..b_n`; `b_0 = b_1 = 0` implicit). Rejects orders below 3 and
    /// coefficient/onset combinations outside the shape class.
    pub fn new(onset: T, coeffs: Vec<T>) -> Result<Self, BernsteinError> {
        if coeffs.len() + 1 < 3 {
            return Err(BernsteinError::OrderTooSmall(coeffs.len() + 1));
        }
        if !validate_shape(&coeffs, onset) {
            return Err(BernsteinError::InvalidShape);
        }
        Ok(Self { onset, coeffs })
    }

    pub fn onset(&self) -> T {
        self.onset
    }

    /// The polynomial order `n`.
    pub fn order(&self) -> usize {
        self.coeffs.len() + 1
    }

    /// Coefficients `b_2..b_n`.
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficients `b_0..b_n` with the implicit leading zeros.
    fn full_coeffs(&self) -> Vec<T> {
        let mut full = Vec::with_capacity(self.coeffs.len() + 2);
        full.push(T::zero());
        full.push(T::zero());
        full.extend_from_slice(&self.coeffs);
        full
    }

    fn unit_coord(&self, t: T) -> T {
        (t - self.onset) / (T::one() - self.onset)
    }

    fn time_coord(&self, u: T) -> T {
        self.onset + u * (T::one() - self.onset)
    }

    /// Curve value at `t ∈ [0, 1]`; exactly zero for `t ≤ onset`.
    pub fn eval(&self, t: T) -> T {
        debug_assert!(t >= T::zero() && t <= T::one());
        if t <= self.onset {
            return T::zero();
        }
        de_casteljau(&self.full_coeffs(), self.unit_coord(t))
    }

    /// The derivative as a piecewise polynomial: zero on `[0, onset]`,
    /// Bernstein form of order n−1 with coefficients `n(b_{i+1}−b_i)/(1−c)`
    /// on `(onset, 1]`.
    pub fn derivative(&self) -> PiecewisePoly<T> {
        let full = self.full_coeffs();
        let n = T::from(self.order()).unwrap();
        let scale = n / (T::one() - self.onset);
        let coeffs = full
            .windows(2)
            .map(|w| scale * (w[1] - w[0]))
            .collect();
        PiecewisePoly {
            onset: self.onset,
            coeffs,
        }
    }

    /// Exact integral over `[t0, t1] ⊆ [0, 1]` via the cumulative Bernstein
    /// antiderivative (no quadrature).
    pub fn integral(&self, t0: T, t1: T) -> Result<T, BernsteinError> {
        if t0 > t1 {
            return Err(BernsteinError::ReversedBounds);
        }
        debug_assert!(t0 >= T::zero() && t1 <= T::one());
        Ok(self.antiderivative(t1) - self.antiderivative(t0))
    }

    /// ∫_0^t F. The antiderivative of a degree-n Bernstein polynomial with
    /// coefficients `b_i` is the degree-(n+1) polynomial with coefficients
    /// `(Σ_{i<j} b_i)/(n+1)`, scaled by `1−c` for the onset substitution.
    fn antiderivative(&self, t: T) -> T {
        if t <= self.onset {
            return T::zero();
        }
        let full = self.full_coeffs();
        let n = self.order();
        let inv = T::one() / T::from(n + 1).unwrap();
        let mut acc = T::zero();
        let mut anti = Vec::with_capacity(n + 2);
        anti.push(T::zero());
        for &b in &full {
            acc = acc + b;
            anti.push(acc * inv);
        }
        (T::one() - self.onset) * de_casteljau(&anti, self.unit_coord(t))
    }

    /// Constructive approximation of a member `f` of the shape class: keep
    /// the onset and read coefficients off `f` at `c + i(1−c)/order`.
    /// The approximation error (sup norm of value and derivative) vanishes
    /// as the order grows.
    pub fn approximate_in_a(
        f: impl Fn(T) -> T,
        onset: T,
        order: usize,
    ) -> Result<Self, BernsteinError> {
        if order < 3 {
            return Err(BernsteinError::OrderTooSmall(order));
        }
        let span = T::one() - onset;
        let coeffs: Vec<T> = (2..=order)
            .map(|i| f(onset + span * T::from(i).unwrap() / T::from(order).unwrap()))
            .collect();
        Self::new(onset, coeffs)
    }

    /// True iff the curve is nondecreasing then nonincreasing on `[0, tau]`.
    /// The flat-zero prefix counts as part of the rising phase, so any
    /// `tau ≤ onset` is trivially unimodal.
    pub fn is_unimodal_on(&self, tau: T) -> bool {
        debug_assert!(tau >= T::zero() && tau <= T::one());
        if tau <= self.onset {
            return true;
        }
        let scan = SignScan::of(&self.derivative());
        let u_tau = self.unit_coord(tau).min(T::one());
        scan.second_rise_u().is_none_or(|u| u >= u_tau)
    }

    /// Largest `t` such that the curve is unimodal on `[0, t]`: the location
    /// of the first minus-to-plus derivative crossing, or 1 when there is
    /// none.
    pub fn tend(&self) -> T {
        let scan = SignScan::of(&self.derivative());
        match scan.second_rise_u() {
            Some(u) => self.time_coord(u),
            None => T::one(),
        }
    }

    /// True iff the derivative stays above `−tol` up to the curve's global
    /// maximum, i.e. the curve has no dip before its highest point.
    pub fn increasing_before_max(&self) -> bool {
        let scan = SignScan::of(&self.derivative());
        let u_gmax = self.argmax_on(&scan, T::one());
        scan.no_descent_before(u_gmax)
    }

    /// Smallest maximizer of the curve over `u ∈ [0, limit]`, from the
    /// isolated derivative roots plus plateau boundaries and the endpoint.
    fn argmax_on(&self, scan: &SignScan<T>, limit: T) -> T {
        let mut candidates = scan.max_candidates(limit);
        candidates.push(limit);
        let mut best_u = limit;
        let mut best_v = T::neg_infinity();
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for u in candidates {
            let v = self.eval(self.time_coord(u));
            // strictly-better wins; ties keep the earlier (smaller) u
            if v > best_v * (T::one() + T::from(1e-12).unwrap()) || best_v.is_infinite() {
                best_v = v;
                best_u = u;
            }
        }
        best_u
    }

    /// Extract the profile features. See [`FeatureSet`] for the window
    /// conventions that keep `ton ≤ tslope ≤ tmax ≤ tend` on every curve.
    pub fn features(&self) -> FeatureSet<T> {
        let deriv = self.derivative();
        let scan = SignScan::of(&deriv);
        let u_end = scan.second_rise_u().unwrap_or_else(T::one);
        let u_max = self.argmax_on(&scan, u_end);
        let tmax = self.time_coord(u_max);
        let max_val = self.eval(tmax);

        // steepest rise before the peak: scan the second derivative
        let second = deriv.differentiate_u();
        let scan2 = SignScan::of(&second);
        let mut u_candidates = scan2.max_candidates(u_max);
        u_candidates.push(u_max);
        u_candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut u_slope = u_max;
        let mut slope = T::neg_infinity();
        for u in u_candidates {
            if u <= T::zero() {
                continue;
            }
            let v = deriv.eval_u(u);
            if v > slope * (T::one() + T::from(1e-12).unwrap()) || slope.is_infinite() {
                slope = v;
                u_slope = u;
            }
        }

        let tend = self.time_coord(u_end);
        FeatureSet {
            ton: self.onset,
            tmax,
            max_val,
            tslope: self.time_coord(u_slope),
            slope,
            l1_norm: self.integral(T::zero(), tend).unwrap(),
            tend,
        }
    }
}

/// A polynomial in Bernstein form on the rescaled coordinate
/// `u = (t − onset)/(1 − onset)`, identically zero on `[0, onset]`.
/// Coefficients may be negative (derivatives live here).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly<T> {
    onset: T,
    coeffs: Vec<T>,
}

impl<T: Float> PiecewisePoly<T> {
    pub fn onset(&self) -> T {
        self.onset
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Value at `t ∈ [0, 1]`; zero for `t ≤ onset`.
    pub fn eval(&self, t: T) -> T {
        if t <= self.onset {
            return T::zero();
        }
        let u = (t - self.onset) / (T::one() - self.onset);
        de_casteljau(&self.coeffs, u)
    }

    /// Value at the rescaled coordinate `u ∈ [0, 1]` (fast path).
    pub(crate) fn eval_u(&self, u: T) -> T {
        bernstein_value_fast(&self.coeffs, u)
    }

    /// d/dt of this piece, again in Bernstein form on `u`.
    fn differentiate_u(&self) -> PiecewisePoly<T> {
        let m = T::from(self.coeffs.len() - 1).unwrap();
        let scale = m / (T::one() - self.onset);
        PiecewisePoly {
            onset: self.onset,
            coeffs: self
                .coeffs
                .windows(2)
                .map(|w| scale * (w[1] - w[0]))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sgn {
    Neg,
    Zero,
    Pos,
}

/// Sign classification of a piecewise polynomial over the `u` grid,
/// collapsed into runs; crossing locations are refined by bisection.
struct SignScan<T> {
    // (grid index of run start, grid index of run end inclusive, sign)
    runs: Vec<(usize, usize, Sgn)>,
    grid_values: Vec<T>,
    poly: PiecewisePoly<T>,
}

impl<T: Float> SignScan<T> {
    fn of(poly: &PiecewisePoly<T>) -> Self {
        let tol = T::from(ZERO_TOL).unwrap();
        let mut grid_values = Vec::with_capacity(ROOT_GRID + 1);
        let mut runs: Vec<(usize, usize, Sgn)> = Vec::new();
        // term-ratio factors (m−i)/(i+1) are grid-independent
        let m = poly.coeffs.len() - 1;
        let factors: Vec<T> = (0..m)
            .map(|i| T::from(m - i).unwrap() / T::from(i + 1).unwrap())
            .collect();
        let eval = |u: T| -> T {
            let zero = T::zero();
            let one = T::one();
            if u == zero {
                return poly.coeffs[0];
            }
            if u == one {
                return poly.coeffs[m];
            }
            let s = one - u;
            let ratio = u / s;
            let mut weight = s.powi(m as i32);
            let mut acc = zero;
            for (i, &c) in poly.coeffs.iter().enumerate() {
                acc = acc + c * weight;
                if i < m {
                    weight = weight * ratio * factors[i];
                }
            }
            acc
        };
        for j in 0..=ROOT_GRID {
            let u = T::from(j).unwrap() / T::from(ROOT_GRID).unwrap();
            let v = eval(u);
            grid_values.push(v);
            let s = if v > tol {
                Sgn::Pos
            } else if v < -tol {
                Sgn::Neg
            } else {
                Sgn::Zero
            };
            match runs.last_mut() {
                Some(run) if run.2 == s => run.1 = j,
                _ => runs.push((j, j, s)),
            }
        }
        SignScan {
            runs,
            grid_values,
            poly: poly.clone(),
        }
    }

    fn u_of(&self, j: usize) -> T {
        T::from(j).unwrap() / T::from(ROOT_GRID).unwrap()
    }

    /// Bisect a strict sign change of the polynomial inside `[u_lo, u_hi]`.
    fn bisect(&self, mut lo: T, mut hi: T) -> T {
        let target = T::from(BISECT_TOL).unwrap();
        let f_lo = self.poly.eval_u(lo);
        let rising = f_lo < T::zero();
        for _ in 0..100 {
            if hi - lo <= target {
                break;
            }
            let mid = (lo + hi) / (T::one() + T::one());
            let v = self.poly.eval_u(mid);
            let mid_neg = v < T::zero();
            if mid_neg == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / (T::one() + T::one())
    }

    /// Location of the crossing between two nonzero runs `a` (ends at `ja`)
    /// and `b` (starts at `jb`), refined by bisection when the bracketing
    /// values have strict signs; plateau boundaries resolve at grid scale.
    fn crossing_u(&self, ja: usize, jb: usize) -> T {
        let va = self.grid_values[ja];
        let vb = self.grid_values[jb];
        if (va < T::zero()) != (vb < T::zero()) {
            self.bisect(self.u_of(ja), self.u_of(jb))
        } else {
            // separated by an exact plateau; report its left edge
            self.u_of(ja)
        }
    }

    /// Nonzero runs in grid order.
    fn signed_runs(&self) -> impl Iterator<Item = &(usize, usize, Sgn)> {
        self.runs.iter().filter(|r| r.2 != Sgn::Zero)
    }

    /// The `u` where the second rise begins: the first minus-to-plus
    /// transition among the nonzero runs. `None` when the pattern never
    /// turns back up.
    fn second_rise_u(&self) -> Option<T> {
        let mut prev: Option<&(usize, usize, Sgn)> = None;
        for run in self.signed_runs() {
            if let Some(p) = prev {
                if p.2 == Sgn::Neg && run.2 == Sgn::Pos {
                    return Some(self.crossing_u(p.1, run.0));
                }
            }
            prev = Some(run);
        }
        None
    }

    /// Candidate maximizer locations in `[0, limit]`: plus-to-minus
    /// crossings and the boundaries of zero plateaus.
    fn max_candidates(&self, limit: T) -> Vec<T> {
        let mut out = Vec::new();
        let mut prev: Option<&(usize, usize, Sgn)> = None;
        for run in self.signed_runs() {
            if let Some(p) = prev {
                if p.2 == Sgn::Pos && run.2 == Sgn::Neg {
                    let u = self.crossing_u(p.1, run.0);
                    if u <= limit {
                        out.push(u);
                    }
                }
            }
            prev = Some(run);
        }
        for run in self.runs.iter().filter(|r| r.2 == Sgn::Zero) {
            for j in [run.0, run.1] {
                let u = self.u_of(j);
                if u <= limit {
                    out.push(u);
                }
            }
        }
        out
    }

    /// True iff no strictly negative run starts before `u_gmax`
    /// (the "rises cleanly into its max" test).
    fn no_descent_before(&self, u_gmax: T) -> bool {
        let eps = T::from(1e-12).unwrap();
        !self
            .signed_runs()
            .any(|r| r.2 == Sgn::Neg && self.u_of(r.0) < u_gmax - eps)
    }
}
