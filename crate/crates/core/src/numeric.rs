//! Extended-precision numerical kernels.
//!
//! Three kernels serve the whole crate:
//!
//! * [`integrate_halfline`] — integrals over (0, ∞) of weight-type
//!   integrands. The substitution x = e^u maps the half line to the full
//!   line; the essential zero at the origin and the cubic-exponential
//!   decay at infinity both turn into doubly-exponential tails in u, so a
//!   level-doubling trapezoidal rule with adaptive truncation converges at
//!   the usual tanh-sinh rate. Error control is empirical: successive
//!   refinement levels must agree.
//! * [`integrate_pv`] — Cauchy principal values by singularity
//!   subtraction. The regularized part goes through a finite-interval
//!   tanh-sinh rule that also tolerates integrable endpoint singularities.
//! * [`derivative_t`] — central differences in the deformation parameter,
//!   Richardson-extrapolated to sixth order. The abscissa and steps are
//!   exact rationals so shifted evaluations can rebuild whole tables
//!   without rounding the grid itself.
//!
//! Every kernel is a pure function of its arguments; precision travels
//! explicitly through [`PrecisionSpec`] and there is no global state.

use std::f64::consts::LOG2_10;

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::{Rat, Real};

/// Deepest trapezoidal refinement level (step 2^-13).
const MAX_LEVEL: u32 = 13;
/// Levels before convergence may be declared.
const MIN_LEVEL: u32 = 3;
/// Level from which a stagnating error estimate counts as failure.
const STALL_LEVEL: u32 = 5;
/// Consecutive sub-threshold terms required before a tail is truncated.
const TAIL_RUN: u32 = 3;
/// Hard cap on nodes per side per level.
const STEP_CAP: i64 = 4_000_000;

/// Requested accuracy. Results are claimed accurate to `digits` decimal
/// digits; every kernel computes internally at `digits + guard` digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrecisionSpec {
    digits: u32,
    guard: u32,
}

impl PrecisionSpec {
    pub const DEFAULT_GUARD: u32 = 15;

    /// Target `digits` decimal digits with the default guard of 15.
    pub fn new(digits: u32) -> Result<Self> {
        Self::with_guard(digits, Self::DEFAULT_GUARD)
    }

    pub fn with_guard(digits: u32, guard: u32) -> Result<Self> {
        if digits < 30 {
            return Err(Error::Domain(format!("digits must be >= 30, got {digits}")));
        }
        if guard < 10 {
            return Err(Error::Domain(format!("guard must be >= 10, got {guard}")));
        }
        Ok(Self { digits, guard })
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn guard(&self) -> u32 {
        self.guard
    }

    pub fn working_digits(&self) -> u32 {
        self.digits + self.guard
    }

    /// Mantissa bits of the working precision, with headroom for
    /// summation roundoff.
    pub fn bits(&self) -> u32 {
        (self.working_digits() as f64 * LOG2_10).ceil() as u32 + 16
    }

    /// A fresh working-precision value.
    pub fn real(&self, v: f64) -> Real {
        Float::with_val(self.bits(), v)
    }

    /// Exact rational brought to working precision.
    pub fn real_from_rat(&self, q: &Rat) -> Real {
        Float::with_val(self.bits(), q)
    }
}

/// 10^k at the given mantissa precision.
pub fn pow10(bits: u32, k: i64) -> Real {
    Float::with_val(bits, 10i32).pow(k as i32)
}

pub(crate) fn pi(bits: u32) -> Real {
    Float::with_val(bits, Constant::Pi)
}

/// Outcome of a quadrature kernel.
#[derive(Clone, Debug)]
pub struct QuadratureResult {
    pub value: Real,
    /// Empirical bound from the last two refinement levels; at most
    /// 10^-digits * max(1, |value|) whenever the kernel returns Ok.
    pub error_estimate: Real,
    pub evaluations: usize,
}

/// Per-component running sums for one refinement level.
struct Accum {
    sum: Real,
    abssum: Real,
    /// Binary exponent of the largest |term| seen so far.
    max_exp: Option<i32>,
}

impl Accum {
    fn new(bits: u32) -> Self {
        Accum {
            sum: Float::new(bits),
            abssum: Float::new(bits),
            max_exp: None,
        }
    }

    /// Folds one term in; returns whether it was negligible relative to
    /// the largest term seen (threshold 2^-cut below the running max).
    fn add(&mut self, term: &Real, cut: i32) -> Result<bool> {
        if !term.is_finite() {
            return Err(Error::Domain("integrand sample is not finite".into()));
        }
        let e = term.get_exp();
        let small = match (e, self.max_exp) {
            (None, _) => true,
            (Some(e), None) => {
                self.max_exp = Some(e);
                false
            }
            (Some(e), Some(m)) => {
                if e > m {
                    self.max_exp = Some(e);
                }
                e < m.saturating_sub(cut)
            }
        };
        self.sum += term;
        self.abssum += &*term.as_abs();
        Ok(small)
    }
}

struct EngineOutput {
    values: Vec<Real>,
    errors: Vec<Real>,
    evaluations: usize,
}

/// Level-doubling trapezoidal pass over u ∈ (-∞, ∞) for a vector
/// integrand already transformed by x = e^u (the e^u Jacobian is applied
/// here). All components share nodes; each converges against its own
/// total-variation scale, so strongly cancelling integrands are not
/// declared accurate beyond what their mass supports.
fn halfline_engine<F>(dim: usize, mut f: F, prec: &PrecisionSpec) -> Result<EngineOutput>
where
    F: FnMut(&Real, &mut [Real]),
{
    let bits = prec.bits();
    let wd = prec.working_digits() as i64;
    let tol = pow10(bits, -(wd - 5));
    let cut = (((wd + 10) as f64) * LOG2_10).ceil() as i32 + 1;

    let mut buf = vec![Float::new(bits); dim];
    let mut evaluations = 0usize;

    let mut prev: Option<Vec<Real>> = None;
    let mut prev_err: Option<Vec<Real>> = None;
    let mut stalled = 0u32;

    for level in 0..=MAX_LEVEL {
        let h = Float::with_val(bits, Float::i_exp(1, -(level as i32)));
        let mut acc: Vec<Accum> = (0..dim).map(|_| Accum::new(bits)).collect();

        // node at u = 0, then each tail outward
        let x0 = Float::with_val(bits, 1);
        f(&x0, &mut buf);
        evaluations += 1;
        for (a, v) in acc.iter_mut().zip(&buf) {
            a.add(v, cut)?;
        }

        for side in [1i64, -1i64] {
            let mut run = 0u32;
            let mut k = 1i64;
            loop {
                let u = Float::with_val(bits, side * k) * &h;
                let x = u.exp();
                f(&x, &mut buf);
                evaluations += 1;
                let mut all_small = true;
                for (a, v) in acc.iter_mut().zip(&buf) {
                    let term = Float::with_val(bits, v * &x);
                    if !a.add(&term, cut)? {
                        all_small = false;
                    }
                }
                run = if all_small { run + 1 } else { 0 };
                if run >= TAIL_RUN {
                    break;
                }
                k += 1;
                if k > STEP_CAP {
                    return Err(Error::NonConvergence(
                        "tail truncation did not terminate".into(),
                    ));
                }
            }
        }

        let values: Vec<Real> = acc
            .iter()
            .map(|a| Float::with_val(bits, &a.sum * &h))
            .collect();
        let scales: Vec<Real> = acc
            .iter()
            .map(|a| Float::with_val(bits, &a.abssum * &h))
            .collect();

        if let Some(prev_vals) = &prev {
            let errors: Vec<Real> = values
                .iter()
                .zip(prev_vals)
                .map(|(v, p)| Float::with_val(bits, v - p).abs())
                .collect();
            let within = |e: &Real, s: &Real| *e <= Float::with_val(bits, &tol * s);
            if level >= MIN_LEVEL && errors.iter().zip(&scales).all(|(e, s)| within(e, s)) {
                return Ok(EngineOutput {
                    values,
                    errors,
                    evaluations,
                });
            }
            if let Some(pe) = &prev_err {
                let halved = errors
                    .iter()
                    .zip(pe)
                    .zip(&scales)
                    .all(|((e, p), s)| Float::with_val(bits, 2u32 * e) <= *p || within(e, s));
                if level >= STALL_LEVEL && !halved {
                    stalled += 1;
                    if stalled >= 2 {
                        return Err(Error::NonConvergence(
                            "two successive levels failed to halve the error estimate".into(),
                        ));
                    }
                } else {
                    stalled = 0;
                }
            }
            prev_err = Some(errors);
        }
        prev = Some(values);
    }

    Err(Error::NonConvergence(format!(
        "no agreement after {MAX_LEVEL} refinement levels"
    )))
}

/// ∫_0^∞ f(x) dx for f smooth on (0, ∞), decaying at least like
/// exp(-x³/2) at infinity and dominated near the origin by
/// x^λ exp(-t/x) with λ > -1, t ≥ 0.
pub fn integrate_halfline<F>(mut f: F, prec: &PrecisionSpec) -> Result<QuadratureResult>
where
    F: FnMut(&Real) -> Real,
{
    let out = halfline_engine(1, |x, buf| buf[0] = f(x), prec)?;
    finish_single(out, prec)
}

/// Shared-node variant for families like the moments x^j w(x): one
/// adaptive pass integrates every component, each with its own
/// convergence bookkeeping. Returns (values, error estimates, total
/// evaluations).
pub(crate) fn integrate_halfline_batch<F>(
    dim: usize,
    f: F,
    prec: &PrecisionSpec,
) -> Result<(Vec<Real>, Vec<Real>, usize)>
where
    F: FnMut(&Real, &mut [Real]),
{
    let out = halfline_engine(dim, f, prec)?;
    Ok((out.values, out.errors, out.evaluations))
}

fn finish_single(out: EngineOutput, prec: &PrecisionSpec) -> Result<QuadratureResult> {
    let bits = prec.bits();
    let value = out.values.into_iter().next().expect("dim 1");
    let error_estimate = out.errors.into_iter().next().expect("dim 1");
    let mut claim = value.clone().abs();
    if claim < 1u32 {
        claim = Float::with_val(bits, 1);
    }
    claim *= pow10(bits, -(prec.digits() as i64));
    if error_estimate > claim {
        return Err(Error::NonConvergence(format!(
            "cancellation left {:.3e} of estimated error against a budget of {:.3e}",
            error_estimate.to_f64(),
            claim.to_f64()
        )));
    }
    Ok(QuadratureResult {
        value,
        error_estimate,
        evaluations: out.evaluations,
    })
}

/// Finite-interval tanh-sinh rule on (a, b); tolerates integrable
/// endpoint singularities up to (x-a)^{-1/2}, (b-x)^{-1/2}.
///
/// Nodes are computed as stable offsets from the nearer endpoint
/// (1 ± tanh θ via 2/(1 + e^∓2θ)), so a node at distance 10^-40 from a
/// carries full relative accuracy instead of cancelling against the
/// midpoint. `scale_floor` joins the convergence scale; principal-value
/// callers use it so a subtracted integrand that is numerically zero
/// still converges against the scale of the problem it came from.
pub(crate) fn integrate_finite_floored<F>(
    mut f: F,
    a: &Real,
    b: &Real,
    scale_floor: Option<&Real>,
    prec: &PrecisionSpec,
) -> Result<QuadratureResult>
where
    F: FnMut(&Real) -> Real,
{
    if b.partial_cmp(a) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Domain("empty interval".into()));
    }
    let bits = prec.bits();
    let wd = prec.working_digits() as i64;
    let tol = pow10(bits, -(wd - 5));
    let cut = (((wd + 10) as f64) * LOG2_10).ceil() as i32 + 1;
    let half_pi = pi(bits) / 2u32;
    let mid = Float::with_val(bits, a + b) / 2u32;
    let rad = Float::with_val(bits, b - a) / 2u32;

    let mut evaluations = 0usize;
    let mut prev: Option<Real> = None;
    let mut prev_err: Option<Real> = None;
    let mut stalled = 0u32;

    for level in 0..=MAX_LEVEL {
        let h = Float::with_val(bits, Float::i_exp(1, -(level as i32)));
        let mut acc = Accum::new(bits);

        // v = 0 maps to the midpoint
        {
            let g = Float::with_val(bits, &f(&mid) * &half_pi);
            evaluations += 1;
            acc.add(&g, cut)?;
        }
        for side in [1i64, -1i64] {
            let mut run = 0u32;
            let mut k = 1i64;
            loop {
                let v = Float::with_val(bits, side * k) * &h;
                let theta = Float::with_val(bits, &half_pi * &v.clone().sinh());
                // 1 + tanh θ and 1 - tanh θ without cancellation
                let em = Float::with_val(bits, -2i32 * &theta).exp();
                let plus = Float::with_val(bits, 2u32) / Float::with_val(bits, 1u32 + &em);
                let minus = Float::with_val(bits, 2u32 * &em) / Float::with_val(bits, 1u32 + &em);
                let x = if theta < 0u32 {
                    Float::with_val(bits, a + &(rad.clone() * &plus))
                } else {
                    Float::with_val(bits, b - &(rad.clone() * &minus))
                };
                // nodes rounded onto an endpoint carry no resolvable mass
                if x <= *a || x >= *b {
                    break;
                }
                // sech²θ = (1 + tanh θ)(1 − tanh θ)
                let sech2 = Float::with_val(bits, &plus * &minus);
                let w = Float::with_val(bits, &half_pi * &v.cosh()) * sech2;
                let g = Float::with_val(bits, &f(&x) * &w);
                evaluations += 1;
                let small = acc.add(&g, cut)?;
                run = if small { run + 1 } else { 0 };
                if run >= TAIL_RUN {
                    break;
                }
                k += 1;
                if k > STEP_CAP {
                    return Err(Error::NonConvergence(
                        "tail truncation did not terminate".into(),
                    ));
                }
            }
        }

        let value = Float::with_val(bits, &acc.sum * &h) * &rad;
        let mut scale = Float::with_val(bits, &acc.abssum * &h) * &rad;
        if let Some(floor) = scale_floor {
            if scale < *floor {
                scale = floor.clone();
            }
        }

        if let Some(p) = &prev {
            let err = Float::with_val(bits, &value - p).abs();
            if level >= MIN_LEVEL && err <= Float::with_val(bits, &tol * &scale) {
                return Ok(QuadratureResult {
                    value,
                    error_estimate: err,
                    evaluations,
                });
            }
            if let Some(pe) = &prev_err {
                if level >= STALL_LEVEL && Float::with_val(bits, 2u32 * &err) > *pe {
                    stalled += 1;
                    if stalled >= 2 {
                        return Err(Error::NonConvergence(
                            "two successive levels failed to halve the error estimate".into(),
                        ));
                    }
                } else {
                    stalled = 0;
                }
            }
            prev_err = Some(err);
        }
        prev = Some(value);
    }

    Err(Error::NonConvergence(format!(
        "no agreement after {MAX_LEVEL} refinement levels"
    )))
}

pub(crate) fn integrate_finite<F>(
    f: F,
    a: &Real,
    b: &Real,
    prec: &PrecisionSpec,
) -> Result<QuadratureResult>
where
    F: FnMut(&Real) -> Real,
{
    integrate_finite_floored(f, a, b, None, prec)
}

/// Cauchy principal value of ∫_a^b f(x) dx where f has a simple pole at
/// `pole` inside (a, b).
///
/// Writing f(x) = g(x)/(x - c), the kernel integrates the regularized
/// part (g(x) - g(c))/(x - c) with the finite-interval rule and adds
/// g(c) ln((b - c)/(c - a)). The residue g(c) is recovered from a
/// symmetric pair of samples straddling the pole.
pub fn integrate_pv<F>(
    mut f: F,
    pole: &Real,
    support: (&Real, &Real),
    prec: &PrecisionSpec,
) -> Result<QuadratureResult>
where
    F: FnMut(&Real) -> Real,
{
    let (a, b) = support;
    let interior = pole.partial_cmp(a) == Some(std::cmp::Ordering::Greater)
        && pole.partial_cmp(b) == Some(std::cmp::Ordering::Less);
    if !interior {
        return Err(Error::PoleOnBoundary {
            pole: format!("{:e}", pole.to_f64()),
            a: format!("{:e}", a.to_f64()),
            b: format!("{:e}", b.to_f64()),
        });
    }
    let bits = prec.bits();
    let wd = prec.working_digits() as i64;

    let gap = Float::with_val(bits, b - pole).min(&Float::with_val(bits, pole - a));
    let delta = Float::with_val(bits, &gap * &pow10(bits, -(wd / 2 + 2)));
    // c ± δ round; the realized offsets dp, dm are then exact by
    // Sterbenz, and only they may enter the arithmetic (dividing g by
    // the intended δ instead would smear an O(|f| ε/δ) absolute error
    // into the cancellation below)
    let xp = Float::with_val(bits, pole + &delta);
    let xm = Float::with_val(bits, pole - &delta);
    let dp = Float::with_val(bits, &xp - pole);
    let dm = Float::with_val(bits, pole - &xm);
    let fp = f(&xp);
    let fm = f(&xm);
    if !fp.is_finite() || !fm.is_finite() {
        return Err(Error::Domain("integrand not finite beside the pole".into()));
    }
    let g_p = Float::with_val(bits, &fp * &dp);
    let g_m = -Float::with_val(bits, &fm * &dm);
    let span = Float::with_val(bits, &dp + &dm);
    // linear interpolation of g at the pole, exact for g affine
    let residue = (Float::with_val(bits, &g_p * &dm) + Float::with_val(bits, &g_m * &dp)) / &span;
    // two-point slope estimates the regularized integrand at the pole
    let at_pole = Float::with_val(bits, &g_p - &g_m) / &span;

    // floor for the convergence scale: the subtracted integrand can be
    // numerically zero while the principal value itself is O(residue)
    let mut floor = residue.clone().abs();
    floor += Float::with_val(bits, &at_pole * &Float::with_val(bits, b - a)).abs();

    // integrate the regularized part on (a, c) and (c, b) separately:
    // the rule clusters nodes at the split point, where its weights
    // decay fast enough to absorb the subtraction's cancellation noise
    let mut regularized = |x: &Real| {
        let d = Float::with_val(bits, x - pole);
        Float::with_val(bits, &f(x) - &(residue.clone() / d))
    };
    let lower = integrate_finite_floored(&mut regularized, a, pole, Some(&floor), prec)?;
    let upper = integrate_finite_floored(&mut regularized, pole, b, Some(&floor), prec)?;

    let log_term = (Float::with_val(bits, b - pole) / Float::with_val(bits, pole - a)).ln();
    let pole_part = Float::with_val(bits, &residue * &log_term);
    let value = Float::with_val(bits, &lower.value + &upper.value) + &pole_part;
    let mut error_estimate = Float::with_val(bits, &lower.error_estimate + &upper.error_estimate);
    error_estimate += pole_part.abs() * pow10(bits, -(wd - 10));
    Ok(QuadratureResult {
        value,
        error_estimate,
        evaluations: lower.evaluations + upper.evaluations + 2,
    })
}

/// Sixth-order Richardson-extrapolated t-derivative.
#[derive(Clone, Debug)]
pub struct DerivativeResult {
    pub value: Real,
    /// Last extrapolation increment.
    pub error_estimate: Real,
    /// Plain central differences at steps h, h/2, h/4 before any
    /// extrapolation, for step-convergence diagnostics.
    pub raw: [Real; 3],
    /// The six abscissae actually evaluated.
    pub grid: Vec<Rat>,
}

/// d/dt of a scalar function evaluated on an exact rational t-grid:
/// central differences at steps h, h/2, h/4 with h = t0 · 10^(-D/4),
/// Richardson-extrapolated to order h⁶.
pub fn derivative_t<G>(mut g: G, t0: &Rat, prec: &PrecisionSpec) -> Result<DerivativeResult>
where
    G: FnMut(&Rat) -> Result<Real>,
{
    if *t0 <= 0u32 {
        return Err(Error::Domain("derivative_t requires t0 > 0".into()));
    }
    let bits = prec.bits();
    let k = prec.digits().div_ceil(4);
    // the smallest step h/4 must stay well above one ulp of t0
    if ((k + 1) as f64) * LOG2_10 > (bits as f64) - 4.0 {
        return Err(Error::StepUnderflow);
    }
    let mut scale = Rat::from(1u32);
    for _ in 0..k {
        scale /= 10u32;
    }
    let h0 = Rat::from(t0 * &scale);

    let mut grid = Vec::with_capacity(6);
    let mut raw: Vec<Real> = Vec::with_capacity(3);
    let mut hm = h0;
    for _ in 0..3 {
        let tp = Rat::from(t0 + &hm);
        let tm = Rat::from(t0 - &hm);
        let gp = g(&tp)?;
        let gm = g(&tm)?;
        grid.push(tp);
        grid.push(tm);
        let two_h = Float::with_val(bits, &hm) * 2u32;
        raw.push(Float::with_val(bits, &gp - &gm) / two_h);
        hm /= 2u32;
    }

    // eliminate the h² then the h⁴ error terms
    let r1 = Float::with_val(bits, 4u32 * &raw[1]) - &raw[0];
    let r1 = r1 / 3u32;
    let r2 = Float::with_val(bits, 4u32 * &raw[2]) - &raw[1];
    let r2 = r2 / 3u32;
    let value = (Float::with_val(bits, 16u32 * &r2) - &r1) / 15u32;
    let error_estimate = Float::with_val(bits, &value - &r2).abs();
    Ok(DerivativeResult {
        value,
        error_estimate,
        raw: [raw[0].clone(), raw[1].clone(), raw[2].clone()],
        grid,
    })
}
