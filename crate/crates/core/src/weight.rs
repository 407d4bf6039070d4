//! The singularly perturbed Airy weight w(x; t) = x^λ exp(−x³ − t/x) on
//! (0, ∞), its potential v = −ln w, the divided-difference kernel of v′,
//! and the moment machinery with Pearson-recursion certification.
//!
//! The weight satisfies (x² w)′ = (−3x⁴ + (λ+2)x + t) w; integrating that
//! against powers of x yields the four-term moment recursion
//! 3 μ_{j+4} = (j+λ+2) μ_{j+1} + t μ_j, which certifies the quadrature
//! end-to-end with no external data — it is this module's primary
//! self-test rather than any tabulated value.

use std::cmp::Ordering;

use rug::ops::Pow;
use rug::{Float, Integer};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numeric::{
    derivative_t, integrate_halfline, integrate_halfline_batch, pow10, PrecisionSpec,
};
use crate::report::{dec, fnv1a64};
use crate::{Rat, Real};

/// The pair (λ, t) defining the weight, kept as exact rationals so that
/// t-shifted rebuilds and serialized parameters are precision-free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightParams {
    lambda: Rat,
    t: Rat,
}

impl WeightParams {
    pub fn new(lambda: Rat, t: Rat) -> Result<Self> {
        if lambda <= -1i32 {
            return Err(Error::Domain(format!(
                "lambda must exceed -1, got {lambda}"
            )));
        }
        if t < 0i32 {
            return Err(Error::Domain(format!("t must be nonnegative, got {t}")));
        }
        Ok(WeightParams { lambda, t })
    }

    /// Parses decimal strings such as "0.5" or "-0.25e-1".
    pub fn from_decimal(lambda: &str, t: &str) -> Result<Self> {
        Self::new(parse_decimal(lambda)?, parse_decimal(t)?)
    }

    pub fn lambda(&self) -> &Rat {
        &self.lambda
    }

    pub fn t(&self) -> &Rat {
        &self.t
    }

    pub fn t_is_zero(&self) -> bool {
        self.t == 0u32
    }

    /// Same λ, different t; used by the t-evolution probes.
    pub fn with_t(&self, t: Rat) -> Result<Self> {
        Self::new(self.lambda.clone(), t)
    }

    pub(crate) fn lambda_f(&self, bits: u32) -> Real {
        Float::with_val(bits, &self.lambda)
    }

    pub(crate) fn t_f(&self, bits: u32) -> Real {
        Float::with_val(bits, &self.t)
    }
}

/// Exact decimal → rational: sign, digits, optional fraction, optional
/// exponent. Also accepts a plain "p/q".
pub fn parse_decimal(s: &str) -> Result<Rat> {
    let s = s.trim();
    if s.contains('/') {
        return s
            .parse::<Rat>()
            .map_err(|e| Error::Domain(format!("bad rational {s:?}: {e}")));
    }
    let bad = || Error::Domain(format!("bad decimal {s:?}"));
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (mantissa, neg) = match mantissa.strip_prefix('-') {
        Some(rest) => (rest, true),
        None => (mantissa.strip_prefix('+').unwrap_or(mantissa), false),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits: String = format!("{int_part}{frac_part}");
    let num: Integer = digits.parse().map_err(|_| bad())?;
    let mut r = Rat::from(num);
    let shift = exp - frac_part.len() as i32;
    let ten = Integer::from(10);
    if shift >= 0 {
        r *= Rat::from(ten.pow(shift as u32));
    } else {
        r /= Rat::from(ten.pow((-shift) as u32));
    }
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Rational rendered as an exact decimal when the denominator is 2^a 5^b,
/// falling back to "p/q".
pub fn rat_to_string(q: &Rat) -> String {
    let mut den = q.denom().clone();
    let mut pow2 = 0u32;
    while den.is_even() {
        den /= 2u32;
        pow2 += 1;
    }
    let mut pow5 = 0u32;
    while den.clone() % 5u32 == 0u32 && den > 1u32 {
        den /= 5u32;
        pow5 += 1;
    }
    if den != 1u32 {
        return q.to_string();
    }
    // scale to an integer over 10^k
    let k = pow2.max(pow5);
    let scale = Integer::from(2).pow(k - pow2.min(k)) * Integer::from(5).pow(k - pow5.min(k));
    let scaled: Integer = q.numer() * scale;
    let neg = scaled < 0u32;
    let digits = scaled.abs().to_string();
    let sign = if neg { "-" } else { "" };
    if k == 0 {
        return format!("{sign}{digits}");
    }
    let k = k as usize;
    if digits.len() > k {
        let (i, f) = digits.split_at(digits.len() - k);
        format!("{sign}{i}.{f}")
    } else {
        format!("{sign}0.{}{digits}", "0".repeat(k - digits.len()))
    }
}

/// w(x; t) = x^λ exp(−x³ − t/x); underflows cleanly to 0 under the
/// infinitely strong zero at the origin.
pub fn weight_eval(params: &WeightParams, x: &Real) -> Result<Real> {
    if x.cmp0() != Some(Ordering::Greater) {
        return Err(Error::Domain(format!(
            "weight needs x > 0, got {:e}",
            x.to_f64()
        )));
    }
    Ok(weight_raw(params, x, x.prec()))
}

/// Same, for callers that already guarantee x > 0.
pub(crate) fn weight_raw(params: &WeightParams, x: &Real, bits: u32) -> Real {
    // exp(λ ln x − x³ − t/x): a single exponential keeps the huge
    // intermediate magnitudes inside MPFR's exponent range
    let mut logw = params.lambda_f(bits) * x.clone().ln();
    logw -= x.clone().pow(3i32);
    if !params.t_is_zero() {
        logw -= params.t_f(bits) / x.clone();
    }
    logw.exp()
}

/// v(x), v′(x), and the divided-difference kernel
/// K(x,y) = (v′(x) − v′(y))/(x − y) in its closed form
/// 3(x+y) + λ/(xy) + t/(xy²) + t/(x²y), valid on the diagonal.
pub fn potential_parts(params: &WeightParams, x: &Real, y: &Real) -> Result<(Real, Real, Real)> {
    if x.cmp0() != Some(Ordering::Greater) || y.cmp0() != Some(Ordering::Greater) {
        return Err(Error::Domain("potential needs x, y > 0".into()));
    }
    let bits = x.prec();
    let lam = params.lambda_f(bits);
    let t = params.t_f(bits);

    let v = x.clone().pow(3i32) - lam.clone() * x.clone().ln() + t.clone() / x.clone();
    let vp = potential_derivative(params, x)?;

    let xy = Float::with_val(bits, x * y);
    let mut kernel = Float::with_val(bits, x + y) * 3u32;
    kernel += lam / &xy;
    kernel += t.clone() / (xy.clone() * y.clone());
    kernel += t / (xy * x.clone());
    Ok((v, vp, kernel))
}

/// v′(x) = 3x² − λ/x − t/x².
pub fn potential_derivative(params: &WeightParams, x: &Real) -> Result<Real> {
    if x.cmp0() != Some(Ordering::Greater) {
        return Err(Error::Domain("potential needs x > 0".into()));
    }
    let bits = x.prec();
    let mut vp = x.clone().square() * 3u32;
    vp -= params.lambda_f(bits) / x.clone();
    vp -= params.t_f(bits) / x.clone().square();
    Ok(vp)
}

/// μ_j(t) = ∫_0^∞ x^j w(x; t) dx. Negative j is admitted for t > 0,
/// where the essential zero keeps the integral finite.
pub fn moment(params: &WeightParams, j: i64, prec: &PrecisionSpec) -> Result<Real> {
    if params.t_is_zero() {
        let threshold = Rat::from(-1i64 - j);
        if params.lambda <= threshold {
            return Err(Error::Divergent);
        }
    }
    let bits = prec.bits();
    let r = integrate_halfline(
        |x: &Real| weight_raw(params, x, bits) * x.clone().pow(j as i32),
        prec,
    )?;
    Ok(r.value)
}

/// μ_0 .. μ_jmax at one (λ, t), Pearson-certified.
#[derive(Clone, Debug)]
pub struct MomentTable {
    params: WeightParams,
    prec: PrecisionSpec,
    mu: Vec<Real>,
    certified: bool,
    /// (j, relative residual) of the worst Pearson row.
    worst_pearson: (usize, Real),
}

/// Builds the table by one shared-node quadrature pass and certifies it:
/// every Pearson row 3μ_{j+4} = (j+λ+2)μ_{j+1} + tμ_j must hold to
/// relative 10^-(D-5), and for t > 0 three rows of μ_j′ = −μ_{j−1} are
/// spot-checked by Richardson differentiation.
pub fn moment_table(
    params: &WeightParams,
    jmax: usize,
    prec: &PrecisionSpec,
) -> Result<MomentTable> {
    if jmax < 4 {
        return Err(Error::Domain(format!("jmax must be >= 4, got {jmax}")));
    }
    let bits = prec.bits();
    let dim = jmax + 1;
    let (mu, errs, _evals) = integrate_halfline_batch(
        dim,
        |x: &Real, out: &mut [Real]| {
            out[0] = weight_raw(params, x, bits);
            for j in 1..out.len() {
                out[j] = Float::with_val(bits, &out[j - 1] * x);
            }
        },
        prec,
    )?;

    // each component must meet the kernel's per-result claim
    let target = pow10(bits, -(prec.digits() as i64));
    for (j, (m, e)) in mu.iter().zip(&errs).enumerate() {
        let mut claim = m.clone().abs();
        if claim < 1u32 {
            claim = Float::with_val(bits, 1);
        }
        if *e > claim * &target {
            return Err(Error::NonConvergence(format!(
                "moment j = {j} converged only to {:e}",
                e.to_f64()
            )));
        }
    }

    for (j, m) in mu.iter().enumerate() {
        if m.cmp0() != Some(Ordering::Greater) {
            return Err(Error::CertificationFailure {
                j,
                detail: format!("moment is not positive: {:e}", m.to_f64()),
            });
        }
    }

    let tol = pow10(bits, -(prec.digits() as i64 - 5));
    let lam = params.lambda_f(bits);
    let t = params.t_f(bits);
    let mut worst: (usize, Real) = (0, Float::new(bits));
    for j in 0..=jmax - 4 {
        let lhs = Float::with_val(bits, 3u32 * &mu[j + 4]);
        let coeff = Float::with_val(bits, j as u32 + 2u32) + &lam;
        let mid = Float::with_val(bits, &coeff * &mu[j + 1]);
        let low = Float::with_val(bits, &t * &mu[j]);
        let rhs = Float::with_val(bits, &mid + &low);
        let mut scale = lhs.clone().abs();
        for c in [&mid, &low] {
            let m = c.clone().abs();
            if m > scale {
                scale = m;
            }
        }
        let rel = Float::with_val(bits, &lhs - &rhs).abs() / scale;
        if rel > worst.1 {
            worst = (j, rel.clone());
        }
        if rel > tol {
            return Err(Error::CertificationFailure {
                j,
                detail: format!(
                    "Pearson residual {:e} above 1e-{}",
                    rel.to_f64(),
                    prec.digits() - 5
                ),
            });
        }
    }

    if !params.t_is_zero() {
        spot_check_moment_derivatives(params, &mu, jmax, prec)?;
    }

    Ok(MomentTable {
        params: params.clone(),
        prec: *prec,
        mu,
        certified: true,
        worst_pearson: worst,
    })
}

/// ∂w/∂t = −w/x gives μ_j′(t) = −μ_{j−1}(t); check three rows.
fn spot_check_moment_derivatives(
    params: &WeightParams,
    mu: &[Real],
    jmax: usize,
    prec: &PrecisionSpec,
) -> Result<()> {
    let bits = prec.bits();
    let tol = pow10(bits, -(prec.digits() as i64 - 10));
    for j in [1usize, 2, jmax.min(4)] {
        let d = derivative_t(
            |tau: &Rat| {
                let shifted = params.with_t(tau.clone())?;
                moment(&shifted, j as i64, prec)
            },
            params.t(),
            prec,
        )?;
        let want = -mu[j - 1].clone();
        let mut scale = want.clone().abs();
        let dm = d.value.clone().abs();
        if dm > scale {
            scale = dm;
        }
        let rel = Float::with_val(bits, &d.value - &want).abs() / scale;
        let budget = Float::with_val(bits, 10u32 * &d.error_estimate);
        if rel > tol && Float::with_val(bits, &d.value - &want).abs() > budget {
            return Err(Error::CertificationFailure {
                j,
                detail: format!("d mu_j/dt != -mu_(j-1): relative defect {:e}", rel.to_f64()),
            });
        }
    }
    Ok(())
}

impl MomentTable {
    pub fn params(&self) -> &WeightParams {
        &self.params
    }

    pub fn prec(&self) -> &PrecisionSpec {
        &self.prec
    }

    pub fn jmax(&self) -> usize {
        self.mu.len() - 1
    }

    pub fn certified(&self) -> bool {
        self.certified
    }

    pub fn worst_pearson(&self) -> (usize, &Real) {
        (self.worst_pearson.0, &self.worst_pearson.1)
    }

    pub fn mu(&self, j: usize) -> Result<&Real> {
        self.mu.get(j).ok_or(Error::Index {
            n: j,
            limit: self.mu.len() - 1,
        })
    }

    pub fn mu_all(&self) -> &[Real] {
        &self.mu
    }

    /// {lambda, t, digits, mu: [decimal strings]}.
    pub fn to_json(&self) -> Value {
        let digits = self.prec.digits() as usize;
        json!({
            "lambda": rat_to_string(&self.params.lambda),
            "t": rat_to_string(&self.params.t),
            "digits": self.prec.digits(),
            "mu": self.mu.iter().map(|m| dec(m, digits)).collect::<Vec<_>>(),
        })
    }

    /// FNV-1a over the serialized content; embedded in reports so a
    /// residual file names the table it was computed from.
    pub fn content_hash(&self) -> u64 {
        fnv1a64(self.to_json().to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d30() -> PrecisionSpec {
        PrecisionSpec::new(30).unwrap()
    }

    fn params(lambda: &str, t: &str) -> WeightParams {
        WeightParams::from_decimal(lambda, t).unwrap()
    }

    fn assert_rel(got: &Real, want: &Real, digits: i64) {
        let bits = got.prec();
        let mut scale = want.clone().abs();
        if scale < 1u32 {
            scale = Float::with_val(bits, 1);
        }
        let err = Float::with_val(bits, got - want).abs();
        assert!(
            err <= scale * pow10(bits, -digits),
            "off by {:e} (wanted {digits} digits)",
            err.to_f64()
        );
    }

    #[test]
    fn decimal_parsing() {
        assert_eq!(parse_decimal("0.5").unwrap(), Rat::from((1u32, 2u32)));
        assert_eq!(parse_decimal("-0.25e1").unwrap(), Rat::from((-5i32, 2i32)));
        assert_eq!(parse_decimal("3").unwrap(), Rat::from(3u32));
        assert_eq!(parse_decimal("1/3").unwrap(), Rat::from((1u32, 3u32)));
        assert!(parse_decimal("abc").is_err());
        assert_eq!(rat_to_string(&Rat::from((1u32, 2u32))), "0.5");
        assert_eq!(rat_to_string(&Rat::from((-1i32, 8i32))), "-0.125");
        assert_eq!(rat_to_string(&Rat::from((1u32, 3u32))), "1/3");
        assert_eq!(rat_to_string(&Rat::from(7u32)), "7");
    }

    #[test]
    fn params_invariants() {
        assert!(WeightParams::from_decimal("-1", "1").is_err());
        assert!(WeightParams::from_decimal("0", "-0.1").is_err());
        assert!(WeightParams::from_decimal("-0.999", "0").is_ok());
    }

    #[test]
    fn weight_values() {
        let bits = 128;
        // (λ=0, t=0): w(1) = e^{-1}
        let w = weight_eval(&params("0", "0"), &Float::with_val(bits, 1)).unwrap();
        let e1 = Float::with_val(bits, 1).exp().recip();
        assert_rel(&w, &e1, 30);
        // (λ=2, t=1): w(1) = e^{-2}
        let w = weight_eval(&params("2", "1"), &Float::with_val(bits, 1)).unwrap();
        let e2 = Float::with_val(bits, -2).exp();
        assert_rel(&w, &e2, 30);
        // x <= 0 rejected
        assert!(weight_eval(&params("0", "0"), &Float::with_val(bits, 0)).is_err());
    }

    #[test]
    fn weight_essential_zero_beats_any_power() {
        // w(x)/x^k -> 0 as x -> 0+ for every k when t > 0:
        // at x = 1e-4, w ~ e^{-1e4} ~ 1e-4343 sits far below x^200 = 1e-800
        let bits = 256;
        let p = params("0.5", "1");
        let x = Float::with_val(bits, 1e-4);
        let w = weight_eval(&p, &x).unwrap();
        assert!(w > 0u32);
        let bound = x.clone().pow(200i32);
        assert!(w < bound, "exp = {:?}", w.get_exp());
    }

    #[test]
    fn potential_closed_forms() {
        let bits = 128;
        // (λ=0,t=0): v'(2) = 12
        let x = Float::with_val(bits, 2);
        let (_, vp, _) = potential_parts(&params("0", "0"), &x, &x).unwrap();
        assert_rel(&vp, &Float::with_val(bits, 12), 30);

        // K(1,2) = 9 + 1/2 + 1/4 + 1/2 = 10.25 at (λ=1, t=1)
        let p = params("1", "1");
        let one = Float::with_val(bits, 1);
        let two = Float::with_val(bits, 2);
        let (_, _, k) = potential_parts(&p, &one, &two).unwrap();
        assert_rel(&k, &Float::with_val(bits, 10.25), 30);

        // cross-check against (v'(1) - v'(2))/(1 - 2)
        let vp1 = potential_derivative(&p, &one).unwrap();
        let vp2 = potential_derivative(&p, &two).unwrap();
        let quot = (vp1 - vp2) / Float::with_val(bits, -1);
        assert_rel(&k, &quot, 30);

        // diagonal equals v''(x) = 6x + λ/x² + 2t/x³
        let x = Float::with_val(bits, 0.7);
        let (_, _, kd) = potential_parts(&p, &x, &x).unwrap();
        let vpp = Float::with_val(bits, 6 * &x)
            + Float::with_val(bits, 1) / x.clone().square()
            + Float::with_val(bits, 2) / x.clone().pow(3i32);
        assert_rel(&kd, &vpp, 30);
    }

    #[test]
    fn kernel_is_symmetric() {
        let bits = 128;
        let p = params("0.5", "2");
        for (a, b) in [(0.3, 1.7), (0.9, 2.4), (1.0, 1.0), (0.05, 4.0)] {
            let x = Float::with_val(bits, a);
            let y = Float::with_val(bits, b);
            let (_, _, kxy) = potential_parts(&p, &x, &y).unwrap();
            let (_, _, kyx) = potential_parts(&p, &y, &x).unwrap();
            assert_rel(&kxy, &kyx, 35);
        }
    }

    #[test]
    fn moments_match_gamma_at_t_zero() {
        // μ_j = Γ((j+λ+1)/3)/3 at t = 0
        let prec = d30();
        let bits = prec.bits();
        let p = params("0", "0");
        let mu0 = moment(&p, 0, &prec).unwrap();
        let want0 = (Float::with_val(bits, 1) / 3u32).gamma() / 3u32;
        assert_rel(&mu0, &want0, 30);
        let mu2 = moment(&p, 2, &prec).unwrap();
        let want2 = Float::with_val(bits, 1) / Float::with_val(bits, 3);
        assert_rel(&mu2, &want2, 30);
    }

    #[test]
    fn moment_divergence_detected() {
        let p = params("0", "0");
        assert!(matches!(moment(&p, -1, &d30()), Err(Error::Divergent)));
        // t > 0 admits negative j
        let p = params("0", "1");
        let m = moment(&p, -1, &d30()).unwrap();
        assert!(m > 0u32);
    }

    #[test]
    fn table_certifies_and_serializes() {
        let prec = d30();
        let p = params("0", "1");
        let table = moment_table(&p, 8, &prec).unwrap();
        assert!(table.certified());
        assert_eq!(table.jmax(), 8);
        // 3 μ_4 = 2 μ_1 + μ_0 at λ=0, t=1
        let bits = prec.bits();
        let lhs = Float::with_val(bits, 3 * table.mu(4).unwrap());
        let rhs = Float::with_val(bits, 2 * table.mu(1).unwrap()) + table.mu(0).unwrap();
        assert_rel(&lhs, &rhs, 25);

        let v = table.to_json();
        assert_eq!(v["lambda"], "0");
        assert_eq!(v["t"], "1");
        assert_eq!(v["mu"].as_array().unwrap().len(), 9);
        // hashes are stable for identical input
        assert_eq!(
            table.content_hash(),
            moment_table(&p, 8, &prec).unwrap().content_hash()
        );
    }

    #[test]
    fn table_matches_single_moment_path() {
        let prec = d30();
        let p = params("0.5", "1");
        let table = moment_table(&p, 6, &prec).unwrap();
        for j in [0usize, 3, 6] {
            let single = moment(&p, j as i64, &prec).unwrap();
            assert_rel(table.mu(j).unwrap(), &single, 30);
        }
    }

    #[test]
    fn table_rejects_small_jmax() {
        assert!(moment_table(&params("0", "1"), 3, &d30()).is_err());
    }
}
