//! Coulomb-fluid equilibrium model for the large-n behavior of the
//! recurrence coefficients.
//!
//! For n fluid particles under the cubic part of the potential the
//! equilibrium density is supported on (0, b) with 15b³/32 = n and
//!
//! ```text
//! σ(x) = 3 (8x² + 4bx + 3b²) / (16π) · sqrt((b − x)/x),
//! ```
//!
//! a hard edge at the origin and a soft edge at b. The density solves
//! the principal-value equilibrium condition v′(x) = 2 PV ∫ σ(y)/(x−y) dy
//! for the cubic potential; the λ/x and t/x² parts of the full v′ are not
//! cancelled by this σ and their defect is recorded, not asserted. The
//! implied coefficient asymptotics are α_n ∼ b/2 = (4n/15)^{1/3} and
//! β_n ∼ b²/16 = (n²/900)^{1/3}.

use std::cmp::Ordering;

use rug::Float;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numeric::{integrate_finite, integrate_pv, pi, PrecisionSpec};
use crate::recurrence::RecurrenceTable;
use crate::report::{dec, ResidualReport};
use crate::weight::WeightParams;
use crate::Real;

/// Fluid particle number and the support endpoint it fixes.
#[derive(Clone, Debug)]
pub struct FluidModel {
    n: Real,
    b: Real,
}

/// b = (32 n / 15)^{1/3}.
pub fn fluid_endpoint(n: &Real) -> Result<Real> {
    if n.cmp0() != Some(Ordering::Greater) {
        return Err(Error::Domain(
            "fluid particle number must be positive".into(),
        ));
    }
    let bits = n.prec();
    let cube = Float::with_val(bits, 32u32 * n) / 15u32;
    Ok(cube.cbrt())
}

impl FluidModel {
    pub fn new(n: &Real) -> Result<Self> {
        let b = fluid_endpoint(n)?;
        Ok(FluidModel { n: n.clone(), b })
    }

    pub fn n(&self) -> &Real {
        &self.n
    }

    pub fn b(&self) -> &Real {
        &self.b
    }
}

/// σ(x) on (0, b]; diverges like x^{-1/2} at the hard edge and vanishes
/// like (b − x)^{1/2} at the soft edge.
pub fn fluid_density(model: &FluidModel, x: &Real) -> Result<Real> {
    let b = &model.b;
    if x.cmp0() != Some(Ordering::Greater) || x > b {
        return Err(Error::Domain("density is defined on (0, b]".into()));
    }
    let bits = x.prec();
    Ok(density_polynomial(model, x) * edge_factor(b, x, bits))
}

/// 3 (8x² + 4bx + 3b²) / (16π); strictly positive (the quadratic has
/// negative discriminant).
fn density_polynomial(model: &FluidModel, x: &Real) -> Real {
    let bits = x.prec();
    let b = Float::with_val(bits, &model.b);
    let mut q = Float::with_val(bits, 8u32 * &x.clone().square());
    q += Float::with_val(bits, 4u32 * &b) * x;
    q += Float::with_val(bits, 3u32 * &b.clone().square());
    q * 3u32 / (pi(bits) * 16u32)
}

fn edge_factor(b: &Real, x: &Real, bits: u32) -> Real {
    (Float::with_val(bits, b - x) / x.clone()).sqrt()
}

/// ∫_0^b σ dx by quadrature; analytically equal to n. The substitution
/// y = b sin²θ regularizes both edges before integration.
pub fn fluid_mass(model: &FluidModel, prec: &PrecisionSpec) -> Result<Real> {
    let bits = prec.bits();
    let b = Float::with_val(bits, &model.b);
    let a = Float::new(bits);
    let half_pi = pi(bits) / 2u32;
    // σ(y) dy = 2b · C(y) cos²θ dθ with C the polynomial part, regular
    // on the whole closed interval
    let r = integrate_finite(
        |theta: &Real| {
            let s = theta.clone().sin();
            let y = Float::with_val(bits, &b * &s.clone().square());
            let c = theta.clone().cos();
            Float::with_val(bits, 2u32 * &b) * density_polynomial(model, &y) * c.square()
        },
        &a,
        &half_pi,
        prec,
    )?;
    Ok(r.value)
}

/// Residual of the equilibrium condition for the cubic potential:
/// |3x² − 2 PV ∫_0^b σ(y)/(x−y) dy| / max(1, 3x²) at each sample.
/// Samples must sit inside (0, b) at least b/100 from either edge.
pub fn fluid_sie_residual(
    model: &FluidModel,
    xs: &[Real],
    prec: &PrecisionSpec,
) -> Result<ResidualReport> {
    sie_residual_impl(model, None, xs, prec)
}

/// Same residual against the full v′(x) = 3x² − λ/x − t/x². The λ and t
/// terms are not cancelled by the cubic-potential density; this records
/// the size of that defect.
pub fn fluid_sie_residual_full(
    params: &WeightParams,
    model: &FluidModel,
    xs: &[Real],
    prec: &PrecisionSpec,
) -> Result<ResidualReport> {
    sie_residual_impl(model, Some(params), xs, prec)
}

fn sie_residual_impl(
    model: &FluidModel,
    params: Option<&WeightParams>,
    xs: &[Real],
    prec: &PrecisionSpec,
) -> Result<ResidualReport> {
    let bits = prec.bits();
    let b = Float::with_val(bits, &model.b);
    let margin = Float::with_val(bits, &b / &Float::with_val(bits, 100u32));
    let mut report = ResidualReport::new();
    let name = if params.is_some() {
        "equilibrium_sie_full_potential"
    } else {
        "equilibrium_sie"
    };

    for x in xs {
        let x = Float::with_val(bits, x);
        if x < margin || Float::with_val(bits, &b - &x) < margin {
            return Err(Error::Domain(
                "equilibrium samples must stay b/100 away from the edges".into(),
            ));
        }
        // y = b sin²θ turns σ(y) dy/(x−y) into
        // 2b C(y) cos²θ / (x − b sin²θ) dθ with a simple pole at
        // θ_c = asin(sqrt(x/b)); the denominator is evaluated in its
        // product form b sin(θ_c+θ) sin(θ_c−θ), which keeps full
        // relative accuracy for nodes clustered against the pole
        let theta_c = Float::with_val(bits, &x / &b).sqrt().asin();
        let a0 = Float::new(bits);
        let half_pi = pi(bits) / 2u32;
        let pv = integrate_pv(
            |theta: &Real| {
                let s = theta.clone().sin();
                let y = Float::with_val(bits, &b * &s.clone().square());
                let c = theta.clone().cos();
                let num =
                    Float::with_val(bits, 2u32 * &b) * density_polynomial(model, &y) * c.square();
                let den =
                    Float::with_val(bits, &b * &Float::with_val(bits, &theta_c + theta).sin())
                        * Float::with_val(bits, &theta_c - theta).sin();
                num / den
            },
            &theta_c,
            (&a0, &half_pi),
            prec,
        )?;

        let mut vp = Float::with_val(bits, 3u32 * &x.clone().square());
        if let Some(p) = params {
            vp -= p.lambda_f(bits) / x.clone();
            vp -= p.t_f(bits) / x.clone().square();
        }
        let two_pv = Float::with_val(bits, 2u32 * &pv.value);
        let abs = Float::with_val(bits, &vp - &two_pv).abs();
        let mut scale = vp.clone().abs();
        if scale < 1u32 {
            scale = Float::with_val(bits, 1);
        }
        let rel = Float::with_val(bits, &abs / &scale);
        report.push(name, None, Some(x.clone()), abs, rel, scale);
    }
    Ok(report)
}

/// One row of the ratio series.
#[derive(Clone, Debug)]
pub struct RatioRow {
    pub n: usize,
    pub alpha_ratio: Real,
    pub beta_ratio: Real,
}

/// The ratio series plus fitted correction exponents.
pub struct AsymptoticSeries {
    pub rows: Vec<RatioRow>,
    /// Log-log slope of |alpha_ratio − 1| against n.
    pub alpha_exponent: Real,
    /// Log-log slope of |beta_ratio − 1| against n.
    pub beta_exponent: Real,
}

/// α_n / (4n/15)^{1/3} and β_n / (n²/900)^{1/3} over the given n values,
/// with correction exponents from least-squares log-log regression of
/// |ratio − 1| against n.
pub fn asymptotic_ratios(table: &RecurrenceTable, ns: &[usize]) -> Result<AsymptoticSeries> {
    if ns.len() < 2 {
        return Err(Error::Domain("need at least two n values to fit".into()));
    }
    let bits = table.bits();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        if n == 0 {
            return Err(Error::Domain("ratio series needs n >= 1".into()));
        }
        let nf = Float::with_val(bits, n as u32);
        let alpha_scale = (Float::with_val(bits, 4u32 * &nf) / 15u32).cbrt();
        let beta_scale = (nf.clone().square() / 900u32).cbrt();
        rows.push(RatioRow {
            n,
            alpha_ratio: Float::with_val(bits, table.alpha(n)? / &alpha_scale),
            beta_ratio: Float::with_val(bits, table.beta(n)? / &beta_scale),
        });
    }
    let alpha_exponent = fit_loglog(bits, &rows, |r| &r.alpha_ratio);
    let beta_exponent = fit_loglog(bits, &rows, |r| &r.beta_ratio);
    Ok(AsymptoticSeries {
        rows,
        alpha_exponent,
        beta_exponent,
    })
}

fn fit_loglog<'a, F>(bits: u32, rows: &'a [RatioRow], pick: F) -> Real
where
    F: Fn(&'a RatioRow) -> &'a Real,
{
    let pts: Vec<(Real, Real)> = rows
        .iter()
        .map(|r| {
            let x = Float::with_val(bits, r.n as u32).ln();
            let dev = Float::with_val(bits, pick(r) - &Float::with_val(bits, 1u32)).abs();
            (x, dev.ln())
        })
        .collect();
    let m = Float::with_val(bits, pts.len() as u32);
    let mut xbar = Float::new(bits);
    let mut ybar = Float::new(bits);
    for (x, y) in &pts {
        xbar += x;
        ybar += y;
    }
    xbar /= &m;
    ybar /= &m;
    let mut num = Float::new(bits);
    let mut den = Float::new(bits);
    for (x, y) in &pts {
        let dx = Float::with_val(bits, x - &xbar);
        num += Float::with_val(bits, &dx * &Float::with_val(bits, y - &ybar));
        den += dx.square();
    }
    num / den
}

impl AsymptoticSeries {
    /// CSV with columns n, alpha_ratio, beta_ratio.
    pub fn to_csv(&self, digits: usize) -> String {
        let mut out = String::from("n,alpha_ratio,beta_ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                r.n,
                dec(&r.alpha_ratio, digits),
                dec(&r.beta_ratio, digits)
            ));
        }
        out
    }

    /// Plot-ready JSON series.
    pub fn to_json(&self, digits: usize) -> Value {
        json!({
            "series": self.rows.iter().map(|r| {
                json!({
                    "n": r.n,
                    "alpha_ratio": dec(&r.alpha_ratio, digits),
                    "beta_ratio": dec(&r.beta_ratio, digits),
                })
            }).collect::<Vec<_>>(),
            "alpha_exponent": dec(&self.alpha_exponent, digits),
            "beta_exponent": dec(&self.beta_exponent, digits),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::pow10;

    #[test]
    fn endpoint_inverts_the_cubic() {
        let bits = 256;
        // n = 15/32 → b = 1
        let n = Float::with_val(bits, 15u32) / 32u32;
        let b = fluid_endpoint(&n).unwrap();
        let err = Float::with_val(bits, &b - &Float::with_val(bits, 1)).abs();
        assert!(err < pow10(bits, -70));
        // n = 15/4 → b = 2
        let n = Float::with_val(bits, 15u32) / 4u32;
        let b = fluid_endpoint(&n).unwrap();
        let err = Float::with_val(bits, &b - &Float::with_val(bits, 2)).abs();
        assert!(err < pow10(bits, -70));
        // n = 100 → b ≈ 5.9631
        let b = fluid_endpoint(&Float::with_val(bits, 100)).unwrap();
        assert!((b.to_f64() - (3200.0f64 / 15.0).cbrt()).abs() < 1e-12);
        assert!(fluid_endpoint(&Float::with_val(bits, 0)).is_err());
    }

    #[test]
    fn endpoint_scaling_is_exact_cube_root() {
        // b(8n) = 2 b(n)
        let bits = 256;
        for nv in [0.7, 3.0, 42.0] {
            let n = Float::with_val(bits, nv);
            let b1 = fluid_endpoint(&n).unwrap();
            let b8 = fluid_endpoint(&Float::with_val(bits, 8u32 * &n)).unwrap();
            let err = Float::with_val(bits, &b8 - &(Float::with_val(bits, 2u32 * &b1))).abs();
            assert!(err < pow10(bits, -70) * b8.clone());
        }
    }

    #[test]
    fn density_values_and_edges() {
        let bits = 256;
        // b = 1 at n = 15/32; σ(1/2) = 21/(16π)
        let n = Float::with_val(bits, 15u32) / 32u32;
        let model = FluidModel::new(&n).unwrap();
        let x = Float::with_val(bits, 0.5);
        let sigma = fluid_density(&model, &x).unwrap();
        let want = Float::with_val(bits, 21u32) / (pi(bits) * 16u32);
        let err = Float::with_val(bits, &sigma - &want).abs() / want.clone();
        assert!(err < pow10(bits, -60), "err = {:e}", err.to_f64());

        // soft edge
        let at_b = fluid_density(&model, model.b()).unwrap();
        assert!(at_b.is_zero());
        // outside the support
        assert!(fluid_density(&model, &Float::with_val(bits, 1.5)).is_err());
        assert!(fluid_density(&model, &Float::with_val(bits, 0)).is_err());

        // positivity inside
        for xa in [1e-6, 0.1, 0.5, 0.9, 0.999] {
            let x = Float::with_val(bits, xa);
            assert!(fluid_density(&model, &x).unwrap() > 0u32);
        }
    }

    #[test]
    fn mass_equals_particle_number() {
        let prec = PrecisionSpec::new(30).unwrap();
        let bits = prec.bits();
        for nv in [1.0, 10.0] {
            let n = Float::with_val(bits, nv);
            let model = FluidModel::new(&n).unwrap();
            let mass = fluid_mass(&model, &prec).unwrap();
            let rel = Float::with_val(bits, &mass - &n).abs() / n.clone();
            assert!(rel < pow10(bits, -20), "n={nv}: rel = {:e}", rel.to_f64());
        }
    }

    #[test]
    fn density_solves_cubic_equilibrium() {
        let prec = PrecisionSpec::new(30).unwrap();
        let bits = prec.bits();
        let n = Float::with_val(bits, 10);
        let model = FluidModel::new(&n).unwrap();
        let half_b = Float::with_val(bits, model.b()) / 2u32;
        let report = fluid_sie_residual(&model, &[half_b], &prec).unwrap();
        let worst = report.max_rel().unwrap();
        assert!(worst < pow10(bits, -12), "worst = {:e}", worst.to_f64());
    }

    #[test]
    fn full_potential_defect_is_visible() {
        // λ/x + t/x² terms are not cancelled; the recorded residual must
        // sit near their size, far above the cubic-only residual
        let prec = PrecisionSpec::new(30).unwrap();
        let bits = prec.bits();
        let params = WeightParams::from_decimal("1", "1").unwrap();
        let n = Float::with_val(bits, 10);
        let model = FluidModel::new(&n).unwrap();
        let x = Float::with_val(bits, model.b()) / 2u32;
        let full =
            fluid_sie_residual_full(&params, &model, std::slice::from_ref(&x), &prec).unwrap();
        let defect = full.max_rel().unwrap();
        // the uncancelled part is exactly λ/x + t/x², normalized by |v′|
        let extra = x.clone().recip() + x.clone().square().recip();
        let vp = Float::with_val(bits, 3u32) * x.clone().square() - &extra;
        let expected = extra / vp.abs();
        let ratio = defect.clone() / expected;
        assert!(
            (ratio.to_f64() - 1.0).abs() < 1e-6,
            "ratio = {}",
            ratio.to_f64()
        );
    }

    #[test]
    fn edge_margin_enforced() {
        let prec = PrecisionSpec::new(30).unwrap();
        let bits = prec.bits();
        let n = Float::with_val(bits, 10);
        let model = FluidModel::new(&n).unwrap();
        let too_close = Float::with_val(bits, model.b()) * Float::with_val(bits, 0.001);
        assert!(fluid_sie_residual(&model, &[too_close], &prec).is_err());
    }

    #[test]
    fn ratio_scales_arithmetic() {
        // (4n/15)^{1/3} at n = 15 is 4^{1/3}
        let bits = 256;
        let nf = Float::with_val(bits, 15);
        let scale = (Float::with_val(bits, 4u32 * &nf) / 15u32).cbrt();
        let want = Float::with_val(bits, 4).cbrt();
        let err = Float::with_val(bits, &scale - &want).abs();
        assert!(err < pow10(bits, -70));
        assert!((want.to_f64() - 1.5874).abs() < 1e-4);
    }
}
