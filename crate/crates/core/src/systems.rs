//! The nonlinear third-order difference system for α_n, β_n and the
//! second-order ODE for P_n.
//!
//! Both are pure consequences of the table: the difference equations
//! substitute R_k, r_k by their explicit forms, and the ODE coefficients
//! use the closed-form starred quantities, so everything here is
//! assembled from recurrence coefficients alone and checked as residuals
//! against independently constructed polynomials.

use std::cmp::Ordering;

use rug::Float;

use crate::error::{Error, Result};
use crate::ladder::aux_rr;
use crate::numeric::pow10;
use crate::recurrence::RecurrenceTable;
use crate::report::{residual_parts, ResidualReport};
use crate::Real;

/// Residuals of the two coupled difference equations. Valid for
/// 2 ≤ n ≤ nmax − 2: both equations reach indices n−1 .. n+1 and the
/// second additionally R_{n+1}, i.e. β_{n+2}.
pub fn difference_system_residuals(table: &RecurrenceTable, n: usize) -> Result<ResidualReport> {
    if n < 2 {
        return Err(Error::Domain(
            "difference system stencil needs n >= 2".into(),
        ));
    }
    if n + 2 > table.nmax() {
        return Err(Error::Index {
            n,
            limit: table.nmax() - 2,
        });
    }
    let bits = table.bits();
    let lam = table.params().lambda_f(bits);
    let t = table.params().t_f(bits);

    let (big_nm1, small_nm1) = aux_rr(table, n - 1)?;
    let (big_n, small_n) = aux_rr(table, n)?;
    let (big_np1, small_np1) = aux_rr(table, n + 1)?;
    let alpha_nm1 = table.alpha(n - 1)?;
    let alpha_n = table.alpha(n)?;
    let alpha_np1 = table.alpha(n + 1)?;
    let beta_n = table.beta(n)?;
    let beta_np1 = table.beta(n + 1)?;

    // the two bracketed combinations every term is built from
    let comb_n = Float::with_val(bits, &small_n + &small_np1)
        + Float::with_val(bits, alpha_n * &big_n)
        - &lam;
    let comb_nm1 = Float::with_val(bits, &small_nm1 + &small_n)
        + Float::with_val(bits, alpha_nm1 * &big_nm1)
        - &lam;
    let x_term = Float::with_val(bits, &comb_n * beta_n) * &big_nm1;
    let y_term = Float::with_val(bits, &comb_nm1 * beta_n) * &big_n;
    let tr = Float::with_val(bits, &t * &small_n);
    let den = Float::with_val(bits, 2u32 * &small_n) - &lam;

    let mut report = ResidualReport::new();

    // product form
    let f1 = Float::with_val(bits, &x_term + &y_term) + &tr;
    let f2 = Float::with_val(bits, &x_term + &y_term) - &tr + Float::with_val(bits, &lam * &t);
    let lhs = Float::with_val(bits, &f1 * &f2);
    let rhs = Float::with_val(bits, beta_n * &den.clone().square())
        * Float::with_val(bits, &comb_n * &comb_nm1);
    let mut m = Float::new(bits);
    for term in [&x_term, &y_term, &tr, &Float::with_val(bits, &lam * &t)] {
        let a = term.clone().abs();
        if a > m {
            m = a;
        }
    }
    let mut scale = m.clone().square();
    let rhs_mag = rhs.clone().abs();
    if rhs_mag > scale {
        scale = rhs_mag;
    }
    let abs = Float::with_val(bits, &lhs - &rhs).abs();
    let rel = if scale > 0u32 {
        Float::with_val(bits, &abs / &scale)
    } else {
        abs.clone()
    };
    report.push("difference_product", Some(n), None, abs, rel, scale);

    // linear form
    let inner = Float::with_val(bits, &comb_n - &Float::with_val(bits, 1u32));
    let bracket = Float::with_val(bits, alpha_n * &inner)
        + Float::with_val(bits, 3u32 * &beta_n.clone().square())
        - Float::with_val(bits, 3u32 * &beta_np1.clone().square())
        - &t;
    let lhs_terms = [
        Float::with_val(bits, 2u32 * &x_term),
        Float::with_val(bits, 2u32 * &y_term),
        Float::with_val(bits, 2u32 * &tr),
        Float::with_val(bits, &den * &bracket),
    ];
    let pack_n = Float::with_val(bits, 3u32 * alpha_n) * alpha_nm1
        + Float::with_val(bits, &big_n + &big_nm1);
    let pack_np1 = Float::with_val(bits, 3u32 * alpha_np1) * alpha_n
        + Float::with_val(bits, &big_np1 + &big_n);
    let rhs_terms = [
        Float::with_val(bits, &den * &Float::with_val(bits, beta_n * &pack_n)),
        -Float::with_val(bits, &den * &Float::with_val(bits, beta_np1 * &pack_np1)),
    ];
    let (abs, rel, scale) = residual_parts(bits, &lhs_terms, &rhs_terms);
    report.push("difference_linear", Some(n), None, abs, rel, scale);

    Ok(report)
}

/// Coefficient data of the second-order ODE
/// P_n″ − c₁(x) P_n′ + c₀(x) P_n = 0 with
/// c₁ = v′ + A_n′/A_n and
/// c₀ = B_n′ − B_n² − v′B_n + β_n A_n A_{n-1} − A_n′B_n/A_n,
/// everything assembled from closed forms; the derivatives
/// A_n′ = 3 − R_n/x² − 2R*_n/x³ and B_n′ = −r_n/x² − 2r*_n/x³ are exact,
/// never numerical.
#[derive(Clone, Debug)]
pub struct OdeCoefficients {
    n: usize,
    bits: u32,
    digits: u32,
    alpha_n: Real,
    alpha_nm1: Real,
    beta_n: Real,
    big_n: Real,
    big_nm1: Real,
    bstar_n: Real,
    bstar_nm1: Real,
    small_n: Real,
    sstar_n: Real,
    lam: Real,
    t: Real,
}

/// Builds the ODE coefficient functions for index n (1 ≤ n ≤ nmax − 2).
pub fn ode_coefficients(table: &RecurrenceTable, n: usize) -> Result<OdeCoefficients> {
    if n < 1 {
        return Err(Error::Domain("the ODE stencil needs n >= 1".into()));
    }
    if n + 2 > table.nmax() {
        return Err(Error::Index {
            n,
            limit: table.nmax() - 2,
        });
    }
    let bits = table.bits();
    let lam = table.params().lambda_f(bits);
    let t = table.params().t_f(bits);

    let (big_n, small_n) = aux_rr(table, n)?;
    let (big_nm1, small_nm1) = aux_rr(table, n - 1)?;
    let (_, small_np1) = aux_rr(table, n + 1)?;

    // closed-form starred quantities
    let bstar_n = Float::with_val(bits, &small_n + &small_np1)
        + Float::with_val(bits, table.alpha(n)? * &big_n)
        - &lam;
    let bstar_nm1 = Float::with_val(bits, &small_nm1 + &small_n)
        + Float::with_val(bits, table.alpha(n - 1)? * &big_nm1)
        - &lam;
    let sstar_n = if table.params().t_is_zero() {
        Float::new(bits)
    } else {
        crate::ladder::star_closed(table, n)?.1
    };

    Ok(OdeCoefficients {
        n,
        bits,
        digits: table.prec().digits(),
        alpha_n: table.alpha(n)?.clone(),
        alpha_nm1: table.alpha(n - 1)?.clone(),
        beta_n: table.beta(n)?.clone(),
        big_n,
        big_nm1,
        bstar_n,
        bstar_nm1,
        small_n,
        sstar_n,
        lam,
        t,
    })
}

impl OdeCoefficients {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a_n(&self, x: &Real) -> Real {
        let bits = self.bits;
        let inv = x.clone().recip();
        Float::with_val(bits, 3u32 * x)
            + Float::with_val(bits, 3u32 * &self.alpha_n)
            + Float::with_val(bits, &self.big_n * &inv)
            + Float::with_val(bits, &self.bstar_n * &inv.clone().square())
    }

    pub fn a_nm1(&self, x: &Real) -> Real {
        let bits = self.bits;
        let inv = x.clone().recip();
        Float::with_val(bits, 3u32 * x)
            + Float::with_val(bits, 3u32 * &self.alpha_nm1)
            + Float::with_val(bits, &self.big_nm1 * &inv)
            + Float::with_val(bits, &self.bstar_nm1 * &inv.clone().square())
    }

    pub fn b_n(&self, x: &Real) -> Real {
        let bits = self.bits;
        let inv = x.clone().recip();
        Float::with_val(bits, 3u32 * &self.beta_n)
            + Float::with_val(bits, &self.small_n * &inv)
            + Float::with_val(bits, &self.sstar_n * &inv.clone().square())
    }

    /// A_n′(x) = 3 − R_n/x² − 2R*_n/x³, exactly.
    pub fn a_n_prime(&self, x: &Real) -> Real {
        let bits = self.bits;
        let inv2 = x.clone().square().recip();
        let inv3 = Float::with_val(bits, &inv2 / x);
        Float::with_val(bits, 3u32)
            - Float::with_val(bits, &self.big_n * &inv2)
            - Float::with_val(bits, 2u32 * &self.bstar_n) * inv3
    }

    /// B_n′(x) = −r_n/x² − 2r*_n/x³, exactly.
    pub fn b_n_prime(&self, x: &Real) -> Real {
        let bits = self.bits;
        let inv2 = x.clone().square().recip();
        let inv3 = Float::with_val(bits, &inv2 / x);
        -Float::with_val(bits, &self.small_n * &inv2)
            - Float::with_val(bits, 2u32 * &self.sstar_n) * inv3
    }

    fn v_prime(&self, x: &Real) -> Real {
        let bits = self.bits;
        Float::with_val(bits, 3u32 * &x.clone().square())
            - Float::with_val(bits, &self.lam / x)
            - Float::with_val(bits, &self.t / &x.clone().square())
    }

    fn a_gate(&self, x: &Real) -> Result<Real> {
        let a = self.a_n(x);
        if a.clone().abs() < pow10(self.bits, -(self.digits as i64 - 5)) {
            return Err(Error::CoefficientPole {
                x: format!("{:e}", x.to_f64()),
            });
        }
        Ok(a)
    }

    /// c₁(x) = v′(x) + A_n′(x)/A_n(x).
    pub fn c1(&self, x: &Real) -> Result<Real> {
        let a = self.a_gate(x)?;
        Ok(self.v_prime(x) + self.a_n_prime(x) / a)
    }

    /// c₀(x) = B_n′ − B_n² − v′B_n + β_n A_n A_{n-1} − A_n′B_n/A_n.
    pub fn c0(&self, x: &Real) -> Result<Real> {
        let bits = self.bits;
        let a = self.a_gate(x)?;
        let b = self.b_n(x);
        let vp = self.v_prime(x);
        let mut c = self.b_n_prime(x);
        c -= b.clone().square();
        c -= Float::with_val(bits, &vp * &b);
        c += Float::with_val(bits, &self.beta_n * &a) * self.a_nm1(x);
        c -= self.a_n_prime(x) * b / a;
        Ok(c)
    }
}

/// |P_n″ − c₁P_n′ + c₀P_n| / max(|P_n″|, |c₁P_n′|, |c₀P_n|) at each x.
/// The absolute defect is reported alongside because the relative one
/// loses meaning near zeros of P_n.
pub fn ode_residual(table: &RecurrenceTable, n: usize, xs: &[Real]) -> Result<ResidualReport> {
    let coeffs = ode_coefficients(table, n)?;
    let bits = table.bits();
    let mut report = ResidualReport::new();
    for x in xs {
        let x = Float::with_val(bits, x);
        if x.cmp0() != Some(Ordering::Greater) {
            return Err(Error::Domain("ODE samples need x > 0".into()));
        }
        let (p, dp, ddp) = table.eval_poly(n, &x)?;
        let c1 = coeffs.c1(&x)?;
        let c0 = coeffs.c0(&x)?;
        let t1 = Float::with_val(bits, &c1 * &dp);
        let t0 = Float::with_val(bits, &c0 * &p);
        let defect = Float::with_val(bits, &ddp - &t1) + &t0;
        let abs = defect.abs();
        let mut scale = ddp.clone().abs();
        for term in [&t1, &t0] {
            let m = term.clone().abs();
            if m > scale {
                scale = m;
            }
        }
        let rel = if scale > 0u32 {
            Float::with_val(bits, &abs / &scale)
        } else {
            abs.clone()
        };
        report.push("ode", Some(n), Some(x.clone()), abs, rel, scale);
    }
    Ok(report)
}
