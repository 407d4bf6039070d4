//! Auxiliary quantities and ladder-operator verification.
//!
//! The lowering and raising operators for this weight have coefficient
//! functions of the fixed rational shape
//!
//! ```text
//! A_n(x) = 3x + 3α_n + R_n/x + R*_n/x²
//! B_n(x) = 3β_n + r_n/x + r*_n/x²
//! ```
//!
//! R_n and r_n are explicit in the recurrence coefficients; the starred
//! pair carries the essential-singularity contribution and has two
//! independent computation routes: the defining weighted integrals, and
//! closed forms in the recurrence coefficients. Agreement of the two
//! routes is the module's central test, and every identity check here
//! consumes integral-path star values so that closed forms are always
//! the quantity under test, never an input to it.

use std::cmp::Ordering;

use rug::Float;

use crate::error::{Error, Result};
use crate::numeric::{integrate_halfline, pow10, PrecisionSpec};
use crate::recurrence::RecurrenceTable;
use crate::report::{residual_parts, ResidualReport};
use crate::weight::{potential_derivative, weight_raw, WeightParams};
use crate::Real;

/// Which route produced the starred quantities in an [`AuxTable`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StarPath {
    Integral,
    ClosedForm,
}

/// R_n, r_n, R*_n, r*_n for n = 0 .. nmax-1.
#[derive(Clone, Debug)]
pub struct AuxTable {
    star_path: StarPath,
    /// Set when t = 0: the starred quantities vanish identically and the
    /// identities involving them degenerate.
    degenerate_t: bool,
    big_r: Vec<Real>,
    small_r: Vec<Real>,
    big_r_star: Vec<Real>,
    small_r_star: Vec<Real>,
}

/// R_n = 3(α_n² + β_n + β_{n+1}) and r_n = 3(α_n + α_{n-1})β_n − n.
/// With the β_0 = 0 convention, r_0 = 0.
pub fn aux_rr(table: &RecurrenceTable, n: usize) -> Result<(Real, Real)> {
    if n + 1 > table.nmax() {
        return Err(Error::Index {
            n,
            limit: table.nmax() - 1,
        });
    }
    let bits = table.bits();
    let alpha_n = table.alpha(n)?;
    let big = (alpha_n.clone().square() + table.beta(n)?) + table.beta(n + 1)?;
    let big = big * 3u32;
    let small = if n == 0 {
        Float::new(bits)
    } else {
        let s = Float::with_val(bits, alpha_n + table.alpha(n - 1)?) * table.beta(n)?;
        s * 3u32 - Float::with_val(bits, n as u32)
    };
    Ok((big, small))
}

/// Starred pair straight from the defining integrals:
/// R*_n = (t/h_n) ∫ y⁻¹ P_n² w dy and
/// r*_n = (t/h_{n-1}) ∫ y⁻¹ P_n P_{n-1} w dy.
///
/// At t = 0 both vanish identically; that case is reported through the
/// `degenerate` flag rather than an error so asymptotics workflows can
/// share code paths.
pub fn star_integral(
    params: &WeightParams,
    table: &RecurrenceTable,
    n: usize,
    prec: &PrecisionSpec,
) -> Result<(Real, Real, bool)> {
    if n > table.nmax() {
        return Err(Error::Index {
            n,
            limit: table.nmax(),
        });
    }
    let bits = prec.bits();
    if params.t_is_zero() {
        return Ok((Float::new(bits), Float::new(bits), true));
    }
    let t = params.t_f(bits);

    let quad_sq = integrate_halfline(
        |y: &Real| {
            let (p, _, _) = table.eval_poly(n, y).expect("n in range");
            p.square() * weight_raw(params, y, bits) / y.clone()
        },
        prec,
    )?;
    let big = Float::with_val(bits, &t * &quad_sq.value) / table.h(n)?;

    let small = if n == 0 {
        Float::new(bits)
    } else {
        let quad_cross = integrate_halfline(
            |y: &Real| {
                let (p, _, _) = table.eval_poly(n, y).expect("n in range");
                let (q, _, _) = table.eval_poly(n - 1, y).expect("n-1 in range");
                p * q * weight_raw(params, y, bits) / y.clone()
            },
            prec,
        )?;
        Float::with_val(bits, &t * &quad_cross.value) / table.h(n - 1)?
    };
    Ok((big, small, false))
}

/// Starred pair in closed form:
/// R*_n = r_n + r_{n+1} + α_n R_n − λ and
/// r*_n = [R*_n β_n R_{n-1} + (r_{n-1} + r_n + α_{n-1} R_{n-1} − λ) β_n R_n
///         + t r_n] / (2 r_n − λ).
pub fn star_closed(table: &RecurrenceTable, n: usize) -> Result<(Real, Real)> {
    if n < 1 {
        return Err(Error::Domain(
            "closed-form starred pair needs n >= 1".into(),
        ));
    }
    let bits = table.bits();
    let lam = table.params().lambda_f(bits);
    let t = table.params().t_f(bits);

    let (big_r_n, small_r_n) = aux_rr(table, n)?;
    let (big_r_nm1, small_r_nm1) = aux_rr(table, n - 1)?;
    let (_, small_r_np1) = aux_rr(table, n + 1)?;

    let den = Float::with_val(bits, 2u32 * &small_r_n) - &lam;
    let gate = {
        let mut s = lam.clone().abs();
        if s < 1u32 {
            s = Float::with_val(bits, 1);
        }
        s * pow10(bits, -(table.prec().digits() as i64 - 5))
    };
    if den.clone().abs() < gate {
        return Err(Error::DenominatorVanishes { n });
    }

    let big = Float::with_val(bits, &small_r_n + &small_r_np1)
        + Float::with_val(bits, table.alpha(n)? * &big_r_n)
        - &lam;
    let sibling = Float::with_val(bits, &small_r_nm1 + &small_r_n)
        + Float::with_val(bits, table.alpha(n - 1)? * &big_r_nm1)
        - &lam;
    let beta_n = table.beta(n)?;
    let mut num = Float::with_val(bits, &big * beta_n) * &big_r_nm1;
    num += Float::with_val(bits, &sibling * beta_n) * &big_r_n;
    num += Float::with_val(bits, &t * &small_r_n);
    let small = num / den;
    Ok((big, small))
}

impl AuxTable {
    /// Builds entries n = 0 .. nmax-1 on the integral route or
    /// 0 .. nmax-2 on the closed route (whose r*_n formula reaches
    /// r_{n+1}, hence β_{n+2}). The integral route prices one or two
    /// quadratures per n; the closed route is pure table arithmetic
    /// (r*_0 = 0 by convention on both).
    pub fn build(
        params: &WeightParams,
        table: &RecurrenceTable,
        path: StarPath,
        prec: &PrecisionSpec,
    ) -> Result<AuxTable> {
        let len = match path {
            StarPath::Integral => table.nmax(),
            StarPath::ClosedForm => table.nmax() - 1,
        };
        let bits = table.bits();
        let mut big_r = Vec::with_capacity(len);
        let mut small_r = Vec::with_capacity(len);
        let mut big_r_star = Vec::with_capacity(len);
        let mut small_r_star = Vec::with_capacity(len);
        let degenerate_t = params.t_is_zero();

        for n in 0..len {
            let (big, small) = aux_rr(table, n)?;
            big_r.push(big);
            small_r.push(small);
            match path {
                StarPath::Integral => {
                    let (bs, ss, _) = star_integral(params, table, n, prec)?;
                    big_r_star.push(bs);
                    small_r_star.push(ss);
                }
                StarPath::ClosedForm => {
                    if degenerate_t {
                        big_r_star.push(Float::new(bits));
                        small_r_star.push(Float::new(bits));
                    } else if n == 0 {
                        // R*_0 from the n = 0 closed form; r*_0 = 0
                        let (_, r0) = aux_rr(table, 0)?;
                        let (_, r1) = aux_rr(table, 1)?;
                        let lam = params.lambda_f(bits);
                        let (big0, _) = aux_rr(table, 0)?;
                        let bs = Float::with_val(bits, &r0 + &r1)
                            + Float::with_val(bits, table.alpha(0)? * &big0)
                            - lam;
                        big_r_star.push(bs);
                        small_r_star.push(Float::new(bits));
                    } else {
                        let (bs, ss) = star_closed(table, n)?;
                        big_r_star.push(bs);
                        small_r_star.push(ss);
                    }
                }
            }
        }
        Ok(AuxTable {
            star_path: path,
            degenerate_t,
            big_r,
            small_r,
            big_r_star,
            small_r_star,
        })
    }

    pub fn len(&self) -> usize {
        self.big_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.big_r.is_empty()
    }

    pub fn star_path(&self) -> StarPath {
        self.star_path
    }

    pub fn degenerate_t(&self) -> bool {
        self.degenerate_t
    }

    fn bound(&self, n: usize) -> Result<()> {
        if n >= self.len() {
            Err(Error::Index {
                n,
                limit: self.len() - 1,
            })
        } else {
            Ok(())
        }
    }

    pub fn big_r(&self, n: usize) -> Result<&Real> {
        self.bound(n)?;
        Ok(&self.big_r[n])
    }

    pub fn small_r(&self, n: usize) -> Result<&Real> {
        self.bound(n)?;
        Ok(&self.small_r[n])
    }

    pub fn big_r_star(&self, n: usize) -> Result<&Real> {
        self.bound(n)?;
        Ok(&self.big_r_star[n])
    }

    pub fn small_r_star(&self, n: usize) -> Result<&Real> {
        self.bound(n)?;
        Ok(&self.small_r_star[n])
    }
}

/// Coefficient data of one (A_n, B_n) pair.
#[derive(Clone, Debug)]
pub struct LadderCoeffs {
    /// Constant term of A_n is 3 α_n; the x-coefficient is exactly 3.
    pub alpha_n: Real,
    /// Constant term of B_n is 3 β_n; B_n has no x term.
    pub beta_n: Real,
    pub big_r: Real,
    pub big_r_star: Real,
    pub small_r: Real,
    pub small_r_star: Real,
}

impl LadderCoeffs {
    pub fn from_aux(table: &RecurrenceTable, aux: &AuxTable, n: usize) -> Result<Self> {
        Ok(LadderCoeffs {
            alpha_n: table.alpha(n)?.clone(),
            beta_n: table.beta(n)?.clone(),
            big_r: aux.big_r(n)?.clone(),
            big_r_star: aux.big_r_star(n)?.clone(),
            small_r: aux.small_r(n)?.clone(),
            small_r_star: aux.small_r_star(n)?.clone(),
        })
    }
}

/// A_n(x) = 3x + 3α_n + R_n/x + R*_n/x² and
/// B_n(x) = 3β_n + r_n/x + r*_n/x².
pub fn ladder_ab(coeffs: &LadderCoeffs, x: &Real) -> Result<(Real, Real)> {
    if x.cmp0() != Some(Ordering::Greater) {
        return Err(Error::Domain("ladder coefficients need x > 0".into()));
    }
    let bits = x.prec();
    let inv = x.clone().recip();
    let inv2 = inv.clone().square();
    let mut a = Float::with_val(bits, 3u32 * x);
    a += Float::with_val(bits, 3u32 * &coeffs.alpha_n);
    a += Float::with_val(bits, &coeffs.big_r * &inv);
    a += Float::with_val(bits, &coeffs.big_r_star * &inv2);
    let mut b = Float::with_val(bits, 3u32 * &coeffs.beta_n);
    b += Float::with_val(bits, &coeffs.small_r * &inv);
    b += Float::with_val(bits, &coeffs.small_r_star * &inv2);
    Ok((a, b))
}

/// Residuals of the lowering and raising relations and the two
/// compatibility conditions at the sample points xs:
///
/// ```text
/// (lowering)  P_n′ + B_n P_n − β_n A_n P_{n-1}
/// (raising)   P_{n-1}′ − (B_n + v′) P_{n-1} + A_{n-1} P_n
/// (S1)        B_{n+1} + B_n − (x − α_n) A_n + v′
/// (S2')       B_n² + v′ B_n + Σ_{j<n} A_j − β_n A_n A_{n-1}
/// ```
pub fn ladder_residuals(
    params: &WeightParams,
    table: &RecurrenceTable,
    aux: &AuxTable,
    n: usize,
    xs: &[Real],
) -> Result<ResidualReport> {
    if n < 1 || n + 1 >= aux.len() {
        return Err(Error::Index {
            n,
            limit: aux.len().saturating_sub(2),
        });
    }
    let bits = table.bits();
    let mut report = ResidualReport::new();

    let coeffs_n = LadderCoeffs::from_aux(table, aux, n)?;
    let coeffs_nm1 = LadderCoeffs::from_aux(table, aux, n - 1)?;
    let coeffs_np1 = LadderCoeffs::from_aux(table, aux, n + 1)?;
    let beta_n = table.beta(n)?;
    let alpha_n = table.alpha(n)?;

    for x in xs {
        let x = Float::with_val(bits, x);
        let vp = potential_derivative(params, &x)?;
        let (a_n, b_n) = ladder_ab(&coeffs_n, &x)?;
        let (a_nm1, _) = ladder_ab(&coeffs_nm1, &x)?;
        let (_, b_np1) = ladder_ab(&coeffs_np1, &x)?;
        let (p_n, dp_n, _) = table.eval_poly(n, &x)?;
        let (p_nm1, dp_nm1, _) = table.eval_poly(n - 1, &x)?;

        let (abs, rel, scale) = residual_parts(
            bits,
            &[dp_n.clone(), Float::with_val(bits, &b_n * &p_n)],
            &[Float::with_val(bits, beta_n * &a_n) * &p_nm1],
        );
        report.push("lowering", Some(n), Some(x.clone()), abs, rel, scale);

        let (abs, rel, scale) = residual_parts(
            bits,
            &[dp_nm1.clone(), -Float::with_val(bits, &b_n + &vp) * &p_nm1],
            &[-Float::with_val(bits, &a_nm1 * &p_n)],
        );
        report.push("raising", Some(n), Some(x.clone()), abs, rel, scale);

        let shift = Float::with_val(bits, &x - alpha_n);
        let (abs, rel, scale) = residual_parts(
            bits,
            &[b_np1.clone(), b_n.clone()],
            &[Float::with_val(bits, &shift * &a_n), -vp.clone()],
        );
        report.push("compat_s1", Some(n), Some(x.clone()), abs, rel, scale);

        let mut a_sum = Float::new(bits);
        for j in 0..n {
            let cj = LadderCoeffs::from_aux(table, aux, j)?;
            let (aj, _) = ladder_ab(&cj, &x)?;
            a_sum += aj;
        }
        let (abs, rel, scale) = residual_parts(
            bits,
            &[
                b_n.clone().square(),
                Float::with_val(bits, &vp * &b_n),
                a_sum,
            ],
            &[Float::with_val(bits, beta_n * &a_n) * &a_nm1],
        );
        report.push("compat_s2prime", Some(n), Some(x.clone()), abs, rel, scale);
    }
    Ok(report)
}

/// The seven scalar identities the compatibility conditions imply,
/// evaluated with integral-path starred quantities so the closed forms
/// stay the quantity under test:
///
/// ```text
/// rstar_sum          r*_n + r*_{n+1} = t − α_n R*_n
/// r_sum              r_n + r_{n+1} = R*_n − α_n R_n + λ
/// rstar_product      r*_n (r*_n − t) = β_n R*_n R*_{n-1}
/// rstar_cross        (2r_n − λ) r*_n − t r_n = β_n (R*_n R_{n-1} + R*_{n-1} R_n)
/// rstar_partial_sum  r_n² − λ r_n − 3tβ_n + 6β_n r*_n + Σ_{j<n} R*_j
///                      = β_n (3α_n R*_{n-1} + 3α_{n-1} R*_n + R_n R_{n-1})
/// r_partial_sum      6β_n r_n − 3λβ_n + Σ_{j<n} R_j
///                      = 3β_n (R*_n + R*_{n-1} + α_n R_{n-1} + α_{n-1} R_n)
/// alpha_partial_sum  r*_n + 3β_n² + Σ_{j<n} α_j
///                      = β_n (3α_n α_{n-1} + R_n + R_{n-1})
/// ```
pub fn identity_residuals(
    table: &RecurrenceTable,
    aux: &AuxTable,
    n: usize,
) -> Result<ResidualReport> {
    if aux.star_path() != StarPath::Integral {
        return Err(Error::Domain(
            "identity residuals require integral-path starred quantities".into(),
        ));
    }
    if n < 1 || n + 1 >= aux.len() {
        return Err(Error::Index {
            n,
            limit: aux.len().saturating_sub(2),
        });
    }
    let bits = table.bits();
    let lam = table.params().lambda_f(bits);
    let t = table.params().t_f(bits);
    let alpha_n = table.alpha(n)?;
    let alpha_nm1 = table.alpha(n - 1)?;
    let beta_n = table.beta(n)?;
    let rr = |k: usize| -> Result<(&Real, &Real, &Real, &Real)> {
        Ok((
            aux.big_r(k)?,
            aux.small_r(k)?,
            aux.big_r_star(k)?,
            aux.small_r_star(k)?,
        ))
    };
    let (big_n, small_n, bstar_n, sstar_n) = rr(n)?;
    let (big_nm1, _, bstar_nm1, _) = rr(n - 1)?;
    let (_, small_np1, _, sstar_np1) = rr(n + 1)?;

    let mut report = ResidualReport::new();
    let mut put = |name: &str, lhs: &[Real], rhs: &[Real]| {
        let (abs, rel, scale) = residual_parts(bits, lhs, rhs);
        report.push(name, Some(n), None, abs, rel, scale);
    };

    put(
        "rstar_sum",
        &[sstar_n.clone(), sstar_np1.clone()],
        &[t.clone(), -Float::with_val(bits, alpha_n * bstar_n)],
    );

    put(
        "r_sum",
        &[small_n.clone(), small_np1.clone()],
        &[
            bstar_n.clone(),
            -Float::with_val(bits, alpha_n * big_n),
            lam.clone(),
        ],
    );

    put(
        "rstar_product",
        &[
            sstar_n.clone().square(),
            -Float::with_val(bits, &t * sstar_n),
        ],
        &[Float::with_val(bits, beta_n * bstar_n) * bstar_nm1],
    );

    put(
        "rstar_cross",
        &[
            Float::with_val(bits, 2u32 * small_n) * sstar_n,
            -Float::with_val(bits, &lam * sstar_n),
            -Float::with_val(bits, &t * small_n),
        ],
        &[
            Float::with_val(bits, beta_n * bstar_n) * big_nm1,
            Float::with_val(bits, beta_n * bstar_nm1) * big_n,
        ],
    );

    let mut bstar_sum = Float::new(bits);
    let mut big_sum = Float::new(bits);
    for j in 0..n {
        bstar_sum += aux.big_r_star(j)?;
        big_sum += aux.big_r(j)?;
    }

    put(
        "rstar_partial_sum",
        &[
            small_n.clone().square(),
            -Float::with_val(bits, &lam * small_n),
            -Float::with_val(bits, 3u32 * &t) * beta_n,
            Float::with_val(bits, 6u32 * beta_n) * sstar_n,
            bstar_sum,
        ],
        &[
            Float::with_val(bits, 3u32 * beta_n) * alpha_n * bstar_nm1,
            Float::with_val(bits, 3u32 * beta_n) * alpha_nm1 * bstar_n,
            Float::with_val(bits, beta_n * big_n) * big_nm1,
        ],
    );

    put(
        "r_partial_sum",
        &[
            Float::with_val(bits, 6u32 * beta_n) * small_n,
            -Float::with_val(bits, 3u32 * &lam) * beta_n,
            big_sum,
        ],
        &[
            Float::with_val(bits, 3u32 * beta_n) * bstar_n,
            Float::with_val(bits, 3u32 * beta_n) * bstar_nm1,
            Float::with_val(bits, 3u32 * beta_n) * alpha_n * big_nm1,
            Float::with_val(bits, 3u32 * beta_n) * alpha_nm1 * big_n,
        ],
    );

    // Σ_{j<n} α_j = −p(n, t), read back from the table
    let alpha_sum = -table.p1(n)?.clone();
    put(
        "alpha_partial_sum",
        &[
            sstar_n.clone(),
            Float::with_val(bits, 3u32 * beta_n) * beta_n,
            alpha_sum,
        ],
        &[
            Float::with_val(bits, 3u32 * beta_n) * alpha_n * alpha_nm1,
            Float::with_val(bits, beta_n * big_n),
            Float::with_val(bits, beta_n * big_nm1),
        ],
    );

    Ok(report)
}
