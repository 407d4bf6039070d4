//! Independent oracles: every check here recomputes a quantity through a
//! route that shares no code with the implementation path it validates.
//!
//! * composite Gauss-Legendre quadrature with explicit panel splits and
//!   bounded tails, against the double-exponential half-line kernel;
//! * the moment-determinant representation of P_n by dense elimination,
//!   against the three-term forward recurrence;
//! * Stieltjes orthogonalization with quadrature inner products, against
//!   the moment-based quotient recursion.

use rug::ops::Pow;
use rug::Float;

use spairy::numeric::{derivative_t, integrate_halfline, pow10, PrecisionSpec};
use spairy::recurrence::{build_recurrence, table_precision};
use spairy::weight::{moment, moment_table, weight_eval, WeightParams};
use spairy::{Rat, Real};

/// Nodes and weights of the m-point Gauss-Legendre rule on [-1, 1],
/// by Newton iteration on the Legendre recurrence.
fn gauss_legendre(m: usize, bits: u32) -> Vec<(Real, Real)> {
    let mut rule = Vec::with_capacity(m);
    let pi = Float::with_val(bits, rug::float::Constant::Pi);
    for i in 1..=m {
        // Chebyshev-angle seed, then Newton at full precision
        let seed = (Float::with_val(bits, 4 * i as u32 - 1) * &pi
            / Float::with_val(bits, 4 * m as u32 + 2))
        .cos();
        let mut x = seed;
        for _ in 0..200 {
            let (p, dp) = legendre_pair(m, &x, bits);
            let step = Float::with_val(bits, &p / &dp);
            x -= &step;
            if step.clone().abs() < pow10(bits, -((bits / 3) as i64)) {
                break;
            }
        }
        let (_, dp) = legendre_pair(m, &x, bits);
        let w = Float::with_val(bits, 2u32)
            / (Float::with_val(bits, 1u32 - &x.clone().square()) * dp.square());
        rule.push((x, w));
    }
    rule
}

/// (P_m(x), P_m'(x)) for the Legendre polynomial.
fn legendre_pair(m: usize, x: &Real, bits: u32) -> (Real, Real) {
    let mut p_prev = Float::with_val(bits, 1);
    let mut p = Float::with_val(bits, x);
    for k in 1..m {
        let kf = Float::with_val(bits, k as u32);
        let a = (Float::with_val(bits, 2u32 * &kf) + 1u32) * Float::with_val(bits, x) * &p;
        let next = (a - Float::with_val(bits, &kf * &p_prev)) / (kf + 1u32);
        p_prev = std::mem::replace(&mut p, next);
    }
    // P_m' from P_m and P_{m-1}
    let mf = Float::with_val(bits, m as u32);
    let num = Float::with_val(bits, &mf * &p_prev)
        - Float::with_val(bits, &mf * &Float::with_val(bits, x * &p));
    let dp = num / Float::with_val(bits, 1u32 - &x.clone().square());
    (p, dp)
}

/// Composite Gauss-Legendre over explicit panels. Panel geometry is
/// promoted before any arithmetic so adjacent panels share their edge
/// exactly.
fn composite_gl<F>(mut f: F, panels: &[(f64, f64)], m: usize, bits: u32) -> Real
where
    F: FnMut(&Real) -> Real,
{
    let rule = gauss_legendre(m, bits);
    let mut total = Float::new(bits);
    for &(a, b) in panels {
        let a = Float::with_val(bits, a);
        let b = Float::with_val(bits, b);
        let mid = Float::with_val(bits, &a + &b) / 2u32;
        let rad = Float::with_val(bits, &b - &a) / 2u32;
        for (x, w) in &rule {
            let node = Float::with_val(bits, &mid + &(rad.clone() * x));
            total += f(&node) * w * &rad;
        }
    }
    total
}

#[test]
fn halfline_kernel_matches_interval_splitting_gl() {
    // ∫_0^∞ x^{1/2} e^{-x³ - 1/x} dx to 40 digits. Panels keep the
    // essential singularity at the origin outside every Bernstein
    // ellipse; the omitted tails are below 1e-43:
    // (0, 0.01): bounded by 0.01 e^{-100}; (8, ∞): below e^{-512}.
    let prec = PrecisionSpec::with_guard(40, 20).unwrap();
    let bits = prec.bits();
    let f = |x: &Real| -> Real {
        let e = -x.clone().pow(3i32) - x.clone().recip();
        x.clone().sqrt() * e.exp()
    };
    let de = integrate_halfline(f, &prec).unwrap();
    let gl = composite_gl(
        f,
        &[(0.01, 0.1), (0.1, 1.0), (1.0, 2.0), (2.0, 8.0)],
        140,
        bits,
    );
    let rel = (Float::with_val(bits, &de.value - &gl) / gl.clone()).abs();
    assert!(rel < pow10(bits, -40), "rel = {:e}", rel.to_f64());
}

#[test]
fn moment_matches_interval_splitting_gl() {
    // μ_0 at (λ = 1/2, t = 1): same oracle, through the weight module
    let prec = PrecisionSpec::with_guard(40, 20).unwrap();
    let bits = prec.bits();
    let params = WeightParams::from_decimal("0.5", "1").unwrap();
    let mu0 = moment(&params, 0, &prec).unwrap();
    assert!(mu0 > 0u32);
    let gl = composite_gl(
        |x: &Real| weight_eval(&params, x).unwrap(),
        &[(0.01, 0.1), (0.1, 1.0), (1.0, 2.0), (2.0, 8.0)],
        140,
        bits,
    );
    let rel = (Float::with_val(bits, &mu0 - &gl) / gl.clone()).abs();
    assert!(rel < pow10(bits, -40), "rel = {:e}", rel.to_f64());
}

#[test]
fn moment_derivative_is_negative_shifted_moment() {
    // μ_1'(t) = −μ_0(t) at (λ = 0, t = 1), cross-checked by quadrature
    let prec = PrecisionSpec::new(30).unwrap();
    let bits = prec.bits();
    let params = WeightParams::from_decimal("0", "1").unwrap();
    let d = derivative_t(
        |tau: &Rat| {
            let shifted = params.with_t(tau.clone())?;
            moment(&shifted, 1, &prec)
        },
        &Rat::from(1u32),
        &prec,
    )
    .unwrap();
    let mu0 = moment(&params, 0, &prec).unwrap();
    let rel = (Float::with_val(bits, &d.value + &mu0) / mu0.clone()).abs();
    assert!(rel < pow10(bits, -20), "rel = {:e}", rel.to_f64());
}

/// Determinant by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn determinant(mut m: Vec<Vec<Real>>, bits: u32) -> Real {
    let n = m.len();
    let mut det = Float::with_val(bits, 1);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| {
                m[a][col]
                    .clone()
                    .abs()
                    .partial_cmp(&m[b][col].clone().abs())
                    .unwrap()
            })
            .unwrap();
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        if m[col][col].is_zero() {
            return Float::new(bits);
        }
        det *= &m[col][col];
        for row in col + 1..n {
            let factor = Float::with_val(bits, &m[row][col] / &m[col][col]);
            for k in col..n {
                let sub = Float::with_val(bits, &factor * &m[col][k]);
                m[row][k] -= sub;
            }
        }
    }
    det
}

#[test]
fn eval_poly_matches_moment_determinant() {
    // P_5(1.3) at (λ = 1/2, t = 1) against the (n+1) x (n+1) determinant
    // with moment rows and a power row, including both derivatives
    // (obtained by differentiating the power row)
    let n = 5usize;
    let nmax = 6usize;
    let params = WeightParams::from_decimal("0.5", "1").unwrap();
    let prec = table_precision(30, nmax).unwrap();
    let bits = prec.bits();
    let moments = moment_table(&params, 2 * nmax + 1, &prec).unwrap();
    let table = build_recurrence(&moments, nmax).unwrap();
    let x = Float::with_val(bits, 1.3);
    let (p, dp, ddp) = table.eval_poly(n, &x).unwrap();

    let moment_rows: Vec<Vec<Real>> = (0..n)
        .map(|i| {
            (0..=n)
                .map(|j| moments.mu(i + j).unwrap().clone())
                .collect()
        })
        .collect();
    let hankel: Vec<Vec<Real>> = (0..n)
        .map(|i| (0..n).map(|j| moments.mu(i + j).unwrap().clone()).collect())
        .collect();
    let d_n = determinant(hankel, bits);

    // value row [1, x, .., x^n], then its first and second derivatives
    let mut rows = [Vec::new(), Vec::new(), Vec::new()];
    for j in 0..=n {
        rows[0].push(Float::with_val(bits, &x).pow(j as i32));
        rows[1].push(if j == 0 {
            Float::new(bits)
        } else {
            Float::with_val(bits, j as u32) * Float::with_val(bits, &x).pow(j as i32 - 1)
        });
        rows[2].push(if j < 2 {
            Float::new(bits)
        } else {
            Float::with_val(bits, (j * (j - 1)) as u32)
                * Float::with_val(bits, &x).pow(j as i32 - 2)
        });
    }

    for (row, want) in rows.into_iter().zip([&p, &dp, &ddp]) {
        let mut mat = moment_rows.clone();
        mat.push(row);
        let val = determinant(mat, bits) / d_n.clone();
        let rel = (Float::with_val(bits, &val - want) / want.clone()).abs();
        assert!(rel < pow10(bits, -25), "rel = {:e}", rel.to_f64());
    }
}

#[test]
fn quotient_recursion_matches_stieltjes_orthogonalization() {
    // α_k, β_k for k <= 8 from explicit Gram-Schmidt polynomials with
    // quadrature inner products; agreement to D − 10 digits. The h_n
    // produced on that route also pins β_n = h_n/h_{n-1}.
    let nmax = 9usize;
    let params = WeightParams::from_decimal("0.5", "1").unwrap();
    let prec = table_precision(30, nmax).unwrap();
    let bits = prec.bits();
    let moments = moment_table(&params, 2 * nmax + 1, &prec).unwrap();
    let table = build_recurrence(&moments, nmax).unwrap();

    let horner = |coeffs: &[Real], x: &Real| -> Real {
        let mut acc = Float::new(bits);
        for c in coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    let ip = |p: &[Real], q: &[Real], extra_x: bool| -> Real {
        integrate_halfline(
            |x: &Real| {
                let mut v = horner(p, x) * horner(q, x) * weight_eval(&params, x).unwrap();
                if extra_x {
                    v *= x;
                }
                v
            },
            &prec,
        )
        .unwrap()
        .value
    };

    // monic coefficient vectors, lowest power first
    let mut prev: Vec<Real> = vec![];
    let mut curr: Vec<Real> = vec![Float::with_val(bits, 1)];
    let mut h_prev = Float::new(bits);
    for k in 0..=8usize {
        let h_curr = ip(&curr, &curr, false);
        let alpha = ip(&curr, &curr, true) / &h_curr;
        let da = (Float::with_val(bits, &alpha - table.alpha(k).unwrap())
            / table.alpha(k).unwrap().clone())
        .abs();
        assert!(da < pow10(bits, -20), "alpha_{k}: {:e}", da.to_f64());
        let dh = (Float::with_val(bits, &h_curr - table.h(k).unwrap())
            / table.h(k).unwrap().clone())
        .abs();
        assert!(dh < pow10(bits, -20), "h_{k}: {:e}", dh.to_f64());
        if k >= 1 {
            let beta = Float::with_val(bits, &h_curr / &h_prev);
            let db = (Float::with_val(bits, &beta - table.beta(k).unwrap())
                / table.beta(k).unwrap().clone())
            .abs();
            assert!(db < pow10(bits, -20), "beta_{k}: {:e}", db.to_f64());
        }

        // p_{k+1} = (x − α_k) p_k − β_k p_{k-1}
        let beta_k = if k == 0 {
            Float::new(bits)
        } else {
            Float::with_val(bits, &h_curr / &h_prev)
        };
        let mut next = vec![Float::new(bits); curr.len() + 1];
        for (i, c) in curr.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= Float::with_val(bits, &alpha * c);
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= Float::with_val(bits, &beta_k * c);
        }
        prev = std::mem::replace(&mut curr, next);
        h_prev = h_curr;
    }
}

#[test]
fn orthogonality_of_constructed_system() {
    // quadrature orthogonality below 1e-(D-10) for mixed (m, n)
    let nmax = 8usize;
    let params = WeightParams::from_decimal("0.5", "1").unwrap();
    let prec = table_precision(30, nmax).unwrap();
    let bits = prec.bits();
    let moments = moment_table(&params, 2 * nmax + 1, &prec).unwrap();
    let table = build_recurrence(&moments, nmax).unwrap();
    for (m, n) in [(0usize, 1usize), (3, 7), (2, 5), (0, 8)] {
        let r = table.orthogonality_residual(m, n).unwrap();
        assert!(r < pow10(bits, -20), "({m},{n}): {:e}", r.to_f64());
    }
}
