//! Generalized Laguerre polynomials and Franck-Condon overlaps of displaced
//! number states.

use crate::scalar::{from_usize, lit, Real};

/// Index sum `m + n` above which factorial ratios are evaluated in log space.
pub(crate) const LOG_SPACE_SWITCHOVER: usize = 40;

/// Generalized Laguerre polynomial `L_n^a(x)` by the three-term upward
/// recurrence
///
/// `(k + 1) L_{k+1} = (2k + 1 + a - x) L_k - (k + a) L_{k-1}`.
pub fn laguerre<T: Real>(n: usize, a: usize, x: T) -> T {
    let a = from_usize::<T>(a);
    let mut prev = T::one();
    if n == 0 {
        return prev;
    }
    let mut cur = T::one() + a - x;
    for k in 1..n {
        let kf = from_usize::<T>(k);
        let next = ((kf + kf + T::one() + a - x) * cur - (kf + a) * prev) / (kf + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// `sqrt(lo! / hi!)` for `lo <= hi` as a running product.
fn sqrt_factorial_ratio_direct<T: Real>(lo: usize, hi: usize) -> T {
    let mut acc = T::one();
    for k in (lo + 1)..=hi {
        acc /= from_usize::<T>(k);
    }
    acc.sqrt()
}

/// `ln sqrt(lo! / hi!)` for `lo <= hi`.
fn ln_sqrt_factorial_ratio<T: Real>(lo: usize, hi: usize) -> T {
    let mut acc = T::zero();
    for k in (lo + 1)..=hi {
        acc += from_usize::<T>(k).ln();
    }
    -acc * lit(0.5)
}

fn franck_condon_direct<T: Real>(m: usize, n: usize, beta: T) -> T {
    let (lo, hi) = (m.min(n), m.max(n));
    let diff = hi - lo;
    let signed = if m > n { beta } else { -beta };
    let b2 = beta * beta;
    sqrt_factorial_ratio_direct::<T>(lo, hi)
        * (-b2 * lit(0.5)).exp()
        * signed.powi(diff as i32)
        * laguerre(lo, diff, b2)
}

fn franck_condon_log<T: Real>(m: usize, n: usize, beta: T) -> T {
    let (lo, hi) = (m.min(n), m.max(n));
    let diff = hi - lo;
    let b2 = beta * beta;
    let lag = laguerre(lo, diff, b2);
    if lag == T::zero() || (diff > 0 && beta == T::zero()) {
        return T::zero();
    }
    let mut log_mag = ln_sqrt_factorial_ratio::<T>(lo, hi) - b2 * lit(0.5) + lag.abs().ln();
    if diff > 0 {
        log_mag += from_usize::<T>(diff) * beta.abs().ln();
    }
    // sign of (s * beta)^diff, s = +1 for m > n and -1 otherwise
    let base_negative = (m > n) != (beta > T::zero());
    let mut negative = lag < T::zero();
    if base_negative && diff % 2 == 1 {
        negative = !negative;
    }
    let mag = log_mag.exp();
    if negative {
        -mag
    } else {
        mag
    }
}

/// Matrix element `<m| D(beta) |n>` of the real displacement operator
/// `D(beta) = exp[beta (b^dag - b)]` in the number basis.
///
/// Uses the closed Laguerre form; factorial ratios switch to log space for
/// `m + n > 40` so large indices underflow to zero rather than producing NaN.
pub fn franck_condon<T: Real>(m: usize, n: usize, beta: T) -> T {
    if m + n > LOG_SPACE_SWITCHOVER {
        franck_condon_log(m, n, beta)
    } else {
        franck_condon_direct(m, n, beta)
    }
}

/// Overlaps `(<l|n~>, <n~|n0>)` between bare number states and number states
/// displaced by `beta0`.
pub fn displaced_overlap_pair<T: Real>(l: usize, n: usize, n0: usize, beta0: T) -> (T, T) {
    (franck_condon(l, n, beta0), franck_condon(n, n0, -beta0))
}

/// Dense `dim x dim` table `F[m, n] = <m| D(beta) |n>`.
pub fn franck_condon_table<T: Real>(dim: usize, beta: T) -> nalgebra::DMatrix<T> {
    nalgebra::DMatrix::from_fn(dim, dim, |m, n| franck_condon(m, n, beta))
}

/// `J_0(z), ..., J_{k_max}(z)` for `z >= 0` by Miller's backward recurrence
/// normalized with `J_0 + 2 sum_k J_{2k} = 1`.
pub fn bessel_j_sequence<T: Real>(z: T, k_max: usize) -> Vec<T> {
    let mut out = vec![T::zero(); k_max + 1];
    if z == T::zero() {
        out[0] = T::one();
        return out;
    }
    let top = k_max.max(crate::scalar::to_f64(z).ceil() as usize);
    let mut start = top + (160.0 * top as f64).sqrt() as usize + 20;
    start += start % 2;
    let huge: T = lit(1e250);
    let two_over_z = lit::<T>(2.0) / z;
    let (mut next, mut cur) = (T::zero(), lit::<T>(1e-300));
    let mut norm = T::zero();
    for k in (0..=start).rev() {
        if k <= k_max {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += if k == 0 { cur } else { cur + cur };
        }
        if k == 0 {
            break;
        }
        let prev = two_over_z * from_usize::<T>(k) * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > huge {
            let inv = T::one() / huge;
            cur *= inv;
            next *= inv;
            norm *= inv;
            for v in out.iter_mut() {
                *v *= inv;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}
