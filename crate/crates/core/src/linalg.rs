//! Small dense kernels shared by the solvers: dot products, Cholesky
//! factorisation of tiny SPD systems and power iteration.

use crate::error::{Error, Result};

/// Pivots below this are treated as a singular normal-equation system.
pub(crate) const PIVOT_FLOOR: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix
/// stored row-major as `n * n`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "cholesky input has {} entries, expected {}",
                a.len(),
                n * n
            )));
        }
        let scale = (0..n)
            .map(|i| a[i * n + i].abs())
            .fold(0.0, f64::max)
            .max(1.0);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= PIVOT_FLOOR * scale {
                        return Err(Error::SingularGram);
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

/// Solves the SPD system `gram * x = rhs`, retrying with a `1e-12` ridge on
/// the diagonal when the plain factorisation is numerically singular.
pub fn solve_spd_with_ridge(gram: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    match Cholesky::factor(gram, n) {
        Ok(ch) => ch.solve(rhs),
        Err(_) => {
            let scale = (0..n)
                .map(|i| gram[i * n + i].abs())
                .fold(0.0, f64::max)
                .max(1.0);
            let mut ridge = 1e-12 * scale;
            loop {
                let mut g = gram.to_vec();
                for i in 0..n {
                    g[i * n + i] += ridge;
                }
                if let Ok(ch) = Cholesky::factor(&g, n) {
                    return ch.solve(rhs);
                }
                ridge *= 100.0;
            }
        }
    }
}

/// Leading eigenpair of a symmetric positive semidefinite `n * n` matrix by
/// power iteration, started from `start` (or a constant vector).
///
/// Iterates until the Rayleigh quotient changes by less than `tol`
/// relative, or `max_iters` is reached. The returned eigenvector is unit
/// norm with its largest-magnitude entry positive.
pub fn leading_eigenpair(
    m: &[f64],
    n: usize,
    start: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> (f64, Vec<f64>) {
    let mut v = match start {
        Some(s) if norm(s) > 0.0 => s.to_vec(),
        _ => vec![1.0; n],
    };
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = rayleigh(m, n, &v);
    let mut w = vec![0.0; n];
    for _ in 0..max_iters {
        symv(m, n, &v, &mut w);
        let nw = norm(&w);
        if nw == 0.0 {
            // start vector in the null space; fall back to the largest diagonal
            let j = (0..n).fold(0, |b, i| if m[i * n + i] > m[b * n + b] { i } else { b });
            if m[j * n + j] == 0.0 {
                return (0.0, v);
            }
            v.iter_mut().for_each(|x| *x = 0.0);
            v[j] = 1.0;
            lambda = m[j * n + j];
            continue;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let next = rayleigh(m, n, &v);
        let converged = (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        if converged {
            break;
        }
    }
    fix_sign(&mut v);
    (lambda, v)
}

fn symv(m: &[f64], n: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..n {
        out[i] = dot(&m[i * n..(i + 1) * n], v);
    }
}

fn rayleigh(m: &[f64], n: usize, v: &[f64]) -> f64 {
    let mut w = vec![0.0; n];
    symv(m, n, v, &mut w);
    dot(v, &w)
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let ch = Cholesky::factor(&a, 2).unwrap();
        let x = ch.solve(&[2.0, 1.0]);
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_system_is_rejected_then_ridged() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(matches!(Cholesky::factor(&a, 2), Err(Error::SingularGram)));
        let x = solve_spd_with_ridge(&a, &[1.0, 1.0]);
        assert!(x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn power_iteration_finds_dominant_pair() {
        let m = [3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let (l, v) = leading_eigenpair(&m, 3, None, 1e-15, 10_000);
        assert!((l - 3.0).abs() < 1e-10);
        assert!((v[0] - 1.0).abs() < 1e-5);
    }
}
