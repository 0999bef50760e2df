//! Sparse matrices and preconditioned Krylov solvers for policy evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

const DOT_CHUNK: usize = 4096;

/// Dot product summed in fixed-size chunks, so the rounding pattern depends
/// only on the vector length.
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut total = T::zero();
    for (ca, cb) in a.chunks(DOT_CHUNK).zip(b.chunks(DOT_CHUNK)) {
        let mut partial = T::zero();
        for (&x, &y) in ca.iter().zip(cb) {
            partial += x * y;
        }
        total += partial;
    }
    total
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Square matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    n: usize,
    row_offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds a matrix from rows of `(column, value)` entries. Repeated
    /// columns within a row are summed.
    pub fn from_rows<I, R>(n: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = (u32, T)>,
    {
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut scratch: Vec<(u32, T)> = Vec::new();
        for row in rows {
            scratch.clear();
            scratch.extend(row);
            scratch.sort_by_key(|e| e.0);
            for &(c, v) in &scratch {
                assert!((c as usize) < n, "column {c} out of range");
                if cols.len() > *row_offsets.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_offsets.push(cols.len());
        }
        assert_eq!(row_offsets.len(), n + 1, "expected {n} rows");
        Self {
            n,
            row_offsets,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .find(|&(c, _)| c == i)
                    .map_or(T::zero(), |(_, v)| v)
            })
            .collect()
    }

    /// `out = A x`
    pub fn mul_vec(&self, x: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).fold(T::zero(), |acc, (c, v)| acc + v * x[c]);
        }
    }

    /// `out = A^T x`
    pub fn mul_vec_transposed(&self, x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for (i, &xi) in x.iter().enumerate() {
            for (c, v) in self.row(i) {
                out[c] += v * xi;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final residual norm relative to the right-hand side.
    pub residual: T,
    pub converged: bool,
}

/// Largest system [`dense_solve`] accepts.
pub const DENSE_SOLVE_LIMIT: usize = 4096;

/// Direct LU solve in double precision, for small systems on which the
/// Krylov methods break down (short deterministic cycles do this).
/// Returns `None` if the matrix is too large or singular.
pub fn dense_solve<T: Scalar>(a: &SparseMatrix<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.dim();
    if n > DENSE_SOLVE_LIMIT {
        return None;
    }
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (c, v) in a.row(i) {
            m[(i, c)] += v.to_f64_lossy();
        }
    }
    let rhs = nalgebra::DVector::from_iterator(n, b.iter().map(|x| x.to_f64_lossy()));
    let x = m.lu().solve(&rhs)?;
    x.iter().map(|&v| T::from_f64(v)).collect()
}

fn inverse_diagonal<T: Scalar>(a: &SparseMatrix<T>) -> Vec<T> {
    a.diagonal()
        .into_iter()
        .map(|d| if d == T::zero() { T::one() } else { d.recip() })
        .collect()
}

fn apply_diag<T: Scalar>(inv: &[T], v: &[T], out: &mut [T]) {
    for ((o, &m), &x) in out.iter_mut().zip(inv).zip(v) {
        *o = m * x;
    }
}

fn residual<T: Scalar>(a: &SparseMatrix<T>, b: &[T], x: &[T]) -> Vec<T> {
    let mut r = vec![T::zero(); b.len()];
    a.mul_vec(x, &mut r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    r
}

fn zero_rhs<T: Scalar>(b: &[T]) -> Option<KrylovOutcome<T>> {
    (norm(b) == T::zero()).then(|| KrylovOutcome {
        x: vec![T::zero(); b.len()],
        iterations: 0,
        residual: T::zero(),
        converged: true,
    })
}

/// Restarts allowed after a breakdown, each with a fresh shadow residual.
const MAX_RESTARTS: u64 = 16;

/// Pseudo-random shadow residual for restart number `seed`.
fn shadow_vector<T: Scalar>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect()
}

struct Pass<T> {
    outcome: KrylovOutcome<T>,
    breakdown: bool,
}

type PassFn<T> = fn(&SparseMatrix<T>, &[T], Option<&[T]>, T, usize, Option<u64>) -> Pass<T>;

/// Runs `pass` and restarts it from the current iterate after a breakdown,
/// within the overall iteration budget.
fn with_restarts<T: Scalar>(
    pass: PassFn<T>,
    a: &SparseMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
) -> KrylovOutcome<T> {
    if let Some(out) = zero_rhs(b) {
        return out;
    }
    let mut used = 0;
    let mut current = pass(a, b, x0, tol, max_iter, None);
    for seed in 0..MAX_RESTARTS {
        used += current.outcome.iterations;
        if current.outcome.converged || !current.breakdown || used >= max_iter {
            break;
        }
        let x = std::mem::take(&mut current.outcome.x);
        current = pass(a, b, Some(&x), tol, max_iter - used, Some(seed));
    }
    KrylovOutcome {
        iterations: used.max(current.outcome.iterations),
        ..current.outcome
    }
}

/// Jacobi-preconditioned biconjugate gradient for `A x = b`. On breakdown
/// the method restarts with a randomized shadow residual.
pub fn bicg<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
) -> KrylovOutcome<T> {
    with_restarts(bicg_pass, a, b, x0, tol, max_iter)
}

fn bicg_pass<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
    shadow: Option<u64>,
) -> Pass<T> {
    let n = a.dim();
    let bnorm = norm(b);
    let inv = inverse_diagonal(a);
    let mut x = x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    let mut r = residual(a, b, &x);
    let mut rel = norm(&r) / bnorm;
    if rel <= tol {
        return Pass {
            outcome: KrylovOutcome {
                x,
                iterations: 0,
                residual: rel,
                converged: true,
            },
            breakdown: false,
        };
    }
    let mut rt = shadow.map_or_else(|| r.clone(), |seed| shadow_vector(n, seed));
    let mut z = vec![T::zero(); n];
    let mut zt = vec![T::zero(); n];
    apply_diag(&inv, &r, &mut z);
    apply_diag(&inv, &rt, &mut zt);
    let mut p = z.clone();
    let mut pt = zt.clone();
    let mut q = vec![T::zero(); n];
    let mut qt = vec![T::zero(); n];
    let mut rho = dot(&z, &rt);

    for it in 1..=max_iter {
        if rho == T::zero() || !rho.is_finite() {
            return Pass {
                outcome: KrylovOutcome {
                    x,
                    iterations: it - 1,
                    residual: rel,
                    converged: false,
                },
                breakdown: true,
            };
        }
        a.mul_vec(&p, &mut q);
        a.mul_vec_transposed(&pt, &mut qt);
        let denom = dot(&pt, &q);
        if denom == T::zero() || !denom.is_finite() {
            return Pass {
                outcome: KrylovOutcome {
                    x,
                    iterations: it - 1,
                    residual: rel,
                    converged: false,
                },
                breakdown: true,
            };
        }
        let alpha = rho / denom;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            rt[i] -= alpha * qt[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            // Recompute against the true residual to guard against drift.
            let true_rel = norm(&residual(a, b, &x)) / bnorm;
            if true_rel <= tol {
                return Pass {
                    outcome: KrylovOutcome {
                        x,
                        iterations: it,
                        residual: true_rel,
                        converged: true,
                    },
                    breakdown: false,
                };
            }
        }
        apply_diag(&inv, &r, &mut z);
        apply_diag(&inv, &rt, &mut zt);
        let rho_next = dot(&z, &rt);
        let beta = rho_next / rho;
        rho = rho_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
            pt[i] = zt[i] + beta * pt[i];
        }
    }
    let rel = norm(&residual(a, b, &x)) / bnorm;
    Pass {
        outcome: KrylovOutcome {
            x,
            iterations: max_iter,
            residual: rel,
            converged: rel <= tol,
        },
        breakdown: false,
    }
}

/// Jacobi-preconditioned BiCGSTAB for `A x = b`, restarted like [`bicg`].
pub fn bicgstab<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
) -> KrylovOutcome<T> {
    with_restarts(bicgstab_pass, a, b, x0, tol, max_iter)
}

fn bicgstab_pass<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
    shadow: Option<u64>,
) -> Pass<T> {
    let n = a.dim();
    let bnorm = norm(b);
    let inv = inverse_diagonal(a);
    let mut x = x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    let mut r = residual(a, b, &x);
    let mut rel = norm(&r) / bnorm;
    if rel <= tol {
        return Pass {
            outcome: KrylovOutcome {
                x,
                iterations: 0,
                residual: rel,
                converged: true,
            },
            breakdown: false,
        };
    }
    let r_hat = shadow.map_or_else(|| r.clone(), |seed| shadow_vector(n, seed));
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];

    for it in 1..=max_iter {
        let rho_next = dot(&r_hat, &r);
        if rho_next == T::zero() || !rho_next.is_finite() || omega == T::zero() {
            return Pass {
                outcome: KrylovOutcome {
                    x,
                    iterations: it - 1,
                    residual: rel,
                    converged: false,
                },
                breakdown: true,
            };
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply_diag(&inv, &p, &mut y);
        a.mul_vec(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == T::zero() || !denom.is_finite() {
            return Pass {
                outcome: KrylovOutcome {
                    x,
                    iterations: it - 1,
                    residual: rel,
                    converged: false,
                },
                breakdown: true,
            };
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            let true_rel = norm(&residual(a, b, &x)) / bnorm;
            if true_rel <= tol {
                return Pass {
                    outcome: KrylovOutcome {
                        x,
                        iterations: it,
                        residual: true_rel,
                        converged: true,
                    },
                    breakdown: false,
                };
            }
            r = residual(a, b, &x);
            rel = true_rel;
            continue;
        }
        apply_diag(&inv, &s, &mut z);
        a.mul_vec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt == T::zero() {
            T::zero()
        } else {
            dot(&t, &s) / tt
        };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            let true_rel = norm(&residual(a, b, &x)) / bnorm;
            if true_rel <= tol {
                return Pass {
                    outcome: KrylovOutcome {
                        x,
                        iterations: it,
                        residual: true_rel,
                        converged: true,
                    },
                    breakdown: false,
                };
            }
        }
    }
    let rel = norm(&residual(a, b, &x)) / bnorm;
    Pass {
        outcome: KrylovOutcome {
            x,
            iterations: max_iter,
            residual: rel,
            converged: rel <= tol,
        },
        breakdown: false,
    }
}
