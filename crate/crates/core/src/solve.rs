//! Linear solvers: sparse direct factorizations backed by faer and a
//! preconditioned conjugate gradient with a caller-supplied preconditioner.

use std::sync::Once;

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt};
use faer::{Conj, Mat, Side};

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, Csr, Operator, Scalar};

/// Scalars usable with the faer factorizations.
pub trait FaerScalar: Scalar + faer::traits::ComplexField {}
impl<T: Scalar + faer::traits::ComplexField> FaerScalar for T {}

fn sequential() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Sparse direct factorization of a square matrix.
pub enum Factor<T: FaerScalar> {
    Cholesky(Llt<usize, T>),
    Lu(Lu<usize, T>),
}

impl<T: FaerScalar> Factor<T> {
    /// `L L^H` factorization; fails unless the matrix is Hermitian positive definite.
    pub fn cholesky(a: &Csr<T>, context: &str) -> Result<Self> {
        sequential();
        a.to_faer()
            .sp_cholesky(Side::Lower)
            .map(Factor::Cholesky)
            .map_err(|_| Error::Singular {
                context: format!("{context}: not positive definite"),
            })
    }

    /// Cholesky reusing a symbolic analysis of the same pattern.
    pub fn cholesky_with(symbolic: &SymbolicLlt<usize>, a: &Csr<T>, context: &str) -> Result<Self> {
        sequential();
        let m = a.to_faer();
        Llt::try_new_with_symbolic(symbolic.clone(), m.as_ref(), Side::Lower)
            .map(Factor::Cholesky)
            .map_err(|_| Error::Singular {
                context: format!("{context}: not positive definite"),
            })
    }

    pub fn lu(a: &Csr<T>, context: &str) -> Result<Self> {
        sequential();
        a.to_faer().sp_lu().map(Factor::Lu).map_err(|_| Error::Singular {
            context: context.to_string(),
        })
    }

    /// Cholesky when possible, pivoted LU otherwise.
    pub fn hermitian(a: &Csr<T>, context: &str) -> Result<Self> {
        Self::cholesky(a, context).or_else(|_| Self::lu(a, context))
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut m = Mat::<T>::from_fn(b.len(), 1, |i, _| b[i]);
        match self {
            Factor::Cholesky(f) => f.solve_in_place_with_conj(Conj::No, m.as_mut()),
            Factor::Lu(f) => f.solve_in_place_with_conj(Conj::No, m.as_mut()),
        }
        (0..b.len()).map(|i| m[(i, 0)]).collect()
    }

    /// Solves several right-hand sides stored column-wise.
    pub fn solve_many(&self, cols: &[Vec<T>]) -> Vec<Vec<T>> {
        if cols.is_empty() {
            return Vec::new();
        }
        let n = cols[0].len();
        let mut m = Mat::<T>::from_fn(n, cols.len(), |i, j| cols[j][i]);
        match self {
            Factor::Cholesky(f) => f.solve_in_place_with_conj(Conj::No, m.as_mut()),
            Factor::Lu(f) => f.solve_in_place_with_conj(Conj::No, m.as_mut()),
        }
        (0..cols.len())
            .map(|j| (0..n).map(|i| m[(i, j)]).collect())
            .collect()
    }
}

/// Symbolic Cholesky analysis of a sparsity pattern.
pub fn symbolic_cholesky<T: FaerScalar>(a: &Csr<T>) -> Result<SymbolicLlt<usize>> {
    sequential();
    let m = a.to_faer();
    SymbolicLlt::try_new(m.symbolic(), Side::Lower).map_err(|e| Error::Numerical(format!("{e:?}")))
}

fn residual<T: Scalar>(a: &Csr<T>, x: &[T], b: &[T]) -> Vec<T> {
    let ax = a.mul_vec(x);
    b.iter().zip(ax).map(|(&bi, ai)| bi - ai).collect()
}

/// Solves `op x = rhs` with `||op x - rhs|| <= tolerance ||rhs||`.
///
/// Hermitian positive definite operators are factored by Cholesky, others by
/// pivoted LU; a few steps of iterative refinement enforce the contract.
pub fn solve_linear<T: FaerScalar>(op: &Operator<T>, rhs: &[T], tolerance: f64) -> Result<Vec<T>> {
    let a = &op.matrix;
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if rhs.len() != a.nrows() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: rhs.len(),
        });
    }
    let bn = norm2(rhs);
    if bn == 0.0 {
        return Ok(vec![T::zero(); rhs.len()]);
    }
    let f = Factor::hermitian(a, &op.descriptor)?;
    let mut x = f.solve(rhs);
    let mut r = residual(a, &x, rhs);
    let mut rn = norm2(&r);
    for _ in 0..4 {
        if rn <= tolerance * bn {
            break;
        }
        let d = f.solve(&r);
        for (xi, di) in x.iter_mut().zip(d) {
            *xi += di;
        }
        r = residual(a, &x, rhs);
        rn = norm2(&r);
    }
    if !rn.is_finite() {
        return Err(Error::Singular {
            context: op.descriptor.clone(),
        });
    }
    if rn > tolerance * bn {
        return Err(Error::SolverTolerance {
            context: op.descriptor.clone(),
            residual: rn / bn,
            tolerance,
        });
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug)]
pub struct PcgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for a Hermitian positive definite
/// operator given by `apply`. `x` holds the initial guess and the result.
pub fn pcg<T: Scalar>(
    mut apply: impl FnMut(&[T]) -> Vec<T>,
    mut precond: impl FnMut(&[T]) -> Vec<T>,
    b: &[T],
    x: &mut [T],
    tolerance: f64,
    max_iter: usize,
) -> Result<PcgStats> {
    let bn = norm2(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(PcgStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let ax = apply(x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let mut rn = norm2(&r);
    if rn <= tolerance * bn {
        return Ok(PcgStats {
            iterations: 0,
            relative_residual: rn / bn,
        });
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re();
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap).re();
        if !(pap > 0.0) {
            return Err(Error::Singular {
                context: "conjugate gradient: operator not positive definite".into(),
            });
        }
        let alpha = rz / pap;
        for i in 0..x.len() {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        rn = norm2(&r);
        if rn <= tolerance * bn {
            return Ok(PcgStats {
                iterations: it,
                relative_residual: rn / bn,
            });
        }
        z = precond(&r);
        let rz_new = dot(&r, &z).re();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + p[i] * beta;
        }
    }
    Err(Error::SolverTolerance {
        context: "conjugate gradient".into(),
        residual: rn / bn,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> (Csr<f64>, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                dense[i][j] = (0..n).map(|k| g[i][k] * g[j][k]).sum::<f64>();
            }
            dense[i][i] += n as f64 * 0.1;
        }
        let trips: Vec<_> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (i, j, dense[i][j])).collect();
        (Csr::from_triplets(n, n, &trips), dense)
    }

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = (b[i] - (i + 1..n).map(|j| a[i][j] * x[j]).sum::<f64>()) / a[i][i];
        }
        x
    }

    #[test]
    fn identity_returns_rhs() {
        let op = Operator::new(Csr::<f64>::identity(5), "identity");
        let b = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        assert_eq!(solve_linear(&op, &b, 1e-14).unwrap(), b);
    }

    #[test]
    fn random_spd_matches_dense_oracle() {
        let (a, dense) = random_spd(50, 3);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = solve_linear(&Operator::new(a, "spd"), &b, 1e-12).unwrap();
        let y = dense_solve(dense, b);
        let err = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn indefinite_uses_lu() {
        let a = Csr::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        let x = solve_linear(&Operator::new(a, "swap"), &[2.0, 3.0], 1e-14).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn pcg_converges_on_complex_hermitian() {
        let (a, _) = random_spd(30, 9);
        let mut c = a.to_complex();
        // add a Hermitian imaginary part
        let skew: Vec<_> = (0..29).flat_map(|i| [(i, i + 1, Complex64::new(0.0, 0.5)), (i + 1, i, Complex64::new(0.0, -0.5))]).collect();
        c = c.linear_combination(Complex64::new(1.0, 0.0), &Csr::from_triplets(30, 30, &skew), Complex64::new(1.0, 0.0)).unwrap();
        let b: Vec<Complex64> = (0..30).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut x = vec![Complex64::new(0.0, 0.0); 30];
        let d = c.diagonal();
        let stats = pcg(|v| c.mul_vec(v), |r| r.iter().zip(&d).map(|(ri, di)| ri / di).collect(), &b, &mut x, 1e-12, 500).unwrap();
        assert!(stats.relative_residual <= 1e-12);
        let direct = Factor::hermitian(&c, "c").unwrap().solve(&b);
        let err = x.iter().zip(&direct).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }
}
