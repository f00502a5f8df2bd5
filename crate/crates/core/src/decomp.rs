//! Hermitian eigendecomposition, singular value and polar decompositions
//! over `F`, plus the distances they induce: to a scaled Stiefel manifold
//! and between orbits of the Grassmann and Hopf actions.
//!
//! Both kernels are Jacobi methods that run directly on quaternion entries.
//! A 2x2 pivot with quaternion off-diagonal `g` is first made real by a
//! unit phase on one column, after which a real Givens rotation (whose
//! coefficients are central in `H`) finishes the step.

use crate::algebra::{FMatrix, Field, Quat};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;
const JACOBI_EPS: f64 = 1e-15;

/// Polar factors `Z = Q H` with `Q* Q = I` and `H` Hermitian positive
/// semidefinite.
#[derive(Clone, Debug)]
pub struct PolarFactors {
    pub q: FMatrix,
    pub h: FMatrix,
}

/// `Z = U Lambda V*` with non-increasing singular values.
#[derive(Clone, Debug)]
pub struct SingularTriple {
    pub u: FMatrix,
    pub v: FMatrix,
    pub lambda: Vec<f64>,
}

/// Hermitian eigendecomposition `H = P diag(values) P*`, values sorted
/// non-increasing.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub vectors: FMatrix,
    pub values: Vec<f64>,
}

/// Thin SVD: `u` is `N x n` with orthonormal columns.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: FMatrix,
    pub v: FMatrix,
    pub lambda: Vec<f64>,
}

impl ThinSvd {
    pub fn smallest(&self) -> f64 {
        self.lambda.last().copied().unwrap_or(0.0)
    }

    /// Polar factors built from this decomposition.
    pub fn polar(&self) -> PolarFactors {
        let q = self
            .u
            .matmul(&self.v.adjoint())
            .expect("thin svd shapes agree");
        let h = weighted_gram(&self.v, &self.lambda);
        PolarFactors { q, h }
    }
}

/// `V diag(w) V*`.
fn weighted_gram(v: &FMatrix, w: &[f64]) -> FMatrix {
    let n = v.rows();
    let mut out = FMatrix::zeros(v.field(), n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Quat::ZERO;
            for (k, &wk) in w.iter().enumerate() {
                acc += (v[(i, k)] * v[(j, k)].conj()).scale(wk);
            }
            out[(i, j)] = acc;
        }
    }
    out
}

fn givens(alpha: f64, beta: f64, g: f64) -> (f64, f64) {
    let zeta = (beta - alpha) / (2.0 * g);
    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, c * t)
}

fn scale_col_right(m: &mut FMatrix, j: usize, d: Quat) {
    for r in 0..m.rows() {
        m[(r, j)] = m[(r, j)] * d;
    }
}

fn rotate_cols(m: &mut FMatrix, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..m.rows() {
        let a = m[(r, p)];
        let b = m[(r, q)];
        m[(r, p)] = a.scale(c) - b.scale(s);
        m[(r, q)] = a.scale(s) + b.scale(c);
    }
}

/// Eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig(h: &FMatrix) -> Result<Eigen> {
    if h.rows() != h.cols() {
        return Err(Error::NotSquare {
            rows: h.rows(),
            cols: h.cols(),
        });
    }
    let deviation = h.hermitian_deviation();
    if deviation > 1e-10 * h.norm().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let n = h.rows();
    let field = h.field();
    // symmetrize so the iteration works on an exactly Hermitian matrix
    let mut a = FMatrix::from_fn(field, n, n, |i, j| {
        if i == j {
            Quat::real(h[(i, i)].re())
        } else {
            (h[(i, j)] + h[(j, i)].conj()).scale(0.5)
        }
    });
    let mut p = FMatrix::identity(field, n);
    let scale = a.norm();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off.sqrt() <= JACOBI_EPS * scale || scale == 0.0 {
            break;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let g = a[(i, j)];
                let gn = g.norm();
                if gn == 0.0 || gn <= 1e-300 {
                    continue;
                }
                // phase column/row j so that a[i][j] becomes real positive
                let d = g.conj().scale(1.0 / gn);
                scale_col_right(&mut a, j, d);
                let dc = d.conj();
                for c in 0..n {
                    a[(j, c)] = dc * a[(j, c)];
                }
                scale_col_right(&mut p, j, d);

                let (c, s) = givens(a[(i, i)].re(), a[(j, j)].re(), gn);
                rotate_cols(&mut a, i, j, c, s);
                for col in 0..n {
                    let x = a[(i, col)];
                    let y = a[(j, col)];
                    a[(i, col)] = x.scale(c) - y.scale(s);
                    a[(j, col)] = x.scale(s) + y.scale(c);
                }
                rotate_cols(&mut p, i, j, c, s);
                a[(i, j)] = Quat::ZERO;
                a[(j, i)] = Quat::ZERO;
                a[(i, i)] = Quat::real(a[(i, i)].re());
                a[(j, j)] = Quat::real(a[(j, j)].re());
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].re().total_cmp(&a[(x, x)].re()));
    let values = order.iter().map(|&k| a[(k, k)].re()).collect();
    let vectors = FMatrix::from_fn(field, n, n, |r, c| p[(r, order[c])]);
    Ok(Eigen { vectors, values })
}

/// One-sided Jacobi: returns `Z V` with mutually orthogonal columns and the
/// accumulated unitary `V`.
fn orthogonalize_columns(z: &FMatrix) -> (FMatrix, FMatrix) {
    let n = z.cols();
    let mut a = z.clone();
    let mut v = FMatrix::identity(z.field(), n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = a.col_norm(p).powi(2);
                let beta = a.col_norm(q).powi(2);
                let g = a.col_inner(p, q);
                let gn = g.norm();
                if gn == 0.0 || gn <= JACOBI_EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let d = g.conj().scale(1.0 / gn);
                scale_col_right(&mut a, q, d);
                scale_col_right(&mut v, q, d);
                let (c, s) = givens(alpha, beta, gn);
                rotate_cols(&mut a, p, q, c, s);
                rotate_cols(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    (a, v)
}

/// Appends unit vectors orthogonal to the existing columns until `u` has
/// `target` orthonormal columns. `filled[j]` marks columns already set.
fn complete_orthonormal(u: &mut FMatrix, filled: &mut [bool]) {
    let rows = u.rows();
    let field = u.field();
    for j in 0..u.cols() {
        if filled[j] {
            continue;
        }
        // take the coordinate vector with the largest residual; some residual
        // always has squared norm at least (free dims)/rows
        let mut best: Option<(f64, Vec<Quat>)> = None;
        for candidate in 0..rows {
            let mut x: Vec<Quat> = vec![Quat::ZERO; rows];
            x[candidate] = Quat::ONE;
            // two passes of Gram-Schmidt: x <- x - u_k (u_k* x)
            for _ in 0..2 {
                for k in 0..u.cols() {
                    if !filled[k] {
                        continue;
                    }
                    let mut coef = Quat::ZERO;
                    for r in 0..rows {
                        coef += u[(r, k)].conj() * x[r];
                    }
                    for r in 0..rows {
                        x[r] -= u[(r, k)] * coef;
                    }
                }
            }
            let norm = x.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, x));
            }
        }
        let (norm, x) = best.expect("basis completion needs at least one row");
        assert!(norm > 1e-8, "basis completion found no free direction");
        for r in 0..rows {
            u[(r, j)] = x[r].scale(1.0 / norm).project(field);
        }
        filled[j] = true;
    }
}

fn rank_threshold(z: &FMatrix, lambda_max: f64) -> f64 {
    lambda_max * 1e-13 * (z.rows().max(z.cols()) as f64)
}

/// Thin SVD via one-sided Jacobi; requires `N >= n`.
pub fn thin_svd(z: &FMatrix) -> Result<ThinSvd> {
    let (rows, cols) = z.shape();
    if rows < cols {
        return Err(Error::TooFewRows { rows, cols });
    }
    let (a, v) = orthogonalize_columns(z);
    let norms: Vec<f64> = (0..cols).map(|j| a.col_norm(j)).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let lambda: Vec<f64> = order.iter().map(|&k| norms[k]).collect();
    let lambda_max = lambda.first().copied().unwrap_or(0.0);
    let cutoff = rank_threshold(z, lambda_max);

    let field = z.field();
    let mut u = FMatrix::zeros(field, rows, cols);
    let mut filled = vec![false; cols];
    for (c, &k) in order.iter().enumerate() {
        if norms[k] > cutoff && norms[k] > 0.0 {
            let inv = 1.0 / norms[k];
            for r in 0..rows {
                u[(r, c)] = a[(r, k)].scale(inv);
            }
            filled[c] = true;
        }
    }
    if filled.iter().any(|f| !f) {
        complete_orthonormal(&mut u, &mut filled);
    }
    let v = FMatrix::from_fn(field, cols, cols, |r, c| v[(r, order[c])]);
    Ok(ThinSvd { u, v, lambda })
}

/// Full singular value decomposition with `U` square.
pub fn svd(z: &FMatrix) -> Result<SingularTriple> {
    let thin = thin_svd(z)?;
    let (rows, cols) = z.shape();
    let mut u = FMatrix::zeros(z.field(), rows, rows);
    let mut filled = vec![false; rows];
    for c in 0..cols {
        for r in 0..rows {
            u[(r, c)] = thin.u[(r, c)];
        }
        filled[c] = true;
    }
    complete_orthonormal(&mut u, &mut filled);
    Ok(SingularTriple {
        u,
        v: thin.v,
        lambda: thin.lambda,
    })
}

/// Singular values only, non-increasing.
pub fn singular_values(z: &FMatrix) -> Result<Vec<f64>> {
    let (rows, cols) = z.shape();
    if rows < cols {
        return Err(Error::TooFewRows { rows, cols });
    }
    let (a, _) = orthogonalize_columns(z);
    let mut lambda: Vec<f64> = (0..cols).map(|j| a.col_norm(j)).collect();
    lambda.sort_by(|x, y| y.total_cmp(x));
    Ok(lambda)
}

/// Polar decomposition. Rank-deficient input takes its factors from the
/// SVD, so `Q` is one valid choice among several.
pub fn polar(z: &FMatrix) -> Result<PolarFactors> {
    Ok(thin_svd(z)?.polar())
}

/// Frobenius distance from `Z` to `r V_{N,n}`: `sqrt(sum (lambda_l - r)^2)`.
pub fn dist_to_scaled_stiefel(z: &FMatrix, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            range: "(0, inf)",
        });
    }
    Ok(stiefel_gap(&singular_values(z)?, r))
}

pub(crate) fn stiefel_gap(lambda: &[f64], r: f64) -> f64 {
    lambda.iter().map(|l| (l - r).powi(2)).sum::<f64>().sqrt()
}

fn check_pair(z: &FMatrix, w: &FMatrix) -> Result<()> {
    if z.field() != w.field() {
        return Err(Error::FieldMismatch {
            left: z.field(),
            right: w.field(),
        });
    }
    if z.shape() != w.shape() {
        return Err(Error::ShapeMismatch {
            left: z.shape(),
            right: w.shape(),
        });
    }
    Ok(())
}

/// Quotient distance under the right `U^F(n)` action:
/// `min_U |Z - W U| = sqrt(|Z|^2 + |W|^2 - 2 sum lambda_l(W* Z))`.
pub fn grassmann_dist(z: &FMatrix, w: &FMatrix) -> Result<f64> {
    check_pair(z, w)?;
    let m = w.adjoint_mul(z)?;
    let nuclear: f64 = singular_values(&m)?.iter().sum();
    Ok((z.norm_sqr() + w.norm_sqr() - 2.0 * nuclear).max(0.0).sqrt())
}

/// `S = sum_{m,l} w^m_l (z^m_l)*`; the optimal Hopf phase is `S / |S|`.
pub fn hopf_phase_sum(z: &FMatrix, w: &FMatrix) -> Quat {
    z.data()
        .iter()
        .zip(w.data())
        .fold(Quat::ZERO, |acc, (&a, &b)| acc + b * a.conj())
}

/// Quotient distance under the left Hopf action:
/// `min_{|t|=1} |t Z - W| = sqrt(|Z|^2 + |W|^2 - 2 |S|)`.
pub fn hopf_dist(z: &FMatrix, w: &FMatrix) -> Result<f64> {
    check_pair(z, w)?;
    let s = hopf_phase_sum(z, w);
    Ok((z.norm_sqr() + w.norm_sqr() - 2.0 * s.norm()).max(0.0).sqrt())
}

/// Unit scalar attaining the Hopf minimum (`1` when every phase is optimal).
pub fn hopf_optimal_phase(z: &FMatrix, w: &FMatrix) -> Quat {
    let s = hopf_phase_sum(z, w);
    let n = s.norm();
    if n == 0.0 {
        Quat::ONE
    } else {
        s.scale(1.0 / n).project(z.field())
    }
}

/// Convenience for callers holding real-only data.
pub fn diag(field: Field, values: &[f64]) -> FMatrix {
    let n = values.len();
    FMatrix::from_fn(field, n, n, |i, j| {
        if i == j {
            Quat::real(values[i])
        } else {
            Quat::ZERO
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(t: &SingularTriple, rows: usize, cols: usize, field: Field) -> FMatrix {
        let lam = FMatrix::from_fn(field, rows, cols, |i, j| {
            if i == j {
                Quat::real(t.lambda[i])
            } else {
                Quat::ZERO
            }
        });
        t.u.matmul(&lam).unwrap().matmul(&t.v.adjoint()).unwrap()
    }

    #[test]
    fn diagonal_eigen() {
        let h = diag(Field::R, &[3.0, 1.0]);
        let e = hermitian_eig(&h).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        for i in 0..2 {
            for j in 0..2 {
                let x = e.vectors[(i, j)].re().abs();
                assert!(x == 0.0 || x == 1.0);
            }
        }
        let swapped = diag(Field::C, &[1.0, 3.0]);
        let e = hermitian_eig(&swapped).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = FMatrix::identity(Field::H, 2);
        m.set(0, 1, Quat::I);
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn svd_of_embedded_identity() {
        for field in Field::ALL {
            let z = FMatrix::embedded_identity(field, 5, 3);
            let t = svd(&z).unwrap();
            for l in &t.lambda {
                assert!((l - 1.0).abs() < 1e-14);
            }
            assert!(t.u.unitary_deviation() < 1e-12);
            let back = reconstruct(&t, 5, 3, field);
            assert!(back.sub(&z).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn svd_needs_tall_input() {
        let z = FMatrix::zeros(Field::R, 2, 3);
        assert!(matches!(svd(&z), Err(Error::TooFewRows { .. })));
    }

    #[test]
    fn rank_deficient_polar_is_still_a_frame() {
        // second column is a right-multiple of the first
        let mut z = FMatrix::zeros(Field::H, 4, 2);
        z.set(0, 0, Quat::new(1.0, 2.0, 0.0, 0.5));
        z.set(2, 0, Quat::new(0.0, 1.0, -1.0, 0.0));
        let t = Quat::new(0.3, 0.0, 0.4, 0.0);
        for r in 0..4 {
            let v = z[(r, 0)] * t;
            z.set(r, 1, v);
        }
        let p = polar(&z).unwrap();
        assert!(p.q.unitary_deviation() < 1e-10);
        let back = p.q.matmul(&p.h).unwrap();
        assert!(back.sub(&z).unwrap().norm() < 1e-10 * z.norm().max(1.0));
        assert!(p.h.hermitian_deviation() < 1e-12);
    }

    #[test]
    fn scaled_frame_polar() {
        let z = FMatrix::embedded_identity(Field::C, 4, 2).scale(2.0);
        let p = polar(&z).unwrap();
        assert!(p
            .q
            .sub(&FMatrix::embedded_identity(Field::C, 4, 2))
            .unwrap()
            .norm()
            < 1e-14);
        assert!(p.h.sub(&diag(Field::C, &[2.0, 2.0])).unwrap().norm() < 1e-14);
    }

    #[test]
    fn nearest_point_examples() {
        let z = FMatrix::embedded_identity(Field::R, 4, 2).scale(1.7);
        assert!(dist_to_scaled_stiefel(&z, 1.7).unwrap() < 1e-14);
        let z = diag(Field::R, &[3.0, 0.0]);
        let d = dist_to_scaled_stiefel(&z, 1.0).unwrap();
        assert!((d - 5f64.sqrt()).abs() < 1e-14);
        assert!(dist_to_scaled_stiefel(&z, 0.0).is_err());
    }

    #[test]
    fn quotient_distances_trivial_cases() {
        let z = FMatrix::from_real(3, 1, &[1.0, -2.0, 0.5]).unwrap();
        let w = FMatrix::from_real(3, 1, &[0.5, 1.0, 2.0]).unwrap();
        assert!(grassmann_dist(&z, &z).unwrap() < 1e-7);
        let expect = z.sub(&w).unwrap().norm().min(z.add(&w).unwrap().norm());
        assert!((grassmann_dist(&z, &w).unwrap() - expect).abs() < 1e-12);
        assert!((hopf_dist(&z, &w).unwrap() - expect).abs() < 1e-12);

        let zh = FMatrix::from_fn(Field::H, 3, 2, |i, j| {
            Quat::new(i as f64 - 1.0, j as f64, 0.5, -0.25 * i as f64)
        });
        let t = Quat::new(0.5, 0.5, -0.5, 0.5);
        let tz = zh.left_scalar_mul(t);
        assert!(hopf_dist(&zh, &tz).unwrap() < 1e-7);
        assert!(matches!(
            hopf_dist(&zh, &z),
            Err(Error::FieldMismatch { .. })
        ));
    }
}
