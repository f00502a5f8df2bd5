//! Scalars and dense matrices over the reals, complexes and quaternions.
//!
//! Every element is stored as a quaternion `z0 + z1 i + z2 j + z3 k`; real
//! and complex entries simply keep their unused components at zero. The
//! quaternion product restricted to those subalgebras is ordinary real or
//! complex arithmetic, so one field-generic code path serves all three.
//!
//! Matrices act on column vectors from the left and scalars multiply
//! vectors from the right, so `F^N` is a right `F`-module and
//! `<z, w> = z* w` is conjugate-linear in the first slot.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used by unitarity checks, scaled by matrix size.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "r")]
    R,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "h")]
    H,
}

impl Field {
    pub const ALL: [Field; 3] = [Field::R, Field::C, Field::H];

    /// Real dimension of the field: 1, 2 or 4.
    pub fn dim(self) -> usize {
        match self {
            Field::R => 1,
            Field::C => 2,
            Field::H => 4,
        }
    }

    /// `N^F = N * dim_R F`.
    pub fn real_size(self, n: usize) -> usize {
        n * self.dim()
    }

    pub fn tag(self) -> &'static str {
        match self {
            Field::R => "r",
            Field::C => "c",
            Field::H => "h",
        }
    }

    pub fn parse(s: &str) -> Option<Field> {
        match s.trim().to_ascii_lowercase().as_str() {
            "r" | "real" => Some(Field::R),
            "c" | "complex" => Some(Field::C),
            "h" | "q" | "quaternion" => Some(Field::H),
            _ => None,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Raw quaternion arithmetic. Untagged; see [`Scalar`] for the checked,
/// field-tagged wrapper.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quat(pub [f64; 4]);

impl Quat {
    pub const ZERO: Quat = Quat([0.0; 4]);
    pub const ONE: Quat = Quat([1.0, 0.0, 0.0, 0.0]);
    pub const I: Quat = Quat([0.0, 1.0, 0.0, 0.0]);
    pub const J: Quat = Quat([0.0, 0.0, 1.0, 0.0]);
    pub const K: Quat = Quat([0.0, 0.0, 0.0, 1.0]);

    #[inline]
    pub fn new(z0: f64, z1: f64, z2: f64, z3: f64) -> Self {
        Quat([z0, z1, z2, z3])
    }

    #[inline]
    pub fn real(x: f64) -> Self {
        Quat([x, 0.0, 0.0, 0.0])
    }

    #[inline]
    pub fn re(self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn conj(self) -> Self {
        let [a, b, c, d] = self.0;
        Quat([a, -b, -c, -d])
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        let [a, b, c, d] = self.0;
        a * a + b * b + c * c + d * d
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        let [a, b, c, d] = self.0;
        Quat([a * s, b * s, c * s, d * s])
    }

    /// Multiplicative inverse `z* / |z|^2`.
    #[inline]
    pub fn inv(self) -> Self {
        self.conj().scale(1.0 / self.norm_sqr())
    }

    /// `Re(conj(self) * other)`, the real dot product of the coordinates.
    #[inline]
    pub fn dot(self, other: Quat) -> f64 {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = other.0;
        a * e + b * f + c * g + d * h
    }

    /// Zero out the components that do not belong to `field`.
    #[inline]
    pub fn project(self, field: Field) -> Self {
        let mut out = self;
        for c in out.0.iter_mut().skip(field.dim()) {
            *c = 0.0;
        }
        out
    }
}

impl Add for Quat {
    type Output = Quat;
    #[inline]
    fn add(self, o: Quat) -> Quat {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = o.0;
        Quat([a + e, b + f, c + g, d + h])
    }
}

impl AddAssign for Quat {
    #[inline]
    fn add_assign(&mut self, o: Quat) {
        *self = *self + o;
    }
}

impl Sub for Quat {
    type Output = Quat;
    #[inline]
    fn sub(self, o: Quat) -> Quat {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = o.0;
        Quat([a - e, b - f, c - g, d - h])
    }
}

impl SubAssign for Quat {
    #[inline]
    fn sub_assign(&mut self, o: Quat) {
        *self = *self - o;
    }
}

impl Neg for Quat {
    type Output = Quat;
    #[inline]
    fn neg(self) -> Quat {
        self.scale(-1.0)
    }
}

impl Mul for Quat {
    type Output = Quat;
    /// Hamilton product: `i^2 = j^2 = k^2 = ijk = -1`.
    #[inline]
    fn mul(self, o: Quat) -> Quat {
        let [a0, a1, a2, a3] = self.0;
        let [b0, b1, b2, b3] = o.0;
        Quat([
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ])
    }
}

impl Mul<f64> for Quat {
    type Output = Quat;
    #[inline]
    fn mul(self, s: f64) -> Quat {
        self.scale(s)
    }
}

/// A field-tagged scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scalar {
    field: Field,
    value: Quat,
}

/// Result bundle of [`scalar_ops`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarOps {
    pub product: Scalar,
    pub conjugate: Scalar,
    pub real_part: f64,
    pub norm: f64,
}

impl Scalar {
    /// Builds a scalar from up to four components; components beyond the
    /// field dimension must be zero.
    pub fn new(field: Field, components: [f64; 4]) -> Result<Self> {
        if let Some(index) = (field.dim()..4).find(|&i| components[i] != 0.0) {
            return Err(Error::InvalidComponent { field, index });
        }
        Ok(Scalar {
            field,
            value: Quat(components),
        })
    }

    pub fn real(field: Field, x: f64) -> Self {
        Scalar {
            field,
            value: Quat::real(x),
        }
    }

    pub(crate) fn from_quat(field: Field, value: Quat) -> Self {
        Scalar {
            field,
            value: value.project(field),
        }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn quat(&self) -> Quat {
        self.value
    }

    pub fn components(&self) -> [f64; 4] {
        self.value.0
    }

    pub fn mul(&self, other: &Scalar) -> Result<Scalar> {
        if self.field != other.field {
            return Err(Error::FieldMismatch {
                left: self.field,
                right: other.field,
            });
        }
        Ok(Scalar {
            field: self.field,
            value: self.value * other.value,
        })
    }

    pub fn conj(&self) -> Scalar {
        Scalar {
            field: self.field,
            value: self.value.conj(),
        }
    }

    pub fn re(&self) -> f64 {
        self.value.re()
    }

    pub fn norm(&self) -> f64 {
        self.value.norm()
    }
}

/// Product of `z` and `w` together with the unary operations on `z`.
pub fn scalar_ops(z: &Scalar, w: &Scalar) -> Result<ScalarOps> {
    Ok(ScalarOps {
        product: z.mul(w)?,
        conjugate: z.conj(),
        real_part: z.re(),
        norm: z.norm(),
    })
}

/// Dense row-major matrix over `F`.
#[derive(Clone, Debug, PartialEq)]
pub struct FMatrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<Quat>,
}

impl FMatrix {
    pub fn zeros(field: Field, rows: usize, cols: usize) -> Self {
        FMatrix {
            field,
            rows,
            cols,
            data: vec![Quat::ZERO; rows * cols],
        }
    }

    pub fn identity(field: Field, n: usize) -> Self {
        Self::embedded_identity(field, n, n)
    }

    /// `I^N_n`: the first `n` standard basis vectors of `F^N`.
    pub fn embedded_identity(field: Field, rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(field, rows, cols);
        for i in 0..rows.min(cols) {
            m[(i, i)] = Quat::ONE;
        }
        m
    }

    /// Builds a matrix entrywise; entries are projected onto `field`.
    pub fn from_fn(
        field: Field,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Quat,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j).project(field));
            }
        }
        FMatrix {
            field,
            rows,
            cols,
            data,
        }
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                left: (rows, cols),
                right: (values.len(), 1),
            });
        }
        Ok(Self::from_fn(Field::R, rows, cols, |i, j| {
            Quat::real(values[i * cols + j])
        }))
    }

    /// Builds a matrix from its real coordinate vector, the inverse of
    /// [`FMatrix::real_coords`].
    pub fn from_real_coords(field: Field, rows: usize, cols: usize, coords: &[f64]) -> Result<Self> {
        let d = field.dim();
        if coords.len() != rows * cols * d {
            return Err(Error::ShapeMismatch {
                left: (rows * cols * d, 1),
                right: (coords.len(), 1),
            });
        }
        Ok(Self::from_fn(field, rows, cols, |i, j| {
            let base = (i * cols + j) * d;
            let mut q = [0.0; 4];
            q[..d].copy_from_slice(&coords[base..base + d]);
            Quat(q)
        }))
    }

    #[inline]
    pub fn field(&self) -> Field {
        self.field
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[Quat] {
        &self.data
    }

    pub fn entry(&self, i: usize, j: usize) -> Scalar {
        Scalar::from_quat(self.field, self[(i, j)])
    }

    /// Stores `value` at `(i, j)` after projecting onto the matrix field.
    pub fn set(&mut self, i: usize, j: usize, value: Quat) {
        self[(i, j)] = value.project(self.field);
    }

    /// Real coordinates, entry by entry in row-major order, `dim F` per entry.
    pub fn real_coords(&self) -> Vec<f64> {
        let d = self.field.dim();
        self.data.iter().flat_map(|q| q.0[..d].to_vec()).collect()
    }

    fn check_same(&self, other: &FMatrix) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch {
                left: self.field,
                right: other.field,
            });
        }
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn adjoint(&self) -> FMatrix {
        let mut out = FMatrix::zeros(self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> FMatrix {
        let mut out = FMatrix::zeros(self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &FMatrix) -> Result<FMatrix> {
        if self.field != other.field {
            return Err(Error::FieldMismatch {
                left: self.field,
                right: other.field,
            });
        }
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = FMatrix::zeros(self.field, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Quat::ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = a * other[(k, j)];
                    out[(i, j)] += prod;
                }
            }
        }
        Ok(out)
    }

    /// `Z* W` without materializing the adjoint.
    pub fn adjoint_mul(&self, other: &FMatrix) -> Result<FMatrix> {
        if self.field != other.field {
            return Err(Error::FieldMismatch {
                left: self.field,
                right: other.field,
            });
        }
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = FMatrix::zeros(self.field, self.cols, other.cols);
        for r in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(r, i)].conj();
                for j in 0..other.cols {
                    let prod = a * other[(r, j)];
                    out[(i, j)] += prod;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &FMatrix) -> Result<FMatrix> {
        self.check_same(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &FMatrix) -> Result<FMatrix> {
        self.check_same(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    fn zip_map(&self, other: &FMatrix, f: impl Fn(Quat, Quat) -> Quat) -> FMatrix {
        FMatrix {
            field: self.field,
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> FMatrix {
        FMatrix {
            data: self.data.iter().map(|q| q.scale(s)).collect(),
            ..self.clone()
        }
    }

    /// Hopf action `t Z`: every entry multiplied by `t` from the left.
    pub fn left_scalar_mul(&self, t: Quat) -> FMatrix {
        let t = t.project(self.field);
        FMatrix {
            data: self.data.iter().map(|&q| t * q).collect(),
            ..self.clone()
        }
    }

    /// `Z t`: every entry multiplied by `t` from the right.
    pub fn right_scalar_mul(&self, t: Quat) -> FMatrix {
        let t = t.project(self.field);
        FMatrix {
            data: self.data.iter().map(|&q| q * t).collect(),
            ..self.clone()
        }
    }

    pub fn trace(&self) -> Quat {
        (0..self.rows.min(self.cols)).fold(Quat::ZERO, |acc, i| acc + self[(i, i)])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|q| q.norm_sqr()).sum()
    }

    /// Frobenius norm `sqrt(tr(Z* Z))`.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Real inner product `Re <Z, W>`.
    pub fn re_inner(&self, other: &FMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.dot(*b)).sum()
    }

    /// `<z_a, z_b> = z_a* z_b` for columns `a` and `b`.
    pub fn col_inner(&self, a: usize, b: usize) -> Quat {
        let mut acc = Quat::ZERO;
        for r in 0..self.rows {
            acc += self[(r, a)].conj() * self[(r, b)];
        }
        acc
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        (0..self.rows)
            .map(|r| self[(r, j)].norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn column(&self, j: usize) -> Vec<Quat> {
        (0..self.rows).map(|r| self[(r, j)]).collect()
    }

    /// Keeps the first `l` rows.
    pub fn top_rows(&self, l: usize) -> FMatrix {
        let l = l.min(self.rows);
        FMatrix {
            field: self.field,
            rows: l,
            cols: self.cols,
            data: self.data[..l * self.cols].to_vec(),
        }
    }

    /// `|Z - Z*|`; zero exactly when `Z` is Hermitian.
    pub fn hermitian_deviation(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// `|Z* Z - I|`, plus `|Z Z* - I|` when square.
    pub fn unitary_deviation(&self) -> f64 {
        let gram = self.adjoint_mul(self).expect("same matrix");
        let mut dev = gram
            .sub(&FMatrix::identity(self.field, self.cols))
            .expect("square gram")
            .norm();
        if self.rows == self.cols {
            let outer = self.matmul(&self.adjoint()).expect("square");
            dev = dev.max(
                outer
                    .sub(&FMatrix::identity(self.field, self.rows))
                    .expect("square")
                    .norm(),
            );
        }
        dev
    }

    pub fn is_unitary(&self) -> bool {
        self.rows == self.cols && self.unitary_deviation() <= unitary_tolerance(self.rows)
    }

    /// Matrix of the real-linear map `x -> Z x` in the coordinates
    /// `(Re x; I x; J x; K x)`, one block of `rows` per component.
    pub fn real_representation(&self) -> FMatrix {
        let d = self.field.dim();
        let units = [Quat::ONE, Quat::I, Quat::J, Quat::K];
        let mut out = FMatrix::zeros(Field::R, d * self.rows, d * self.cols);
        for (c, &unit) in units.iter().enumerate().take(d) {
            for m in 0..self.cols {
                let col = c * self.cols + m;
                for i in 0..self.rows {
                    let image = self[(i, m)] * unit;
                    for (k, &v) in image.0.iter().enumerate().take(d) {
                        out[(k * self.rows + i, col)] = Quat::real(v);
                    }
                }
            }
        }
        out
    }

    /// Copies the real parts into a plain `Vec<f64>` (row-major).
    pub fn real_parts(&self) -> Vec<f64> {
        self.data.iter().map(|q| q.re()).collect()
    }
}

impl std::ops::Index<(usize, usize)> for FMatrix {
    type Output = Quat;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Quat {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for FMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Quat {
        &mut self.data[i * self.cols + j]
    }
}

pub(crate) fn unitary_tolerance(n: usize) -> f64 {
    UNITARY_TOL * (n.max(1) as f64)
}

/// `<Z, W> := tr(Z* W)`.
pub fn frobenius_inner(z: &FMatrix, w: &FMatrix) -> Result<Scalar> {
    z.check_same(w)?;
    let mut acc = Quat::ZERO;
    for (a, b) in z.data.iter().zip(&w.data) {
        acc += a.conj() * *b;
    }
    Ok(Scalar::from_quat(z.field, acc))
}

/// The real orthogonal matrix of size `N^F` representing a unitary `U`.
pub fn realify(u: &FMatrix) -> Result<FMatrix> {
    if u.rows != u.cols {
        return Err(Error::NotSquare {
            rows: u.rows,
            cols: u.cols,
        });
    }
    let deviation = u.unitary_deviation();
    if deviation > unitary_tolerance(u.rows) {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(u.real_representation())
}
