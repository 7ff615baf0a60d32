//! The ambient quadratic space R^(2d+1) with a form of signature (d+1, d),
//! its positive/negative splitting, and angle computations.
//!
//! A [`SpaceContext`] fixes the form Q, a maximal positive-definite subspace
//! S (dimension d+1), the Q-orthogonal negative-definite complement T
//! (dimension d), and orientations on both. The associated Euclidean norm is
//! N0(x) = N_S(pi_S x) + N_T(pi_T x), where N_S = Q on S and N_T = -Q on T;
//! every angle below is measured against an explicit positive-definite form.
//!
//! Principal angles between subspaces are computed from the singular values
//! of the product of form-orthonormal bases, with cosines clamped to [-1, 1]
//! before any arccos.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TOL;

pub type Vector = DVector<f64>;

/// Converts a matrix to row-major nested vectors (serialization helper).
pub(crate) fn mat_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Parses row-major nested vectors into a matrix, validating rectangularity.
pub(crate) fn rows_to_mat(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidParameter("ragged or empty matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Orthonormalizes the columns of `cols` with respect to the positive-definite
/// form `gram`, via the Cholesky transform into a Euclidean frame followed by
/// a rank-checked QR factorization.
pub(crate) fn orthonormal_columns(gram: &DMatrix<f64>, cols: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotAMetric("form is not positive definite".into()))?;
    let l = chol.l();
    let e = l.transpose() * cols;
    let scale = e.norm().max(1.0);
    let qr = e.qr();
    let (q, r) = (qr.q(), qr.r());
    for k in 0..r.nrows().min(r.ncols()) {
        if r[(k, k)].abs() <= 1e-12 * scale {
            return Err(Error::InvalidParameter(
                "columns are linearly dependent".into(),
            ));
        }
    }
    // Undo the Euclidean transform; columns satisfy B^T gram B = Id.
    let lt_inv = l
        .transpose()
        .try_inverse()
        .ok_or(Error::Singular)?;
    Ok(lt_inv * q)
}

/// A subspace stored through a basis orthonormal under the positive form
/// fixed at construction (N0 for the context constructors).
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Builds a subspace from spanning columns, orthonormalizing them with
    /// respect to `ctx`'s Euclidean form N0.
    pub fn new(ctx: &SpaceContext, spanning: &DMatrix<f64>) -> Result<Self> {
        if spanning.nrows() != ctx.dim() {
            return Err(Error::DimensionMismatch {
                expected: ctx.dim(),
                got: spanning.nrows(),
            });
        }
        Ok(Self {
            basis: orthonormal_columns(ctx.gram_n0(), spanning)?,
        })
    }

    /// Wraps columns that are already N0-orthonormal (checked).
    pub fn from_orthonormal(ctx: &SpaceContext, basis: DMatrix<f64>) -> Result<Self> {
        let g = basis.transpose() * ctx.gram_n0() * &basis;
        let dev = (&g - DMatrix::identity(g.nrows(), g.ncols())).norm();
        if dev > 1e-10 {
            return Err(Error::NotOrthogonal { deviation: dev });
        }
        Ok(Self { basis })
    }

    /// Builds a subspace of a space other than the ambient one (an exterior
    /// power, say), orthonormalizing spanning columns under the given
    /// positive-definite form.
    pub fn with_form(form: &FormHandle, spanning: &DMatrix<f64>) -> Result<Self> {
        if spanning.nrows() != form.dim() {
            return Err(Error::DimensionMismatch {
                expected: form.dim(),
                got: spanning.nrows(),
            });
        }
        Ok(Self {
            basis: orthonormal_columns(form.gram(), spanning)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthonormal basis under the construction form, one column per
    /// dimension.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
}

/// Which positive-definite (or indefinite) bilinear form a computation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    /// The invariant form Q of signature (d+1, d); not a metric.
    Invariant,
    /// The Euclidean form N0 attached to the splitting.
    Euclidean,
    /// A frame-adapted local Euclidean form.
    Local,
    /// Caller-supplied Gram matrix.
    Custom,
}

/// A bilinear form together with its Gram matrix in ambient coordinates.
#[derive(Debug, Clone)]
pub struct FormHandle {
    kind: FormKind,
    gram: DMatrix<f64>,
}

impl FormHandle {
    pub fn invariant(ctx: &SpaceContext) -> Self {
        Self {
            kind: FormKind::Invariant,
            gram: ctx.gram_q().clone(),
        }
    }

    pub fn euclidean(ctx: &SpaceContext) -> Self {
        Self {
            kind: FormKind::Euclidean,
            gram: ctx.gram_n0().clone(),
        }
    }

    pub(crate) fn local(gram: DMatrix<f64>) -> Self {
        Self {
            kind: FormKind::Local,
            gram,
        }
    }

    /// Wraps an arbitrary symmetric Gram matrix.
    pub fn custom(gram: DMatrix<f64>) -> Result<Self> {
        if gram.nrows() != gram.ncols() {
            return Err(Error::DimensionMismatch {
                expected: gram.nrows(),
                got: gram.ncols(),
            });
        }
        let dev = (&gram - gram.transpose()).norm();
        if dev > 1e-10 * gram.norm().max(1.0) {
            return Err(Error::InvalidParameter("Gram matrix is not symmetric".into()));
        }
        Ok(Self {
            kind: FormKind::Custom,
            gram,
        })
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// Evaluates the bilinear form on a pair of vectors.
    pub fn eval(&self, x: &Vector, y: &Vector) -> Result<f64> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: if x.len() != self.dim() { x.len() } else { y.len() },
            });
        }
        Ok((x.transpose() * &self.gram * y)[(0, 0)])
    }

    /// Squared norm; meaningful as a length only for definite forms.
    pub fn quad(&self, x: &Vector) -> Result<f64> {
        self.eval(x, x)
    }

    pub fn norm(&self, x: &Vector) -> Result<f64> {
        let q = self.quad(x)?;
        if self.kind == FormKind::Invariant && q < 0.0 {
            return Err(Error::NotAMetric(
                "the invariant form is indefinite; no norm".into(),
            ));
        }
        Ok(q.max(0.0).sqrt())
    }

    fn require_metric(&self) -> Result<()> {
        if self.kind == FormKind::Invariant {
            return Err(Error::NotAMetric(
                "angles require a positive-definite form".into(),
            ));
        }
        Ok(())
    }
}

/// Angle between two nonzero vectors under a positive-definite form.
///
/// `projective` folds antipodes together (range [0, pi/2]); otherwise the
/// spherical angle in [0, pi] is returned. Nearly aligned pairs switch to
/// the residual sine, which stays accurate down to machine precision where
/// the arccosine path floors out near 1e-8.
pub fn angle(form: &FormHandle, x: &Vector, y: &Vector, projective: bool) -> Result<f64> {
    form.require_metric()?;
    let nx = form.norm(x)?;
    let ny = form.norm(y)?;
    if nx <= 0.0 || ny <= 0.0 {
        return Err(Error::ZeroVector);
    }
    let c = (form.eval(x, y)? / (nx * ny)).clamp(-1.0, 1.0);
    let ca = c.abs();
    let a = if ca < 0.9 {
        ca.acos()
    } else {
        let xu = x / nx;
        let yu = y * (c.signum() / ny);
        let r = &xu - &yu * ca;
        let s2 = (r.transpose() * form.gram() * &r)[(0, 0)].max(0.0);
        s2.sqrt().clamp(0.0, 1.0).asin()
    };
    Ok(if projective || c >= 0.0 {
        a
    } else {
        std::f64::consts::PI - a
    })
}

/// Singular values of a rectangular matrix, sorted decreasing, from the
/// symmetric eigendecomposition of the smaller Gram product.
///
/// The bidiagonal SVD is avoided throughout the crate: it silently returns
/// wrong values on some rank-deficient inputs (projectors in particular),
/// while the symmetric path is dependable. The squared conditioning only
/// costs accuracy on singular values near zero, which every caller treats as
/// "numerically zero" well above that floor.
pub(crate) fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows().min(m.ncols());
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let eig = SymmetricEigen::new(gram);
    let mut vs: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    vs.sort_by(|p, q| q.partial_cmp(p).unwrap());
    vs.truncate(k);
    vs
}

/// Largest singular value.
pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values_desc(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value (of min(nrows, ncols) many).
pub(crate) fn sigma_min(m: &DMatrix<f64>) -> f64 {
    singular_values_desc(m).last().copied().unwrap_or(0.0)
}

/// Cosines of the principal angles between two subspaces, sorted decreasing.
fn principal_cosines(form: &FormHandle, a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    form.require_metric()?;
    if a.ambient_dim() != form.dim() || b.ambient_dim() != form.dim() {
        return Err(Error::DimensionMismatch {
            expected: form.dim(),
            got: if a.ambient_dim() != form.dim() {
                a.ambient_dim()
            } else {
                b.ambient_dim()
            },
        });
    }
    let ao = orthonormal_columns(form.gram(), a.basis())?;
    let bo = orthonormal_columns(form.gram(), b.basis())?;
    let m = ao.transpose() * form.gram() * bo;
    let mut cs = singular_values_desc(&m);
    for c in cs.iter_mut() {
        *c = c.clamp(0.0, 1.0);
    }
    Ok(cs)
}

/// Smallest principal angle between two subspaces of arbitrary dimensions:
/// the minimum angular distance between their unit spheres.
pub fn subspace_min_angle(form: &FormHandle, a: &Subspace, b: &Subspace) -> Result<f64> {
    if a.dim() == 0 || b.dim() == 0 {
        return Err(Error::InvalidParameter("zero-dimensional subspace".into()));
    }
    let cs = principal_cosines(form, a, b)?;
    Ok(cs[0].acos())
}

/// Largest principal angle between two subspaces of equal dimension: the
/// Hausdorff distance between the projectivized subspaces.
///
/// Small angles are measured through the projection residual (a sine), which
/// stays accurate down to machine precision where the cosine path bottoms
/// out near 1e-8.
pub fn subspace_hausdorff_angle(form: &FormHandle, a: &Subspace, b: &Subspace) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let cs = principal_cosines(form, a, b)?;
    let cos_min = cs[cs.len() - 1];
    if cos_min < 0.9 {
        return Ok(cos_min.acos());
    }
    let g = form.gram();
    let ao = orthonormal_columns(g, a.basis())?;
    let bo = orthonormal_columns(g, b.basis())?;
    let r = &bo - &ao * (ao.transpose() * g * &bo);
    // sin of the largest principal angle under the form geometry.
    let k = r.transpose() * g * &r;
    let eig = SymmetricEigen::new(k);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    Ok(lmax.max(0.0).sqrt().clamp(0.0, 1.0).asin())
}

/// Estimated infimum of the angular distance between two direction sets given
/// through unit-vector samples. Directions are compared on the sphere (signs
/// matter); normalization of the samples is enforced here.
pub fn set_min_angle(form: &FormHandle, ps: &[Vector], qs: &[Vector]) -> Result<f64> {
    form.require_metric()?;
    if ps.is_empty() || qs.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let mut best = f64::INFINITY;
    for p in ps {
        for q in qs {
            let a = angle(form, p, q, false)?;
            if a < best {
                best = a;
            }
        }
    }
    Ok(best)
}

/// Intersection of two subspaces, found through principal-angle pairs whose
/// cosines are within `tol` of 1. Bases are compared under `form`.
pub fn subspace_intersection(
    form: &FormHandle,
    a: &Subspace,
    b: &Subspace,
    tol: f64,
) -> Result<DMatrix<f64>> {
    form.require_metric()?;
    let ao = orthonormal_columns(form.gram(), a.basis())?;
    let bo = orthonormal_columns(form.gram(), b.basis())?;
    let m = ao.transpose() * form.gram() * &bo;
    // Principal directions on the B side: eigenvectors of M^T M, with
    // cosines the square roots of its eigenvalues.
    let eig = SymmetricEigen::new(m.transpose() * &m);
    let mut dirs: Vec<Vector> = Vec::new();
    for k in 0..eig.eigenvalues.len() {
        let cos = eig.eigenvalues[k].max(0.0).sqrt();
        if (cos - 1.0).abs() <= tol {
            dirs.push(&bo * eig.eigenvectors.column(k).clone_owned());
        }
    }
    if dirs.is_empty() {
        return Ok(DMatrix::zeros(a.ambient_dim(), 0));
    }
    let stacked = DMatrix::from_columns(&dirs);
    orthonormal_columns(form.gram(), &stacked)
}

/// Norm-equivalence constant between two positive-definite forms:
/// max of the two operator norms of the identity map.
pub fn lipschitz_between(gram_from: &DMatrix<f64>, gram_to: &DMatrix<f64>) -> Result<f64> {
    let chol = gram_from
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotAMetric("form is not positive definite".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(Error::Singular)?;
    let m = &linv * gram_to * linv.transpose();
    let eig = m.symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo <= 0.0 {
        return Err(Error::NotAMetric("form is not positive definite".into()));
    }
    Ok(hi.sqrt().max(1.0 / lo.sqrt()))
}

/// Orthonormal basis (under `out_gram`) of the nullspace of `rows`, i.e. of
/// {x : rows * x = 0}, from the eigendecomposition of rows^T rows.
pub(crate) fn nullspace(rows: &DMatrix<f64>, out_gram: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = rows.ncols();
    let eig = SymmetricEigen::new(rows.transpose() * rows);
    let lmax = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let mut dirs: Vec<Vector> = Vec::new();
    for k in 0..n {
        if eig.eigenvalues[k] <= 1e-14 * lmax {
            dirs.push(eig.eigenvectors.column(k).clone_owned());
        }
    }
    if dirs.is_empty() {
        return Ok(DMatrix::zeros(n, 0));
    }
    let stacked = DMatrix::from_columns(&dirs);
    orthonormal_columns(out_gram, &stacked)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpaceContextRepr {
    d: usize,
    #[serde(rename = "gram_Q", skip_serializing_if = "Option::is_none")]
    gram_q: Option<Vec<Vec<f64>>>,
    #[serde(rename = "basis_S", skip_serializing_if = "Option::is_none")]
    basis_s: Option<Vec<Vec<f64>>>,
    #[serde(rename = "basis_T", skip_serializing_if = "Option::is_none")]
    basis_t: Option<Vec<Vec<f64>>>,
}

/// The ambient space R^(2d+1): invariant form Q of signature (d+1, d), the
/// splitting into S and T, the Euclidean form N0, and orientations.
///
/// The default context uses coordinates in which Q is diagonal with entries
/// (+1, ..., +1, -1, ..., -1), S is spanned by the first d+1 axes and T by
/// the last d. Any other splitting enters through explicit Gram and basis
/// input and is reduced to form-orthonormal bases at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SpaceContextRepr", into = "SpaceContextRepr")]
pub struct SpaceContext {
    d: usize,
    gram_q: DMatrix<f64>,
    gram_n0: DMatrix<f64>,
    basis_s: DMatrix<f64>,
    basis_t: DMatrix<f64>,
    proj_s: DMatrix<f64>,
    proj_t: DMatrix<f64>,
    orientation_s: f64,
    orientation_t: f64,
}

impl TryFrom<SpaceContextRepr> for SpaceContext {
    type Error = Error;

    fn try_from(r: SpaceContextRepr) -> Result<Self> {
        match (r.gram_q, r.basis_s, r.basis_t) {
            (None, None, None) => SpaceContext::standard(r.d),
            (gq, bs, bt) => {
                let std = SpaceContext::standard(r.d)?;
                let dim = 2 * r.d + 1;
                let gram = match gq {
                    Some(rows) => rows_to_mat(&rows)?,
                    None => std.gram_q.clone(),
                };
                let basis_s = match bs {
                    Some(rows) => rows_to_mat(&rows)?,
                    None => std.basis_s.clone(),
                };
                let basis_t = match bt {
                    Some(rows) => rows_to_mat(&rows)?,
                    None => std.basis_t.clone(),
                };
                if gram.nrows() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: gram.nrows(),
                    });
                }
                SpaceContext::from_parts(r.d, gram, basis_s, basis_t)
            }
        }
    }
}

impl From<SpaceContext> for SpaceContextRepr {
    fn from(c: SpaceContext) -> Self {
        SpaceContextRepr {
            d: c.d,
            gram_q: Some(mat_to_rows(&c.gram_q)),
            basis_s: Some(mat_to_rows(&c.basis_s)),
            basis_t: Some(mat_to_rows(&c.basis_t)),
        }
    }
}

impl SpaceContext {
    /// The coordinate context for a given d >= 1.
    pub fn standard(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("d must be at least 1".into()));
        }
        let dim = 2 * d + 1;
        let gram_q = DMatrix::from_fn(dim, dim, |i, j| {
            if i != j {
                0.0
            } else if i < d + 1 {
                1.0
            } else {
                -1.0
            }
        });
        let basis_s = DMatrix::from_fn(dim, d + 1, |i, j| if i == j { 1.0 } else { 0.0 });
        let basis_t = DMatrix::from_fn(dim, d, |i, j| if i == j + d + 1 { 1.0 } else { 0.0 });
        Self::from_parts(d, gram_q, basis_s, basis_t)
    }

    /// Builds a context from an explicit Gram matrix for Q and spanning sets
    /// for S and T. Validates the signature, Q-orthogonality of S and T, and
    /// definiteness of Q on each part.
    pub fn from_parts(
        d: usize,
        gram_q: DMatrix<f64>,
        basis_s: DMatrix<f64>,
        basis_t: DMatrix<f64>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("d must be at least 1".into()));
        }
        let dim = 2 * d + 1;
        if gram_q.nrows() != dim || gram_q.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: gram_q.nrows(),
            });
        }
        if (gram_q.transpose() - &gram_q).norm() > 1e-10 * gram_q.norm().max(1.0) {
            return Err(Error::InvalidParameter("Gram of Q is not symmetric".into()));
        }
        if basis_s.nrows() != dim || basis_s.ncols() != d + 1 {
            return Err(Error::DimensionMismatch {
                expected: d + 1,
                got: basis_s.ncols(),
            });
        }
        if basis_t.nrows() != dim || basis_t.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: basis_t.ncols(),
            });
        }
        // Q positive definite on S, negative definite on T.
        let gs = basis_s.transpose() * &gram_q * &basis_s;
        let bs = basis_s
            * orthonormal_columns(&gs, &DMatrix::identity(d + 1, d + 1)).map_err(|_| {
                Error::NotAMetric("Q is not positive definite on the S input".into())
            })?;
        let gt = -(basis_t.transpose() * &gram_q * &basis_t);
        let bt = basis_t
            * orthonormal_columns(&gt, &DMatrix::identity(d, d)).map_err(|_| {
                Error::NotAMetric("Q is not negative definite on the T input".into())
            })?;
        let cross = bs.transpose() * &gram_q * &bt;
        if cross.norm() > 1e-9 {
            return Err(Error::InvalidParameter(
                "S and T are not Q-orthogonal".into(),
            ));
        }
        // Projectors along the splitting; S and T coordinates of x are
        // bs^T Q x and -bt^T Q x.
        let proj_s = &bs * bs.transpose() * &gram_q;
        let proj_t = -(&bt * bt.transpose() * &gram_q);
        let gram_n0 = proj_s.transpose() * &gram_q * &proj_s - proj_t.transpose() * &gram_q * &proj_t;
        Ok(Self {
            d,
            gram_q,
            gram_n0,
            basis_s: bs,
            basis_t: bt,
            proj_s,
            proj_t,
            orientation_s: 1.0,
            orientation_t: 1.0,
        })
    }

    /// Same context with the orientation signs replaced.
    pub fn with_orientations(mut self, s: f64, t: f64) -> Result<Self> {
        if s.abs() != 1.0 || t.abs() != 1.0 {
            return Err(Error::InvalidParameter("orientations must be +1 or -1".into()));
        }
        self.orientation_s = s;
        self.orientation_t = t;
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        2 * self.d + 1
    }

    pub fn gram_q(&self) -> &DMatrix<f64> {
        &self.gram_q
    }

    pub fn gram_n0(&self) -> &DMatrix<f64> {
        &self.gram_n0
    }

    /// N0-orthonormal basis of S (columns).
    pub fn basis_s(&self) -> &DMatrix<f64> {
        &self.basis_s
    }

    /// N0-orthonormal basis of T (columns).
    pub fn basis_t(&self) -> &DMatrix<f64> {
        &self.basis_t
    }

    pub fn orientation_s(&self) -> f64 {
        self.orientation_s
    }

    pub fn orientation_t(&self) -> f64 {
        self.orientation_t
    }

    /// The involution that is +1 on S and -1 on T; conjugates Q-orthogonality
    /// into N0-orthogonality.
    pub fn sign_swap(&self) -> DMatrix<f64> {
        &self.proj_s - &self.proj_t
    }

    pub fn form_q(&self) -> FormHandle {
        FormHandle::invariant(self)
    }

    pub fn form_n0(&self) -> FormHandle {
        FormHandle::euclidean(self)
    }

    /// Splits x into its S and T components (ambient vectors).
    pub fn split_st(&self, x: &Vector) -> Result<(Vector, Vector)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok((&self.proj_s * x, &self.proj_t * x))
    }

    /// Coordinates of pi_S x in the stored S basis.
    pub fn s_coords(&self, x: &Vector) -> Vector {
        self.basis_s.transpose() * &self.gram_n0 * x
    }

    /// Coordinates of pi_T x in the stored T basis.
    pub fn t_coords(&self, x: &Vector) -> Vector {
        self.basis_t.transpose() * &self.gram_n0 * x
    }

    /// Ambient vector from S-basis coordinates.
    pub fn from_s_coords(&self, c: &Vector) -> Vector {
        &self.basis_s * c
    }

    /// Ambient vector from T-basis coordinates.
    pub fn from_t_coords(&self, c: &Vector) -> Vector {
        &self.basis_t * c
    }

    /// Q-orthogonal complement of a subspace, computed through the sign-swap
    /// conjugation of the N0-orthogonal complement.
    pub fn q_orthogonal_complement(&self, v: &Subspace) -> Result<Subspace> {
        let rows = v.basis().transpose() * &self.gram_q;
        let basis = nullspace(&rows, &self.gram_n0)?;
        if basis.ncols() != self.dim() - v.dim() {
            return Err(Error::InvalidParameter(
                "degenerate subspace: complement has wrong dimension".into(),
            ));
        }
        Subspace::from_orthonormal(self, basis)
    }

    /// Relative deviation of g from preserving Q.
    pub fn q_drift(&self, g: &DMatrix<f64>) -> f64 {
        let r = g.transpose() * &self.gram_q * g - &self.gram_q;
        r.norm() / (1.0 + g.norm_squared())
    }

    /// Checks that g preserves Q up to the global tolerance.
    pub fn check_q_preserved(&self, g: &DMatrix<f64>) -> Result<()> {
        let drift = self.q_drift(g);
        if drift > TOL {
            return Err(Error::InvalidParameter(format!(
                "map does not preserve the invariant form: relative drift {drift:.3e}"
            )));
        }
        Ok(())
    }
}
