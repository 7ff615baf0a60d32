//! The d-th exterior power of the ambient space: compound operators and
//! induced forms, proximality analysis with attracting line and repelling
//! hyperplane, projective Lipschitz estimation, and the transfer of
//! contraction data from pseudohyperbolic maps to their compounds.
//!
//! The wedge basis is indexed by the increasing d-element subsets of the
//! 1-based coordinate set in lexicographic order. The compound of a map has
//! the d x d minor with rows I and columns J at entry (I, J); a positive
//! definite form induces one on the power whose Gram entries are
//! determinants of pairwise inner products. Both constructions are
//! multiplicative respectively functorial.
//!
//! A map with a simple eigenvalue of strictly maximal modulus fixes an
//! attracting line and an invariant complementary hyperplane. For the
//! compound of a pseudohyperbolic map the line is the wedge of the
//! expanding member, the hyperplane is the kernel of wedging against the
//! contracting-plus-neutral invariant subspace, and the contraction
//! strength transfers exactly: the relative hyperplane norm of the compound
//! in the adapted wedge metric equals the inverse norm of the expanding
//! block.
//!
//! Spectral gates on a compound use its source: the compound's eigenvalue
//! moduli are the d-fold products of the source moduli, so the QR
//! eigenvalue iteration only ever runs at the ambient size. Run directly on
//! a compound, whose moduli spread over many orders of magnitude, that
//! iteration can fail to converge.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    angle, nullspace, orthonormal_columns, spectral_norm, subspace_hausdorff_angle,
    subspace_min_angle, FormHandle, SpaceContext, Subspace, Vector,
};
use crate::pseudo::PseudoHyperbolicMap;
use crate::sample::SphereSampler;
use crate::PROX_GAP;

/// Iteration budget of the dominant-eigenpair power iteration.
const PROX_MAX_ITERS: usize = 10_000;

/// Relative convergence threshold on successive Rayleigh quotients.
const PROX_RAYLEIGH_TOL: f64 = 1e-12;

/// Angular scale of the close pairs drawn by [`lipschitz_on_set`].
const CLOSE_PAIR_SCALE: f64 = 1e-5;

/// Default pair count for projective Lipschitz estimation.
pub const DEFAULT_LIPSCHITZ_SAMPLES: usize = 100_000;

/// Binomial coefficient at the small parameters used here (exact at every
/// intermediate step).
pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out = 1usize;
    for i in 0..k {
        out = out * (n - i) / (i + 1);
    }
    out
}

/// Basis index of an exterior power: a strictly increasing subset of the
/// 1-based coordinate set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtIndex {
    subset: Vec<usize>,
}

impl ExtIndex {
    /// All k-element subsets of {1, ..., n} in lexicographic order.
    pub fn enumerate(n: usize, k: usize) -> Vec<ExtIndex> {
        if k > n {
            return Vec::new();
        }
        let mut cur: Vec<usize> = (1..=k).collect();
        let mut out = Vec::with_capacity(binomial(n, k));
        loop {
            out.push(ExtIndex {
                subset: cur.clone(),
            });
            let mut i = k;
            while i > 0 && cur[i - 1] == n - k + i {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            cur[i - 1] += 1;
            for j in i..k {
                cur[j] = cur[j - 1] + 1;
            }
        }
        out
    }

    /// 1-based entries, strictly increasing.
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn len(&self) -> usize {
        self.subset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subset.is_empty()
    }

    /// The complementary increasing subset within {1, ..., n}.
    pub fn complement(&self, n: usize) -> ExtIndex {
        let mut out = Vec::with_capacity(n - self.subset.len());
        let mut next = self.subset.iter().peekable();
        for v in 1..=n {
            if next.peek() == Some(&&v) {
                next.next();
            } else {
                out.push(v);
            }
        }
        ExtIndex { subset: out }
    }

    /// Sign of the shuffle permutation sorting (I, complement of I) into
    /// increasing order: (-1)^(sum I - k(k+1)/2).
    pub fn shuffle_sign(&self) -> f64 {
        let k = self.subset.len();
        let s: usize = self.subset.iter().sum();
        if (s - k * (k + 1) / 2) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// The k x k minor of `g` with 1-based row set `rows` and column set `cols`.
fn minor(g: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    DMatrix::from_fn(k, k, |i, j| g[(rows[i] - 1, cols[j] - 1)]).determinant()
}

/// Compound matrix of all k x k minors of an n x n map, wedge-basis indexed.
fn compound_matrix(g: &DMatrix<f64>, n: usize, k: usize) -> DMatrix<f64> {
    let idx = ExtIndex::enumerate(n, k);
    let c = idx.len();
    DMatrix::from_fn(c, c, |a, b| minor(g, idx[a].subset(), idx[b].subset()))
}

/// A linear map on the d-th exterior power, stored with its source.
#[derive(Debug, Clone)]
pub struct ExtOperator {
    matrix: DMatrix<f64>,
    source: DMatrix<f64>,
    d: usize,
}

impl ExtOperator {
    /// Matrix in the lexicographic wedge basis.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The underlying map on the ambient space.
    pub fn source(&self) -> &DMatrix<f64> {
        &self.source
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Dimension of the power: C(2d+1, d).
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The compound of the inverse source, equal to the inverse of the
    /// compound but computed at the ambient condition number.
    pub fn inverse(&self) -> Result<ExtOperator> {
        let source = self
            .source
            .clone()
            .try_inverse()
            .ok_or(Error::Singular)?;
        let matrix = compound_matrix(&source, self.source.nrows(), self.d);
        Ok(ExtOperator {
            matrix,
            source,
            d: self.d,
        })
    }
}

/// The compound operator of `g` on the d-th exterior power: the entry at
/// (I, J) is the d x d minor of g with rows I and columns J; multiplicative
/// in g.
///
/// Minors are evaluated one determinant at a time, which is trivial at the
/// supported sizes (a 35 x 35 output at d = 3); a dynamic-programming
/// compound algorithm would replace the per-minor loop before any larger d
/// were enabled.
pub fn ext_operator(ctx: &SpaceContext, g: &DMatrix<f64>) -> Result<ExtOperator> {
    let dim = ctx.dim();
    if g.nrows() != dim || g.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: g.nrows(),
        });
    }
    Ok(ExtOperator {
        matrix: compound_matrix(g, dim, ctx.d()),
        source: g.clone(),
        d: ctx.d(),
    })
}

/// The form induced on the d-th exterior power by a positive-definite form:
/// the Gram entry between two wedge-basis elements is the determinant of
/// their d x d matrix of pairwise inner products (equivalently, the signed
/// sum over permutations of products of inner products). Positive definite
/// whenever the input is; indefinite input is rejected.
pub fn ext_form(ctx: &SpaceContext, n: &FormHandle) -> Result<FormHandle> {
    let dim = ctx.dim();
    if n.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: n.dim(),
        });
    }
    if n.gram().clone().cholesky().is_none() {
        return Err(Error::NotAMetric(
            "the induced wedge form needs a positive-definite input".into(),
        ));
    }
    let idx = ExtIndex::enumerate(dim, ctx.d());
    let c = idx.len();
    let gram = DMatrix::from_fn(c, c, |a, b| minor(n.gram(), idx[a].subset(), idx[b].subset()));
    FormHandle::custom(gram)
}

/// Wedge coordinates of the basis columns: the line of the k-th power
/// spanned by a k-dimensional subspace, one k x k minor per index subset.
pub fn wedge_line(basis: &DMatrix<f64>) -> Result<Vector> {
    let n = basis.nrows();
    let k = basis.ncols();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(
            "wedge of an empty or overfull column set".into(),
        ));
    }
    let cols: Vec<usize> = (1..=k).collect();
    let idx = ExtIndex::enumerate(n, k);
    let v = Vector::from_fn(idx.len(), |a, _| minor(basis, idx[a].subset(), &cols));
    if v.norm() <= 1e-12 * basis.norm().max(1.0).powi(k as i32) {
        return Err(Error::InvalidParameter(
            "columns are linearly dependent".into(),
        ));
    }
    Ok(v)
}

/// Orthonormal basis (under `gram`) of the wedges annihilated by wedging
/// against the full wedge of `complement_basis`: exactly the span of the
/// decomposables with a factor inside that subspace. A hyperplane when the
/// complement has dimension n - k + 1 for k-th-power wedges; here it is
/// used with k = d against the (d+1)-dimensional contracting-plus-neutral
/// subspace of a pseudohyperbolic map.
fn wedge_kernel(
    n: usize,
    complement_basis: &DMatrix<f64>,
    gram: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let k1 = complement_basis.ncols();
    let k = n - k1;
    let zeta = wedge_line(complement_basis)?;
    let idx_k = ExtIndex::enumerate(n, k);
    let idx_c = ExtIndex::enumerate(n, k1);
    let pos: HashMap<&[usize], usize> = idx_c
        .iter()
        .enumerate()
        .map(|(p, i)| (i.subset(), p))
        .collect();
    let mut normal = DMatrix::<f64>::zeros(1, idx_k.len());
    for (a, i) in idx_k.iter().enumerate() {
        let comp = i.complement(n);
        normal[(0, a)] = i.shuffle_sign() * zeta[pos[comp.subset()]];
    }
    let ker = nullspace(&normal, gram)?;
    if ker.ncols() != idx_k.len() - 1 {
        return Err(Error::InvalidParameter(
            "wedge kernel is not a hyperplane".into(),
        ));
    }
    Ok(ker)
}

/// Dominant spectral data of a map with a simple eigenvalue of strictly
/// maximal modulus.
#[derive(Debug, Clone)]
pub struct ProximalData {
    top_eigenvalue: f64,
    v_s: Subspace,
    v_u: Subspace,
    separation: f64,
    strength: f64,
}

impl ProximalData {
    /// Signed dominant eigenvalue.
    pub fn top_eigenvalue(&self) -> f64 {
        self.top_eigenvalue
    }

    /// Attracting line.
    pub fn v_s(&self) -> &Subspace {
        &self.v_s
    }

    /// Invariant complementary hyperplane.
    pub fn v_u(&self) -> &Subspace {
        &self.v_u
    }

    /// Angle between the attracting line and the hyperplane in the analysis
    /// form.
    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// Norm of the restriction to the hyperplane divided by the dominant
    /// eigenvalue modulus.
    pub fn strength(&self) -> f64 {
        self.strength
    }
}

/// Eigenvalue moduli of a compound in decreasing order, computed as d-fold
/// products of the source eigenvalue moduli (an exact identity via
/// triangularization). The QR iteration runs on the small source matrix,
/// where it is reliable; on the compound itself, whose moduli spread over
/// many orders of magnitude, it can stall indefinitely. A source that
/// resists triangularization within the budget surfaces as an error.
fn compound_moduli(f: &ExtOperator) -> Result<Vec<f64>> {
    let schur = nalgebra::Schur::try_new(f.source().clone(), f64::EPSILON, 100_000).ok_or(
        Error::NoConvergence {
            iterations: 100_000,
        },
    )?;
    let src: Vec<f64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    let mut out: Vec<f64> = ExtIndex::enumerate(src.len(), f.d())
        .iter()
        .map(|i| i.subset().iter().map(|&v| src[v - 1]).product())
        .collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(out)
}

/// Power iteration for the dominant eigenpair; the sign of the eigenvalue
/// comes from the converged Rayleigh quotient. Convergence is judged on the
/// eigen-residual, which tracks the direction error itself rather than the
/// quadratically faster Rayleigh value.
fn dominant_direction(m: &DMatrix<f64>, seed: u64) -> Result<(f64, Vector)> {
    let n = m.nrows();
    let mut s = SphereSampler::new(seed);
    let mut x = s.unit(n);
    for _ in 0..PROX_MAX_ITERS {
        let y = m * &x;
        let ny = y.norm();
        if !ny.is_finite() || ny == 0.0 {
            return Err(Error::Singular);
        }
        let rayleigh = x.dot(&y);
        let residual = (&y - &x * rayleigh).norm();
        x = y / ny;
        if residual <= PROX_RAYLEIGH_TOL * ny {
            let polished = x.dot(&(m * &x));
            return Ok((polished, x));
        }
    }
    Err(Error::NoConvergence {
        iterations: PROX_MAX_ITERS,
    })
}

/// Proximality analysis under a positive-definite reference form.
///
/// The spectral gap is verified on the full set of eigenvalue moduli: the
/// runner-up must fall below the leading modulus by the [`PROX_GAP`]
/// factor, else the map is not proximal and the two leading moduli are
/// reported. The attracting line then comes from power iteration, and the
/// invariant hyperplane is the annihilator of the dominant direction of the
/// transpose.
pub fn analyze_proximal(f: &ExtOperator, form: &FormHandle) -> Result<ProximalData> {
    let n = f.matrix().nrows();
    if form.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: form.dim(),
        });
    }
    let moduli = compound_moduli(f)?;
    let (first, second) = (moduli[0], moduli[1]);
    if first <= 0.0 || moduli[n - 1] <= 1e-14 * first {
        return Err(Error::Singular);
    }
    if second >= first / (1.0 + PROX_GAP) {
        return Err(Error::NotProximal { first, second });
    }
    let (lambda, top) = dominant_direction(f.matrix(), 0xE16)?;
    let (_, left) = dominant_direction(&f.matrix().transpose(), 0xE17)?;
    let v_s = Subspace::with_form(form, &DMatrix::from_columns(&[top]))?;
    let rows = DMatrix::from_fn(1, n, |_, j| left[j]);
    let hyper = nullspace(&rows, form.gram())?;
    if hyper.ncols() != n - 1 {
        return Err(Error::InvalidParameter(
            "invariant complement is not a hyperplane".into(),
        ));
    }
    let v_u = Subspace::with_form(form, &hyper)?;
    let separation = subspace_min_angle(form, &v_s, &v_u)?;
    // The compression B^T G f B is the matrix of f on the invariant
    // hyperplane in a form-orthonormal basis, so its Euclidean spectral
    // norm is the restriction norm in the form metric.
    let b = v_u.basis();
    let restriction = b.transpose() * form.gram() * (f.matrix() * b);
    let strength = spectral_norm(&restriction) / lambda.abs();
    Ok(ProximalData {
        top_eigenvalue: lambda,
        v_s,
        v_u,
        separation,
        strength,
    })
}

/// Per-member dominant data inside a system audit.
#[derive(Debug, Clone, Serialize)]
pub struct MemberReport {
    pub index: usize,
    /// +1 for the member itself, -1 for its inverse.
    pub power: i8,
    pub top_eigenvalue: f64,
    pub separation: f64,
    pub strength: f64,
}

/// One required attracting-line / hyperplane angle inside a system audit.
#[derive(Debug, Clone, Serialize)]
pub struct PairAngle {
    pub from: (usize, i8),
    pub to: (usize, i8),
    pub angle: f64,
}

/// Joint proximality audit of a family together with its inverses.
#[derive(Debug, Clone, Serialize)]
pub struct ProximalSystemAudit {
    pub members: Vec<MemberReport>,
    pub pairwise: Vec<PairAngle>,
    /// Smallest angle in the table.
    pub separation: f64,
    /// Largest member strength.
    pub strength: f64,
}

/// Audits proximality of every member and every inverse, and tabulates the
/// angle from each attracting line to each invariant hyperplane. The only
/// pairing excluded is a member against its own inverse; a member against
/// itself is a required row. A non-proximal member surfaces as an error
/// naming it.
pub fn audit_proximal_system(
    maps: &[ExtOperator],
    form: &FormHandle,
) -> Result<ProximalSystemAudit> {
    if maps.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let mut data: Vec<((usize, i8), ProximalData)> = Vec::new();
    for (i, f) in maps.iter().enumerate() {
        for (power, op) in [(1i8, f.clone()), (-1i8, f.inverse()?)] {
            match analyze_proximal(&op, form) {
                Ok(p) => data.push(((i, power), p)),
                Err(Error::NotProximal { first, second }) => {
                    return Err(Error::InvalidParameter(format!(
                        "member {i} power {power}: not proximal (leading moduli {first:.6e}, {second:.6e})"
                    )));
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut pairwise = Vec::new();
    let mut separation = f64::INFINITY;
    for ((i, si), p) in &data {
        for ((j, sj), q) in &data {
            if i == j && *sj == -si {
                continue;
            }
            let angle = subspace_min_angle(form, p.v_s(), q.v_u())?;
            separation = separation.min(angle);
            pairwise.push(PairAngle {
                from: (*i, *si),
                to: (*j, *sj),
                angle,
            });
        }
    }
    let members = data
        .iter()
        .map(|((i, s), p)| MemberReport {
            index: *i,
            power: *s,
            top_eigenvalue: p.top_eigenvalue(),
            separation: p.separation(),
            strength: p.strength(),
        })
        .collect();
    let strength = data.iter().map(|(_, p)| p.strength()).fold(0.0, f64::max);
    Ok(ProximalSystemAudit {
        members,
        pairwise,
        separation,
        strength,
    })
}

/// A sampling region of the projective sphere, bounded by angular distance
/// to a reference subspace.
#[derive(Debug, Clone)]
pub enum ProjectiveRegion {
    /// Directions at angle at least `radius` from `center` (the complement
    /// of a neighborhood, typically of a repelling hyperplane).
    OutsideBall { center: Subspace, radius: f64 },
    /// Directions at angle at most `radius` from `center` (a neighborhood,
    /// typically of an attracting line).
    Ball { center: Subspace, radius: f64 },
}

/// Angle from a nonzero vector to a subspace with form-orthonormal basis
/// `b_on`: arcsine of the relative projection residual, accurate at small
/// angles.
fn vector_subspace_angle(form: &FormHandle, b_on: &DMatrix<f64>, x: &Vector) -> f64 {
    let g = form.gram();
    let r = x - b_on * (b_on.transpose() * g * x);
    let n2 = (x.transpose() * g * x)[(0, 0)].max(1e-300);
    let s2 = (r.transpose() * g * &r)[(0, 0)].max(0.0);
    (s2 / n2).sqrt().clamp(0.0, 1.0).asin()
}

/// Sampled supremum of the projective difference quotient of `m` over pairs
/// inside the region: half the pairs independent, half at angular distance
/// about 1e-5 so derivative-scale behavior is seen. The value is a lower
/// bound for the true Lipschitz constant on the region, not a certificate
/// from above.
pub fn lipschitz_on_set(
    m: &DMatrix<f64>,
    form: &FormHandle,
    region: &ProjectiveRegion,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = form.dim();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.nrows(),
        });
    }
    if samples == 0 {
        return Err(Error::EmptySampleSet);
    }
    let (center, radius, outside) = match region {
        ProjectiveRegion::OutsideBall { center, radius } => (center, *radius, true),
        ProjectiveRegion::Ball { center, radius } => (center, *radius, false),
    };
    if !(radius > 0.0 && radius < FRAC_PI_2) {
        return Err(Error::InvalidParameter(
            "region radius must lie strictly between 0 and pi/2".into(),
        ));
    }
    let g = form.gram();
    let center_on = orthonormal_columns(g, center.basis())?;
    let comp = nullspace(&(center_on.transpose() * g), g)?;
    let frame_all = orthonormal_columns(g, &DMatrix::identity(n, n))?;
    let in_region = |x: &Vector| -> bool {
        let a = vector_subspace_angle(form, &center_on, x);
        if outside {
            a >= radius
        } else {
            a <= radius
        }
    };
    let draw = |s: &mut SphereSampler| -> Result<Vector> {
        for _ in 0..1000 {
            let x = if !outside && comp.ncols() > 0 {
                let u = &center_on * s.unit(center_on.ncols());
                let w = &comp * s.unit(comp.ncols());
                let phi = s.uniform(0.0, radius);
                u * phi.cos() + w * phi.sin()
            } else {
                &frame_all * s.unit(n)
            };
            if in_region(&x) {
                return Ok(x);
            }
        }
        Err(Error::EmptySampleSet)
    };
    let mut s = SphereSampler::new(seed);
    let mut best: f64 = -1.0;
    let mut evaluated = 0usize;
    let independent = samples / 2;
    for k in 0..samples {
        let x = draw(&mut s)?;
        let y = if k < independent {
            draw(&mut s)?
        } else {
            let mut close = None;
            for _ in 0..200 {
                let cand = &x + s.gaussian_vector(n) * CLOSE_PAIR_SCALE;
                if in_region(&cand) {
                    close = Some(cand);
                    break;
                }
            }
            match close {
                Some(v) => v,
                None => continue,
            }
        };
        let a = angle(form, &x, &y, true)?;
        if a <= 1e-13 {
            continue;
        }
        let (fx, fy) = (m * &x, m * &y);
        if form.quad(&fx)? <= 1e-280 || form.quad(&fy)? <= 1e-280 {
            continue;
        }
        let b = angle(form, &fx, &fy, true)?;
        best = best.max(b / a);
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::EmptySampleSet);
    }
    Ok(best)
}

/// One row of the angle-comparison table: largest principal angle between
/// two d-dimensional subspaces against the angle between their wedge lines.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichRow {
    pub alpha_ambient: f64,
    pub alpha_wedge: f64,
}

/// Transfer report between a pseudohyperbolic map and its compound.
#[derive(Debug, Clone, Serialize)]
pub struct CorrespondenceReport {
    pub d: usize,
    /// Whether the compound has a simple strictly dominant eigenvalue.
    pub proximal: bool,
    /// Two largest eigenvalue moduli of the compound.
    pub leading_moduli: (f64, f64),
    /// Signed dominant eigenvalue of the compound (NaN when not proximal).
    pub top_eigenvalue: f64,
    /// Determinant of the expanding block of the source.
    pub det_more: f64,
    /// Relative gap between the dominant modulus and |det of the expanding
    /// block|.
    pub eigenvalue_vs_det: f64,
    /// Angle between the attracting line and the wedge of the expanding
    /// member.
    pub attracting_angle: f64,
    /// Angle between the invariant hyperplane and the kernel of wedging
    /// against the contracting-plus-neutral subspace.
    pub repelling_angle: f64,
    /// Contraction strength of the source.
    pub source_strength: f64,
    /// Hyperplane strength of the compound in the adapted wedge metric.
    pub strength_ext: f64,
    /// Norm of the inverse of the expanding block.
    pub expanding_inverse_norm: f64,
    /// |strength_ext - expanding_inverse_norm|.
    pub strength_gap: f64,
    /// Angle comparisons for the supplied subspace pairs.
    pub sandwich: Vec<SandwichRow>,
    /// Every row satisfies ambient <= wedge <= sqrt(d) * ambient within
    /// 1e-9.
    pub sandwich_ok: bool,
}

/// Builds the transfer report for a pseudohyperbolic map: proximality of
/// the compound in the adapted wedge metric, the match of its attracting
/// line and invariant hyperplane with the wedge data of the frame, the
/// dominant eigenvalue against the expanding determinant, the exact
/// strength transfer, and the two-sided angle comparison on the supplied
/// d-dimensional subspace pairs.
pub fn check_correspondence(
    ctx: &SpaceContext,
    g: &PseudoHyperbolicMap,
    pairs: &[(Subspace, Subspace)],
) -> Result<CorrespondenceReport> {
    let d = ctx.d();
    let dim = ctx.dim();
    let ext = ext_operator(ctx, g.matrix())?;
    let form_v = ext_form(ctx, &g.frame().nv_form())?;
    let moduli = compound_moduli(&ext)?;
    let leading_moduli = (moduli[0], moduli[1]);
    let det_more = g.block_more().determinant();
    let more_inv = g
        .block_more()
        .clone()
        .try_inverse()
        .ok_or(Error::Singular)?;
    let expanding_inverse_norm = spectral_norm(&more_inv);
    let w_more = wedge_line(g.frame().v_more().basis())?;
    let mut c_basis = DMatrix::<f64>::zeros(dim, d + 1);
    c_basis
        .view_mut((0, 0), (dim, d))
        .copy_from(g.frame().v_less().basis());
    c_basis.set_column(d, g.frame().u_eq());
    let kernel_sub = Subspace::with_form(&form_v, &wedge_kernel(dim, &c_basis, form_v.gram())?)?;
    let (proximal, top_eigenvalue, eigenvalue_vs_det, attracting_angle, repelling_angle, strength_ext) =
        match analyze_proximal(&ext, &form_v) {
            Ok(p) => {
                let vs_dir = p.v_s().basis().column(0).clone_owned();
                let attracting = angle(&form_v, &vs_dir, &w_more, true)?;
                let repelling = subspace_hausdorff_angle(&form_v, p.v_u(), &kernel_sub)?;
                let lam = p.top_eigenvalue();
                let vs_det = (lam.abs() - det_more.abs()).abs() / det_more.abs().max(1e-300);
                (true, lam, vs_det, attracting, repelling, p.strength())
            }
            Err(Error::NotProximal { .. }) => {
                (false, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
            }
            Err(e) => return Err(e),
        };
    let n0 = ctx.form_n0();
    let ext_n0 = ext_form(ctx, &n0)?;
    let mut sandwich = Vec::with_capacity(pairs.len());
    let mut sandwich_ok = true;
    let stretch = (d as f64).sqrt();
    for (a, b) in pairs {
        if a.dim() != d || b.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: if a.dim() != d { a.dim() } else { b.dim() },
            });
        }
        let alpha_ambient = subspace_hausdorff_angle(&n0, a, b)?;
        let wa = wedge_line(a.basis())?;
        let wb = wedge_line(b.basis())?;
        let alpha_wedge = angle(&ext_n0, &wa, &wb, true)?;
        if !(alpha_ambient <= alpha_wedge + 1e-9 && alpha_wedge <= stretch * alpha_ambient + 1e-9) {
            sandwich_ok = false;
        }
        sandwich.push(SandwichRow {
            alpha_ambient,
            alpha_wedge,
        });
    }
    Ok(CorrespondenceReport {
        d,
        proximal,
        leading_moduli,
        top_eigenvalue,
        det_more,
        eigenvalue_vs_det,
        attracting_angle,
        repelling_angle,
        source_strength: g.strength(),
        strength_ext,
        expanding_inverse_norm,
        strength_gap: (strength_ext - expanding_inverse_norm).abs(),
        sandwich,
        sandwich_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mtis::{build_frame, generate_transversal_family, MtisRep};
    use crate::Subspace;
    use std::f64::consts::PI;

    fn ctx(d: usize) -> SpaceContext {
        SpaceContext::standard(d).unwrap()
    }

    fn diag3(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&Vector::from_vec(vec![a, b, c]))
    }

    fn symmetric_map_d1(c: &SpaceContext, g_less: f64) -> PseudoHyperbolicMap {
        let line = |x: f64, z: f64| DMatrix::from_column_slice(3, 1, &[x, 0.0, z]);
        let less =
            MtisRep::from_subspace(c, &Subspace::new(c, &line(-1.0, 1.0)).unwrap()).unwrap();
        let more = MtisRep::from_subspace(c, &Subspace::new(c, &line(1.0, 1.0)).unwrap()).unwrap();
        let frame = build_frame(c, &less, &more).unwrap();
        PseudoHyperbolicMap::new(c, frame, DMatrix::from_element(1, 1, g_less)).unwrap()
    }

    fn built_map_d3(c: &SpaceContext, scale: f64, seed: u64) -> PseudoHyperbolicMap {
        let fam =
            generate_transversal_family(c, 2, &[0.0, PI / 2.0, PI, 3.0 * PI / 2.0]).unwrap();
        let frame = build_frame(c, &fam[0], &fam[1]).unwrap();
        let mut s = SphereSampler::new(seed);
        PseudoHyperbolicMap::new(c, frame, s.orthogonal(3, 3) * scale).unwrap()
    }

    #[test]
    fn indices_enumerate_in_lex_order_with_signs() {
        let one = ExtIndex::enumerate(3, 1);
        assert_eq!(
            one.iter().map(|i| i.subset().to_vec()).collect::<Vec<_>>(),
            vec![vec![1], vec![2], vec![3]]
        );
        assert_eq!(one[0].shuffle_sign(), 1.0);
        assert_eq!(one[1].shuffle_sign(), -1.0);
        assert_eq!(one[2].shuffle_sign(), 1.0);
        let three = ExtIndex::enumerate(7, 3);
        assert_eq!(three.len(), 35);
        assert_eq!(three.len(), binomial(7, 3));
        assert_eq!(three[0].subset(), &[1, 2, 3]);
        assert_eq!(three[34].subset(), &[5, 6, 7]);
        for w in three.windows(2) {
            assert!(w[0] < w[1], "lexicographic order");
        }
        for i in &three {
            assert!(i.subset().windows(2).all(|p| p[0] < p[1]));
            let c = i.complement(7);
            assert_eq!(c.len(), 4);
            let mut all: Vec<usize> = i.subset().iter().chain(c.subset()).cloned().collect();
            all.sort_unstable();
            assert_eq!(all, (1..=7).collect::<Vec<_>>());
        }
        assert_eq!(three[0].shuffle_sign(), 1.0);
    }

    #[test]
    fn first_compound_is_the_map_itself_and_identity_maps_to_identity() {
        let c = ctx(1);
        let mut s = SphereSampler::new(3);
        let g = s.gaussian_matrix(3, 3);
        let ext = ext_operator(&c, &g).unwrap();
        assert!((ext.matrix() - &g).norm() < 1e-14);
        let c3 = ctx(3);
        let ext_id = ext_operator(&c3, &DMatrix::identity(7, 7)).unwrap();
        assert_eq!(ext_id.dim(), 35);
        assert!((ext_id.matrix() - DMatrix::<f64>::identity(35, 35)).norm() < 1e-14);
    }

    #[test]
    fn compound_multiplicativity_and_inverse_at_d3() {
        let c = ctx(3);
        let mut s = SphereSampler::new(11);
        for _ in 0..5 {
            let g = s.gaussian_matrix(7, 7);
            let h = s.gaussian_matrix(7, 7);
            let lhs = ext_operator(&c, &(&g * &h)).unwrap();
            let rhs = ext_operator(&c, &g).unwrap().matrix() * ext_operator(&c, &h).unwrap().matrix();
            let scale = rhs.norm().max(1.0);
            assert!((lhs.matrix() - &rhs).norm() <= 1e-9 * scale);
        }
        let g = s.gaussian_matrix(7, 7) + DMatrix::identity(7, 7) * 3.0;
        let ext = ext_operator(&c, &g).unwrap();
        let prod = ext.matrix() * ext.inverse().unwrap().matrix();
        assert!((prod - DMatrix::<f64>::identity(35, 35)).norm() < 1e-9);
    }

    #[test]
    fn induced_form_is_identity_on_an_orthonormal_basis() {
        let c = ctx(1);
        let n0 = c.form_n0();
        let lifted = ext_form(&c, &n0).unwrap();
        assert!((lifted.gram() - n0.gram()).norm() < 1e-14, "first power keeps the form");
        let c3 = ctx(3);
        let lifted3 = ext_form(&c3, &c3.form_n0()).unwrap();
        assert!((lifted3.gram() - DMatrix::<f64>::identity(35, 35)).norm() < 1e-12);
        assert!(matches!(
            ext_form(&c3, &c3.form_q()),
            Err(Error::NotAMetric(_))
        ));
    }

    #[test]
    fn permutation_sum_determinant_and_wedge_pairings_agree() {
        let c = ctx(3);
        let mut s = SphereSampler::new(21);
        let a = s.gaussian_matrix(7, 7);
        let custom = FormHandle::custom(a.transpose() * &a + DMatrix::identity(7, 7)).unwrap();
        let lifted = ext_form(&c, &custom).unwrap();
        let perms: [([usize; 3], f64); 6] = [
            ([0, 1, 2], 1.0),
            ([1, 2, 0], 1.0),
            ([2, 0, 1], 1.0),
            ([0, 2, 1], -1.0),
            ([2, 1, 0], -1.0),
            ([1, 0, 2], -1.0),
        ];
        for _ in 0..10 {
            let xs = s.gaussian_matrix(7, 3);
            let ys = s.gaussian_matrix(7, 3);
            let pairings = xs.transpose() * custom.gram() * &ys;
            let mut brute = 0.0;
            for (p, sign) in &perms {
                brute += sign * (0..3).map(|i| pairings[(i, p[i])]).product::<f64>();
            }
            let by_det = pairings.determinant();
            assert!((brute - by_det).abs() <= 1e-10 * by_det.abs().max(1.0));
            let wx = wedge_line(&xs).unwrap();
            let wy = wedge_line(&ys).unwrap();
            let by_gram = (wx.transpose() * lifted.gram() * &wy)[(0, 0)];
            assert!((by_gram - by_det).abs() <= 1e-10 * by_det.abs().max(1.0));
        }
    }

    #[test]
    fn wedge_line_hand_values_and_rank_check() {
        let plane = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let w = wedge_line(&plane).unwrap();
        assert_eq!(w.len(), 3);
        assert!((w - Vector::from_vec(vec![1.0, 0.0, 0.0])).norm() < 1e-14);
        let dependent = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        assert!(wedge_line(&dependent).is_err());
    }

    #[test]
    fn diagonal_map_proximal_oracle() {
        let c = ctx(1);
        let f = ext_operator(&c, &diag3(2.0, 1.0, 0.5)).unwrap();
        let form = ext_form(&c, &c.form_n0()).unwrap();
        let p = analyze_proximal(&f, &form).unwrap();
        assert!((p.top_eigenvalue() - 2.0).abs() < 1e-9);
        let axis = Subspace::with_form(
            &form,
            &DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
        )
        .unwrap();
        assert!(subspace_hausdorff_angle(&form, p.v_s(), &axis).unwrap() < 1e-9);
        let rest = Subspace::with_form(
            &form,
            &DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        assert!(subspace_hausdorff_angle(&form, p.v_u(), &rest).unwrap() < 1e-9);
        assert!((p.separation() - FRAC_PI_2).abs() < 1e-9);
        assert!((p.strength() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn tied_moduli_are_rejected_as_not_proximal() {
        let c = ctx(1);
        let (cs, sn) = (0.7_f64.cos(), 0.7_f64.sin());
        let mut rot = DMatrix::<f64>::identity(3, 3);
        rot[(0, 0)] = cs;
        rot[(0, 1)] = -sn;
        rot[(1, 0)] = sn;
        rot[(1, 1)] = cs;
        let f = ext_operator(&c, &rot).unwrap();
        let form = ext_form(&c, &c.form_n0()).unwrap();
        match analyze_proximal(&f, &form) {
            Err(Error::NotProximal { first, second }) => {
                assert!((first - 1.0).abs() < 1e-9);
                assert!((second - 1.0).abs() < 1e-9);
            }
            other => panic!("expected a tied-moduli rejection, got {other:?}"),
        }
        let squashed = ext_operator(&c, &diag3(2.0, 1.0, 1e-16)).unwrap();
        assert!(matches!(
            analyze_proximal(&squashed, &form),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn eigenvalues_of_the_compound_are_products() {
        let c = ctx(3);
        let mut s = SphereSampler::new(31);
        let vals = [0.3, 0.6, 0.9, 1.3, 1.7, 2.1, 2.5];
        let q = s.orthogonal(7, 7);
        let g = &q * DMatrix::from_diagonal(&Vector::from_vec(vals.to_vec())) * q.transpose();
        let ext = ext_operator(&c, &g).unwrap();
        let mut expected: Vec<f64> = ExtIndex::enumerate(7, 3)
            .iter()
            .map(|i| i.subset().iter().map(|&v| vals[v - 1]).product())
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut got: Vec<f64> = ext
            .matrix()
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (e, g) in expected.iter().zip(got.iter()) {
            assert!((e - g).abs() <= 1e-8 * e.abs().max(1.0), "{e} vs {g}");
        }
    }

    #[test]
    fn compound_of_built_map_matches_the_wedge_frame_data() {
        let c = ctx(1);
        let g = symmetric_map_d1(&c, 0.1);
        let report = check_correspondence(&c, &g, &[]).unwrap();
        assert!(report.proximal);
        assert!((report.top_eigenvalue - 10.0).abs() < 1e-9);
        assert!(report.eigenvalue_vs_det < 1e-10);
        assert!(report.attracting_angle < 1e-10);
        assert!(report.repelling_angle < 1e-10);
        assert!((report.strength_ext - 0.1).abs() < 1e-10);
        assert!(report.strength_gap < 1e-10);

        let c3 = ctx(3);
        let g3 = built_map_d3(&c3, 0.05, 41);
        assert!(g3.strength() < 1.0);
        let report3 = check_correspondence(&c3, &g3, &[]).unwrap();
        assert!(report3.proximal);
        assert!(report3.eigenvalue_vs_det < 1e-8);
        assert!(report3.attracting_angle < 1e-8);
        assert!(report3.repelling_angle < 1e-8);
        assert!(report3.strength_gap < 1e-8);
        assert!((report3.expanding_inverse_norm - g3.strength()).abs() < 1e-12);
    }

    #[test]
    fn angle_sandwich_on_random_pairs() {
        for d in [1usize, 3] {
            let c = ctx(d);
            let g = if d == 1 {
                symmetric_map_d1(&c, 0.2)
            } else {
                built_map_d3(&c, 0.1, 57)
            };
            let mut s = SphereSampler::new(70 + d as u64);
            let mut pairs = Vec::new();
            for _ in 0..25 {
                let a = Subspace::new(&c, &s.gaussian_matrix(c.dim(), d)).unwrap();
                let b = Subspace::new(&c, &s.gaussian_matrix(c.dim(), d)).unwrap();
                pairs.push((a, b));
            }
            let report = check_correspondence(&c, &g, &pairs).unwrap();
            assert!(report.sandwich_ok);
            let stretch = (d as f64).sqrt();
            for row in &report.sandwich {
                assert!(row.alpha_ambient <= row.alpha_wedge + 1e-9);
                assert!(row.alpha_wedge <= stretch * row.alpha_ambient + 1e-9);
            }
        }
    }

    #[test]
    fn identity_has_unit_projective_quotients() {
        let c = ctx(1);
        let form = ext_form(&c, &c.form_n0()).unwrap();
        let axis = Subspace::with_form(
            &form,
            &DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
        )
        .unwrap();
        let id = DMatrix::<f64>::identity(3, 3);
        let ball = ProjectiveRegion::Ball {
            center: axis.clone(),
            radius: 0.4,
        };
        let r = lipschitz_on_set(&id, &form, &ball, 2000, 5).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let outside = ProjectiveRegion::OutsideBall {
            center: axis,
            radius: 0.4,
        };
        let r2 = lipschitz_on_set(&id, &form, &outside, 2000, 5).unwrap();
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projective_quotients_match_the_closed_form_on_the_line() {
        // diag(2, 1/2) acts on the projective line by shrinking the slope by
        // a factor 4; the angular derivative at slope tan(t) is
        // (1/4)(1 + tan^2 t) / (1 + tan^2 t / 16), increasing away from the
        // attracting axis, so the supremum over a region sits at its
        // boundary.
        let form = FormHandle::custom(DMatrix::identity(2, 2)).unwrap();
        let m = DMatrix::from_diagonal(&Vector::from_vec(vec![2.0, 0.5]));
        let q_at = |t: f64| {
            let t2 = t.tan().powi(2);
            0.25 * (1.0 + t2) / (1.0 + t2 / 16.0)
        };
        let e1 = Subspace::with_form(&form, &DMatrix::from_column_slice(2, 1, &[1.0, 0.0]))
            .unwrap();
        let e2 = Subspace::with_form(&form, &DMatrix::from_column_slice(2, 1, &[0.0, 1.0]))
            .unwrap();
        let zeta = 1.0;
        let outside = ProjectiveRegion::OutsideBall {
            center: e2,
            radius: zeta,
        };
        let r = lipschitz_on_set(&m, &form, &outside, 20000, 9).unwrap();
        let oracle = q_at(FRAC_PI_2 - zeta);
        assert!(r <= oracle + 1e-9, "sampled {r} vs supremum {oracle}");
        assert!(r >= oracle - 5e-3, "sampled {r} vs supremum {oracle}");
        assert!(r >= 0.25 * (1.0 - 1e-3));
        let ball = ProjectiveRegion::Ball {
            center: e1,
            radius: 0.3,
        };
        let rb = lipschitz_on_set(&m, &form, &ball, 20000, 9).unwrap();
        let oracle_b = q_at(0.3);
        assert!(rb <= oracle_b + 1e-9);
        assert!(rb >= oracle_b - 5e-3);
    }

    #[test]
    fn ball_around_the_attracting_line_sees_the_strength() {
        let c = ctx(1);
        let g = symmetric_map_d1(&c, 0.1);
        let ext = ext_operator(&c, g.matrix()).unwrap();
        let form = ext_form(&c, &g.frame().nv_form()).unwrap();
        let p = analyze_proximal(&ext, &form).unwrap();
        let ball = ProjectiveRegion::Ball {
            center: p.v_s().clone(),
            radius: 0.2,
        };
        let r = lipschitz_on_set(ext.matrix(), &form, &ball, 8000, 13).unwrap();
        assert!(r >= 0.9 * p.strength(), "estimate {r} vs strength {}", p.strength());
        assert!(r <= 1.3 * p.strength(), "estimate {r} vs strength {}", p.strength());
    }

    #[test]
    fn system_audit_includes_self_pairings_and_excludes_inverse_pairs() {
        let c = ctx(1);
        let form = ext_form(&c, &c.form_n0()).unwrap();
        let f = ext_operator(&c, &diag3(2.0, 1.0, 0.5)).unwrap();
        let audit = audit_proximal_system(&[f], &form).unwrap();
        assert_eq!(audit.members.len(), 2);
        assert_eq!(audit.pairwise.len(), 2);
        for pair in &audit.pairwise {
            assert_eq!(pair.from, pair.to, "only self pairings remain");
        }
        assert!((audit.separation - FRAC_PI_2).abs() < 1e-9);
        assert!((audit.strength - 0.5).abs() < 1e-9);
        let text = serde_json::to_string(&audit).unwrap();
        assert!(text.contains("separation"));
    }

    #[test]
    fn schottky_pair_audit_has_positive_margins() {
        let c = ctx(1);
        let fam = generate_transversal_family(&c, 2, &[0.0, PI / 2.0, PI, 3.0 * PI / 2.0]).unwrap();
        let g1 = PseudoHyperbolicMap::new(
            &c,
            build_frame(&c, &fam[2], &fam[0]).unwrap(),
            DMatrix::from_element(1, 1, 0.1),
        )
        .unwrap();
        let g2 = PseudoHyperbolicMap::new(
            &c,
            build_frame(&c, &fam[3], &fam[1]).unwrap(),
            DMatrix::from_element(1, 1, 0.1),
        )
        .unwrap();
        let form = ext_form(&c, &c.form_n0()).unwrap();
        let maps = [
            ext_operator(&c, g1.matrix()).unwrap(),
            ext_operator(&c, g2.matrix()).unwrap(),
        ];
        let audit = audit_proximal_system(&maps, &form).unwrap();
        assert_eq!(audit.members.len(), 4);
        assert_eq!(audit.pairwise.len(), 12, "4 members, 3 partners each");
        assert!(audit.separation > 0.05, "separation {}", audit.separation);
        assert!(audit.strength < 1.0);
    }

    #[test]
    fn system_audit_flags_non_proximal_members_by_name() {
        let c = ctx(1);
        let form = ext_form(&c, &c.form_n0()).unwrap();
        let good = ext_operator(&c, &diag3(2.0, 1.0, 0.5)).unwrap();
        let (cs, sn) = (0.4_f64.cos(), 0.4_f64.sin());
        let mut rot = DMatrix::<f64>::identity(3, 3);
        rot[(0, 0)] = cs;
        rot[(0, 1)] = -sn;
        rot[(1, 0)] = sn;
        rot[(1, 1)] = cs;
        let bad = ext_operator(&c, &rot).unwrap();
        match audit_proximal_system(&[good, bad], &form) {
            Err(Error::InvalidParameter(msg)) => {
                assert!(msg.contains("member 1"), "message names the member: {msg}");
            }
            other => panic!("expected a named rejection, got {other:?}"),
        }
    }
}
