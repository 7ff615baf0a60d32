//! Pseudohyperbolic maps: Q-preserving linear maps with a contracting
//! isotropic invariant subspace, an expanding one, and a one-dimensional
//! neutral fixed line between them.
//!
//! Prescribing the contracting block freely is not possible: Q couples the
//! two isotropic halves through the pairing P = B_less^T Q B_more, and the
//! expanding block is forced to be P^-1 g_less^-T P. The assembled matrix is
//! block diagonal in the adapted frame with blocks (g_less, 1, g_more).
//!
//! The spectral splitting of a raw matrix goes the other way: eigenvalue
//! moduli are classified against a band around 1 (with a guard band that
//! turns near-misses into an inconclusive error instead of a wrong verdict),
//! the contracting/expanding subspaces come from normalized matrix squaring
//! (quadratically sharpened power iteration), and the neutral line is the
//! Q-orthogonal complement of their sum, which sidesteps the underflow that
//! direct iteration suffers on the modulus-one direction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    mat_to_rows, nullspace, rows_to_mat, sigma_min, spectral_norm, SpaceContext, Subspace, Vector,
};
use crate::mtis::{build_frame, Frame, FrameRepr, MtisRep};
use crate::sample::SphereSampler;
use crate::{BAND, BAND_GUARD, RHO_MAX, TOL};

/// A pseudohyperbolic map assembled from a frame and a contracting block.
#[derive(Debug, Clone)]
pub struct PseudoHyperbolicMap {
    frame: Frame,
    /// Contracting block in the canonical basis of the frame's first member.
    g_less: DMatrix<f64>,
    /// Expanding block forced by the duality through Q.
    g_more: DMatrix<f64>,
    matrix: DMatrix<f64>,
    strength: f64,
}

impl PseudoHyperbolicMap {
    /// Assembles the map with contracting block `g_less` on the frame's
    /// first member, identity on the fixed line, and the dual expanding
    /// block on the second member.
    pub fn new(ctx: &SpaceContext, frame: Frame, g_less: DMatrix<f64>) -> Result<Self> {
        let d = frame.d();
        if g_less.nrows() != d || g_less.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: g_less.nrows(),
            });
        }
        let rho = spectral_radius(&g_less)?;
        if rho > RHO_MAX {
            return Err(Error::SpectralRadiusTooLarge {
                rho,
                limit: RHO_MAX,
            });
        }
        let g_less_inv_t = g_less
            .transpose()
            .try_inverse()
            .ok_or(Error::Singular)?;
        let pairing =
            frame.v_less().basis().transpose() * ctx.gram_q() * frame.v_more().basis();
        let pairing_inv = pairing.clone().try_inverse().ok_or(Error::Singular)?;
        let g_more = pairing_inv * g_less_inv_t * pairing;
        let dim = ctx.dim();
        let mut block = DMatrix::<f64>::zeros(dim, dim);
        block.view_mut((0, 0), (d, d)).copy_from(&g_less);
        block[(d, d)] = 1.0;
        block.view_mut((d + 1, d + 1), (d, d)).copy_from(&g_more);
        let adapted = frame.adapted_frame();
        let adapted_inv = adapted
            .clone()
            .try_inverse()
            .ok_or(Error::Singular)?;
        let matrix = adapted * block * adapted_inv;
        let drift = ctx.q_drift(&matrix);
        if drift > TOL {
            return Err(Error::NotPseudoHyperbolic {
                reason: format!("assembled matrix drifts off the form by {drift:.3e}"),
            });
        }
        let strength = strength_of(&g_less, &g_more);
        Ok(Self {
            frame,
            g_less,
            g_more,
            matrix,
            strength,
        })
    }

    /// Rebuilds the map from a raw Q-preserving matrix by splitting its
    /// spectrum and reading the blocks off the invariant subspaces.
    pub fn from_matrix(ctx: &SpaceContext, m: &DMatrix<f64>) -> Result<Self> {
        let split = spectral_split(ctx, m)?;
        let v_less = MtisRep::from_subspace(ctx, split.less())?;
        let v_more = MtisRep::from_subspace(ctx, split.more())?;
        let frame = build_frame(ctx, &v_less, &v_more)?;
        let b = frame.v_less().basis();
        let g_less = b.transpose() * ctx.gram_n0() * (m * b);
        Self::new(ctx, frame, g_less)
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn block_less(&self) -> &DMatrix<f64> {
        &self.g_less
    }

    pub fn block_more(&self) -> &DMatrix<f64> {
        &self.g_more
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Contraction strength: the worse of the contracting block's norm and
    /// the expanding block's inverse norm, in the local geometry.
    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn d(&self) -> usize {
        self.frame.d()
    }

    /// The inverse map: members of the frame exchange roles.
    pub fn inverse(&self, ctx: &SpaceContext) -> Result<Self> {
        let swapped = self.frame.swapped(ctx)?;
        let g_less = self
            .g_more
            .clone()
            .try_inverse()
            .ok_or(Error::Singular)?;
        Self::new(ctx, swapped, g_less)
    }

    pub fn to_repr(&self) -> PseudoMapRepr {
        PseudoMapRepr {
            frame: FrameRepr::from_frame(&self.frame),
            g_less: mat_to_rows(&self.g_less),
        }
    }

    pub fn from_repr(ctx: &SpaceContext, repr: &PseudoMapRepr) -> Result<Self> {
        let frame = repr.frame.build(ctx)?;
        let g_less = rows_to_mat(&repr.g_less)?;
        Self::new(ctx, frame, g_less)
    }
}

/// Serialized form: the two orthogonal maps of the frame plus the
/// contracting block; everything else is derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoMapRepr {
    pub(crate) frame: FrameRepr,
    pub g_less: Vec<Vec<f64>>,
}

fn strength_of(g_less: &DMatrix<f64>, g_more: &DMatrix<f64>) -> f64 {
    let contract = spectral_norm(g_less);
    let expand_floor = sigma_min(g_more);
    contract.max(1.0 / expand_floor)
}

/// Largest eigenvalue modulus.
fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let eig = m.clone().complex_eigenvalues();
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Inverse of a Q-preserving map through the form: G^-1 m^T G.
pub(crate) fn q_inverse(ctx: &SpaceContext, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ginv = ctx
        .gram_q()
        .clone()
        .try_inverse()
        .ok_or(Error::Singular)?;
    Ok(ginv * m.transpose() * ctx.gram_q())
}

/// The three invariant subspaces of a pseudohyperbolic matrix with the
/// eigenvalue moduli that selected them.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    less: Subspace,
    eq: Subspace,
    more: Subspace,
    moduli_less: Vec<f64>,
    moduli_more: Vec<f64>,
    /// Signed eigenvalue on the fixed line (+1 or -1 up to roundoff).
    eq_value: f64,
}

impl SpectralSplit {
    pub fn less(&self) -> &Subspace {
        &self.less
    }

    pub fn eq(&self) -> &Subspace {
        &self.eq
    }

    pub fn more(&self) -> &Subspace {
        &self.more
    }

    pub fn moduli_less(&self) -> &[f64] {
        &self.moduli_less
    }

    pub fn moduli_more(&self) -> &[f64] {
        &self.moduli_more
    }

    pub fn eq_value(&self) -> f64 {
        self.eq_value
    }

    /// Fixed-line direction, oriented to positive last N0 coordinate of the
    /// basis vector as stored (callers wanting wing-aligned signs should go
    /// through a frame).
    pub fn eq_direction(&self) -> Vector {
        self.eq.basis().column(0).clone_owned()
    }
}

/// Dominant invariant subspace of dimension `k`: subspace iteration driven
/// by successive normalized squares of the matrix, so the modulus gap is
/// raised to 2^t after t levels instead of t.
///
/// Re-orthonormalizing the frame at every level keeps the weaker dominant
/// directions alive; squaring stops once the squared matrix itself becomes
/// numerically rank-deficient below `k` (its internal modulus spread also
/// grows doubly exponentially), and a few plain iterations with the original
/// matrix polish the result.
fn dominant_subspace(ctx: &SpaceContext, m: &DMatrix<f64>, k: usize) -> Result<Subspace> {
    let dim = ctx.dim();
    let mut s = SphereSampler::new(0xD0);
    let mut y = s.orthogonal(dim, k);
    let mut b = m / m.norm().max(1e-300);
    for _ in 0..40 {
        let z = &b * &y;
        let qr = z.qr();
        let r = qr.r();
        let mut dmin = f64::INFINITY;
        let mut dmax = 0.0_f64;
        for j in 0..k {
            let v = r[(j, j)].abs();
            dmin = dmin.min(v);
            dmax = dmax.max(v);
        }
        if !(dmin > 1e-10 * dmax) {
            break;
        }
        y = qr.q();
        b = &b * &b;
        let n = b.norm();
        if !n.is_finite() || n == 0.0 {
            break;
        }
        b /= n;
    }
    for _ in 0..8 {
        let z = m * &y;
        y = z.qr().q();
    }
    Subspace::new(ctx, &y)
}

/// Splits a Q-preserving matrix into contracting, neutral, and expanding
/// invariant subspaces, or reports why it is not pseudohyperbolic.
pub fn spectral_split(ctx: &SpaceContext, m: &DMatrix<f64>) -> Result<SpectralSplit> {
    let d = ctx.d();
    let dim = ctx.dim();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: m.nrows(),
        });
    }
    let drift = ctx.q_drift(m);
    if drift > TOL {
        return Err(Error::NotPseudoHyperbolic {
            reason: format!("matrix does not preserve the form (drift {drift:.3e})"),
        });
    }
    let eig = m.clone().complex_eigenvalues();
    let mut n_less = 0usize;
    let mut n_eq = 0usize;
    let mut n_more = 0usize;
    let mut moduli_less = Vec::new();
    let mut moduli_more = Vec::new();
    for z in eig.iter() {
        let modulus = z.norm();
        let dev = (modulus - 1.0).abs();
        if dev <= BAND {
            n_eq += 1;
        } else if dev < BAND_GUARD {
            return Err(Error::Inconclusive { modulus });
        } else if modulus < 1.0 {
            n_less += 1;
            moduli_less.push(modulus);
        } else {
            n_more += 1;
            moduli_more.push(modulus);
        }
    }
    if n_less != d || n_eq != 1 || n_more != d {
        return Err(Error::NotPseudoHyperbolic {
            reason: format!(
                "modulus counts (contracting, neutral, expanding) = ({n_less}, {n_eq}, {n_more}), need ({d}, 1, {d})"
            ),
        });
    }
    moduli_less.sort_by(|a, b| a.partial_cmp(b).unwrap());
    moduli_more.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m_inv = q_inverse(ctx, m)?;
    let more = dominant_subspace(ctx, m, d)?;
    let less = dominant_subspace(ctx, &m_inv, d)?;
    // The neutral line is the Q-orthogonal complement of the sum of the two
    // isotropic halves; direct iteration would lose it to underflow.
    let mut rows = DMatrix::<f64>::zeros(2 * d, dim);
    rows.view_mut((0, 0), (d, dim))
        .copy_from(&(less.basis().transpose() * ctx.gram_q()));
    rows.view_mut((d, 0), (d, dim))
        .copy_from(&(more.basis().transpose() * ctx.gram_q()));
    let line = nullspace(&rows, ctx.gram_n0())?;
    if line.ncols() != 1 {
        return Err(Error::NotPseudoHyperbolic {
            reason: "neutral complement is not a line".into(),
        });
    }
    let eq = Subspace::from_orthonormal(ctx, line)?;
    for (name, sub) in [("contracting", &less), ("neutral", &eq), ("expanding", &more)] {
        let image = m * sub.basis();
        let coeffs = sub.basis().transpose() * ctx.gram_n0() * &image;
        let residual = (&image - sub.basis() * coeffs).norm() / image.norm().max(1e-300);
        if residual > 1e-6 {
            return Err(Error::NoConvergence {
                iterations: 60 + name.len(),
            });
        }
    }
    let u = eq.basis().column(0).clone_owned();
    let mu = (m * &u).dot(&(ctx.gram_n0() * &u));
    Ok(SpectralSplit {
        less,
        eq,
        more,
        moduli_less,
        moduli_more,
        eq_value: mu,
    })
}

/// Whether the matrix is pseudohyperbolic; inconclusive moduli and form
/// violations surface as errors rather than a false verdict.
pub fn is_pseudohyperbolic(ctx: &SpaceContext, m: &DMatrix<f64>) -> Result<bool> {
    match spectral_split(ctx, m) {
        Ok(_) => Ok(true),
        Err(Error::NotPseudoHyperbolic { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}
