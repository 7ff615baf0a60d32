//! Maximal totally isotropic subspaces (MTIS) of the form Q, their
//! parametrization by orthogonal maps T -> S, wings, and frames.
//!
//! Every d-dimensional isotropic subspace V transversal to S is the graph
//! {t + f(t) : t in T} of a unique orthogonal map f: T -> S, and every
//! orthogonal f arises this way. The stored canonical basis of V has columns
//! (t_j + f t_j)/sqrt(2), which are N0-orthonormal.
//!
//! A wing is the half-space V + R>=0 e inside the Q-orthogonal complement of
//! V, with the apex side fixed by orientations: a direct basis of V (one that
//! projects to a direct basis of T) followed by e must project to a direct
//! basis of S. For odd d the wings of the two members of a frame meet only at
//! the origin; for even d they always share a half-line, and the check below
//! returns a witness direction instead of a separation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cone::{cone_min_angle, ConvexCone};
use crate::error::{Error, Result};
use crate::geometry::{
    mat_to_rows, nullspace, rows_to_mat, FormHandle, SpaceContext, Subspace, Vector,
};
use crate::TOL;

/// An MTIS represented both by its orthogonal map and by its canonical
/// ambient basis.
#[derive(Debug, Clone)]
pub struct MtisRep {
    /// Orthogonal map T -> S: (d+1) x d, columns = S-coordinates of the
    /// images of the T basis vectors.
    map: DMatrix<f64>,
    /// Canonical N0-orthonormal basis (t_j + f t_j)/sqrt(2), ambient columns.
    subspace: Subspace,
}

impl MtisRep {
    /// Builds the MTIS attached to an orthogonal map f: T -> S.
    pub fn from_map(ctx: &SpaceContext, f: &DMatrix<f64>) -> Result<Self> {
        let d = ctx.d();
        if f.nrows() != d + 1 || f.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d + 1,
                got: f.nrows(),
            });
        }
        let dev = (f.transpose() * f - DMatrix::identity(d, d)).norm();
        if dev > TOL {
            return Err(Error::NotOrthogonal { deviation: dev });
        }
        let mut cols: Vec<Vector> = Vec::with_capacity(d);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for j in 0..d {
            let t_j = ctx.basis_t().column(j).clone_owned();
            let s_img = ctx.from_s_coords(&f.column(j).clone_owned());
            cols.push((t_j + s_img) * inv_sqrt2);
        }
        let basis = DMatrix::from_columns(&cols);
        let subspace = Subspace::from_orthonormal(ctx, basis)?;
        Ok(Self {
            map: f.clone(),
            subspace,
        })
    }

    /// Recovers the orthogonal map of an isotropic subspace: the composition
    /// of the S-projection with the inverse of the T-projection.
    pub fn from_subspace(ctx: &SpaceContext, v: &Subspace) -> Result<Self> {
        let d = ctx.d();
        if v.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.dim(),
            });
        }
        let iso = v.basis().transpose() * ctx.gram_q() * v.basis();
        let residual = iso.norm();
        if residual > TOL {
            return Err(Error::NotIsotropic { residual });
        }
        let c_t = ctx.basis_t().transpose() * ctx.gram_n0() * v.basis();
        let c_s = ctx.basis_s().transpose() * ctx.gram_n0() * v.basis();
        let c_t_inv = c_t.try_inverse().ok_or(Error::NotTransversal { margin: 0.0 })?;
        let f = c_s * c_t_inv;
        let dev = (f.transpose() * &f - DMatrix::identity(d, d)).norm();
        if dev > 1e-6 {
            return Err(Error::NotOrthogonal { deviation: dev });
        }
        // Re-orthogonalize mild drift through the polar factor (Newton
        // iteration; quadratic from deviations below 1e-6), then store the
        // canonical basis derived from the map.
        let mut f_polar = f;
        for _ in 0..3 {
            let e = DMatrix::<f64>::identity(d, d) * 3.0 - f_polar.transpose() * &f_polar;
            f_polar = (&f_polar * e) * 0.5;
        }
        Self::from_map(ctx, &f_polar)
    }

    /// The orthogonal map T -> S.
    pub fn map(&self) -> &DMatrix<f64> {
        &self.map
    }

    /// The subspace with its canonical N0-orthonormal basis.
    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        self.subspace.basis()
    }

    pub fn d(&self) -> usize {
        self.map.ncols()
    }
}

/// Smallest singular value of the difference of the two orthogonal maps:
/// positive exactly when the MTIS'es are transversal.
pub fn transversality_margin(a: &MtisRep, b: &MtisRep) -> Result<f64> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch {
            expected: a.d(),
            got: b.d(),
        });
    }
    let diff = a.map() - b.map();
    Ok(crate::geometry::sigma_min(&diff))
}

/// Transversality verdict with its margin.
pub fn is_transversal(a: &MtisRep, b: &MtisRep) -> Result<(bool, f64)> {
    let margin = transversality_margin(a, b)?;
    Ok((margin > TOL, margin))
}

/// 2n pairwise transversal MTIS'es from distinct rotation angles.
///
/// The angles drive block rotations of a fixed even-dimensional subspace E of
/// S containing the image of the coordinate inclusion T -> S; distinct angles
/// modulo 2 pi give pairwise injective differences, hence transversal graphs.
pub fn generate_transversal_family(
    ctx: &SpaceContext,
    n: usize,
    thetas: &[f64],
) -> Result<Vec<MtisRep>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if thetas.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: thetas.len(),
        });
    }
    let tau = 2.0 * std::f64::consts::PI;
    for i in 0..thetas.len() {
        for j in (i + 1)..thetas.len() {
            let diff = (thetas[i] - thetas[j]).rem_euclid(tau);
            if diff.min(tau - diff) < 1e-9 {
                return Err(Error::RepeatedAngle { i, j });
            }
        }
    }
    let d = ctx.d();
    // Rotation blocks act on an even number r of S-coordinates, r = d+1 for
    // odd d and r = d for even d; remaining coordinates stay fixed.
    let r = if d % 2 == 1 { d + 1 } else { d };
    let mut out = Vec::with_capacity(2 * n);
    for &theta in thetas {
        let (c, s) = (theta.cos(), theta.sin());
        let mut g = DMatrix::<f64>::identity(d + 1, d + 1);
        for b in 0..r / 2 {
            let (i0, i1) = (2 * b, 2 * b + 1);
            g[(i0, i0)] = c;
            g[(i0, i1)] = -s;
            g[(i1, i0)] = s;
            g[(i1, i1)] = c;
        }
        let f0 = DMatrix::from_fn(d + 1, d, |i, j| if i == j { 1.0 } else { 0.0 });
        let f = g * f0;
        out.push(MtisRep::from_map(ctx, &f)?);
    }
    for i in 0..out.len() {
        for j in (i + 1)..out.len() {
            let (ok, margin) = is_transversal(&out[i], &out[j])?;
            if !ok {
                return Err(Error::NotTransversal { margin });
            }
        }
    }
    Ok(out)
}

/// The positive wing of an MTIS: the half of its Q-orthogonal complement on
/// the apex side singled out by the orientation rule.
#[derive(Debug, Clone)]
pub struct Wing {
    mtis: MtisRep,
    /// N0-unit apex direction, N0-orthogonal to the MTIS.
    apex: Vector,
    /// The wing as a convex cone in the N0 metric.
    cone: ConvexCone,
}

impl Wing {
    pub fn mtis(&self) -> &MtisRep {
        &self.mtis
    }

    pub fn apex(&self) -> &Vector {
        &self.apex
    }

    pub fn cone(&self) -> &ConvexCone {
        &self.cone
    }

    /// Same wing as a cone under a different positive form.
    pub fn cone_under(&self, gram: &DMatrix<f64>) -> Result<ConvexCone> {
        ConvexCone::new(gram, self.mtis.basis(), Some(&self.apex))
    }

    /// Membership of the closed wing up to the global tolerance.
    pub fn contains(&self, x: &Vector) -> bool {
        self.cone.contains(x, TOL)
    }
}

/// Computes the positive wing of an MTIS under the context orientations.
pub fn positive_wing(ctx: &SpaceContext, m: &MtisRep) -> Result<Wing> {
    let d = ctx.d();
    let perp = ctx.q_orthogonal_complement(m.subspace())?;
    // Apex candidate: the direction of the complement that is N0-orthogonal
    // to V. Project V out of the complement basis and keep the longest
    // residual for numerical headroom.
    let b_v = m.basis();
    let proj_v = b_v * b_v.transpose() * ctx.gram_n0();
    let mut best: Option<Vector> = None;
    let mut best_norm = 0.0;
    for j in 0..perp.basis().ncols() {
        let col = perp.basis().column(j).clone_owned();
        let res = &col - &proj_v * &col;
        let n = res.norm();
        if n > best_norm {
            best_norm = n;
            best = Some(res);
        }
    }
    let mut apex = best.ok_or_else(|| Error::InvalidParameter("degenerate complement".into()))?;
    let n0 = ctx.form_n0();
    apex /= n0.norm(&apex)?;
    // Orientation: with any basis (v_1..v_d) of V, the sign of
    // det_T(pi_T v's) * det_S(pi_S v's, pi_S e) is basis-independent; the
    // apex must make it positive.
    let mut t_mat = DMatrix::<f64>::zeros(d, d);
    let mut s_mat = DMatrix::<f64>::zeros(d + 1, d + 1);
    for j in 0..d {
        let col = b_v.column(j).clone_owned();
        t_mat.set_column(j, &ctx.t_coords(&col));
        s_mat.set_column(j, &ctx.s_coords(&col));
    }
    s_mat.set_column(d, &ctx.s_coords(&apex));
    let det_t = t_mat.determinant() * ctx.orientation_t();
    let det_s = s_mat.determinant() * ctx.orientation_s();
    let sign = det_t * det_s;
    if sign.abs() < 1e-14 {
        return Err(Error::InvalidParameter(
            "orientation rule is degenerate for this subspace".into(),
        ));
    }
    if sign < 0.0 {
        apex = -apex;
    }
    let cone = ConvexCone::new(ctx.gram_n0(), b_v, Some(&apex))?;
    Ok(Wing {
        mtis: m.clone(),
        apex,
        cone,
    })
}

/// Verdict of the wing-intersection check for a transversal pair.
#[derive(Debug, Clone)]
pub struct WingsVerdict {
    /// True when the wings meet only at the origin.
    pub disjoint: bool,
    /// A common direction when they intersect (even d).
    pub witness: Option<Vector>,
    /// Angular separation of the wings when disjoint (sampled/optimized).
    pub separation: f64,
}

/// Checks whether the positive wings of two transversal MTIS'es intersect
/// beyond the origin. For odd d they never do; for even d they always share
/// the half-line along the common complement direction, which is returned as
/// a witness.
pub fn wings_intersection_check(ctx: &SpaceContext, a: &MtisRep, b: &MtisRep) -> Result<WingsVerdict> {
    let (ok, margin) = is_transversal(a, b)?;
    if !ok {
        return Err(Error::NotTransversal { margin });
    }
    let wa = positive_wing(ctx, a)?;
    let wb = positive_wing(ctx, b)?;
    // The intersection of the two Q-orthogonal complements is a line; each
    // wing contains exactly one of its two directions.
    let rows_a = a.basis().transpose() * ctx.gram_q();
    let rows_b = b.basis().transpose() * ctx.gram_q();
    let mut rows = DMatrix::<f64>::zeros(2 * ctx.d(), ctx.dim());
    rows.view_mut((0, 0), (ctx.d(), ctx.dim())).copy_from(&rows_a);
    rows.view_mut((ctx.d(), 0), (ctx.d(), ctx.dim()))
        .copy_from(&rows_b);
    let line = nullspace(&rows, ctx.gram_n0())?;
    if line.ncols() != 1 {
        return Err(Error::InvalidParameter(
            "common complement is not a line".into(),
        ));
    }
    let u = line.column(0).clone_owned();
    let side = |w: &Wing| -> Result<f64> {
        if w.contains(&u) {
            Ok(1.0)
        } else if w.contains(&(-&u)) {
            Ok(-1.0)
        } else {
            Err(Error::InvalidParameter(
                "complement direction escapes both wing sides".into(),
            ))
        }
    };
    let sa = side(&wa)?;
    let sb = side(&wb)?;
    if sa == sb {
        let witness = &u * sa;
        return Ok(WingsVerdict {
            disjoint: false,
            witness: Some(witness),
            separation: 0.0,
        });
    }
    let dist = cone_min_angle(wa.cone(), wb.cone(), 0xC0FFEE)?;
    Ok(WingsVerdict {
        disjoint: dist.angle > TOL,
        witness: None,
        separation: dist.angle,
    })
}

/// A frame: an ordered transversal pair of MTIS'es with all derived data.
#[derive(Debug, Clone)]
pub struct Frame {
    v_less: MtisRep,
    v_more: MtisRep,
    /// Q-unit direction spanning the common Q-orthogonal complement line,
    /// pointing into the wing of `v_more`.
    e_eq: Vector,
    /// Same direction, N0-unit.
    u_eq: Vector,
    wing_less: Wing,
    wing_more: Wing,
    /// Columns (B_less, u_eq, B_more): orthonormal frame of the local form.
    adapted: DMatrix<f64>,
    adapted_inv: DMatrix<f64>,
    nv_gram: DMatrix<f64>,
    lipschitz: f64,
    separation: f64,
}

impl Frame {
    pub fn v_less(&self) -> &MtisRep {
        &self.v_less
    }

    pub fn v_more(&self) -> &MtisRep {
        &self.v_more
    }

    /// Q-unit fixed direction, on the positive-wing side of `v_more`.
    pub fn e_eq(&self) -> &Vector {
        &self.e_eq
    }

    /// N0-unit multiple of `e_eq`.
    pub fn u_eq(&self) -> &Vector {
        &self.u_eq
    }

    pub fn wing_less(&self) -> &Wing {
        &self.wing_less
    }

    pub fn wing_more(&self) -> &Wing {
        &self.wing_more
    }

    pub fn d(&self) -> usize {
        self.v_less.d()
    }

    /// The local Euclidean form: coincides with N0 on each of the three
    /// components and makes them mutually orthogonal.
    pub fn nv_form(&self) -> FormHandle {
        FormHandle::local(self.nv_gram.clone())
    }

    pub fn nv_gram(&self) -> &DMatrix<f64> {
        &self.nv_gram
    }

    /// Adapted orthonormal frame (columns: basis of V_less, u_eq, basis of
    /// V_more) of the local form.
    pub fn adapted_frame(&self) -> &DMatrix<f64> {
        &self.adapted
    }

    /// Local coordinates (less block, eq coordinate, more block) of a vector.
    pub fn nv_coords(&self, x: &Vector) -> (Vector, f64, Vector) {
        let d = self.d();
        let c = &self.adapted_inv * x;
        let less = c.rows(0, d).clone_owned();
        let eq = c[d];
        let more = c.rows(d + 1, d).clone_owned();
        (less, eq, more)
    }

    /// Norm-equivalence constant between N0 and the local form.
    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz
    }

    /// Angular separation of the two wings in the ambient Euclidean form.
    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// The frame with the two members exchanged; the fixed direction flips.
    pub fn swapped(&self, ctx: &SpaceContext) -> Result<Frame> {
        build_frame(ctx, &self.v_more, &self.v_less)
    }
}

/// Builds the frame over an ordered transversal pair, deriving the fixed
/// line, its sign, the wings, the local form, and the separation.
pub fn build_frame(ctx: &SpaceContext, v_less: &MtisRep, v_more: &MtisRep) -> Result<Frame> {
    let d = ctx.d();
    if d % 2 == 0 {
        return Err(Error::EvenDimension(d));
    }
    let (ok, margin) = is_transversal(v_less, v_more)?;
    if !ok {
        return Err(Error::NotTransversal { margin });
    }
    let wing_less = positive_wing(ctx, v_less)?;
    let wing_more = positive_wing(ctx, v_more)?;
    let rows_a = v_less.basis().transpose() * ctx.gram_q();
    let rows_b = v_more.basis().transpose() * ctx.gram_q();
    let mut rows = DMatrix::<f64>::zeros(2 * d, ctx.dim());
    rows.view_mut((0, 0), (d, ctx.dim())).copy_from(&rows_a);
    rows.view_mut((d, 0), (d, ctx.dim())).copy_from(&rows_b);
    let line = nullspace(&rows, ctx.gram_n0())?;
    if line.ncols() != 1 {
        return Err(Error::InvalidParameter(
            "fixed-line computation found dimension != 1".into(),
        ));
    }
    let mut u_eq = line.column(0).clone_owned();
    // Sign: the fixed direction points into the positive wing of v_more.
    if wing_more.contains(&u_eq) {
        // keep
    } else if wing_more.contains(&(-&u_eq)) {
        u_eq = -u_eq;
    } else {
        return Err(Error::InvalidParameter(
            "fixed direction escapes both sides of the expanding wing".into(),
        ));
    }
    if !wing_less.contains(&(-&u_eq)) {
        return Err(Error::InvalidParameter(
            "wings are not opposed along the fixed line; is d odd?".into(),
        ));
    }
    let q = ctx.form_q();
    let q_val = q.quad(&u_eq)?;
    if q_val <= 0.0 {
        return Err(Error::InvalidParameter(
            "fixed line is not positive for the invariant form".into(),
        ));
    }
    let e_eq = &u_eq / q_val.sqrt();
    // Adapted frame and the local form's Gram matrix.
    let mut adapted = DMatrix::<f64>::zeros(ctx.dim(), ctx.dim());
    adapted
        .view_mut((0, 0), (ctx.dim(), d))
        .copy_from(v_less.basis());
    adapted.set_column(d, &u_eq);
    adapted
        .view_mut((0, d + 1), (ctx.dim(), d))
        .copy_from(v_more.basis());
    let adapted_inv = adapted.clone().try_inverse().ok_or(Error::Singular)?;
    let nv_gram = adapted_inv.transpose() * &adapted_inv;
    let lipschitz = crate::geometry::lipschitz_between(ctx.gram_n0(), &nv_gram)?;
    let dist = cone_min_angle(wing_less.cone(), wing_more.cone(), 0xC0FFEE)?;
    Ok(Frame {
        v_less: v_less.clone(),
        v_more: v_more.clone(),
        e_eq,
        u_eq,
        wing_less,
        wing_more,
        adapted,
        adapted_inv,
        nv_gram,
        lipschitz,
        separation: dist.angle,
    })
}

/// Angular separation of the frame's wings under the ambient Euclidean form.
pub fn frame_separation(frame: &Frame) -> f64 {
    frame.separation()
}

/// Separation of the frame's wings measured in its own local form; equal to
/// pi/2 by construction, kept as a consistency probe.
pub fn frame_separation_local(frame: &Frame) -> Result<f64> {
    let wl = frame.wing_less().cone_under(frame.nv_gram())?;
    let wm = frame.wing_more().cone_under(frame.nv_gram())?;
    Ok(cone_min_angle(&wl, &wm, 0xC0FFEE)?.angle)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct FrameRepr {
    pub f_less: Vec<Vec<f64>>,
    pub f_more: Vec<Vec<f64>>,
}

impl FrameRepr {
    pub(crate) fn from_frame(frame: &Frame) -> Self {
        Self {
            f_less: mat_to_rows(frame.v_less().map()),
            f_more: mat_to_rows(frame.v_more().map()),
        }
    }

    pub(crate) fn build(&self, ctx: &SpaceContext) -> Result<Frame> {
        let fl = rows_to_mat(&self.f_less)?;
        let fm = rows_to_mat(&self.f_more)?;
        build_frame(
            ctx,
            &MtisRep::from_map(ctx, &fl)?,
            &MtisRep::from_map(ctx, &fm)?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::subspace_hausdorff_angle;
    use crate::sample::SphereSampler;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn ctx(d: usize) -> SpaceContext {
        SpaceContext::standard(d).unwrap()
    }

    fn line3(x: f64, y: f64, z: f64) -> DMatrix<f64> {
        DMatrix::from_column_slice(3, 1, &[x, y, z])
    }

    #[test]
    fn map_to_subspace_hand_examples() {
        let c = ctx(1);
        // f(e3) = e1 gives span(1, 0, 1).
        let f = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let m = MtisRep::from_map(&c, &f).unwrap();
        let expect = Subspace::new(&c, &line3(1.0, 0.0, 1.0)).unwrap();
        assert!(subspace_hausdorff_angle(&c.form_n0(), m.subspace(), &expect).unwrap() < 1e-12);
        // Identity-like inclusion at d=3.
        let c3 = ctx(3);
        let f0 = DMatrix::from_fn(4, 3, |i, j| if i == j { 1.0 } else { 0.0 });
        let m3 = MtisRep::from_map(&c3, &f0).unwrap();
        let q = m3.basis().transpose() * c3.gram_q() * m3.basis();
        assert!(q.norm() < 1e-12);
    }

    #[test]
    fn subspace_to_map_hand_example() {
        let c = ctx(1);
        let v = Subspace::new(&c, &line3(-1.0, 0.0, 1.0)).unwrap();
        let m = MtisRep::from_subspace(&c, &v).unwrap();
        let expect = DMatrix::from_column_slice(2, 1, &[-1.0, 0.0]);
        assert!((m.map() - expect).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_isotropic_and_non_orthogonal() {
        let c = ctx(1);
        let bad = Subspace::new(&c, &line3(1.0, 0.0, 0.0)).unwrap();
        assert!(matches!(
            MtisRep::from_subspace(&c, &bad),
            Err(Error::NotIsotropic { .. })
        ));
        let f = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            MtisRep::from_map(&c, &f),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn bijection_round_trips_randomly() {
        for d in [1usize, 3] {
            let c = ctx(d);
            let mut s = SphereSampler::new(31 + d as u64);
            for _ in 0..100 {
                let f = s.orthogonal(d + 1, d);
                let m = MtisRep::from_map(&c, &f).unwrap();
                let back = MtisRep::from_subspace(&c, m.subspace()).unwrap();
                assert!((back.map() - &f).norm() <= 1e-10);
                let m2 = MtisRep::from_subspace(&c, back.subspace()).unwrap();
                assert!(
                    subspace_hausdorff_angle(&c.form_n0(), m2.subspace(), m.subspace()).unwrap()
                        <= 1e-10
                );
            }
        }
    }

    #[test]
    fn transversality_margin_for_known_pairs() {
        let c = ctx(1);
        let fam = generate_transversal_family(&c, 1, &[0.0, PI]).unwrap();
        let (ok, margin) = is_transversal(&fam[0], &fam[1]).unwrap();
        assert!(ok);
        // Maps are f0 and -f0: difference 2 f0 has smallest singular value 2.
        assert!((margin - 2.0).abs() < 1e-12);
        let (same, zero_margin) = is_transversal(&fam[0], &fam[0]).unwrap();
        assert!(!same);
        assert!(zero_margin.abs() < 1e-15);
    }

    #[test]
    fn family_matches_hand_lines_at_d1() {
        let c = ctx(1);
        let fam =
            generate_transversal_family(&c, 2, &[0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]).unwrap();
        let expected = [
            line3(1.0, 0.0, 1.0),
            line3(0.0, 1.0, 1.0),
            line3(-1.0, 0.0, 1.0),
            line3(0.0, -1.0, 1.0),
        ];
        for (m, e) in fam.iter().zip(expected.iter()) {
            let sub = Subspace::new(&c, e).unwrap();
            assert!(subspace_hausdorff_angle(&c.form_n0(), m.subspace(), &sub).unwrap() < 1e-12);
        }
    }

    #[test]
    fn family_rejects_repeats_and_accepts_d3() {
        let c = ctx(1);
        assert!(matches!(
            generate_transversal_family(&c, 1, &[0.3, 0.3 + 2.0 * PI]),
            Err(Error::RepeatedAngle { .. })
        ));
        let c3 = ctx(3);
        let fam =
            generate_transversal_family(&c3, 2, &[0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]).unwrap();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let (ok, margin) = is_transversal(&fam[i], &fam[j]).unwrap();
                assert!(ok, "pair ({i},{j}) margin {margin}");
            }
        }
    }

    #[test]
    fn wing_apex_signs_at_d1() {
        let c = ctx(1);
        let plus = MtisRep::from_subspace(&c, &Subspace::new(&c, &line3(1.0, 0.0, 1.0)).unwrap())
            .unwrap();
        let w_plus = positive_wing(&c, &plus).unwrap();
        let e2 = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        assert!((w_plus.apex() - &e2).norm() < 1e-12);
        let minus = MtisRep::from_subspace(&c, &Subspace::new(&c, &line3(-1.0, 0.0, 1.0)).unwrap())
            .unwrap();
        let w_minus = positive_wing(&c, &minus).unwrap();
        assert!((w_minus.apex() + &e2).norm() < 1e-12);
        // Flipping the S orientation flips both apexes.
        let c_flip = ctx(1).with_orientations(-1.0, 1.0).unwrap();
        let w_flip = positive_wing(&c_flip, &plus).unwrap();
        assert!((w_flip.apex() + &e2).norm() < 1e-12);
    }

    #[test]
    fn wing_is_equivariant_under_the_identity_component() {
        for d in [1usize, 3] {
            let c = ctx(d);
            let dim = c.dim();
            let mut s = SphereSampler::new(91);
            for trial in 0..10 {
                let f = s.orthogonal(d + 1, d);
                let m = MtisRep::from_map(&c, &f).unwrap();
                let w = positive_wing(&c, &m).unwrap();
                // h = exp(G^-1 K), K skew, lies in the identity component of
                // the orthogonal group of Q.
                let k_raw = s.gaussian_matrix(dim, dim) * 0.15;
                let k = &k_raw - k_raw.transpose();
                let ginv = c.gram_q().clone().try_inverse().unwrap();
                let h = (ginv * k).exp();
                assert!(c.q_drift(&h) < 1e-10, "trial {trial}: h must preserve Q");
                let hv = Subspace::new(&c, &(&h * m.basis())).unwrap();
                let hm = MtisRep::from_subspace(&c, &hv).unwrap();
                let hw = positive_wing(&c, &hm).unwrap();
                // The image of the apex must land strictly inside the image
                // wing's positive side.
                let mapped = &h * w.apex();
                let (_, coeff, residual) = hw.cone().decompose(&mapped);
                assert!(residual < 1e-8, "apex image stays in the complement");
                assert!(coeff > 1e-8, "apex image keeps the positive side");
            }
        }
    }

    #[test]
    fn wings_disjoint_for_odd_d_and_crossing_for_even() {
        for d in [1usize, 3] {
            let c = ctx(d);
            let mut s = SphereSampler::new(7 + d as u64);
            for _ in 0..8 {
                let a = MtisRep::from_map(&c, &s.orthogonal(d + 1, d)).unwrap();
                let b = MtisRep::from_map(&c, &s.orthogonal(d + 1, d)).unwrap();
                if transversality_margin(&a, &b).unwrap() < 0.2 {
                    continue;
                }
                let v = wings_intersection_check(&c, &a, &b).unwrap();
                assert!(v.disjoint, "odd d wings must be disjoint");
                assert!(v.separation > 0.0);
            }
        }
        let c2 = ctx(2);
        let fam = generate_transversal_family(&c2, 1, &[0.0, PI]).unwrap();
        let v = wings_intersection_check(&c2, &fam[0], &fam[1]).unwrap();
        assert!(!v.disjoint);
        let w = v.witness.expect("even d must produce a witness");
        let wa = positive_wing(&c2, &fam[0]).unwrap();
        let wb = positive_wing(&c2, &fam[1]).unwrap();
        let (_, ca, ra) = wa.cone().decompose(&w);
        let (_, cb, rb) = wb.cone().decompose(&w);
        assert!(ra <= 1e-9 && rb <= 1e-9, "witness in both complements");
        assert!(ca >= -1e-9 && cb >= -1e-9, "witness on both positive sides");
    }

    #[test]
    fn frame_build_hand_example() {
        let c = ctx(1);
        let less = MtisRep::from_subspace(&c, &Subspace::new(&c, &line3(-1.0, 0.0, 1.0)).unwrap())
            .unwrap();
        let more = MtisRep::from_subspace(&c, &Subspace::new(&c, &line3(1.0, 0.0, 1.0)).unwrap())
            .unwrap();
        let f = build_frame(&c, &less, &more).unwrap();
        let e2 = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        assert!((f.e_eq() - &e2).norm() < 1e-12);
        assert!((c.form_q().quad(f.e_eq()).unwrap() - 1.0).abs() < 1e-12);
        // Symmetric frame: wings at right angles, local form equal to N0.
        assert!((f.separation() - FRAC_PI_2).abs() < 1e-9);
        assert!((f.lipschitz_constant() - 1.0).abs() < 1e-9);
        assert!((f.nv_gram() - c.gram_n0()).norm() < 1e-10);
        // Swapping the members flips the fixed direction.
        let swapped = f.swapped(&c).unwrap();
        assert!((swapped.e_eq() + &e2).norm() < 1e-12);
    }

    #[test]
    fn frame_rejects_even_d_and_non_transversal() {
        let c2 = ctx(2);
        let fam = generate_transversal_family(&c2, 1, &[0.0, PI]).unwrap();
        assert!(matches!(
            build_frame(&c2, &fam[0], &fam[1]),
            Err(Error::EvenDimension(2))
        ));
        let c = ctx(1);
        let m = MtisRep::from_subspace(&c, &Subspace::new(&c, &line3(1.0, 0.0, 1.0)).unwrap())
            .unwrap();
        assert!(matches!(
            build_frame(&c, &m, &m),
            Err(Error::NotTransversal { .. })
        ));
    }

    #[test]
    fn local_separation_is_right_angle_even_for_sheared_frames() {
        let c = ctx(1);
        let mut s = SphereSampler::new(1234);
        let mut seen_nontrivial = false;
        for _ in 0..12 {
            let a = MtisRep::from_map(&c, &s.orthogonal(2, 1)).unwrap();
            let b = MtisRep::from_map(&c, &s.orthogonal(2, 1)).unwrap();
            if transversality_margin(&a, &b).unwrap() < 0.3 {
                continue;
            }
            let f = build_frame(&c, &a, &b).unwrap();
            let local = frame_separation_local(&f).unwrap();
            assert!(
                (local - FRAC_PI_2).abs() < 1e-8,
                "local separation {local} should be pi/2"
            );
            if f.lipschitz_constant() > 1.0 + 1e-6 {
                seen_nontrivial = true;
                // Ambient separation degrades at most like the square of the
                // equivalence constant.
                let c2 = f.lipschitz_constant().powi(2);
                assert!(f.separation() >= local / c2 - 1e-9);
                assert!(f.separation() <= local * c2 + 1e-9);
            }
        }
        assert!(seen_nontrivial, "sampling should hit sheared frames");
    }

    #[test]
    fn sheared_frames_lose_separation_monotonically() {
        // Rotating one member of the symmetric frame toward the other shrinks
        // the wing separation.
        let c = ctx(1);
        let less = MtisRep::from_subspace(&c, &Subspace::new(&c, &line3(-1.0, 0.0, 1.0)).unwrap())
            .unwrap();
        let mut prev = f64::INFINITY;
        // phi = 0 is the antipode of `less`; approaching pi closes the gap.
        for phi in [0.0_f64, 0.8, 1.6, 2.4] {
            let f = DMatrix::from_column_slice(2, 1, &[phi.cos(), phi.sin()]);
            let more_rot = MtisRep::from_map(&c, &f).unwrap();
            let fr = build_frame(&c, &less, &more_rot).unwrap();
            assert!(fr.separation() < prev + 1e-12);
            prev = fr.separation();
        }
    }

    #[test]
    fn lipschitz_constant_matches_sampled_oracle_on_sheared_frame() {
        let c = ctx(1);
        let less = MtisRep::from_subspace(&c, &Subspace::new(&c, &line3(-1.0, 0.0, 1.0)).unwrap())
            .unwrap();
        let phi: f64 = 2.2;
        let more = MtisRep::from_map(&c, &DMatrix::from_column_slice(2, 1, &[phi.cos(), phi.sin()]))
            .unwrap();
        let fr = build_frame(&c, &less, &more).unwrap();
        let cv = fr.lipschitz_constant();
        assert!(cv > 1.0);
        let n0 = c.form_n0();
        let nv = fr.nv_form();
        let mut s = SphereSampler::new(8);
        let mut hi: f64 = 0.0;
        for _ in 0..30000 {
            let x = s.unit(3);
            let a = n0.norm(&x).unwrap();
            let b = nv.norm(&x).unwrap();
            hi = hi.max(a / b).max(b / a);
        }
        assert!((cv - hi).abs() < 1e-3, "constant {cv} vs sampled {hi}");
    }

    #[test]
    fn local_and_ambient_angles_are_cv2_equivalent() {
        let c = ctx(1);
        let less = MtisRep::from_subspace(&c, &Subspace::new(&c, &line3(-1.0, 0.0, 1.0)).unwrap())
            .unwrap();
        let phi: f64 = 2.0;
        let more = MtisRep::from_map(&c, &DMatrix::from_column_slice(2, 1, &[phi.cos(), phi.sin()]))
            .unwrap();
        let fr = build_frame(&c, &less, &more).unwrap();
        let c2 = fr.lipschitz_constant().powi(2);
        let n0 = c.form_n0();
        let nv = fr.nv_form();
        let mut s = SphereSampler::new(17);
        for _ in 0..10000 {
            let (x, y) = (s.unit(3), s.unit(3));
            let a0 = crate::geometry::angle(&n0, &x, &y, false).unwrap();
            let av = crate::geometry::angle(&nv, &x, &y, false).unwrap();
            if a0 > 1e-6 && av > 1e-6 {
                let r = a0 / av;
                assert!(r <= c2 + 1e-9 && r >= 1.0 / c2 - 1e-9, "ratio {r} vs C^2 {c2}");
            }
        }
    }
}
