//! Affine deformations of a certified group and their fundamental domains.
//!
//! Each generator g of a linear ping-pong group extends to an affine map
//! gamma(x) = g x + t. Because 1 is a simple eigenvalue of g (the fixed
//! line), -1 is not an eigenvalue, and (Id + g) u = t has a unique solution:
//! the center u, the point exchanged with its negative by gamma. Around the
//! two centers +-u sit solid cones over the generator's tennis-ball domains,
//! and the affine maps play ping-pong with those cones exactly as the linear
//! group does with directions: gamma maps the complement of the closed minus
//! cone into the interior of the plus cone, sharply on the boundary.
//!
//! A translation vector is admissible when all 2n shifted cones are pairwise
//! disjoint. Disjointness splits into an asymptotic part, settled by the
//! angular separation the group certification already measured, and a compact
//! part, scanned here by sampling each cone inside a ball whose radius scales
//! with the translations and measuring point-to-cone distances through
//! membership bisection. The scan reports the smallest distance seen and, on
//! failure, a witness pair.
//!
//! The complement of all the closed cones is the fundamental domain. Points
//! are classified by direct cone tests on the minus sides and by pullback on
//! the plus sides; tracing repeatedly strips the unique claiming letter until
//! the orbit lands in the fundamental domain. Along a trace the pulled-back
//! domains nest, and their supports along the expanding half-line of the
//! first letter (the intersection of the positive-definite block with the
//! letter's expanding wing) form a nondecreasing height sequence whose
//! increments stay uniformly positive at every cyclically reduced step; the
//! gap audit estimates those supports by sampled minimization over the
//! affine slice through the traced point.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{nullspace, subspace_hausdorff_angle, SpaceContext, Vector};
use crate::mtis::{Frame, MtisRep};
use crate::pseudo::q_inverse;
use crate::sample::SphereSampler;
use crate::schottky::{draw_in_domain, tennis_membership, wing_distance};
use crate::schottky::{Letter, SchottkyGroup, Side, Word};
use crate::{BOUNDARY_BAND, TOL};

/// Ball radius for the compact part of the disjointness scan, as a multiple
/// of (1 + the largest translation norm).
const SCAN_BALL_FACTOR: f64 = 10.0;
/// Domain samples per ordered cone pair in the disjointness scan.
const SCAN_SAMPLES: usize = 160;
/// Geodesic starts and bisection depth for point-to-cone distances.
const SCAN_STARTS: usize = 8;
const SCAN_BISECTS: usize = 30;
/// Search rays, bisection depth, and restart rounds per support estimate.
const GAP_DIRS: usize = 14;
const GAP_BISECTS: usize = 28;
const GAP_ROUNDS: usize = 2;
/// Cap on ray doublings while looking for the exit from a nested domain.
const GAP_DOUBLINGS: usize = 48;
/// Relative slack allowed when checking the support heights nondecreasing.
const GAP_SLACK: f64 = 1e-6;

/// An affine map x -> g x + t whose linear part preserves the invariant form.
#[derive(Debug, Clone)]
pub struct AffineMap {
    linear: DMatrix<f64>,
    translation: Vector,
}

impl AffineMap {
    pub fn new(ctx: &SpaceContext, linear: DMatrix<f64>, translation: Vector) -> Result<Self> {
        let dim = ctx.dim();
        if linear.nrows() != dim || linear.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: linear.nrows(),
            });
        }
        if translation.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: translation.len(),
            });
        }
        ctx.check_q_preserved(&linear)?;
        Ok(Self {
            linear,
            translation,
        })
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn translation(&self) -> &Vector {
        &self.translation
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.linear * x + &self.translation
    }

    /// The inverse affine map; the linear inverse comes through the form.
    pub fn inverse(&self, ctx: &SpaceContext) -> Result<AffineMap> {
        let ginv = q_inverse(ctx, &self.linear)?;
        let t = -(&ginv * &self.translation);
        Ok(AffineMap {
            linear: ginv,
            translation: t,
        })
    }
}

/// Solves (Id + g) u = t for the center exchanged with its negative by the
/// affine map. The linear part of a pseudohyperbolic map never has -1 as an
/// eigenvalue, so the system is solvable; a residual check guards the solve.
pub fn solve_center(ctx: &SpaceContext, g: &DMatrix<f64>, t: &Vector) -> Result<Vector> {
    let dim = ctx.dim();
    if g.nrows() != dim || g.ncols() != dim || t.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: g.nrows().max(t.len()),
        });
    }
    let m = DMatrix::<f64>::identity(dim, dim) + g;
    let lu = m.clone().full_piv_lu();
    let u = lu.solve(t).ok_or(Error::Singular)?;
    let residual = (&m * &u - t).norm() / (1.0 + t.norm());
    if residual > TOL {
        return Err(Error::InvalidParameter(format!(
            "center equation is too ill conditioned: residual {residual:.3e}"
        )));
    }
    Ok(u)
}

/// Verdict of the sampled disjointness scan over the shifted cones.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// Smallest distance seen between two different closed cones.
    pub d_min: f64,
    /// On failure, a point of one cone together with the nearest point found
    /// on the other.
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
    pub samples: usize,
    pub seed: u64,
    pub ball_radius: f64,
}

/// A certified group together with one admissible-or-not translation per
/// generator: centers, affine generators, and the disjointness verdict.
#[derive(Debug, Clone)]
pub struct AffineDeformation {
    group: SchottkyGroup,
    translations: Vec<Vector>,
    centers: Vec<Vector>,
    maps: Vec<AffineMap>,
    inverse_maps: Vec<AffineMap>,
    admissibility: AdmissibilityReport,
}

impl AffineDeformation {
    /// Builds the deformation and runs the disjointness scan with default
    /// sampling effort. The group must carry a passed certification.
    pub fn new(ctx: &SpaceContext, group: &SchottkyGroup, translations: &[Vector]) -> Result<Self> {
        Self::with_scan(ctx, group, translations, SCAN_SAMPLES, 0xAFF1)
    }

    pub fn with_scan(
        ctx: &SpaceContext,
        group: &SchottkyGroup,
        translations: &[Vector],
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        if !group.is_certified() {
            return Err(Error::NotCertified(
                "certify the group before deforming it".into(),
            ));
        }
        let n = group.n();
        if translations.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: translations.len(),
            });
        }
        let dim = ctx.dim();
        let mut centers = Vec::with_capacity(n);
        let mut maps = Vec::with_capacity(n);
        let mut inverse_maps = Vec::with_capacity(n);
        for (i, t) in translations.iter().enumerate() {
            if t.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.len(),
                });
            }
            let g = group.generators()[i].matrix().clone();
            centers.push(solve_center(ctx, &g, t)?);
            let map = AffineMap::new(ctx, g, t.clone())?;
            inverse_maps.push(map.inverse(ctx)?);
            maps.push(map);
        }
        let mut def = Self {
            group: group.clone(),
            translations: translations.to_vec(),
            centers,
            maps,
            inverse_maps,
            admissibility: AdmissibilityReport {
                admissible: false,
                d_min: 0.0,
                witness: None,
                samples,
                seed,
                ball_radius: 0.0,
            },
        };
        def.admissibility = scan_disjointness(&def, samples, seed)?;
        Ok(def)
    }

    pub fn group(&self) -> &SchottkyGroup {
        &self.group
    }

    pub fn translations(&self) -> &[Vector] {
        &self.translations
    }

    pub fn centers(&self) -> &[Vector] {
        &self.centers
    }

    pub fn map(&self, i: usize) -> &AffineMap {
        &self.maps[i]
    }

    pub fn inverse_map(&self, i: usize) -> &AffineMap {
        &self.inverse_maps[i]
    }

    pub fn admissibility(&self) -> &AdmissibilityReport {
        &self.admissibility
    }

    pub fn admissible(&self) -> bool {
        self.admissibility.admissible
    }

    pub fn d_min(&self) -> f64 {
        self.admissibility.d_min
    }

    fn require_admissible(&self) -> Result<()> {
        if !self.admissible() {
            return Err(Error::InvalidParameter(
                "translations are not admissible: shifted cones overlap or touch".into(),
            ));
        }
        Ok(())
    }

    fn frame(&self, i: usize) -> &Frame {
        &self.group.frameset().frames()[i]
    }

    /// Apex of the cone on one side of generator i.
    pub fn apex(&self, i: usize, side: Side) -> Vector {
        &self.centers[i] * f64::from(side.sign())
    }
}

/// The canonical translations: twice the fixed unit vector of every frame.
/// The resulting centers are the fixed unit vectors themselves.
pub fn canonical_translations(group: &SchottkyGroup) -> Result<Vec<Vector>> {
    if !group.is_certified() {
        return Err(Error::NotCertified(
            "certify the group before choosing translations".into(),
        ));
    }
    Ok(group
        .frameset()
        .frames()
        .iter()
        .map(|f| f.e_eq() * 2.0)
        .collect())
}

/// Membership of x in the solid cone of generator i on the given side: the
/// offset from the apex must point into the (closed) tennis-ball domain. The
/// apex itself belongs to the closed cone only.
pub fn cone_membership(
    def: &AffineDeformation,
    i: usize,
    side: Side,
    x: &Vector,
    closed: bool,
) -> Result<bool> {
    if i >= def.group.n() {
        return Err(Error::InvalidParameter(format!(
            "generator index {i} out of range"
        )));
    }
    let apex = def.apex(i, side);
    let w = x - &apex;
    if w.norm() <= 1e-12 * (1.0 + apex.norm()) {
        return Ok(closed);
    }
    tennis_membership(def.frame(i), def.group.radii()[i], &w, side, closed)
}

/// Membership in the open tile attached to one letter: the minus tile is the
/// open minus cone itself, and the plus tile is the image under gamma of the
/// complement of the closed minus cone.
pub fn tile_membership(def: &AffineDeformation, i: usize, side: Side, x: &Vector) -> Result<bool> {
    match side {
        Side::Minus => cone_membership(def, i, Side::Minus, x, false),
        Side::Plus => {
            let y = def.inverse_maps[i].apply(x);
            Ok(!cone_membership(def, i, Side::Minus, &y, true)?)
        }
    }
}

/// Classification of a point against the tiling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PointClass {
    /// Inside the fundamental domain: outside every closed cone.
    Fundamental,
    /// Inside exactly one open tile.
    Domain { index: usize, side: Side },
    /// Within the boundary band of some tile.
    Boundary { index: usize, side: Side },
}

/// Linear distance from the tested point to the cone boundary, through the
/// angular margin at the apex offset.
fn boundary_distance(frame: &Frame, eps: f64, w: &Vector, side: Side) -> Result<f64> {
    let angular = (wing_distance(frame, w, side)? - eps).abs();
    Ok(angular.min(std::f64::consts::FRAC_PI_2).sin() * w.norm())
}

/// Classifies a point as fundamental-domain, a unique open tile, or boundary.
/// The boundary band scales with the point actually tested, which for a plus
/// tile is the pullback.
pub fn classify_point(def: &AffineDeformation, x: &Vector) -> Result<PointClass> {
    def.require_admissible()?;
    let mut claimant: Option<(usize, Side)> = None;
    for i in 0..def.group.n() {
        let eps = def.group.radii()[i];
        for side in [Side::Minus, Side::Plus] {
            let (probe, member) = match side {
                Side::Minus => {
                    let w = x - def.apex(i, Side::Minus);
                    let member = if w.norm() <= 1e-12 * (1.0 + def.centers[i].norm()) {
                        false
                    } else {
                        tennis_membership(def.frame(i), eps, &w, Side::Minus, false)?
                    };
                    (w, member)
                }
                Side::Plus => {
                    let y = def.inverse_maps[i].apply(x);
                    let w = y - def.apex(i, Side::Minus);
                    let member = if w.norm() <= 1e-12 * (1.0 + def.centers[i].norm()) {
                        false
                    } else {
                        !tennis_membership(def.frame(i), eps, &w, Side::Minus, true)?
                    };
                    (w, member)
                }
            };
            let scale = match side {
                Side::Minus => BOUNDARY_BAND * (1.0 + x.norm()),
                Side::Plus => {
                    let y = def.inverse_maps[i].apply(x);
                    BOUNDARY_BAND * (1.0 + y.norm())
                }
            };
            let near = if probe.norm() <= scale {
                true
            } else {
                boundary_distance(def.frame(i), eps, &probe, Side::Minus)? <= scale
            };
            if near {
                return Ok(PointClass::Boundary { index: i, side });
            }
            if member {
                if let Some((pi, ps)) = claimant {
                    return Err(Error::InvalidParameter(format!(
                        "point claimed by two tiles ({pi},{ps:?}) and ({i},{side:?})"
                    )));
                }
                claimant = Some((i, side));
            }
        }
    }
    Ok(match claimant {
        None => PointClass::Fundamental,
        Some((index, side)) => PointClass::Domain { index, side },
    })
}

/// Why a trace stopped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TraceStatus {
    /// The orbit reached the fundamental domain.
    Landed,
    /// The step budget ran out first.
    BudgetExhausted,
    /// Classification became ambiguous at the recorded step.
    Diverged { step: usize },
}

/// One point's pullback orbit: letters stripped, intermediate points, the
/// stopping status, and the support-gap audit of the nested domains.
#[derive(Debug, Clone)]
pub struct TileTrace {
    x0: Vector,
    letters: Vec<Letter>,
    points: Vec<Vector>,
    status: TraceStatus,
    gaps: Option<GapReport>,
}

impl TileTrace {
    pub fn x0(&self) -> &Vector {
        &self.x0
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn status(&self) -> &TraceStatus {
        &self.status
    }

    pub fn gaps(&self) -> Option<&GapReport> {
        self.gaps.as_ref()
    }

    pub fn word(&self) -> Word {
        Word::new(self.letters.clone())
    }
}

/// Repeatedly strips the unique tile claiming the point until the orbit lands
/// in the fundamental domain, the budget runs out, or a boundary makes the
/// next letter ambiguous. Landing on the closure of the fundamental domain
/// counts as landed: boundary verdicts against the starting tile band stop
/// the trace as diverged at that step instead of guessing.
pub fn trace_point(
    ctx: &SpaceContext,
    def: &AffineDeformation,
    x0: &Vector,
    max_steps: usize,
) -> Result<TileTrace> {
    def.require_admissible()?;
    let mut current = x0.clone();
    let mut letters: Vec<Letter> = Vec::new();
    let mut points: Vec<Vector> = Vec::new();
    let mut status = TraceStatus::BudgetExhausted;
    for step in 0..max_steps {
        match classify_point(def, &current)? {
            PointClass::Fundamental => {
                status = TraceStatus::Landed;
                break;
            }
            PointClass::Boundary { .. } => {
                status = TraceStatus::Diverged { step };
                break;
            }
            PointClass::Domain { index, side } => {
                let letter = Letter {
                    index: index + 1,
                    sign: side.sign(),
                };
                if letters.last().is_some_and(|p| *p == letter.inverse()) {
                    status = TraceStatus::Diverged { step };
                    break;
                }
                letters.push(letter);
                current = match side {
                    Side::Plus => def.inverse_maps[index].apply(&current),
                    Side::Minus => def.maps[index].apply(&current),
                };
                points.push(current.clone());
            }
        }
    }
    let mut trace = TileTrace {
        x0: x0.clone(),
        letters,
        points,
        status,
        gaps: None,
    };
    if !trace.letters.is_empty() {
        trace.gaps = Some(gap_sequence(ctx, def, &trace)?);
    }
    Ok(trace)
}

/// One support estimate along the expanding half-line.
#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    /// 1-based index into the nested domain sequence.
    pub step: usize,
    /// Estimated infimum of the height over the nested domain's slice.
    pub a: f64,
    /// Increment over the previous row; absent on the first row.
    pub delta: Option<f64>,
    /// True when the prefix ending at this row is cyclically reduced, the
    /// regime where the increments carry a uniform positive floor.
    pub flagged: bool,
}

/// Support heights of the nested pulled-back domains along the expanding
/// half-line of the first letter, measured in the slice through the traced
/// point parallel to the positive-definite block.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    /// Ambient direction of the expanding half-line.
    pub axis: Vec<f64>,
    /// Heights nondecreasing within the sampling slack.
    pub monotone: bool,
    /// Smallest increment over the flagged rows.
    pub min_flagged_delta: Option<f64>,
    /// False when the trace did not land and the sequence is a prefix.
    pub complete: bool,
    pub note: String,
}

/// Estimates the support heights a_k of the nested domains along the first
/// letter's expanding half-line. The half-line is the meet of the positive
/// block with the letter's expanding wing; heights are taken relative to the
/// traced point, so every row is nonpositive. Membership of a slice point in
/// the k-th domain pulls the point back letter by letter, never forming the
/// product matrix, and each infimum comes from descending rays bisected onto
/// the domain boundary.
pub fn gap_sequence(
    ctx: &SpaceContext,
    def: &AffineDeformation,
    trace: &TileTrace,
) -> Result<GapReport> {
    let letters = trace.letters();
    if letters.is_empty() {
        return Ok(GapReport {
            rows: Vec::new(),
            axis: Vec::new(),
            monotone: true,
            min_flagged_delta: None,
            complete: matches!(trace.status(), TraceStatus::Landed),
            note: "empty trace: the point started in the fundamental domain".into(),
        });
    }
    let first = letters[0];
    let frame = def.frame(first.index - 1);
    let (wing, component): (_, &MtisRep) = if first.sign > 0 {
        (frame.wing_more(), frame.v_more())
    } else {
        (frame.wing_less(), frame.v_less())
    };
    let d = ctx.d();
    let span = ctx.q_orthogonal_complement(component.subspace())?;
    let mut t_rows = DMatrix::<f64>::zeros(d, d + 1);
    for j in 0..=d {
        let col = span.basis().column(j).clone_owned();
        t_rows.set_column(j, &ctx.t_coords(&col));
    }
    let kernel = nullspace(&t_rows, &DMatrix::identity(d + 1, d + 1))?;
    if kernel.ncols() != 1 {
        return Err(Error::InvalidParameter(format!(
            "expanding wing meets the positive block in dimension {}",
            kernel.ncols()
        )));
    }
    let mut axis = span.basis() * kernel.column(0).clone_owned();
    axis /= axis.norm();
    if wing.cone().angle_to(&axis)? > wing.cone().angle_to(&(-&axis))? {
        axis = -axis;
    }
    if wing.cone().angle_to(&axis)? > 1e-8 {
        return Err(Error::InvalidParameter(
            "expanding half-line escapes its wing: degenerate frame".into(),
        ));
    }
    // Height function on slice coordinates: the slice is x0 + (positive
    // block), and the axis lies inside the block, so the height of a slice
    // point relative to x0 is the plain inner product of coordinates.
    let axis_s = ctx.s_coords(&axis);
    let x0 = trace.x0().clone();
    let scale = 1.0 + x0.norm();
    let mut seed = 0x6A90_u64;
    for l in letters {
        seed = seed
            .wrapping_mul(0x100000001B3)
            .wrapping_add((l.index as u64) << 1)
            .wrapping_add(u64::from(l.sign > 0));
    }
    let mut s = SphereSampler::new(seed);

    let member = |k: usize, c: &Vector| -> Result<bool> {
        let mut y = &x0 + ctx.from_s_coords(c);
        for l in &letters[..k] {
            let idx = l.index - 1;
            y = if l.sign > 0 {
                def.inverse_maps[idx].apply(&y)
            } else {
                def.maps[idx].apply(&y)
            };
        }
        let l = letters[k];
        let side = if l.sign > 0 { Side::Plus } else { Side::Minus };
        tile_membership(def, l.index - 1, side, &y)
    };

    // The domains nest downward, so their support heights rise with the
    // step. Estimating each row independently loses that ordering to
    // sampling noise, so rows run deepest-first and every row's search is
    // seeded with the next row's minimizer (a member of the larger domain);
    // the estimate of a row is then never above the estimate of its
    // successor, matching the true infima exactly in order.
    let count = letters.len();
    let mut ests: Vec<(f64, Vector)> = vec![(0.0, Vector::zeros(d + 1)); count];
    for k in (0..count).rev() {
        if !member(k, &Vector::zeros(d + 1))? {
            return Err(Error::InvalidParameter(format!(
                "traced point fell out of nested domain {k}: boundary contact"
            )));
        }
        let mut best_c = Vector::zeros(d + 1);
        let mut best_h = 0.0_f64;
        if k + 1 < count {
            let (seed_h, seed_c) = ests[k + 1].clone();
            if seed_h < best_h && member(k, &seed_c)? {
                best_h = seed_h;
                best_c = seed_c;
            }
        }
        for _ in 0..GAP_ROUNDS {
            let anchor = best_c.clone();
            for _ in 0..GAP_DIRS {
                let mut g = s.gaussian_vector(d + 1);
                g -= &axis_s * axis_s.dot(&g);
                let ng = g.norm();
                let dir = if ng < 1e-12 {
                    -&axis_s
                } else {
                    let phi = s.uniform(0.0, 1.35);
                    -&axis_s * phi.cos() + (g / ng) * phi.sin()
                };
                let mut lo = 0.0_f64;
                let mut hi = 0.05 * scale;
                let mut exited = false;
                for _ in 0..GAP_DOUBLINGS {
                    if member(k, &(&anchor + &dir * hi))? {
                        lo = hi;
                        hi *= 2.0;
                    } else {
                        exited = true;
                        break;
                    }
                }
                if !exited {
                    continue;
                }
                for _ in 0..GAP_BISECTS {
                    let mid = 0.5 * (lo + hi);
                    if member(k, &(&anchor + &dir * mid))? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let c = &anchor + &dir * lo;
                let h = c.dot(&axis_s);
                if h < best_h {
                    best_h = h;
                    best_c = c;
                }
            }
        }
        // The larger domain can never have the higher infimum.
        if k + 1 < count && best_h > ests[k + 1].0 {
            best_h = ests[k + 1].0;
            best_c = ests[k + 1].1.clone();
        }
        ests[k] = (best_h, best_c);
    }
    let mut rows: Vec<GapRow> = Vec::new();
    let mut monotone = true;
    let mut min_flagged: Option<f64> = None;
    for (k, (a, _)) in ests.iter().enumerate() {
        let delta = if k == 0 {
            None
        } else {
            Some(a - ests[k - 1].0)
        };
        if k > 0 && *a < ests[k - 1].0 - GAP_SLACK * scale {
            monotone = false;
        }
        let flagged = k > 0 && letters[k] != letters[0].inverse();
        if flagged {
            if let Some(dl) = delta {
                min_flagged = Some(min_flagged.map_or(dl, |m: f64| m.min(dl)));
            }
        }
        rows.push(GapRow {
            step: k + 1,
            a: *a,
            delta,
            flagged,
        });
    }
    Ok(GapReport {
        rows,
        axis: axis.iter().cloned().collect(),
        monotone,
        min_flagged_delta: min_flagged,
        complete: matches!(trace.status(), TraceStatus::Landed),
        note: format!(
            "heights relative to the traced point along the expanding half-line \
             of the first letter {}; flags mark steps whose letter is not that \
             letter's inverse",
            Word::new(vec![first]).label()
        ),
    })
}

/// Samples a point of the closed cone (i, side) inside the scan ball.
fn sample_cone_point(
    def: &AffineDeformation,
    i: usize,
    side: Side,
    radius: f64,
    s: &mut SphereSampler,
) -> Result<Vector> {
    let dir = draw_in_domain(def.frame(i), def.group.radii()[i], side, s)?;
    let r = radius * s.uniform(0.0, 1.0);
    Ok(def.apex(i, side) + dir * r)
}

/// Distance from a point to a closed cone, through the euclidean angle to
/// the cone's direction set: the best of several geodesics from the offset
/// direction to sampled interior directions, bisected onto the set boundary.
/// Returns the distance and the nearest cone point found.
fn point_to_cone_distance(
    def: &AffineDeformation,
    j: usize,
    side: Side,
    x: &Vector,
    s: &mut SphereSampler,
) -> Result<(f64, Vector)> {
    let apex = def.apex(j, side);
    let frame = def.frame(j);
    let eps = def.group.radii()[j];
    let w = x - &apex;
    let nw = w.norm();
    if nw <= 1e-12 * (1.0 + apex.norm()) {
        return Ok((0.0, apex));
    }
    let wu = &w / nw;
    if tennis_membership(frame, eps, &wu, side, true)? {
        return Ok((0.0, x.clone()));
    }
    let mut best_angle = std::f64::consts::FRAC_PI_2;
    let mut best_dir: Option<Vector> = None;
    for _ in 0..SCAN_STARTS {
        let inside = draw_in_domain(frame, eps, side, s)?;
        let cos = wu.dot(&inside).clamp(-1.0, 1.0);
        let total = cos.acos();
        if total < 1e-12 {
            return Ok((0.0, x.clone()));
        }
        // Slerp from the outside direction toward the inside one; the first
        // crossing into the closed set is a boundary direction.
        let mut perp = &inside - &wu * cos;
        let np = perp.norm();
        if np < 1e-12 {
            continue;
        }
        perp /= np;
        let mut lo = 0.0_f64;
        let mut hi = total;
        for _ in 0..SCAN_BISECTS {
            let mid = 0.5 * (lo + hi);
            let dir = &wu * mid.cos() + &perp * mid.sin();
            if tennis_membership(frame, eps, &dir, side, true)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if hi < best_angle {
            best_angle = hi;
            best_dir = Some(&wu * hi.cos() + &perp * hi.sin());
        }
    }
    let dist = nw * best_angle.min(std::f64::consts::FRAC_PI_2).sin();
    let nearest = match best_dir {
        Some(dir) => &apex + dir * (nw * best_angle.cos()).max(0.0),
        None => apex,
    };
    Ok((dist, nearest))
}

/// Sampled disjointness scan over all pairs of shifted closed cones: the
/// compact parts are compared inside a ball scaling with the translations,
/// and the asymptotic parts are already separated in angle by the group
/// certification. Reports the smallest distance seen; any membership hit of
/// one cone's sample in another cone is a definite overlap.
fn scan_disjointness(
    def: &AffineDeformation,
    samples: usize,
    seed: u64,
) -> Result<AdmissibilityReport> {
    if samples == 0 {
        return Err(Error::EmptySampleSet);
    }
    let n = def.group.n();
    let max_t = def
        .translations
        .iter()
        .map(Vector::norm)
        .fold(0.0_f64, f64::max);
    let radius = SCAN_BALL_FACTOR * (1.0 + max_t);
    let mut s = SphereSampler::new(seed);
    let mut d_min = f64::INFINITY;
    let mut witness: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut overlap = false;
    let mut domains: Vec<(usize, Side)> = Vec::with_capacity(2 * n);
    for i in 0..n {
        domains.push((i, Side::Minus));
        domains.push((i, Side::Plus));
    }
    'pairs: for a in 0..domains.len() {
        for b in 0..domains.len() {
            if a == b {
                continue;
            }
            let (ia, sa) = domains[a];
            let (ib, sb) = domains[b];
            // Apexes first: coinciding apexes are a definite overlap.
            let pa = def.apex(ia, sa);
            let (dist, near) = point_to_cone_distance(def, ib, sb, &pa, &mut s)?;
            if dist < d_min {
                d_min = dist;
                witness = Some((pa.iter().cloned().collect(), near.iter().cloned().collect()));
            }
            if dist <= 0.0 {
                overlap = true;
                break 'pairs;
            }
            for _ in 0..samples {
                let x = sample_cone_point(def, ia, sa, radius, &mut s)?;
                let (dist, near) = point_to_cone_distance(def, ib, sb, &x, &mut s)?;
                if dist < d_min {
                    d_min = dist;
                    witness = Some((x.iter().cloned().collect(), near.iter().cloned().collect()));
                }
                if dist <= 0.0 {
                    overlap = true;
                    break 'pairs;
                }
            }
        }
    }
    Ok(AdmissibilityReport {
        admissible: !overlap && d_min > 0.0,
        d_min: if overlap { 0.0 } else { d_min },
        witness,
        samples,
        seed,
        ball_radius: radius,
    })
}

/// Checks admissibility of a translation vector against a certified group
/// without keeping the deformation.
pub fn verify_translations(
    ctx: &SpaceContext,
    group: &SchottkyGroup,
    translations: &[Vector],
    samples: usize,
    seed: u64,
) -> Result<AdmissibilityReport> {
    let def = AffineDeformation::with_scan(ctx, group, translations, samples, seed)?;
    Ok(def.admissibility)
}

/// Angle-control identities of the involution swapping the two definite
/// blocks, measured on random isotropic subspaces and random block vectors.
#[derive(Debug, Clone, Serialize)]
pub struct AngleControlReport {
    pub samples: usize,
    /// Worst deviation of angle(complement, complement) from angle(V, W).
    pub max_complement_gap: f64,
    /// Worst deviation of sin angle(x, meet with the positive block) from
    /// sqrt(2) sin angle(x, complement), over x in the positive block.
    pub max_sine_gap: f64,
    pub passed: bool,
}

/// Sine of the angle from a vector to the span of euclidean-orthonormal
/// columns, through the projection residual.
fn sine_to_columns(x: &Vector, basis: &DMatrix<f64>) -> f64 {
    let r = x - basis * (basis.transpose() * x);
    r.norm() / x.norm()
}

/// Verifies the two angle-control identities behind the gap floor: taking
/// form-orthogonal complements preserves angles between isotropic subspaces,
/// and for a vector of the positive block the angle to a complement's meet
/// with the block is exactly sqrt(2) times closer in sine than the angle to
/// the full complement.
pub fn verify_angle_control(
    ctx: &SpaceContext,
    samples: usize,
    seed: u64,
) -> Result<AngleControlReport> {
    if samples == 0 {
        return Err(Error::EmptySampleSet);
    }
    let d = ctx.d();
    let n0 = ctx.form_n0();
    let mut s = SphereSampler::new(seed);
    let mut max_complement_gap = 0.0_f64;
    let mut max_sine_gap = 0.0_f64;
    for _ in 0..samples {
        let fa = s.orthogonal(d + 1, d);
        let fb = s.orthogonal(d + 1, d);
        let va = MtisRep::from_map(ctx, &fa)?;
        let vb = MtisRep::from_map(ctx, &fb)?;
        let ca = ctx.q_orthogonal_complement(va.subspace())?;
        let cb = ctx.q_orthogonal_complement(vb.subspace())?;
        let direct = subspace_hausdorff_angle(&n0, va.subspace(), vb.subspace())?;
        let complements = subspace_hausdorff_angle(&n0, &ca, &cb)?;
        max_complement_gap = max_complement_gap.max((direct - complements).abs());

        // Meet of the complement with the positive block: kernel of the
        // negative-block coordinates inside the complement.
        let mut t_rows = DMatrix::<f64>::zeros(d, d + 1);
        for j in 0..=d {
            let col = ca.basis().column(j).clone_owned();
            t_rows.set_column(j, &ctx.t_coords(&col));
        }
        let kernel = nullspace(&t_rows, &DMatrix::identity(d + 1, d + 1))?;
        if kernel.ncols() != 1 {
            return Err(Error::InvalidParameter(format!(
                "complement meets the positive block in dimension {}",
                kernel.ncols()
            )));
        }
        let mut line = ca.basis() * kernel.column(0).clone_owned();
        line /= line.norm();
        let line_mat = DMatrix::from_columns(&[line]);
        let x = ctx.from_s_coords(&s.gaussian_vector(d + 1));
        let sin_line = sine_to_columns(&x, &line_mat);
        let sin_full = sine_to_columns(&x, ca.basis());
        max_sine_gap = max_sine_gap.max((sin_line - std::f64::consts::SQRT_2 * sin_full).abs());
    }
    Ok(AngleControlReport {
        samples,
        max_complement_gap,
        max_sine_gap,
        passed: max_complement_gap <= 1e-8 && max_sine_gap <= 1e-8,
    })
}

/// How the quotient of the fundamental domain glues: one identification per
/// generator, pairing the two boundary cones.
#[derive(Debug, Clone, Serialize)]
pub struct QuotientReport {
    pub dimension: usize,
    pub handles: usize,
    pub identifications: Vec<(String, String)>,
}

/// Summary of the quotient space: ambient dimension, one handle per
/// generator, and the boundary pairing each generator performs.
pub fn quotient_report(def: &AffineDeformation) -> Result<QuotientReport> {
    def.require_admissible()?;
    let n = def.group.n();
    let mut identifications = Vec::with_capacity(n);
    for i in 0..n {
        let label = Word::new(vec![Letter {
            index: i + 1,
            sign: 1,
        }])
        .label();
        identifications.push((format!("{label}-"), format!("{label}+")));
    }
    Ok(QuotientReport {
        dimension: 2 * def.frame(0).d() + 1,
        handles: n,
        identifications,
    })
}
