//! Framesets, the groups generated over them, and their certification.
//!
//! A frameset is a family of 2n pairwise transversal maximal totally
//! isotropic subspaces grouped into n ordered pairs; each pair carries a
//! frame, and the separation of the frameset is the smallest wing
//! separation over every one of the C(2n, 2) pairings, not only the chosen
//! ones. A group puts one pseudohyperbolic generator on each frame and owns
//! a radius per generator, chosen so that the local ball of that radius
//! embeds into the ambient ball of a third of the requested separation.
//!
//! The tennis-ball domain of radius ε around a wing is described exactly by
//! a two-branch inequality in the local coordinates (x_<, x_=, x_>): on the
//! side whose neutral coordinate matches the wing the distance is the
//! arctangent of ‖transverse part‖ / ‖wing part‖, on the other side the
//! neutral coordinate joins the transverse part. Certification samples the
//! ping-pong inclusions (each generator maps the complement of its closed
//! source domain into its open target domain) and the pairwise
//! disjointness of the 2n closed domains; every verdict is sampled, and the
//! report carries margins, witnesses, sample counts and the seed.
//!
//! Products of generators are audited word by word. Long words of strong
//! generators are too ill-conditioned for a direct eigenvalue analysis (the
//! expanding and contracting scales multiply), so the audit works with the
//! factored product: per-factor re-orthonormalized subspace iteration for
//! the expanding and contracting subspaces, restrictions of the word to the
//! computed invariant blocks for the moduli and the strength, and a
//! reconstruction cross-check against the directly multiplied matrix.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    orthonormal_columns, spectral_norm, subspace_hausdorff_angle, SpaceContext, Subspace, Vector,
};
use crate::mtis::{build_frame, frame_separation, generate_transversal_family, is_transversal,
    Frame, MtisRep};
use crate::pseudo::{is_pseudohyperbolic, q_inverse, PseudoHyperbolicMap};
use crate::sample::SphereSampler;
use crate::BAND;

/// Iteration budget of the factored subspace iteration per word.
const WORD_ITERS: usize = 500;

/// Span residual under which the factored subspace iteration is converged.
const WORD_SPAN_TOL: f64 = 1e-13;

/// Relative residual above which a computed invariant block is rejected.
const INVARIANCE_TOL: f64 = 1e-6;

/// Condition bound under which the direct spectral classification is still
/// trustworthy and is run as a cross-check of the factored analysis.
const CROSS_CHECK_COND: f64 = 1e8;

/// Which of the two wings of a frame a statement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Minus => Side::Plus,
            Side::Plus => Side::Minus,
        }
    }

    /// +1 for the plus side, -1 for the minus side.
    pub fn sign(self) -> i8 {
        match self {
            Side::Minus => -1,
            Side::Plus => 1,
        }
    }
}

/// A family of 2n pairwise transversal maximal isotropic subspaces, grouped
/// into n ordered (contracting, expanding) pairs with built frames.
#[derive(Debug, Clone)]
pub struct Frameset {
    components: Vec<MtisRep>,
    pairing: Vec<(usize, usize)>,
    frames: Vec<Frame>,
    separation: f64,
}

impl Frameset {
    pub fn n(&self) -> usize {
        self.pairing.len()
    }

    /// All 2n member subspaces in input order.
    pub fn components(&self) -> &[MtisRep] {
        &self.components
    }

    pub fn pairing(&self) -> &[(usize, usize)] {
        &self.pairing
    }

    /// One frame per chosen pair.
    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Smallest wing separation over all C(2n, 2) component pairings.
    pub fn separation(&self) -> f64 {
        self.separation
    }
}

/// Builds the frameset over the chosen pairing after checking that every
/// two components are transversal; the separation minimizes over all
/// pairings, not only the chosen ones.
pub fn build_frameset(
    ctx: &SpaceContext,
    mtis_list: &[MtisRep],
    pairing: &[(usize, usize)],
) -> Result<Frameset> {
    let n = pairing.len();
    if n == 0 {
        return Err(Error::InvalidParameter("a frameset needs at least one pair".into()));
    }
    if mtis_list.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: mtis_list.len(),
        });
    }
    let mut used = vec![false; 2 * n];
    for &(a, b) in pairing {
        for idx in [a, b] {
            if idx >= 2 * n {
                return Err(Error::InvalidParameter(format!(
                    "pairing index {idx} outside the {} components",
                    2 * n
                )));
            }
            if used[idx] {
                return Err(Error::InvalidParameter(format!(
                    "component {idx} appears twice in the pairing"
                )));
            }
            used[idx] = true;
        }
    }
    for i in 0..mtis_list.len() {
        for j in (i + 1)..mtis_list.len() {
            let (ok, margin) = is_transversal(&mtis_list[i], &mtis_list[j])?;
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "components {i} and {j} are not transversal (margin {margin:.3e})"
                )));
            }
        }
    }
    let mut frames = Vec::with_capacity(n);
    for &(a, b) in pairing {
        frames.push(build_frame(ctx, &mtis_list[a], &mtis_list[b])?);
    }
    let mut separation = f64::INFINITY;
    for i in 0..mtis_list.len() {
        for j in (i + 1)..mtis_list.len() {
            let pair_frame = build_frame(ctx, &mtis_list[i], &mtis_list[j])?;
            separation = separation.min(frame_separation(&pair_frame));
        }
    }
    Ok(Frameset {
        components: mtis_list.to_vec(),
        pairing: pairing.to_vec(),
        frames,
        separation,
    })
}

/// Local angular distance from a nonzero vector's direction to a wing of
/// the frame, evaluated through the two-branch arctangent description.
pub(crate) fn wing_distance(frame: &Frame, x: &Vector, side: Side) -> Result<f64> {
    let (less, eq, more) = frame.nv_coords(x);
    let (nl, nm) = (less.norm(), more.norm());
    if nl == 0.0 && nm == 0.0 && eq == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(match side {
        Side::Plus => {
            if eq >= 0.0 {
                nl.atan2((nm * nm + eq * eq).sqrt())
            } else {
                (nl * nl + eq * eq).sqrt().atan2(nm)
            }
        }
        Side::Minus => {
            if eq <= 0.0 {
                nm.atan2((nl * nl + eq * eq).sqrt())
            } else {
                (nm * nm + eq * eq).sqrt().atan2(nl)
            }
        }
    })
}

/// Membership of a direction in the tennis-ball domain of radius `eps`
/// around one wing of the frame, by the exact two-branch inequality in the
/// local coordinates; the closed variant turns every strict comparison into
/// a non-strict one.
pub fn tennis_membership(
    frame: &Frame,
    eps: f64,
    x: &Vector,
    side: Side,
    closed: bool,
) -> Result<bool> {
    if !(eps > 0.0 && eps < FRAC_PI_2) {
        return Err(Error::InvalidParameter(
            "domain radius must lie strictly between 0 and pi/2".into(),
        ));
    }
    let (less, eq, more) = frame.nv_coords(x);
    let (nl, nm) = (less.norm(), more.norm());
    if nl == 0.0 && nm == 0.0 && eq == 0.0 {
        return Err(Error::ZeroVector);
    }
    let t = eps.tan();
    let lt = |a: f64, b: f64| if closed { a <= b } else { a < b };
    Ok(match side {
        Side::Plus => {
            (eq <= 0.0 && lt((nl * nl + eq * eq).sqrt(), t * nm))
                || (eq >= 0.0 && lt(nl, t * (nm * nm + eq * eq).sqrt()))
        }
        Side::Minus => {
            (eq >= 0.0 && lt((nm * nm + eq * eq).sqrt(), t * nl))
                || (eq <= 0.0 && lt(nm, t * (nl * nl + eq * eq).sqrt()))
        }
    })
}

/// Verdict of the sufficient contraction bound s(g) < tan(ε)⁴.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tan4Check {
    pub holds: bool,
    /// tan(ε)⁴ - s(g); negative when the bound fails.
    pub margin: f64,
}

/// The sufficient single-generator bound: contraction strength below the
/// fourth power of the tangent of the domain radius.
pub fn check_tan4_bound(g: &PseudoHyperbolicMap, eps: f64) -> Tan4Check {
    let bound = eps.tan().powi(4);
    Tan4Check {
        holds: g.strength() < bound,
        margin: bound - g.strength(),
    }
}

/// Per-generator radii: a third of the requested separation, shrunk by the
/// squared norm-equivalence constant of the frame so that the local ball of
/// radius ε_i embeds into the ambient ball of radius ε/3.
pub fn choose_radii(frameset: &Frameset, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps <= FRAC_PI_2) {
        return Err(Error::InvalidParameter(
            "separation budget must lie in (0, pi/2]".into(),
        ));
    }
    Ok(frameset
        .frames()
        .iter()
        .map(|f| (eps / 3.0) / f.lipschitz_constant().powi(2))
        .collect())
}

/// Certification state of a group; populated by a certification run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Certification {
    /// Every generator satisfies the sufficient tan⁴ bound.
    pub tan4: bool,
    /// The 2n closed domains are pairwise disjoint on samples.
    pub disjoint: bool,
    /// The ping-pong inclusions hold on samples.
    pub ping_pong: bool,
}

/// A free group of pseudohyperbolic maps over a frameset, with one
/// tennis-ball radius per generator.
#[derive(Debug, Clone)]
pub struct SchottkyGroup {
    frameset: Frameset,
    generators: Vec<PseudoHyperbolicMap>,
    strength: f64,
    epsilon: f64,
    radii: Vec<f64>,
    certified: Option<Certification>,
}

impl SchottkyGroup {
    /// Puts one generator on each frame of the frameset; the separation
    /// budget must be positive and no larger than the frameset separation.
    pub fn new(
        ctx: &SpaceContext,
        frameset: Frameset,
        blocks: &[DMatrix<f64>],
        epsilon: f64,
    ) -> Result<Self> {
        if blocks.len() != frameset.n() {
            return Err(Error::DimensionMismatch {
                expected: frameset.n(),
                got: blocks.len(),
            });
        }
        if !(epsilon > 0.0 && epsilon <= FRAC_PI_2) {
            return Err(Error::InvalidParameter(
                "separation budget must lie in (0, pi/2]".into(),
            ));
        }
        let mut generators = Vec::with_capacity(frameset.n());
        for (frame, block) in frameset.frames().iter().zip(blocks) {
            generators.push(PseudoHyperbolicMap::new(ctx, frame.clone(), block.clone())?);
        }
        let strength = generators.iter().map(|g| g.strength()).fold(0.0, f64::max);
        let radii = choose_radii(&frameset, epsilon)?;
        Ok(SchottkyGroup {
            frameset,
            generators,
            strength,
            epsilon,
            radii,
            certified: None,
        })
    }

    pub fn frameset(&self) -> &Frameset {
        &self.frameset
    }

    pub fn generators(&self) -> &[PseudoHyperbolicMap] {
        &self.generators
    }

    pub fn n(&self) -> usize {
        self.generators.len()
    }

    /// Largest generator contraction strength.
    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// The requested ambient separation budget.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Tennis-ball radius per generator.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Certification flags, if a certification run has happened.
    pub fn certified(&self) -> Option<&Certification> {
        self.certified.as_ref()
    }

    /// Whether the sampled ping-pong and disjointness verdicts both hold.
    pub fn is_certified(&self) -> bool {
        matches!(
            self.certified,
            Some(Certification {
                disjoint: true,
                ping_pong: true,
                ..
            })
        )
    }

    /// Runs the sampled certification and stores its flags on the group.
    pub fn certify(
        &mut self,
        ctx: &SpaceContext,
        samples: usize,
        seed: u64,
    ) -> Result<PingPongReport> {
        let report = verify_ping_pong_sphere(ctx, self, samples, seed)?;
        let tan4 = self
            .generators
            .iter()
            .zip(&self.radii)
            .all(|(g, &r)| check_tan4_bound(g, r).holds);
        self.certified = Some(Certification {
            tan4,
            disjoint: report.disjoint_ok,
            ping_pong: report.inclusions_ok,
        });
        Ok(report)
    }
}

/// Sampled worst margin of one ping-pong inclusion.
#[derive(Debug, Clone, Serialize)]
pub struct GeneratorMargin {
    pub index: usize,
    /// +1 for the generator, -1 for its inverse.
    pub power: i8,
    pub samples: usize,
    /// Smallest angular clearance of a mapped sample inside the open target
    /// domain; negative means a sampled violation.
    pub worst_margin: f64,
    pub ok: bool,
    /// A source direction whose image left the target domain, if any.
    pub witness: Option<Vec<f64>>,
}

/// Sampled minimum cross-domain clearance of one pair of closed domains.
#[derive(Debug, Clone, Serialize)]
pub struct DomainPairGap {
    pub a: (usize, i8),
    pub b: (usize, i8),
    /// Smallest sampled angular clearance between a point of one closed
    /// domain and the other closed domain; negative means overlap.
    pub min_margin: f64,
    pub ok: bool,
    pub witness: Option<Vec<f64>>,
}

/// Certification report: sampled ping-pong inclusions and pairwise domain
/// disjointness, with margins, witnesses and the sampling parameters.
#[derive(Debug, Clone, Serialize)]
pub struct PingPongReport {
    /// Always "sampled": no verdict here is a proof.
    pub method: String,
    pub samples: usize,
    pub seed: u64,
    pub inclusions: Vec<GeneratorMargin>,
    pub domain_gaps: Vec<DomainPairGap>,
    pub min_inclusion_margin: f64,
    pub min_domain_gap: f64,
    /// Heuristic resolution floor the minimum domain gap must clear:
    /// ten great-circle steps at the sampling density.
    pub gap_floor: f64,
    pub inclusions_ok: bool,
    pub disjoint_ok: bool,
    pub passed: bool,
}

/// One domain handle: generator index and wing side.
fn domain_list(n: usize) -> Vec<(usize, Side)> {
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        out.push((i, Side::Minus));
        out.push((i, Side::Plus));
    }
    out
}

/// Draws a unit direction inside the closed tennis-ball domain: a wing-cone
/// direction tilted by at most the radius in the local metric.
pub fn draw_in_domain(
    frame: &Frame,
    eps: f64,
    side: Side,
    s: &mut SphereSampler,
) -> Result<Vector> {
    let d = frame.d();
    let dim = 2 * d + 1;
    for _ in 0..200 {
        let mut w = Vector::zeros(dim);
        match side {
            Side::Minus => {
                for r in 0..d {
                    w[r] = s.gaussian();
                }
                w[d] = -s.gaussian().abs();
            }
            Side::Plus => {
                for r in 0..d {
                    w[d + 1 + r] = s.gaussian();
                }
                w[d] = s.gaussian().abs();
            }
        }
        let nw = w.norm();
        if nw < 1e-12 {
            continue;
        }
        w /= nw;
        let mut z = s.gaussian_vector(dim);
        z -= &w * w.dot(&z);
        let nz = z.norm();
        if nz < 1e-12 {
            continue;
        }
        z /= nz;
        let theta = s.uniform(0.0, eps);
        let coords = w * theta.cos() + z * theta.sin();
        let x = frame.adapted_frame() * coords;
        if tennis_membership(frame, eps, &x, side, true)? {
            let nx = x.norm();
            return Ok(x / nx);
        }
    }
    Err(Error::EmptySampleSet)
}

/// Draws a unit direction outside the closed source domain; the second half
/// of the budget concentrates within twice the radius of the boundary.
fn draw_outside(
    frame: &Frame,
    eps: f64,
    side: Side,
    near_boundary: bool,
    s: &mut SphereSampler,
) -> Result<Vector> {
    let d = frame.d();
    let dim = 2 * d + 1;
    if near_boundary {
        for _ in 0..200 {
            let mut w = Vector::zeros(dim);
            match side {
                Side::Minus => {
                    for r in 0..d {
                        w[r] = s.gaussian();
                    }
                    w[d] = -s.gaussian().abs();
                }
                Side::Plus => {
                    for r in 0..d {
                        w[d + 1 + r] = s.gaussian();
                    }
                    w[d] = s.gaussian().abs();
                }
            }
            let nw = w.norm();
            if nw < 1e-12 {
                continue;
            }
            w /= nw;
            let mut z = s.gaussian_vector(dim);
            z -= &w * w.dot(&z);
            let nz = z.norm();
            if nz < 1e-12 {
                continue;
            }
            z /= nz;
            let theta = eps + s.uniform(0.0, eps.min(FRAC_PI_2 - eps));
            let coords = w * theta.cos() + z * theta.sin();
            let x = frame.adapted_frame() * coords;
            if !tennis_membership(frame, eps, &x, side, true)? {
                let nx = x.norm();
                return Ok(x / nx);
            }
        }
    }
    for _ in 0..1000 {
        let x = s.unit(dim);
        if !tennis_membership(frame, eps, &x, side, true)? {
            return Ok(x);
        }
    }
    Err(Error::EmptySampleSet)
}

/// Samples the ping-pong inclusions of every generator and inverse, and the
/// pairwise disjointness of the 2n closed domains. Verdicts are sampled
/// with stratified draws (half uniform, half concentrated near domain
/// boundaries); the report carries the worst margins and witnesses.
pub fn verify_ping_pong_sphere(
    ctx: &SpaceContext,
    group: &SchottkyGroup,
    samples: usize,
    seed: u64,
) -> Result<PingPongReport> {
    if samples == 0 {
        return Err(Error::EmptySampleSet);
    }
    let n = group.n();
    let mut s = SphereSampler::new(seed);
    let mut inclusions = Vec::with_capacity(2 * n);
    let mut min_inclusion_margin = f64::INFINITY;
    for i in 0..n {
        let frame = &group.frameset().frames()[i];
        let eps = group.radii()[i];
        for power in [1i8, -1] {
            let m = if power > 0 {
                group.generators()[i].matrix().clone()
            } else {
                q_inverse(ctx, group.generators()[i].matrix())?
            };
            let source = if power > 0 { Side::Minus } else { Side::Plus };
            let target = source.flip();
            let mut worst = f64::INFINITY;
            let mut witness = None;
            for k in 0..samples {
                let near = k >= samples / 2;
                let x = draw_outside(frame, eps, source, near, &mut s)?;
                let y = &m * &x;
                let margin = eps - wing_distance(frame, &y, target)?;
                if margin < worst {
                    worst = margin;
                }
                if !tennis_membership(frame, eps, &y, target, false)? && witness.is_none() {
                    witness = Some(x.iter().cloned().collect());
                }
            }
            min_inclusion_margin = min_inclusion_margin.min(worst);
            inclusions.push(GeneratorMargin {
                index: i,
                power,
                samples,
                worst_margin: worst,
                ok: witness.is_none() && worst > 0.0,
                witness,
            });
        }
    }
    let domains = domain_list(n);
    let mut domain_gaps = Vec::new();
    let mut min_domain_gap = f64::INFINITY;
    for a in 0..domains.len() {
        for b in (a + 1)..domains.len() {
            let (ia, sa) = domains[a];
            let (ib, sb) = domains[b];
            let mut min_margin = f64::INFINITY;
            let mut witness = None;
            for (src, dst) in [(a, b), (b, a)] {
                let (is, ss) = domains[src];
                let (id, sd) = domains[dst];
                let frame_s = &group.frameset().frames()[is];
                let frame_d = &group.frameset().frames()[id];
                for _ in 0..samples / 2 {
                    let x = draw_in_domain(frame_s, group.radii()[is], ss, &mut s)?;
                    let margin = wing_distance(frame_d, &x, sd)? - group.radii()[id];
                    if margin < min_margin {
                        min_margin = margin;
                        if margin <= 0.0 && witness.is_none() {
                            witness = Some(x.iter().cloned().collect());
                        }
                    }
                }
            }
            min_domain_gap = min_domain_gap.min(min_margin);
            domain_gaps.push(DomainPairGap {
                a: (ia, sa.sign()),
                b: (ib, sb.sign()),
                min_margin,
                ok: min_margin > 0.0,
                witness,
            });
        }
    }
    let gap_floor = 10.0 * PI / samples as f64;
    let inclusions_ok = inclusions.iter().all(|g| g.ok);
    let disjoint_ok = domain_gaps.iter().all(|g| g.ok) && min_domain_gap >= gap_floor;
    Ok(PingPongReport {
        method: "sampled".into(),
        samples,
        seed,
        inclusions,
        domain_gaps,
        min_inclusion_margin,
        min_domain_gap,
        gap_floor,
        inclusions_ok,
        disjoint_ok,
        passed: inclusions_ok && disjoint_ok,
    })
}

/// One letter of a word: a 1-based generator index and a sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub index: usize,
    pub sign: i8,
}

impl Letter {
    pub fn inverse(self) -> Letter {
        Letter {
            index: self.index,
            sign: -self.sign,
        }
    }
}

/// A word in the generators, leftmost letter applied last.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn new(letters: Vec<Letter>) -> Word {
        Word { letters }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// No letter is adjacent to its own inverse.
    pub fn is_reduced(&self) -> bool {
        self.letters
            .windows(2)
            .all(|w| w[1] != w[0].inverse())
    }

    /// Reduced, and the first letter is not the inverse of the last.
    pub fn is_cyclically_reduced(&self) -> bool {
        self.is_reduced()
            && match (self.letters.first(), self.letters.last()) {
                (Some(first), Some(last)) => *first != last.inverse(),
                _ => true,
            }
    }

    /// Compact label: letters a, b, c, ... with uppercase for inverses.
    pub fn label(&self) -> String {
        if self.letters.is_empty() {
            return "e".into();
        }
        self.letters
            .iter()
            .map(|l| {
                let c = (b'a' + ((l.index - 1) % 26) as u8) as char;
                if l.sign > 0 {
                    c.to_string()
                } else {
                    c.to_uppercase().to_string()
                }
            })
            .collect()
    }
}

/// Which family of words an enumeration produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordMode {
    /// All reduced words, the empty word included.
    Reduced,
    /// All nonempty cyclically reduced words.
    CyclicallyReduced,
}

/// All words up to the length bound in dictionary order by prefix: the
/// alphabet runs (1,+), (1,-), (2,+), (2,-), ... and a word precedes its
/// extensions.
pub fn enumerate_words(n: usize, max_len: usize, mode: WordMode) -> Vec<Word> {
    fn extend(
        alphabet: &[Letter],
        prefix: &mut Vec<Letter>,
        max_len: usize,
        mode: WordMode,
        out: &mut Vec<Word>,
    ) {
        if prefix.len() >= max_len {
            return;
        }
        for &l in alphabet {
            if prefix.last() == Some(&l.inverse()) {
                continue;
            }
            prefix.push(l);
            let w = Word::new(prefix.clone());
            match mode {
                WordMode::Reduced => out.push(w),
                WordMode::CyclicallyReduced => {
                    if w.is_cyclically_reduced() {
                        out.push(w);
                    }
                }
            }
            extend(alphabet, prefix, max_len, mode, out);
            prefix.pop();
        }
    }
    let alphabet: Vec<Letter> = (1..=n)
        .flat_map(|i| [Letter { index: i, sign: 1 }, Letter { index: i, sign: -1 }])
        .collect();
    let mut out = Vec::new();
    if matches!(mode, WordMode::Reduced) {
        out.push(Word::new(Vec::new()));
    }
    let mut prefix = Vec::new();
    extend(&alphabet, &mut prefix, max_len, mode, &mut out);
    out
}

/// The matrices of a word's letters, leftmost first; inverse letters use
/// the form-adjoint inverse, which is exact for form-preserving maps.
fn word_factors(
    ctx: &SpaceContext,
    gens: &[PseudoHyperbolicMap],
    word: &Word,
) -> Result<Vec<DMatrix<f64>>> {
    let mut out = Vec::with_capacity(word.len());
    for l in word.letters() {
        if l.index == 0 || l.index > gens.len() {
            return Err(Error::InvalidParameter(format!(
                "letter index {} outside the {} generators",
                l.index,
                gens.len()
            )));
        }
        let m = gens[l.index - 1].matrix();
        out.push(if l.sign > 0 {
            m.clone()
        } else {
            q_inverse(ctx, m)?
        });
    }
    Ok(out)
}

/// Applies the factored word to a block of columns, rightmost factor first.
fn apply_word(factors: &[DMatrix<f64>], b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = b.clone();
    for f in factors.iter().rev() {
        y = f * y;
    }
    y
}

/// Dominant k-dimensional subspace of the factored product: subspace
/// iteration with re-orthonormalization after every factor, so no
/// intermediate mixes the expanding and contracting scales.
fn factored_dominant(factors: &[DMatrix<f64>], k: usize, seed: u64) -> Result<DMatrix<f64>> {
    let dim = factors[0].nrows();
    let eye = DMatrix::<f64>::identity(dim, dim);
    let mut s = SphereSampler::new(seed);
    let mut b = orthonormal_columns(&eye, &s.gaussian_matrix(dim, k))?;
    let mut stable = 0;
    for _ in 0..WORD_ITERS {
        let mut y = b.clone();
        for f in factors.iter().rev() {
            y = orthonormal_columns(&eye, &(f * y))?;
        }
        let residual = (&y - &b * (b.transpose() * &y)).norm();
        b = y;
        if residual < WORD_SPAN_TOL {
            stable += 1;
            if stable >= 2 {
                return Ok(b);
            }
        } else {
            stable = 0;
        }
    }
    Err(Error::NoConvergence {
        iterations: WORD_ITERS,
    })
}

/// Smallest eigenvalue modulus of a small well-scaled block, through a
/// bounded Schur pass so a stall surfaces as an absence instead of a hang.
fn block_min_modulus(a: &DMatrix<f64>) -> Option<f64> {
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 100_000)?;
    Some(
        schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min),
    )
}

/// Everything the audit measured about one word.
#[derive(Debug, Clone, Serialize)]
pub struct WordFinding {
    pub word: String,
    pub length: usize,
    /// The word has the full contracting/neutral/expanding splitting with
    /// the demanded margins.
    pub pseudohyperbolic: bool,
    /// First failed check, when any.
    pub reason: Option<String>,
    /// Wing separation of the word's own frame.
    pub separation: f64,
    /// Contraction strength of the word.
    pub strength: f64,
    /// Neutral eigenvalue.
    pub eq_value: f64,
    /// Largest principal angle between the word's expanding subspace and
    /// its first letter's.
    pub hausdorff_to_first: f64,
    /// The angle above divided by the group strength.
    pub ratio_to_group: f64,
    /// Distance of the product matrix from the identity.
    pub identity_distance: f64,
    /// Relative drift of the invariant form under the product matrix.
    pub q_drift: f64,
    /// Relative gap between the directly multiplied product and its
    /// reconstruction from the computed frame and blocks.
    pub reconstruction_error: f64,
    /// Whether the direct spectral classification was well-conditioned
    /// enough to run and agreed.
    pub cross_checked: bool,
}

/// Audit of every nonempty cyclically reduced word up to a length bound.
#[derive(Debug, Clone, Serialize)]
pub struct ProductAudit {
    pub max_len: usize,
    pub words_tested: usize,
    pub failures: usize,
    pub passed: bool,
    /// Separation every word must clear: a third of the frameset
    /// separation, less a fixed tolerance.
    pub separation_floor: f64,
    pub min_separation: f64,
    pub max_strength: f64,
    pub max_ratio_to_group: f64,
    pub min_identity_distance: f64,
    pub findings: Vec<WordFinding>,
}

fn audit_word(
    ctx: &SpaceContext,
    group: &SchottkyGroup,
    word: &Word,
    seed: u64,
    separation_floor: f64,
) -> Result<WordFinding> {
    let d = ctx.d();
    let gens = group.generators();
    let factors = word_factors(ctx, gens, word)?;
    let inverse_word = Word::new(word.letters().iter().rev().map(|l| l.inverse()).collect());
    let inv_factors = word_factors(ctx, gens, &inverse_word)?;
    let direct = apply_word(&factors, &DMatrix::identity(ctx.dim(), ctx.dim()));
    let identity_distance = (&direct - DMatrix::<f64>::identity(ctx.dim(), ctx.dim())).norm();
    let gq = ctx.gram_q();
    let q_drift = (direct.transpose() * gq * &direct - gq).norm() / (1.0 + direct.norm_squared());

    let mut finding = WordFinding {
        word: word.label(),
        length: word.len(),
        pseudohyperbolic: false,
        reason: None,
        separation: f64::NAN,
        strength: f64::NAN,
        eq_value: f64::NAN,
        hausdorff_to_first: f64::NAN,
        ratio_to_group: f64::NAN,
        identity_distance,
        q_drift,
        reconstruction_error: f64::NAN,
        cross_checked: false,
    };
    let fail = |f: &mut WordFinding, why: String| {
        if f.reason.is_none() {
            f.reason = Some(why);
        }
    };

    let b_more = match factored_dominant(&factors, d, seed) {
        Ok(b) => b,
        Err(_) => {
            fail(&mut finding, "no dominant expanding subspace emerged".into());
            return Ok(finding);
        }
    };
    let b_less = match factored_dominant(&inv_factors, d, seed ^ 0x9E37_79B9) {
        Ok(b) => b,
        Err(_) => {
            fail(&mut finding, "no dominant contracting subspace emerged".into());
            return Ok(finding);
        }
    };

    // Restrictions to the computed invariant blocks carry the moduli
    // without ever mixing the expanding and contracting scales.
    let y_more = apply_word(&factors, &b_more);
    let a_more = b_more.transpose() * &y_more;
    let invariance = (&y_more - &b_more * &a_more).norm() / y_more.norm().max(1e-300);
    if invariance > INVARIANCE_TOL {
        fail(
            &mut finding,
            format!("expanding subspace not invariant (residual {invariance:.3e})"),
        );
    }
    let y_less = apply_word(&inv_factors, &b_less);
    let a_less = b_less.transpose() * &y_less;
    let inv_invariance = (&y_less - &b_less * &a_less).norm() / y_less.norm().max(1e-300);
    if inv_invariance > INVARIANCE_TOL {
        fail(
            &mut finding,
            format!("contracting subspace not invariant (residual {inv_invariance:.3e})"),
        );
    }
    let min_more = match block_min_modulus(&a_more) {
        Some(v) => v,
        None => {
            fail(&mut finding, "expanding block eigenvalues did not settle".into());
            f64::NAN
        }
    };
    let min_less_inv = match block_min_modulus(&a_less) {
        Some(v) => v,
        None => {
            fail(&mut finding, "contracting block eigenvalues did not settle".into());
            f64::NAN
        }
    };
    if min_more <= 1.0 + BAND {
        fail(
            &mut finding,
            format!("an expanding modulus {min_more:.6} is not above one"),
        );
    }
    if min_less_inv <= 1.0 + BAND {
        fail(
            &mut finding,
            format!(
                "a contracting modulus {:.6} is not below one",
                1.0 / min_less_inv
            ),
        );
    }

    let frame = (|| -> Result<Frame> {
        let sub_less = Subspace::new(ctx, &b_less)?;
        let sub_more = Subspace::new(ctx, &b_more)?;
        let m_less = MtisRep::from_subspace(ctx, &sub_less)?;
        let m_more = MtisRep::from_subspace(ctx, &sub_more)?;
        build_frame(ctx, &m_less, &m_more)
    })();
    let frame = match frame {
        Ok(f) => f,
        Err(e) => {
            if std::env::var("SCHOTTKY_DEBUG_AUDIT").is_ok() {
                eprintln!("DEBUG word {} b_less {:?}", word.label(), b_less.as_slice());
                eprintln!("DEBUG word {} b_more {:?}", word.label(), b_more.as_slice());
            }
            fail(&mut finding, format!("the word's own frame failed to build: {e}"));
            return Ok(finding);
        }
    };
    finding.separation = frame_separation(&frame);
    if finding.separation < separation_floor {
        let msg = format!(
            "separation {:.6} below the floor {separation_floor:.6}",
            finding.separation
        );
        fail(&mut finding, msg);
    }

    // Forward application of the word to its contracting data drowns in
    // rounding amplified through the expanding directions, so both the
    // neutral eigenvalue and the contracting block come from stable routes:
    // the word has determinant one, hence the neutral eigenvalue equals the
    // ratio of the invariant-block determinants, and the restriction of the
    // word to its contracting subspace is the inverse of the well-scaled
    // restriction of the inverse word.
    let eq_value = a_less.determinant() / a_more.determinant();
    finding.eq_value = eq_value;
    if (eq_value.abs() - 1.0).abs() > BAND {
        fail(
            &mut finding,
            format!("neutral eigenvalue {eq_value:.8} leaves the unit band"),
        );
    }

    let g_less = (|| -> Option<DMatrix<f64>> {
        let a_less_inv = a_less.clone().try_inverse()?;
        let basis_less = frame.adapted_frame().columns(0, d).clone_owned();
        let t = b_less.transpose() * &basis_less;
        let t_inv = t.clone().try_inverse()?;
        Some(t_inv * a_less_inv * t)
    })();
    let g_less = match g_less {
        Some(g) => g,
        None => {
            fail(&mut finding, "contracting restriction is not invertible".into());
            return Ok(finding);
        }
    };
    match PseudoHyperbolicMap::new(ctx, frame, g_less) {
        Ok(rebuilt) => {
            finding.strength = rebuilt.strength();
            finding.reconstruction_error =
                (rebuilt.matrix() - &direct).norm() / direct.norm().max(1e-300);
            if finding.reconstruction_error > INVARIANCE_TOL {
                let msg = format!(
                    "reconstruction mismatch {:.3e} against the direct product",
                    finding.reconstruction_error
                );
                fail(&mut finding, msg);
            }
            if !(finding.strength < 1.0) {
                let msg = format!("strength {:.6} is not contracting", finding.strength);
                fail(&mut finding, msg);
            }
        }
        Err(e) => fail(&mut finding, format!("block assembly rejected the word: {e}")),
    }

    if identity_distance <= 0.1 {
        fail(
            &mut finding,
            format!("product sits {identity_distance:.3e} from the identity"),
        );
    }

    let first = word.letters()[0];
    let gen_frame = gens[first.index - 1].frame();
    let target = if first.sign > 0 {
        gen_frame.v_more().subspace()
    } else {
        gen_frame.v_less().subspace()
    };
    let sub_more = Subspace::new(ctx, &b_more)?;
    finding.hausdorff_to_first =
        subspace_hausdorff_angle(&ctx.form_n0(), &sub_more, target)?;
    finding.ratio_to_group = finding.hausdorff_to_first / group.strength().max(1e-300);

    // The direct spectral classification is only meaningful while the
    // product's scales stay resolvable in one eigenproblem.
    let cond = spectral_norm(&direct) * spectral_norm(&apply_word(&inv_factors, &DMatrix::identity(ctx.dim(), ctx.dim())));
    if cond <= CROSS_CHECK_COND {
        if let Ok(direct_verdict) = is_pseudohyperbolic(ctx, &direct) {
            finding.cross_checked = true;
            if direct_verdict != finding.reason.is_none() {
                fail(
                    &mut finding,
                    format!("direct spectral verdict {direct_verdict} disagrees"),
                );
            }
        }
    }

    finding.pseudohyperbolic = finding.reason.is_none();
    Ok(finding)
}

/// Audits every nonempty cyclically reduced word up to `max_len`: the full
/// splitting must exist, the word's wings must stay separated by a third of
/// the frameset separation, the word must contract, sit away from the
/// identity, and its expanding subspace must track the first letter's. The
/// group must have been through certification first.
pub fn audit_products(
    ctx: &SpaceContext,
    group: &SchottkyGroup,
    max_len: usize,
) -> Result<ProductAudit> {
    if group.certified().is_none() {
        return Err(Error::NotCertified(
            "run the sampled certification before the product audit".into(),
        ));
    }
    let words = enumerate_words(group.n(), max_len, WordMode::CyclicallyReduced);
    let separation_floor = group.frameset().separation() / 3.0 - 1e-6;
    let mut findings = Vec::with_capacity(words.len());
    for (k, w) in words.iter().enumerate() {
        let seed = 0x5C07_u64 ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        findings.push(audit_word(ctx, group, w, seed, separation_floor)?);
    }
    let failures = findings.iter().filter(|f| !f.pseudohyperbolic).count();
    let min_separation = findings
        .iter()
        .map(|f| f.separation)
        .fold(f64::INFINITY, f64::min);
    let max_strength = findings
        .iter()
        .map(|f| f.strength)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_ratio_to_group = findings
        .iter()
        .map(|f| f.ratio_to_group)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_identity_distance = findings
        .iter()
        .map(|f| f.identity_distance)
        .fold(f64::INFINITY, f64::min);
    Ok(ProductAudit {
        max_len,
        words_tested: findings.len(),
        failures,
        passed: failures == 0,
        separation_floor,
        min_separation,
        max_strength,
        max_ratio_to_group,
        min_identity_distance,
        findings,
    })
}

/// Serializable description of a group: ambient half-dimension, generator
/// count, family angles, component pairing, contracting blocks (row-major),
/// and the separation budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSpec {
    pub d: usize,
    pub n: usize,
    pub thetas: Vec<f64>,
    pub pairing: Vec<(usize, usize)>,
    pub g_less: Vec<Vec<Vec<f64>>>,
    pub epsilon: f64,
}

impl GroupSpec {
    /// Evenly spaced family angles, opposite-point pairing, and uniform
    /// contracting blocks `strength` times the identity.
    pub fn canonical(d: usize, n: usize, strength: f64, epsilon: f64) -> GroupSpec {
        let thetas = (0..2 * n).map(|k| k as f64 * PI / n as f64).collect();
        let pairing = (0..n).map(|k| (k, k + n)).collect();
        let block: Vec<Vec<f64>> = (0..d)
            .map(|r| (0..d).map(|c| if r == c { strength } else { 0.0 }).collect())
            .collect();
        GroupSpec {
            d,
            n,
            thetas,
            pairing,
            g_less: vec![block; n],
            epsilon,
        }
    }

    /// Builds the context, frameset and group the description names.
    pub fn build(&self) -> Result<(SpaceContext, SchottkyGroup)> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("generator count must be positive".into()));
        }
        if self.g_less.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: self.g_less.len(),
            });
        }
        let ctx = SpaceContext::standard(self.d)?;
        let mut blocks = Vec::with_capacity(self.n);
        for rows in &self.g_less {
            if rows.len() != self.d || rows.iter().any(|r| r.len() != self.d) {
                return Err(Error::DimensionMismatch {
                    expected: self.d,
                    got: rows.len(),
                });
            }
            blocks.push(DMatrix::from_fn(self.d, self.d, |r, c| rows[r][c]));
        }
        let family = generate_transversal_family(&ctx, self.n, &self.thetas)?;
        let frameset = build_frameset(&ctx, &family, &self.pairing)?;
        let group = SchottkyGroup::new(&ctx, frameset, &blocks, self.epsilon)?;
        Ok((ctx, group))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::TOL;

    fn demo(strength: f64) -> (SpaceContext, SchottkyGroup) {
        GroupSpec::canonical(1, 2, strength, 0.75).build().unwrap()
    }

    #[test]
    fn words_enumerate_with_exact_counts() {
        let w = enumerate_words(1, 2, WordMode::Reduced);
        let labels: Vec<String> = w.iter().map(|w| w.label()).collect();
        assert_eq!(labels, vec!["e", "a", "aa", "A", "AA"]);
        let exact2: Vec<Word> = enumerate_words(2, 2, WordMode::Reduced)
            .into_iter()
            .filter(|w| w.len() == 2)
            .collect();
        assert_eq!(exact2.len(), 12);
        for n in 1..=3usize {
            let all = enumerate_words(n, 8, WordMode::Reduced);
            for k in 0..=8usize {
                let count = all.iter().filter(|w| w.len() == k).count();
                let expect = if k == 0 {
                    1
                } else {
                    2 * n * (2 * n - 1).pow(k as u32 - 1)
                };
                assert_eq!(count, expect, "n={n} k={k}");
            }
            assert!(all.iter().all(|w| w.is_reduced()));
        }
        let aba = Word::new(vec![
            Letter { index: 1, sign: 1 },
            Letter { index: 2, sign: 1 },
            Letter { index: 1, sign: -1 },
        ]);
        assert!(aba.is_reduced());
        assert!(!aba.is_cyclically_reduced());
        let cyc = enumerate_words(2, 4, WordMode::CyclicallyReduced);
        assert!(cyc.iter().all(|w| !w.is_empty() && w.is_cyclically_reduced()));
        assert_eq!(
            cyc.iter().filter(|w| w.len() == 1).count(),
            4,
            "single letters are cyclically reduced"
        );
    }

    #[test]
    fn frameset_builds_at_d1_with_all_pairings_checked() {
        let ctx = SpaceContext::standard(1).unwrap();
        let thetas = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
        let fam = generate_transversal_family(&ctx, 2, &thetas).unwrap();
        let fs = build_frameset(&ctx, &fam, &[(0, 2), (1, 3)]).unwrap();
        assert_eq!(fs.n(), 2);
        assert_eq!(fs.frames().len(), 2);
        assert!(fs.separation() > 0.0);
        let diag = frame_separation(&build_frame(&ctx, &fam[0], &fam[1]).unwrap());
        assert!(fs.separation() <= diag + 1e-12, "cross pairings included");

        let dup = vec![fam[0].clone(), fam[0].clone(), fam[2].clone(), fam[3].clone()];
        match build_frameset(&ctx, &dup, &[(0, 2), (1, 3)]) {
            Err(Error::InvalidParameter(msg)) => assert!(msg.contains("not transversal")),
            other => panic!("duplicate component accepted: {other:?}"),
        }
        match build_frameset(&ctx, &fam, &[(0, 2), (1, 2)]) {
            Err(Error::InvalidParameter(msg)) => assert!(msg.contains("twice")),
            other => panic!("reused index accepted: {other:?}"),
        }

        let single = build_frameset(&ctx, &fam[0..2], &[(0, 1)]).unwrap();
        assert_eq!(single.frames().len(), 1);
        assert!((single.separation() - frame_separation(&single.frames()[0])).abs() < 1e-12);
    }

    #[test]
    fn tennis_membership_axis_and_boundary_cases() {
        let (ctx, group) = demo(1e-3);
        let frame = &group.frameset().frames()[0];
        let eps = 0.3;
        let on_more = frame.adapted_frame().column(2).clone_owned();
        assert!(tennis_membership(frame, eps, &on_more, Side::Plus, false).unwrap());
        assert!(tennis_membership(frame, 1e-6, &on_more, Side::Plus, false).unwrap());
        let minus_eq = -frame.u_eq().clone();
        assert!(!tennis_membership(frame, eps, &minus_eq, Side::Plus, false).unwrap());
        assert!(tennis_membership(frame, eps, &minus_eq, Side::Minus, false).unwrap());

        // Exact boundary direction: transverse over wing part equal to tan.
        let coords = {
            let mut c = Vector::zeros(3);
            c[0] = eps.tan();
            c[2] = 1.0;
            c
        };
        let x = frame.adapted_frame() * coords;
        assert!(!tennis_membership(frame, eps, &x, Side::Plus, false).unwrap());
        assert!(tennis_membership(frame, eps, &x, Side::Plus, true).unwrap());
        assert!((wing_distance(frame, &x, Side::Plus).unwrap() - eps).abs() < 1e-12);

        assert!(matches!(
            tennis_membership(frame, eps, &Vector::zeros(3), Side::Plus, false),
            Err(Error::ZeroVector)
        ));
        assert!(tennis_membership(frame, 2.0, &on_more, Side::Plus, false).is_err());
        let _ = ctx;
    }

    #[test]
    fn tan4_bound_oracle_values() {
        let (_, group) = demo(0.005);
        let g = &group.generators()[0];
        assert!((g.strength() - 0.005).abs() < 1e-12, "symmetric frame keeps the block norm");
        let check = check_tan4_bound(g, 0.3);
        assert!(check.holds);
        assert!((check.margin - (0.3f64.tan().powi(4) - 0.005)).abs() < 1e-12);
        let (_, strong) = demo(0.02);
        let check2 = check_tan4_bound(&strong.generators()[0], 0.3);
        assert!(!check2.holds);
        assert!(check2.margin < 0.0);
    }

    #[test]
    fn radii_shrink_by_the_squared_frame_constant() {
        let (_, group) = demo(1e-3);
        for (frame, &r) in group.frameset().frames().iter().zip(group.radii()) {
            let expect = (0.75 / 3.0) / frame.lipschitz_constant().powi(2);
            assert!((r - expect).abs() < 1e-12);
        }
        // The demo frames are orthonormal, so the constant is one.
        assert!((group.radii()[0] - 0.25).abs() < 1e-9);
        assert!(choose_radii(group.frameset(), 2.0).is_err());
    }

    #[test]
    fn local_radius_ball_sits_inside_the_ambient_third() {
        let (_, group) = demo(1e-3);
        let eps_amb = group.epsilon() / 3.0;
        let mut s = SphereSampler::new(99);
        for (k, frame) in group.frameset().frames().iter().enumerate() {
            let eps_i = group.radii()[k];
            for side in [Side::Minus, Side::Plus] {
                for _ in 0..250 {
                    let x = draw_in_domain(frame, eps_i, side, &mut s).unwrap();
                    let wing = match side {
                        Side::Minus => frame.wing_less(),
                        Side::Plus => frame.wing_more(),
                    };
                    let ambient = wing.cone().angle_to(&x).unwrap();
                    assert!(
                        ambient <= eps_amb + 1e-9,
                        "local ball leaked to ambient angle {ambient}"
                    );
                }
            }
        }
    }

    #[test]
    fn spec_round_trips_and_validates() {
        let spec = GroupSpec::canonical(1, 2, 1e-3, 0.75);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"pairing\":[[0,2],[1,3]]"));
        let back: GroupSpec = serde_json::from_str(&text).unwrap();
        let (_, group) = back.build().unwrap();
        assert!(group.strength() >= 1e-3 && group.strength() < 1.1e-3);
        assert_eq!(group.n(), 2);
        assert!(group.certified().is_none());

        let mut bad = spec.clone();
        bad.thetas.pop();
        assert!(bad.build().is_err());
        let mut bad2 = spec.clone();
        bad2.pairing[1] = (1, 5);
        assert!(bad2.build().is_err());
        let mut bad3 = spec.clone();
        bad3.epsilon = 2.0;
        assert!(matches!(bad3.build(), Err(Error::InvalidParameter(_))));
        let mut bad4 = spec;
        bad4.g_less[0] = vec![vec![0.1, 0.0]];
        assert!(bad4.build().is_err());
    }

    #[test]
    fn ping_pong_demo_passes_and_sabotage_leaks() {
        let (ctx, mut group) = demo(1e-3);
        let report = group.certify(&ctx, 4000, 7).unwrap();
        assert!(report.passed, "demo certification: {report:?}");
        assert!(report.min_inclusion_margin > 1e-3);
        assert!(report.min_domain_gap > report.gap_floor);
        assert!(group.is_certified());
        assert!(group.certified().unwrap().tan4);
        let text = serde_json::to_string(&report).unwrap();
        assert!(text.contains("\"method\":\"sampled\""));

        let (ctx2, mut weak) = demo(0.5);
        let report2 = weak.certify(&ctx2, 10_000, 7).unwrap();
        assert!(!report2.inclusions_ok, "strength 0.5 must leak");
        assert!(report2
            .inclusions
            .iter()
            .any(|g| g.witness.is_some()));
        assert!(!weak.certified().unwrap().tan4);
        assert!(!weak.is_certified());
    }

    #[test]
    fn determinism_of_certification_reports() {
        let (ctx, mut group) = demo(1e-3);
        let a = serde_json::to_string(&group.certify(&ctx, 500, 11).unwrap()).unwrap();
        let b = serde_json::to_string(&group.certify(&ctx, 500, 11).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&group.certify(&ctx, 500, 12).unwrap()).unwrap();
        assert_ne!(a, c, "a new seed reshuffles the samples");
    }

    #[test]
    fn word_audit_passes_on_the_demo_group() {
        let (ctx, mut group) = demo(1e-3);
        group.certify(&ctx, 1000, 3).unwrap();
        let audit = audit_products(&ctx, &group, 3).unwrap();
        assert!(audit.passed, "failures: {:?}", audit
            .findings
            .iter()
            .filter(|f| !f.pseudohyperbolic)
            .map(|f| (&f.word, &f.reason))
            .collect::<Vec<_>>());
        assert_eq!(
            audit.words_tested,
            enumerate_words(2, 3, WordMode::CyclicallyReduced).len()
        );
        assert!(audit.min_separation >= audit.separation_floor);
        assert!(audit.max_strength < 1.0);
        assert!(audit.min_identity_distance > 0.1);
        let single = &audit.findings[0];
        assert_eq!(single.word, "a");
        assert!(
            (single.separation - frame_separation(&group.frameset().frames()[0])).abs() < TOL,
            "a single letter keeps its generator's separation"
        );
        assert!(single.cross_checked, "length-one products stay well-conditioned");
        assert!(audit.findings.iter().all(|f| f.q_drift < 1e-10));
    }

    #[test]
    fn weak_group_audit_reports_failures() {
        let (ctx, mut weak) = demo(0.5);
        weak.certify(&ctx, 500, 5).unwrap();
        let audit = audit_products(&ctx, &weak, 4).unwrap();
        assert!(!audit.passed);
        assert!(audit.failures > 0, "commutator-type words lose their splitting");
        assert!(audit
            .findings
            .iter()
            .any(|f| f.length == 4 && f.reason.is_some()));
        assert!(
            audit.findings.iter().filter(|f| f.cross_checked).count() > 0,
            "mild products admit the direct spectral cross-check"
        );
    }

    #[test]
    fn word_audit_requires_a_certification_run() {
        let (ctx, group) = demo(1e-3);
        assert!(matches!(
            audit_products(&ctx, &group, 2),
            Err(Error::NotCertified(_))
        ));
    }
}
