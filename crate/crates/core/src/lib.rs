//! Affine transformation groups of R^(2d+1) preserving a quadratic form of
//! signature (d+1, d), for odd d.
//!
//! The crate builds free groups of affine transformations acting properly
//! discontinuously, certifies the ping-pong dynamics at floating point, and
//! tiles the complement of the group's fundamental domain:
//!
//! * [`geometry`]: the ambient quadratic space, its positive/negative
//!   splitting, forms, angles between vectors and subspaces;
//! * [`mtis`]: maximal totally isotropic subspaces, their parametrization by
//!   orthogonal maps, wings and frames;
//! * [`pseudo`]: pseudohyperbolic maps (contracting/neutral/expanding
//!   splitting with a one-dimensional fixed line) and their spectral analysis;
//! * [`exterior`]: the d-th exterior power, proximal maps, and the transfer
//!   of contraction estimates between the two representations;
//! * [`schottky`]: framesets, tennis-ball domains on the sphere, ping-pong
//!   certification, and audits of all short products;
//! * [`affine`]: affine deformations, the translation cone, point
//!   classification against the tiling, and tile traces.
//!
//! All certification verdicts obtained by sampling are labeled as such and
//! report their margin and sample count. Every sampling routine takes an
//! explicit seed; identical seeds give identical results.
//!
//! All public types are `Clone + Send + Sync` and the operations are pure
//! (no interior mutability, no globals), so batch drivers may fan work out
//! across threads freely.

pub mod affine;
pub mod cone;
pub mod error;
pub mod exterior;
pub mod geometry;
pub mod mtis;
pub mod pseudo;
pub mod sample;
pub mod schottky;

/// Global comparison tolerance for exact identities checked in floating point.
pub const TOL: f64 = 1e-8;

/// Half-width of the eigenvalue-modulus band treated as "modulus one" by the
/// spectral splitting.
pub const BAND: f64 = 1e-6;

/// Guard band around the modulus-one band: moduli inside the guard but outside
/// the band make the splitting inconclusive rather than risking a wrong
/// classification.
pub const BAND_GUARD: f64 = 1e-5;

/// Largest admissible spectral radius for the contracting part of a
/// pseudohyperbolic map; keeps every spectral gap resolvable in f64.
pub const RHO_MAX: f64 = 1.0 - 1e-4;

/// Minimal relative spectral gap for a dominant eigenvalue to count as
/// strictly maximal: the runner-up modulus must fall below the leading one
/// by this factor.
pub const PROX_GAP: f64 = 1e-6;

/// Relative width of the band around region boundaries inside which point
/// classification declines to give an open/closed verdict.
pub const BOUNDARY_BAND: f64 = 1e-7;

/// Relative drift of the invariant form above which composed maps are
/// re-orthogonalized.
pub const DRIFT_LIMIT: f64 = TOL / 10.0;

pub use affine::{
    canonical_translations, classify_point, cone_membership, gap_sequence, quotient_report,
    solve_center, tile_membership, trace_point, verify_angle_control, verify_translations,
    AdmissibilityReport, AffineDeformation, AffineMap, AngleControlReport, GapReport, GapRow,
    PointClass, QuotientReport, TileTrace, TraceStatus,
};
pub use error::{Error, Result};
pub use exterior::{
    analyze_proximal, audit_proximal_system, check_correspondence, ext_form, ext_operator,
    lipschitz_on_set, wedge_line, CorrespondenceReport, ExtIndex, ExtOperator, MemberReport,
    PairAngle, ProjectiveRegion, ProximalData, ProximalSystemAudit, SandwichRow,
};
pub use geometry::{
    angle, lipschitz_between, set_min_angle, subspace_hausdorff_angle, subspace_intersection,
    subspace_min_angle, FormHandle, SpaceContext, Subspace, Vector,
};
pub use mtis::{
    build_frame, frame_separation, generate_transversal_family, is_transversal, positive_wing,
    transversality_margin, wings_intersection_check, Frame, MtisRep, Wing, WingsVerdict,
};
pub use pseudo::{
    is_pseudohyperbolic, spectral_split, PseudoHyperbolicMap, PseudoMapRepr, SpectralSplit,
};
pub use sample::SphereSampler;
pub use schottky::{
    audit_products, build_frameset, check_tan4_bound, choose_radii, draw_in_domain,
    enumerate_words, tennis_membership, verify_ping_pong_sphere, Certification, DomainPairGap,
    Frameset, GeneratorMargin, GroupSpec, Letter, PingPongReport, ProductAudit, SchottkyGroup,
    Side, Tan4Check, Word, WordFinding, WordMode,
};
