//! Command-line driver for the library: generates group descriptions, runs
//! the sampled certification suite, pulls points back to tiles of the
//! fundamental domain, and exports plot-ready point clouds.
//!
//! Exit codes are part of the interface:
//!
//! * 0: every requested check passed;
//! * 1: a check ran to completion and failed, with witnesses in the report;
//! * 2: no verdict was reachable: refused configurations (even split
//!   dimension), spectral guard bands, convergence failures;
//! * 3: malformed input: unreadable or invalid descriptions, bad flags;
//! * 4: a missing precondition: tracing or tiling against a group whose
//!   certification failed, or an inadmissible translation vector.
//!
//! All randomness flows from the single `--seed` flag; a rerun with the same
//! flags writes byte-identical reports and files. Sampled verdicts refuse
//! fewer than 100 samples and always record seed and sample count. CSV
//! outputs open with a `# schema:` comment line pinning their column layout,
//! and every command assembles its full output in memory before writing, so
//! partial files never appear.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use schottky_core::{
    audit_products, canonical_translations, check_tan4_bound, draw_in_domain, tennis_membership,
    trace_point, verify_angle_control, verify_translations, AdmissibilityReport,
    AffineDeformation, AngleControlReport, Error, GroupSpec, PingPongReport, ProductAudit,
    SchottkyGroup, Side, SpaceContext, SphereSampler, Tan4Check, TraceStatus, Vector,
};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_BAD_INPUT: u8 = 3;
const EXIT_PRECONDITION: u8 = 4;

/// Smallest sample count a sampled verdict accepts.
const MIN_SAMPLES: usize = 100;

/// Bisection steps when hunting a domain boundary direction for export.
const EXPORT_BISECTS: usize = 40;

#[derive(Parser)]
#[command(
    name = "schottky",
    version,
    about = "Builds, certifies, traces and exports affine ping-pong groups over a split quadratic form"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a JSON group description with evenly spaced frames
    Gen(GenArgs),
    /// Run the sampled certification suite and write a JSON report
    Certify(CertifyArgs),
    /// Pull points back to tiles of the fundamental domain, as CSV
    Trace(TraceArgs),
    /// Write deterministic CSV point clouds for external plotting
    Export(ExportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Isotropic dimension d of the signature (d+1, d); must be odd
    #[arg(long)]
    d: usize,
    /// Number of generators
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Contraction strength shared by all generators, in (0, 1)
    #[arg(long, default_value_t = 1e-3)]
    strength: f64,
    /// Angular separation budget for the domains, in (0, pi/2]
    #[arg(long, default_value_t = 0.75)]
    epsilon: f64,
    /// Comma-separated list of 2n family angles replacing the even spacing
    #[arg(long)]
    thetas: Option<String>,
    /// Output path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    /// Group description JSON produced by gen (or written by hand)
    spec: PathBuf,
    /// Sample count per sampled verdict (at least 100)
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Seed for every sampled verdict in the run
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Longest cyclically reduced word the product audit checks
    #[arg(long, default_value_t = 3)]
    max_len: usize,
    /// Report path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// Group description JSON produced by gen (or written by hand)
    spec: PathBuf,
    /// Trace this many random points from a ball around the origin
    #[arg(long)]
    random: Option<usize>,
    /// CSV file of starting points, one comma-separated point per line
    #[arg(long)]
    points: Option<PathBuf>,
    /// Pullback steps allowed before a trace is abandoned
    #[arg(long, default_value_t = 60)]
    max_steps: usize,
    /// Sample count for the certification gate (at least 100)
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Seed for every sampled verdict in the run
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Proceed past a failed certification; deeper layers may still refuse
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ExportArgs {
    /// Group description JSON produced by gen (or written by hand)
    spec: PathBuf,
    /// Which point clouds to write
    #[arg(long, value_enum)]
    what: What,
    /// Points per cloud; must be positive
    #[arg(long, default_value_t = 200)]
    resolution: usize,
    /// Sample count for the certification gate (at least 100)
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Seed for every sampled draw in the run
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Proceed past a failed certification; deeper layers may still refuse
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    /// Half-plane clouds of the positive wings of every frame
    Wings,
    /// Lateral boundaries of the shifted source and sink cones
    Domains,
    /// Boundaries of the first-generation tiles of the fundamental domain
    Tiles,
}

/// The resolved run parameters, echoed into every JSON report so a verdict
/// names the exact configuration that produced it.
#[derive(Serialize)]
struct RunConfig {
    command: String,
    spec_path: String,
    seed: u64,
    samples: usize,
    max_len: Option<usize>,
}

#[derive(Serialize)]
struct CertifyReport {
    schema: &'static str,
    config: RunConfig,
    spec: GroupSpec,
    ping_pong: PingPongReport,
    tan4: Vec<Tan4Check>,
    tan4_ok: bool,
    /// Absent when the sampled certification failed: every later stage
    /// builds on a certified group and is skipped instead of guessed.
    products: Option<ProductAudit>,
    translations: Option<Vec<Vec<f64>>>,
    admissibility: Option<AdmissibilityReport>,
    angle_control: AngleControlReport,
    passed: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version are requested output, not input mistakes.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_BAD_INPUT,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Certify(a) => cmd_certify(a),
        Cmd::Trace(a) => cmd_trace(a),
        Cmd::Export(a) => cmd_export(a),
    };
    let _ = std::io::stdout().flush();
    ExitCode::from(code)
}

/// Exit code for a core error raised after the description itself was
/// accepted: guard bands and convergence failures mean "no verdict", a
/// missing certification or inadmissible translations mean "precondition".
fn verdictless(e: &Error) -> u8 {
    match e {
        Error::NotCertified(_) => EXIT_PRECONDITION,
        Error::InvalidParameter(msg) if msg.contains("not admissible") => EXIT_PRECONDITION,
        _ => EXIT_INCONCLUSIVE,
    }
}

fn load_spec(path: &Path) -> Result<GroupSpec, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| format!("malformed group description {}: {e}", path.display()))
}

fn write_output(out: Option<&PathBuf>, content: &str) -> Result<(), String> {
    match out {
        Some(p) => {
            fs::write(p, content).map_err(|e| format!("cannot write {}: {e}", p.display()))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn check_samples(samples: usize) -> Result<(), u8> {
    if samples < MIN_SAMPLES {
        eprintln!("sampled verdicts need at least {MIN_SAMPLES} samples, got {samples}");
        return Err(EXIT_BAD_INPUT);
    }
    Ok(())
}

/// Loads and builds a description; both failure modes are bad input.
fn build_from(path: &Path) -> Result<(SpaceContext, SchottkyGroup), u8> {
    let spec = load_spec(path).map_err(|m| {
        eprintln!("{m}");
        EXIT_BAD_INPUT
    })?;
    spec.build().map_err(|e| {
        eprintln!("description does not build: {e}");
        EXIT_BAD_INPUT
    })
}

fn cmd_gen(a: GenArgs) -> u8 {
    if a.d % 2 == 0 {
        eprintln!(
            "refused: d = {} is even, and for even d the positive wings of any two \
             transversal maximal isotropic subspaces share a common direction, so no \
             family of separated ping-pong domains exists",
            a.d
        );
        return EXIT_INCONCLUSIVE;
    }
    if a.n == 0 {
        eprintln!("generator count must be positive");
        return EXIT_BAD_INPUT;
    }
    if !(a.strength > 0.0 && a.strength < 1.0) {
        eprintln!("contraction strength must lie in (0, 1), got {}", a.strength);
        return EXIT_BAD_INPUT;
    }
    if !(a.epsilon > 0.0 && a.epsilon <= std::f64::consts::FRAC_PI_2) {
        eprintln!("separation budget must lie in (0, pi/2], got {}", a.epsilon);
        return EXIT_BAD_INPUT;
    }
    let mut spec = GroupSpec::canonical(a.d, a.n, a.strength, a.epsilon);
    if let Some(list) = &a.thetas {
        let parsed: Result<Vec<f64>, _> =
            list.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 2 * a.n => spec.thetas = v,
            Ok(v) => {
                eprintln!("expected {} family angles, got {}", 2 * a.n, v.len());
                return EXIT_BAD_INPUT;
            }
            Err(e) => {
                eprintln!("bad angle list: {e}");
                return EXIT_BAD_INPUT;
            }
        }
    }
    // A description that cannot build helps nobody downstream.
    if let Err(e) = spec.build() {
        eprintln!("description does not build: {e}");
        return EXIT_BAD_INPUT;
    }
    let json = match serde_json::to_string_pretty(&spec) {
        Ok(j) => j + "\n",
        Err(e) => {
            eprintln!("cannot serialize description: {e}");
            return EXIT_BAD_INPUT;
        }
    };
    match write_output(a.out.as_ref(), &json) {
        Ok(()) => EXIT_PASS,
        Err(m) => {
            eprintln!("{m}");
            EXIT_BAD_INPUT
        }
    }
}

fn cmd_certify(a: CertifyArgs) -> u8 {
    if let Err(code) = check_samples(a.samples) {
        return code;
    }
    let (ctx, mut group) = match build_from(&a.spec) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let ping_pong = match group.certify(&ctx, a.samples, a.seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("certification aborted: {e}");
            return verdictless(&e);
        }
    };
    let radii = group.radii().to_vec();
    let tan4: Vec<Tan4Check> = group
        .generators()
        .iter()
        .zip(&radii)
        .map(|(g, &r)| check_tan4_bound(g, r))
        .collect();
    let tan4_ok = tan4.iter().all(|t| t.holds);

    let mut products = None;
    let mut translations = None;
    let mut admissibility = None;
    if group.is_certified() {
        products = match audit_products(&ctx, &group, a.max_len) {
            Ok(r) => Some(r),
            Err(e) => {
                eprintln!("product audit aborted: {e}");
                return verdictless(&e);
            }
        };
        let t0 = match canonical_translations(&group) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("translation construction failed: {e}");
                return verdictless(&e);
            }
        };
        admissibility =
            match verify_translations(&ctx, &group, &t0, a.samples, a.seed ^ 0xAD15) {
                Ok(r) => Some(r),
                Err(e) => {
                    eprintln!("admissibility scan aborted: {e}");
                    return verdictless(&e);
                }
            };
        translations = Some(t0.iter().map(|t| t.iter().copied().collect()).collect());
    }
    let angle_control = match verify_angle_control(&ctx, a.samples, a.seed ^ 0xA61E) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("angle control aborted: {e}");
            return verdictless(&e);
        }
    };

    let passed = ping_pong.passed
        && tan4_ok
        && products.as_ref().is_some_and(|p| p.passed)
        && admissibility.as_ref().is_some_and(|r| r.admissible)
        && angle_control.passed;
    let report = CertifyReport {
        schema: "certify v1",
        config: RunConfig {
            command: "certify".into(),
            spec_path: a.spec.display().to_string(),
            seed: a.seed,
            samples: a.samples,
            max_len: Some(a.max_len),
        },
        spec: load_spec(&a.spec).expect("already parsed once"),
        ping_pong,
        tan4,
        tan4_ok,
        products,
        translations,
        admissibility,
        angle_control,
        passed,
    };
    let json = match serde_json::to_string_pretty(&report) {
        Ok(j) => j + "\n",
        Err(e) => {
            eprintln!("cannot serialize report: {e}");
            return EXIT_INCONCLUSIVE;
        }
    };
    if let Err(m) = write_output(a.out.as_ref(), &json) {
        eprintln!("{m}");
        return EXIT_BAD_INPUT;
    }
    if report.passed {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// Certifies the group and applies the precondition gate shared by trace
/// and export: a failed certification stops the run unless forced.
fn certified_deformation(
    ctx: &SpaceContext,
    mut group: SchottkyGroup,
    samples: usize,
    seed: u64,
    force: bool,
) -> Result<AffineDeformation, u8> {
    if let Err(e) = group.certify(ctx, samples, seed) {
        eprintln!("certification aborted: {e}");
        return Err(verdictless(&e));
    }
    if !group.is_certified() {
        if !force {
            eprintln!(
                "group failed its sampled certification; rerun with --force to proceed anyway"
            );
            return Err(EXIT_PRECONDITION);
        }
        eprintln!("warning: proceeding past a failed certification (--force)");
    }
    let t0 = canonical_translations(&group).map_err(|e| {
        eprintln!("translation construction failed: {e}");
        verdictless(&e)
    })?;
    let def = AffineDeformation::new(ctx, &group, &t0).map_err(|e| {
        eprintln!("deformation rejected: {e}");
        verdictless(&e)
    })?;
    if !def.admissible() {
        eprintln!(
            "canonical translations scanned inadmissible: shifted cones come within {:.3e}",
            def.d_min()
        );
        return Err(EXIT_PRECONDITION);
    }
    Ok(def)
}

fn status_label(s: &TraceStatus) -> &'static str {
    match s {
        TraceStatus::Landed => "landed",
        TraceStatus::BudgetExhausted => "budget",
        TraceStatus::Diverged { .. } => "diverged",
    }
}

fn push_coords(row: &mut String, x: &Vector) {
    for v in x.iter() {
        let _ = write!(row, ",{v}");
    }
}

fn cmd_trace(a: TraceArgs) -> u8 {
    if let Err(code) = check_samples(a.samples) {
        return code;
    }
    let starts_spec = (a.random, a.points.as_ref());
    if matches!(starts_spec, (None, None) | (Some(_), Some(_))) {
        eprintln!("pass exactly one of --random N or --points FILE");
        return EXIT_BAD_INPUT;
    }
    let (ctx, group) = match build_from(&a.spec) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let dim = ctx.dim();
    let def = match certified_deformation(&ctx, group, a.samples, a.seed, a.force) {
        Ok(d) => d,
        Err(code) => return code,
    };

    let starts: Vec<Vector> = match (a.random, a.points.as_ref()) {
        (Some(count), None) => {
            if count == 0 {
                eprintln!("--random needs a positive count");
                return EXIT_BAD_INPUT;
            }
            let radius = 10.0
                * def
                    .translations()
                    .iter()
                    .map(|t| t.norm())
                    .fold(0.0_f64, f64::max);
            let mut smp = SphereSampler::new(a.seed ^ 0x7ACE);
            (0..count)
                .map(|_| {
                    let r = radius * smp.uniform(0.0, 1.0).powf(1.0 / dim as f64);
                    smp.unit(dim) * r
                })
                .collect()
        }
        (None, Some(path)) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", path.display());
                    return EXIT_BAD_INPUT;
                }
            };
            let mut pts = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let coords: Result<Vec<f64>, _> =
                    line.split(',').map(|s| s.trim().parse::<f64>()).collect();
                match coords {
                    Ok(c) if c.len() == dim => pts.push(Vector::from_vec(c)),
                    Ok(c) => {
                        eprintln!(
                            "line {}: expected {dim} coordinates, got {}",
                            lineno + 1,
                            c.len()
                        );
                        return EXIT_BAD_INPUT;
                    }
                    Err(e) => {
                        eprintln!("line {}: bad coordinate: {e}", lineno + 1);
                        return EXIT_BAD_INPUT;
                    }
                }
            }
            if pts.is_empty() {
                eprintln!("{} holds no points", path.display());
                return EXIT_BAD_INPUT;
            }
            pts
        }
        _ => unreachable!("validated above"),
    };

    let mut csv = String::from("# schema: trace v1\n");
    let _ = write!(csv, "point,status,step,i,sigma");
    for k in 0..dim {
        let _ = write!(csv, ",c{k}");
    }
    csv.push_str(",a,delta\n");

    let mut landed = 0_usize;
    let mut delta_floor = f64::INFINITY;
    for (p_idx, x0) in starts.iter().enumerate() {
        let trace = match trace_point(&ctx, &def, x0, a.max_steps) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("trace of point {p_idx} failed: {e}");
                return verdictless(&e);
            }
        };
        let label = status_label(trace.status());
        if *trace.status() == TraceStatus::Landed {
            landed += 1;
        }
        if trace.letters().is_empty() {
            // Already in the fundamental domain: one row, no letter.
            let mut row = format!("{p_idx},{label},0,,");
            push_coords(&mut row, x0);
            csv.push_str(&row);
            csv.push_str(",,\n");
            continue;
        }
        let rows = trace.gaps().map(|g| g.rows.as_slice()).unwrap_or(&[]);
        if let Some(g) = trace.gaps() {
            if let Some(m) = g.min_flagged_delta {
                delta_floor = delta_floor.min(m);
            }
        }
        for (k, letter) in trace.letters().iter().enumerate() {
            let mut row = format!(
                "{p_idx},{label},{},{},{}",
                k + 1,
                letter.index,
                letter.sign
            );
            push_coords(&mut row, &trace.points()[k]);
            match rows.get(k) {
                Some(r) => {
                    let _ = write!(row, ",{}", r.a);
                    match r.delta {
                        Some(dl) => {
                            let _ = write!(row, ",{dl}");
                        }
                        None => row.push(','),
                    }
                }
                None => row.push_str(",,"),
            }
            row.push('\n');
            csv.push_str(&row);
        }
    }
    let rate = landed as f64 / starts.len() as f64;
    let floor_text = if delta_floor.is_finite() {
        format!("{delta_floor:e}")
    } else {
        "none".to_string()
    };
    let summary = format!(
        "landed {landed}/{} rate {rate:.4} flagged_delta_floor {floor_text}",
        starts.len()
    );
    let _ = writeln!(csv, "# {summary}");
    if let Err(m) = write_output(a.out.as_ref(), &csv) {
        eprintln!("{m}");
        return EXIT_BAD_INPUT;
    }
    if a.out.is_some() {
        println!("{summary}");
    }
    if landed == starts.len() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// A unit direction on the lateral boundary of a tennis-ball domain, found
/// by bisecting the arc between an interior and an exterior direction.
fn boundary_direction(
    frame: &schottky_core::Frame,
    eps: f64,
    side: Side,
    smp: &mut SphereSampler,
) -> Result<Vector, Error> {
    let mut inside = draw_in_domain(frame, eps, side, smp)?;
    let dim = inside.len();
    let mut outside = None;
    for _ in 0..200 {
        let w = smp.unit(dim);
        if !tennis_membership(frame, eps, &w, side, true)? {
            outside = Some(w);
            break;
        }
    }
    let mut outside = outside.ok_or(Error::EmptySampleSet)?;
    for _ in 0..EXPORT_BISECTS {
        let mut mid = (&inside + &outside) * 0.5;
        let n = mid.norm();
        if n < 1e-12 {
            // Nearly antipodal endpoints: nudge off the degenerate chord.
            mid = &inside + smp.unit(dim) * 1e-6;
            mid /= mid.norm();
        } else {
            mid /= n;
        }
        if tennis_membership(frame, eps, &mid, side, true)? {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(inside)
}

fn cmd_export(a: ExportArgs) -> u8 {
    if a.resolution == 0 {
        eprintln!("resolution must be positive");
        return EXIT_BAD_INPUT;
    }
    if let Err(code) = check_samples(a.samples) {
        return code;
    }
    let (ctx, group) = match build_from(&a.spec) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let dim = ctx.dim();
    let mut csv = String::from("# schema: export v1\n");
    let _ = write!(csv, "set,index,side");
    for k in 0..dim {
        let _ = write!(csv, ",c{k}");
    }
    csv.push('\n');
    let mut smp = SphereSampler::new(a.seed ^ 0xE590);

    match a.what {
        What::Wings => {
            // Each wing is the affine span of its subspace swept toward the
            // apex direction: coefficients fill a box, the apex coefficient
            // stays nonnegative.
            for (f_idx, frame) in group.frameset().frames().iter().enumerate() {
                for (tag, wing) in [("-", frame.wing_less()), ("+", frame.wing_more())] {
                    let basis = wing.mtis().basis();
                    for _ in 0..a.resolution {
                        let mut x = wing.apex() * smp.uniform(0.0, 2.0);
                        for j in 0..basis.ncols() {
                            x += basis.column(j) * smp.uniform(-2.0, 2.0);
                        }
                        let mut row = format!("wing,{f_idx},{tag}");
                        push_coords(&mut row, &x);
                        row.push('\n');
                        csv.push_str(&row);
                    }
                }
            }
        }
        What::Domains | What::Tiles => {
            let def = match certified_deformation(&ctx, group, a.samples, a.seed, a.force) {
                Ok(d) => d,
                Err(code) => return code,
            };
            let reach = 2.0
                * (1.0
                    + def
                        .centers()
                        .iter()
                        .map(|c| c.norm())
                        .fold(0.0_f64, f64::max));
            let n = def.group().n();
            for i in 0..n {
                let frame = &def.group().frameset().frames()[i];
                let eps = def.group().radii()[i];
                for side in [Side::Minus, Side::Plus] {
                    let tag = if side == Side::Plus { "+" } else { "-" };
                    for _ in 0..a.resolution {
                        let (set, x) = match a.what {
                            What::Domains => {
                                let dir = match boundary_direction(frame, eps, side, &mut smp) {
                                    Ok(d) => d,
                                    Err(e) => {
                                        eprintln!("boundary sampling failed: {e}");
                                        return EXIT_INCONCLUSIVE;
                                    }
                                };
                                let r = reach * smp.uniform(0.0, 1.0);
                                ("domain", def.apex(i, side) + dir * r)
                            }
                            What::Tiles => {
                                // Both tile boundaries are carried by the
                                // minus cone's lateral boundary: the plus
                                // tile's is its image under the generator.
                                let dir =
                                    match boundary_direction(frame, eps, Side::Minus, &mut smp) {
                                        Ok(d) => d,
                                        Err(e) => {
                                            eprintln!("boundary sampling failed: {e}");
                                            return EXIT_INCONCLUSIVE;
                                        }
                                    };
                                let r = reach * smp.uniform(0.0, 1.0);
                                let base = def.apex(i, Side::Minus) + dir * r;
                                let x = match side {
                                    Side::Minus => base,
                                    Side::Plus => def.map(i).apply(&base),
                                };
                                ("tile", x)
                            }
                            What::Wings => unreachable!("handled above"),
                        };
                        let mut row = format!("{set},{i},{tag}");
                        push_coords(&mut row, &x);
                        row.push('\n');
                        csv.push_str(&row);
                    }
                }
            }
        }
    }
    match write_output(a.out.as_ref(), &csv) {
        Ok(()) => EXIT_PASS,
        Err(m) => {
            eprintln!("{m}");
            EXIT_BAD_INPUT
        }
    }
}
