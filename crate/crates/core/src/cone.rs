//! Convex cones of the form {v + c e : v in a subspace, c >= 0} and the
//! angular distance between two such cones.
//!
//! The metric projection onto such a cone has a closed form: project onto the
//! full span, then clamp the apex coefficient at zero. The smallest angle
//! between two cones is found by alternating maximization of the inner
//! product, each half-step being an exact projection; multistart guards
//! against local optima, and a sampled sweep cross-checks the result.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{orthonormal_columns, Vector};
use crate::sample::SphereSampler;

/// A closed convex cone spanned by a subspace and one half-direction, with a
/// fixed ambient positive-definite metric.
#[derive(Debug, Clone)]
pub struct ConvexCone {
    /// Metric-orthonormal basis of the subspace part (may have 0 columns).
    span: DMatrix<f64>,
    /// Metric-unit apex direction, orthogonal to the span; `None` for a plain
    /// subspace.
    apex: Option<Vector>,
    gram: DMatrix<f64>,
}

impl ConvexCone {
    /// Builds the cone {v + c e : v in span(columns), c >= 0} under `gram`.
    pub fn new(gram: &DMatrix<f64>, span: &DMatrix<f64>, apex: Option<&Vector>) -> Result<Self> {
        let span_on = if span.ncols() == 0 {
            span.clone()
        } else {
            orthonormal_columns(gram, span)?
        };
        let apex_unit = match apex {
            None => None,
            Some(e) => {
                let mut r = e.clone();
                if span_on.ncols() > 0 {
                    let coeff = span_on.transpose() * gram * &r;
                    r -= &span_on * coeff;
                }
                let n = (r.transpose() * gram * &r)[(0, 0)].max(0.0).sqrt();
                if n < 1e-12 * e.norm().max(1.0) {
                    return Err(Error::InvalidParameter(
                        "apex direction lies in the cone's subspace part".into(),
                    ));
                }
                Some(r / n)
            }
        };
        Ok(Self {
            span: span_on,
            apex: apex_unit,
            gram: gram.clone(),
        })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn span(&self) -> &DMatrix<f64> {
        &self.span
    }

    pub fn apex(&self) -> Option<&Vector> {
        self.apex.as_ref()
    }

    fn inner(&self, x: &Vector, y: &Vector) -> f64 {
        (x.transpose() * &self.gram * y)[(0, 0)]
    }

    fn norm(&self, x: &Vector) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// Metric projection onto the cone.
    pub fn project(&self, x: &Vector) -> Vector {
        let mut p = Vector::zeros(x.len());
        if self.span.ncols() > 0 {
            let coeff = self.span.transpose() * &self.gram * x;
            p += &self.span * coeff;
        }
        if let Some(e) = &self.apex {
            let c = self.inner(e, x);
            if c > 0.0 {
                p += e * c;
            }
        }
        p
    }

    /// Signed decomposition data: (subspace coefficients, apex coefficient,
    /// residual norm outside span + apex).
    pub fn decompose(&self, x: &Vector) -> (Vector, f64, f64) {
        let coeff = if self.span.ncols() > 0 {
            self.span.transpose() * &self.gram * x
        } else {
            Vector::zeros(0)
        };
        let c = self.apex.as_ref().map_or(0.0, |e| self.inner(e, x));
        let mut r = x.clone();
        if self.span.ncols() > 0 {
            r -= &self.span * &coeff;
        }
        if let Some(e) = &self.apex {
            r -= e * c;
        }
        (coeff, c, self.norm(&r))
    }

    /// Membership up to tolerance: inside the linear span of the cone and
    /// with apex coefficient bounded below by -tol * |x|.
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        let nx = self.norm(x);
        let (_, c, residual) = self.decompose(x);
        residual <= tol * (1.0 + nx) && c >= -tol * nx
    }

    /// Unit vector of the cone maximizing the inner product with y, with the
    /// maximal value. Degenerate maximizers (y polar to the cone) resolve to
    /// an arbitrary span direction, where the supremum 0 is attained.
    fn argmax_unit(&self, y: &Vector) -> Option<(Vector, f64)> {
        let p = self.project(y);
        let np = self.norm(&p);
        if np > 1e-14 {
            let x = p / np;
            let v = self.inner(&x, y);
            return Some((x, v));
        }
        if self.span.ncols() > 0 {
            let x = self.span.column(0).clone_owned();
            return Some((x, 0.0));
        }
        self.apex.as_ref().map(|e| (e.clone(), self.inner(e, y)))
    }

    /// Spherical angle from a nonzero vector to the cone.
    pub fn angle_to(&self, x: &Vector) -> Result<f64> {
        let nx = self.norm(x);
        if nx <= 0.0 {
            return Err(Error::ZeroVector);
        }
        let p = self.project(x);
        let np = self.norm(&p);
        if np > 1e-300 {
            Ok((np / nx).clamp(-1.0, 1.0).acos())
        } else if self.span.ncols() > 0 {
            // The polar side of a cone with a nontrivial subspace part is at
            // a right angle: the subspace contributes both signs.
            Ok(std::f64::consts::FRAC_PI_2)
        } else if let Some(e) = &self.apex {
            Ok((self.inner(e, x) / nx).clamp(-1.0, 1.0).acos())
        } else {
            Err(Error::InvalidParameter("empty cone".into()))
        }
    }
}

/// Result of the two-cone angular distance search.
#[derive(Debug, Clone)]
pub struct ConeDistance {
    /// Smallest spherical angle found between the two cones.
    pub angle: f64,
    /// Achieving pair of unit vectors (first cone, second cone).
    pub witness: (Vector, Vector),
    /// Number of optimization starts that converged.
    pub starts: usize,
}

/// Smallest spherical angle between two cones sharing a metric, by
/// alternating projections from deterministic and seeded random starts,
/// cross-checked with a sampled sweep.
pub fn cone_min_angle(a: &ConvexCone, b: &ConvexCone, seed: u64) -> Result<ConeDistance> {
    if (a.gram() - b.gram()).norm() > 1e-10 * a.gram().norm() {
        return Err(Error::InvalidParameter(
            "cones live in different metrics".into(),
        ));
    }
    let n = a.gram().nrows();
    let mut sampler = SphereSampler::new(seed);
    let mut starts: Vec<Vector> = Vec::new();
    if let Some(e) = b.apex() {
        starts.push(e.clone());
    }
    for j in 0..b.span().ncols() {
        starts.push(b.span().column(j).clone_owned());
        starts.push(-b.span().column(j).clone_owned());
    }
    if let Some(e) = a.apex() {
        starts.push(b.project(e));
    }
    for _ in 0..40 {
        let y = sampler.unit(n);
        starts.push(b.project(&y));
    }
    // Sampled sweep floor: random members of both cones.
    let mut sweep_best: Option<(f64, Vector, Vector)> = None;
    for _ in 0..400 {
        let x = a.project(&sampler.unit(n));
        let y = b.project(&sampler.unit(n));
        let (nx, ny) = (a.norm(&x), b.norm(&y));
        if nx > 1e-12 && ny > 1e-12 {
            let c = a.inner(&x, &y) / (nx * ny);
            if sweep_best.as_ref().is_none_or(|(bc, _, _)| c > *bc) {
                sweep_best = Some((c, x / nx, y / ny));
            }
        }
    }
    if let Some((_, x, y)) = &sweep_best {
        starts.push(y.clone());
        starts.push(x.clone() + y.clone());
    }

    let mut best_cos = sweep_best.as_ref().map_or(-1.0, |(c, _, _)| *c);
    let mut best_pair = sweep_best.map(|(_, x, y)| (x, y));
    let mut converged = 0usize;
    for start in &starts {
        let mut y = start.clone();
        let ny = b.norm(&y);
        if ny <= 1e-12 {
            continue;
        }
        y /= ny;
        let mut cos_prev = -2.0;
        let mut ok = false;
        let mut x = y.clone();
        for _ in 0..300 {
            let Some((xn, _)) = a.argmax_unit(&y) else {
                break;
            };
            x = xn;
            let Some((yn, _)) = b.argmax_unit(&x) else {
                break;
            };
            y = yn;
            let c = a.inner(&x, &y);
            if (c - cos_prev).abs() < 1e-15 {
                ok = true;
                break;
            }
            cos_prev = c;
        }
        let c = a.inner(&x, &y).clamp(-1.0, 1.0);
        if ok {
            converged += 1;
        }
        if c > best_cos {
            best_cos = c;
            best_pair = Some((x, y));
        }
    }
    let (wx, wy) = best_pair.ok_or(Error::InvalidParameter("empty cone".into()))?;
    Ok(ConeDistance {
        angle: best_cos.clamp(-1.0, 1.0).acos(),
        witness: (wx, wy),
        starts: converged,
    })
}
