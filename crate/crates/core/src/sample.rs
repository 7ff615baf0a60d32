//! Seeded random sampling on spheres and matrix spaces.
//!
//! All randomized verdicts in this crate draw from a [`SphereSampler`] seeded
//! explicitly, so identical seeds reproduce identical samples bit for bit.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::Vector;

/// Unit-sphere sampler: normalized standard Gaussian draws.
#[derive(Debug, Clone)]
pub struct SphereSampler {
    rng: ChaCha8Rng,
}

impl SphereSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// One standard Gaussian draw (Box-Muller, one value per call).
    pub fn gaussian(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.gen::<f64>();
            let v: f64 = self.rng.gen::<f64>();
            if u > f64::MIN_POSITIVE {
                let g = (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
                if g.is_finite() {
                    return g;
                }
            }
        }
    }

    pub fn gaussian_vector(&mut self, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| self.gaussian())
    }

    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| self.gaussian())
    }

    /// Uniform point on the Euclidean unit sphere of R^n.
    pub fn unit(&mut self, n: usize) -> Vector {
        loop {
            let g = self.gaussian_vector(n);
            let norm = g.norm();
            if norm > 1e-8 {
                return g / norm;
            }
        }
    }

    /// Unit sphere point in the metric whose orthonormal frame is the columns
    /// of `frame`: uniform coordinates on the coordinate sphere, pushed
    /// forward through the frame.
    pub fn unit_in_frame(&mut self, frame: &DMatrix<f64>) -> Vector {
        let c = self.unit(frame.ncols());
        frame * c
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.gen::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// Random orthogonal rows x cols matrix (thin Q factor of a Gaussian).
    pub fn orthogonal(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        loop {
            let g = self.gaussian_matrix(rows, cols);
            let qr = g.qr();
            let q = qr.q();
            let r = qr.r();
            let ok = (0..cols).all(|k| r[(k, k)].abs() > 1e-8);
            if ok {
                // Fix signs so the distribution is Haar rather than QR-skewed.
                let mut qq = q;
                for k in 0..cols {
                    if r[(k, k)] < 0.0 {
                        for i in 0..rows {
                            qq[(i, k)] = -qq[(i, k)];
                        }
                    }
                }
                return qq;
            }
        }
    }
}
