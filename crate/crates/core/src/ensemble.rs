//! The particle ensemble every sampler transforms.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{substream, StreamPurpose};

/// `M` particles in `R^d`, stored row-major, plus the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    num_particles: usize,
    dim: usize,
    iteration: usize,
}

impl ParticleEnsemble {
    /// Builds an ensemble from a flat row-major array of `num_particles * dim` values.
    pub fn from_flat(positions: Vec<f64>, num_particles: usize, dim: usize) -> Result<Self> {
        if num_particles == 0 || dim == 0 {
            return Err(Error::Precondition(format!(
                "ensemble needs M >= 1 and d >= 1, got M = {num_particles}, d = {dim}"
            )));
        }
        if positions.len() != num_particles * dim {
            return Err(Error::Precondition(format!(
                "expected {} coordinates for M = {num_particles}, d = {dim}, got {}",
                num_particles * dim,
                positions.len()
            )));
        }
        if let Some(bad) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite coordinate {} in particle {}",
                positions[bad],
                bad / dim
            )));
        }
        Ok(Self {
            positions,
            num_particles,
            dim,
            iteration: 0,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Precondition("rows have differing lengths".into()));
        }
        Self::from_flat(rows.concat(), rows.len(), dim)
    }

    /// One-dimensional ensemble, one particle per value.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(values.to_vec(), values.len(), 1)
    }

    /// Draws every coordinate i.i.d. from `N(mean, std^2)` using the init substream of `seed`.
    ///
    /// Particle `i` uses its own substream, so the first `M` particles of a
    /// larger ensemble coincide with a smaller ensemble drawn from the same seed.
    pub fn gaussian(num_particles: usize, dim: usize, mean: f64, std: f64, seed: u64) -> Result<Self> {
        if !(std >= 0.0) || !mean.is_finite() || !std.is_finite() {
            return Err(Error::Config(format!(
                "initial distribution N({mean}, {std}^2) is not valid"
            )));
        }
        let mut positions = Vec::with_capacity(num_particles * dim);
        for i in 0..num_particles {
            let mut rng = substream(seed, StreamPurpose::Init, i as u64, 0);
            for _ in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                positions.push(mean + std * z);
            }
        }
        Self::from_flat(positions, num_particles, dim)
    }

    pub fn num_particles(&self) -> usize {
        self.num_particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn set_iteration(&mut self, iteration: usize) {
        self.iteration = iteration;
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> std::slice::ChunksExact<'_, f64> {
        self.positions.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.positions
    }

    /// Replaces the positions after a step; the caller guarantees the shape.
    pub(crate) fn advance(&self, positions: Vec<f64>) -> Result<Self> {
        debug_assert_eq!(positions.len(), self.positions.len());
        if let Some(bad) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: self.iteration + 1,
                detail: format!("particle {} left the finite range", bad / self.dim),
            });
        }
        Ok(Self {
            positions,
            num_particles: self.num_particles,
            dim: self.dim,
            iteration: self.iteration + 1,
        })
    }

    /// Reorders particles so that row `i` of the result is row `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.num_particles, "permutation length");
        let mut positions = Vec::with_capacity(self.positions.len());
        for &src in order {
            positions.extend_from_slice(self.particle(src));
        }
        Self {
            positions,
            num_particles: self.num_particles,
            dim: self.dim,
            iteration: self.iteration,
        }
    }

    /// First coordinate of every particle.
    pub fn first_coordinates(&self) -> Vec<f64> {
        self.particles().map(|p| p[0]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for p in self.particles() {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        let m = self.num_particles as f64;
        mean.iter_mut().for_each(|v| *v /= m);
        mean
    }
}
