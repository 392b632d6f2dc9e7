//! Server-side potential field over the uploaded weighted centroids.
//!
//! Probe points are sampled uniformly in the centroids' bounding box and each
//! receives the energy `E(y) = sum_i w_i / (|c_i - y|^p + delta)`.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local::WeightedCentroid;
use crate::points::Points;
use crate::rng::seeded;
use crate::scalar::{squared_distance, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Probes per uploaded centroid.
    pub alpha: f64,
    /// Additive softening in the denominator.
    pub softening: f64,
    /// Distance exponent.
    pub exponent_p: f64,
    pub rng_seed: u64,
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.softening > 0.0) || !self.softening.is_finite() {
            return Err(Error::InvalidInput(format!(
                "softening must be positive, got {}",
                self.softening
            )));
        }
        if !(self.exponent_p > 0.0) || !self.exponent_p.is_finite() {
            return Err(Error::InvalidInput(format!(
                "exponent must be positive, got {}",
                self.exponent_p
            )));
        }
        Ok(())
    }

    /// `max(1, round(alpha * sources))`, rounding half up.
    pub fn probe_count(&self, sources: usize) -> usize {
        ((self.alpha * sources as f64 + 0.5).floor() as usize).max(1)
    }
}

/// Axis-aligned box, one `(min, max)` pair per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn contains(&self, y: &[T]) -> bool {
        y.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(&v, (&lo, &hi))| lo <= v && v <= hi)
    }

    pub fn diagonal(&self) -> T {
        squared_distance(&self.min, &self.max).sqrt()
    }
}

/// Coordinate-wise extent of the sources. A dimension with zero extent is
/// widened by `max(1e-6, 1e-3 * largest extent)` on both sides.
pub fn compute_bounds<T: Scalar>(sources: &[WeightedCentroid<T>]) -> Result<Bounds<T>> {
    let first = sources.first().ok_or(Error::Empty("source set"))?;
    let dim = first.position.len();
    let mut min = first.position.clone();
    let mut max = first.position.clone();
    for s in &sources[1..] {
        if s.position.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.position.len(),
            });
        }
        for d in 0..dim {
            min[d] = min[d].min(s.position[d]);
            max[d] = max[d].max(s.position[d]);
        }
    }
    if min.iter().chain(&max).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("source positions"));
    }
    let extent = min
        .iter()
        .zip(&max)
        .map(|(&lo, &hi)| hi - lo)
        .fold(T::zero(), T::max);
    let widen = T::of(1e-6).max(T::of(1e-3) * extent);
    for d in 0..dim {
        if min[d] == max[d] {
            min[d] = min[d] - widen;
            max[d] = max[d] + widen;
        }
    }
    Ok(Bounds { min, max })
}

/// `count` i.i.d. uniform samples in the box.
pub fn sample_probes<T: Scalar, R: Rng>(
    bounds: &Bounds<T>,
    count: usize,
    rng: &mut R,
) -> Points<T> {
    let dim = bounds.dim();
    let mut flat = Vec::with_capacity(count * dim);
    for _ in 0..count {
        for d in 0..dim {
            let (lo, hi) = (bounds.min[d], bounds.max[d]);
            let u = T::of(rng.random::<f64>());
            // Clamp guards against rounding past `hi` in low precision.
            flat.push((lo + u * (hi - lo)).min(hi));
        }
    }
    Points::from_flat(dim, flat).expect("dim >= 1")
}

/// Energy at `y`, summed over the sources in their given order.
pub fn energy_at<T: Scalar>(
    y: &[T],
    sources: &[WeightedCentroid<T>],
    softening: T,
    exponent_p: T,
) -> T {
    let two = T::of(2.0);
    let mut energy = T::zero();
    for s in sources {
        let d2 = squared_distance(&s.position, y);
        let dp = if exponent_p == two {
            d2
        } else {
            d2.sqrt().powf(exponent_p)
        };
        energy = energy + s.mass / (dp + softening);
    }
    energy
}

/// Probes, their energies, and the sources that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialField<T> {
    pub probes: Points<T>,
    pub energies: Vec<T>,
    pub sources: Vec<WeightedCentroid<T>>,
    pub bounds: Bounds<T>,
    pub softening: T,
    pub exponent_p: T,
}

impl<T: Scalar> PotentialField<T> {
    /// Builds a field from explicit probes (no sampling).
    pub fn from_probes(
        sources: Vec<WeightedCentroid<T>>,
        probes: Points<T>,
        softening: T,
        exponent_p: T,
    ) -> Result<Self> {
        let bounds = compute_bounds(&sources)?;
        if probes.dim() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: bounds.dim(),
                found: probes.dim(),
            });
        }
        let energies = evaluate(&probes, &sources, softening, exponent_p);
        Ok(Self {
            probes,
            energies,
            sources,
            bounds,
            softening,
            exponent_p,
        })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn total_mass(&self) -> T {
        self.sources.iter().map(|s| s.mass).sum()
    }

    /// Writes `x0,..,x{d-1},energy` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.probes.dim()).map(|d| format!("x{d}")).collect();
        header.push("energy".into());
        w.write_record(&header).map_err(csv_err)?;
        for (p, e) in self.probes.rows().zip(&self.energies) {
            let mut rec: Vec<String> = p.iter().map(ToString::to_string).collect();
            rec.push(e.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Config(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv write failed: {e}"))
}

fn evaluate<T: Scalar>(
    probes: &Points<T>,
    sources: &[WeightedCentroid<T>],
    softening: T,
    p: T,
) -> Vec<T> {
    (0..probes.len())
        .into_par_iter()
        .map(|j| energy_at(probes.row(j), sources, softening, p))
        .collect()
}

/// Samples `max(1, round(alpha * |S|))` probes and evaluates the field at each.
pub fn build_field<T: Scalar>(
    sources: &[WeightedCentroid<T>],
    cfg: &FieldConfig,
) -> Result<PotentialField<T>> {
    cfg.validate()?;
    let bounds = compute_bounds(sources)?;
    let count = cfg.probe_count(sources.len());
    let probes = sample_probes(&bounds, count, &mut seeded(cfg.rng_seed));
    let softening = T::of(cfg.softening);
    let exponent_p = T::of(cfg.exponent_p);
    let energies = evaluate(&probes, sources, softening, exponent_p);
    Ok(PotentialField {
        probes,
        energies,
        sources: sources.to_vec(),
        bounds,
        softening,
        exponent_p,
    })
}
