//! Uniform point clouds in the unit cube and their reproducible sampling.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{sample_poisson, stream_rng};

/// A finite set of points in `[0,1]^dim`, stored flat in point order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCloud("dimension must be at least 1".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidCloud(format!(
                "{} coordinates is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidCloud(format!(
                "coordinate {} of point {} is {}, outside [0, 1]",
                pos % dim,
                pos / dim,
                coords[pos]
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::InvalidCloud(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be at least 1");
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// The points at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Self { dim: self.dim, coords }
    }

    /// The first `n` points (all of them if `n >= len`).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            dim: self.dim,
            coords: self.coords[..n * self.dim].to_vec(),
        }
    }

    /// One point per row, `x1,...,xd`, no header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for p in self.iter() {
            w.write_record(p.iter().map(|c| c.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV format written by [`PointCloud::write_csv`]. The dimension
    /// is taken from the first row unless given; an empty input needs it given.
    pub fn read_csv<R: Read>(reader: R, dim: Option<usize>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(reader);
        let mut dim = dim;
        let mut coords = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let d = *dim.get_or_insert(rec.len());
            if rec.len() != d {
                return Err(Error::InvalidCloud(format!(
                    "row {} has {} fields, expected {d}",
                    row + 1,
                    rec.len()
                )));
            }
            for field in rec.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::InvalidCloud(format!("row {}: cannot parse {field:?}", row + 1)))?;
                coords.push(v);
            }
        }
        let dim = dim.ok_or_else(|| Error::InvalidCloud("empty input and no dimension given".into()))?;
        Self::new(dim, coords)
    }

    pub fn read_csv_file(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, dim)
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Euclidean distance between two points of equal dimension.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum Cardinality {
    Fixed(usize),
    /// Count drawn from Poisson with this mean.
    Poisson(f64),
}

impl Cardinality {
    pub fn nominal(&self) -> f64 {
        match *self {
            Cardinality::Fixed(n) => n as f64,
            Cardinality::Poisson(mean) => mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub dim: usize,
    pub cardinality: Cardinality,
    pub seed: u64,
}

impl SampleSpec {
    pub fn fixed(dim: usize, n: usize, seed: u64) -> Self {
        Self {
            dim,
            cardinality: Cardinality::Fixed(n),
            seed,
        }
    }

    pub fn poisson(dim: usize, mean: f64, seed: u64) -> Self {
        Self {
            dim,
            cardinality: Cardinality::Poisson(mean),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        if let Cardinality::Poisson(mean) = self.cardinality {
            if !(mean.is_finite() && mean > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "Poisson mean must be finite and positive, got {mean}"
                )));
            }
        }
        Ok(())
    }
}

/// Draws a cloud for `spec`. Coordinates and the Poisson count use separate
/// streams, so for a fixed seed the points form one sequence: a cloud of `n`
/// points is a prefix of any larger cloud with the same seed.
pub fn sample_cloud(spec: &SampleSpec) -> Result<PointCloud> {
    sample_on_stream(spec, 0)
}

/// Draws two independent clouds. The clouds use distinct streams, so even
/// identical seeds give different point sets.
pub fn sample_pair(spec_x: &SampleSpec, spec_y: &SampleSpec) -> Result<(PointCloud, PointCloud)> {
    if spec_x.dim != spec_y.dim {
        return Err(Error::DimensionMismatch {
            left: spec_x.dim,
            right: spec_y.dim,
        });
    }
    Ok((sample_on_stream(spec_x, 0)?, sample_on_stream(spec_y, 1)?))
}

fn sample_on_stream(spec: &SampleSpec, cloud: u64) -> Result<PointCloud> {
    spec.validate()?;
    let count = match spec.cardinality {
        Cardinality::Fixed(n) => n,
        Cardinality::Poisson(mean) => {
            let mut rng = stream_rng(spec.seed, 2 * cloud + 1);
            sample_poisson(&mut rng, mean) as usize
        }
    };
    Ok(uniform_points(spec.dim, count, spec.seed, 2 * cloud))
}

fn uniform_points(dim: usize, count: usize, seed: u64, stream: u64) -> PointCloud {
    use rand::Rng;
    let mut rng = stream_rng(seed, stream);
    let coords = (0..count * dim).map(|_| rng.random::<f64>()).collect();
    PointCloud { dim, coords }
}
