//! Model metric measure spaces, quadrature sampling, metric-ball queries and
//! ball volumes.
//!
//! Supported backends: the flat torus with the quotient sup or Euclidean
//! metric on the fundamental domain `[-1,1)^m` (normalized measure), the
//! hypercube `[0,b]^m` with the sup metric (Lebesgue measure), the interval as
//! its one-dimensional case, the round unit sphere (surface measure `4*pi`),
//! and user point clouds with the ambient Euclidean metric.

use std::fmt;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AmvError, Result};
use crate::util::KahanSum;

/// Which model space a descriptor refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    FlatTorusLinf,
    FlatTorusEuclid,
    Hypercube,
    Interval,
    Sphere2,
    CustomCloud,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpaceKind::FlatTorusLinf => "flat_torus_linf",
            SpaceKind::FlatTorusEuclid => "flat_torus_euclid",
            SpaceKind::Hypercube => "hypercube",
            SpaceKind::Interval => "interval",
            SpaceKind::Sphere2 => "sphere2",
            SpaceKind::CustomCloud => "custom_cloud",
        };
        f.write_str(s)
    }
}

/// A model metric measure space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    pub kind: SpaceKind,
    /// Intrinsic dimension (ambient dimension for point clouds).
    pub m: usize,
    /// Hypercube side / interval length; unused otherwise (set to 1).
    pub side: f64,
    pub total_measure: f64,
    pub has_boundary: bool,
}

impl SpaceDescriptor {
    /// Flat torus `[-1,1)^m` with the quotient sup metric and normalized
    /// (probability) measure.
    pub fn flat_torus_linf(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(AmvError::invalid("torus dimension must be positive"));
        }
        Ok(Self {
            kind: SpaceKind::FlatTorusLinf,
            m,
            side: 2.0,
            total_measure: 1.0,
            has_boundary: false,
        })
    }

    /// Flat torus `[-1,1)^m` with the quotient Euclidean metric and
    /// normalized measure.
    pub fn flat_torus_euclid(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(AmvError::invalid("torus dimension must be positive"));
        }
        Ok(Self {
            kind: SpaceKind::FlatTorusEuclid,
            m,
            side: 2.0,
            total_measure: 1.0,
            has_boundary: false,
        })
    }

    /// Hypercube `[0,b]^m` with the sup metric and Lebesgue measure.
    pub fn hypercube(m: usize, side: f64) -> Result<Self> {
        if m == 0 || !(side > 0.0) {
            return Err(AmvError::invalid("hypercube needs m >= 1 and side > 0"));
        }
        let kind = if m == 1 { SpaceKind::Interval } else { SpaceKind::Hypercube };
        Ok(Self {
            kind,
            m,
            side,
            total_measure: side.powi(m as i32),
            has_boundary: true,
        })
    }

    /// Interval `[0, len]`, the one-dimensional hypercube.
    pub fn interval(len: f64) -> Result<Self> {
        Self::hypercube(1, len)
    }

    /// Round unit sphere in 3-space with its surface measure.
    pub fn sphere2() -> Self {
        Self {
            kind: SpaceKind::Sphere2,
            m: 2,
            side: 1.0,
            total_measure: 4.0 * std::f64::consts::PI,
            has_boundary: false,
        }
    }

    /// User point cloud in `R^dim` with the ambient Euclidean metric.
    pub fn custom_cloud(dim: usize, total_measure: f64) -> Result<Self> {
        if dim == 0 || !(total_measure > 0.0) {
            return Err(AmvError::invalid("cloud needs dim >= 1 and positive total measure"));
        }
        Ok(Self {
            kind: SpaceKind::CustomCloud,
            m: dim,
            side: 1.0,
            total_measure,
            has_boundary: false,
        })
    }

    /// Number of coordinates used to store a point of this space.
    pub fn coord_dim(&self) -> usize {
        match self.kind {
            SpaceKind::Sphere2 => 3,
            _ => self.m,
        }
    }

    /// Metric diameter (infinite for point clouds).
    pub fn diameter(&self) -> f64 {
        match self.kind {
            SpaceKind::FlatTorusLinf => 1.0,
            SpaceKind::FlatTorusEuclid => (self.m as f64).sqrt(),
            SpaceKind::Hypercube | SpaceKind::Interval => self.side,
            SpaceKind::Sphere2 => std::f64::consts::PI,
            SpaceKind::CustomCloud => f64::INFINITY,
        }
    }

    /// Largest admissible ball radius. On the torus the closed-form ball
    /// measure `r^m` needs `r < 1`, which is also the diameter bound.
    pub fn max_radius(&self) -> f64 {
        match self.kind {
            SpaceKind::FlatTorusLinf | SpaceKind::FlatTorusEuclid => 1.0,
            _ => self.diameter(),
        }
    }

    /// Metric distance between two points in the fundamental domain.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.coord_dim();
        if x.len() != d || y.len() != d {
            return Err(AmvError::invalid(format!(
                "dimension mismatch: space expects {} coordinates, got {} and {}",
                d,
                x.len(),
                y.len()
            )));
        }
        Ok(match self.kind {
            SpaceKind::FlatTorusLinf => {
                let mut best = 0.0f64;
                for i in 0..d {
                    best = best.max(torus_coord_gap(x[i], y[i]));
                }
                best
            }
            SpaceKind::FlatTorusEuclid => {
                let mut s = 0.0f64;
                for i in 0..d {
                    let g = torus_coord_gap(x[i], y[i]);
                    s += g * g;
                }
                s.sqrt()
            }
            SpaceKind::Hypercube | SpaceKind::Interval => {
                let mut best = 0.0f64;
                for i in 0..d {
                    best = best.max((x[i] - y[i]).abs());
                }
                best
            }
            SpaceKind::Sphere2 => {
                let mut dot = 0.0f64;
                for i in 0..3 {
                    dot += x[i] * y[i];
                }
                dot.clamp(-1.0, 1.0).acos()
            }
            SpaceKind::CustomCloud => {
                let mut s = 0.0f64;
                for i in 0..d {
                    let g = x[i] - y[i];
                    s += g * g;
                }
                s.sqrt()
            }
        })
    }
}

/// Per-coordinate gap on the period-2 circle `[-1,1)`.
#[inline]
fn torus_coord_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(2.0 - d)
}

/// How sample points are placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Grid,
    Iid,
    Fibonacci,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Strategy::Grid => "grid",
            Strategy::Iid => "iid",
            Strategy::Fibonacci => "fibonacci",
        };
        f.write_str(s)
    }
}

/// A quadrature discretization of the measure: points plus positive masses.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub space: SpaceDescriptor,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub strategy: Strategy,
    pub seed: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Wrap a user-supplied point cloud. Weights become the measure; the
    /// descriptor records their total.
    pub fn from_custom_cloud(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points.len() != weights.len() {
            return Err(AmvError::invalid("cloud needs >= 2 points and matching weights"));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(AmvError::invalid("cloud points must share a positive dimension"));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(AmvError::invalid("cloud weights must all be positive"));
        }
        let total = {
            let mut acc = KahanSum::new();
            for &w in &weights {
                acc.add(w);
            }
            acc.value()
        };
        Ok(Self {
            space: SpaceDescriptor::custom_cloud(dim, total)?,
            points,
            weights,
            strategy: Strategy::Iid,
            seed: 0,
        })
    }

    /// Read a cloud from CSV with header `x1,...,xD,weight`.
    pub fn load_custom_cloud(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| AmvError::invalid("empty cloud file"))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 2 || cols.last() != Some(&"weight") {
            return Err(AmvError::invalid("cloud header must be x1,...,xD,weight"));
        }
        let dim = cols.len() - 1;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (ln, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != dim + 1 {
                return Err(AmvError::invalid(format!("bad field count on data line {}", ln + 1)));
            }
            let mut p = Vec::with_capacity(dim);
            for f in &fields[..dim] {
                p.push(f.parse::<f64>().map_err(|e| AmvError::invalid(format!("{e}: {f}")))?);
            }
            let w: f64 = fields[dim]
                .parse()
                .map_err(|e| AmvError::invalid(format!("{e}: {}", fields[dim])))?;
            points.push(p);
            weights.push(w);
        }
        Self::from_custom_cloud(points, weights)
    }

    /// Write points and weights as CSV (`x1,...,xD,weight`) with a JSON
    /// sidecar `<path>.meta.json` describing the provenance.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let dim = self.space.coord_dim();
        for i in 0..dim {
            write!(out, "x{},", i + 1)?;
        }
        writeln!(out, "weight")?;
        for (p, w) in self.points.iter().zip(&self.weights) {
            for c in p {
                write!(out, "{},", c)?;
            }
            writeln!(out, "{}", w)?;
        }
        out.flush()?;
        let meta = serde_json::json!({
            "space": self.space,
            "n": self.len(),
            "strategy": self.strategy,
            "seed": self.seed,
        });
        let meta_path = path.with_extension("meta.json");
        std::fs::write(meta_path, serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

/// Generate a quadrature sample of `n` points.
///
/// `grid` places cell midpoints of a uniform lattice (requires `n = k^m`),
/// `iid` draws uniform points deterministically from `seed`, `fibonacci`
/// builds the golden-angle lattice on the sphere. Weights are equal,
/// `total_measure / n`.
pub fn sample(space: &SpaceDescriptor, n: usize, strategy: Strategy, seed: u64) -> Result<SampleSet> {
    if n < 2 {
        return Err(AmvError::invalid("need at least 2 sample points"));
    }
    let w = space.total_measure / n as f64;
    let points = match (strategy, space.kind) {
        (Strategy::Grid, SpaceKind::FlatTorusLinf | SpaceKind::FlatTorusEuclid) => {
            grid_points(space.m, n, |idx, k| -1.0 + (2 * idx + 1) as f64 / k as f64)?
        }
        (Strategy::Grid, SpaceKind::Hypercube | SpaceKind::Interval) => {
            let side = space.side;
            grid_points(space.m, n, move |idx, k| (idx as f64 + 0.5) * side / k as f64)?
        }
        (Strategy::Grid, _) => {
            return Err(AmvError::UnsupportedStrategy(format!(
                "grid sampling is not defined on {}",
                space.kind
            )))
        }
        (Strategy::Iid, _) => iid_points(space, n, seed)?,
        (Strategy::Fibonacci, SpaceKind::Sphere2) => fibonacci_sphere(n),
        (Strategy::Fibonacci, other) => {
            return Err(AmvError::UnsupportedStrategy(format!(
                "fibonacci sampling is only defined on the sphere, not {other}"
            )))
        }
    };
    Ok(SampleSet {
        space: space.clone(),
        points,
        weights: vec![w; n],
        strategy,
        seed,
    })
}

fn grid_points(m: usize, n: usize, coord: impl Fn(usize, usize) -> f64) -> Result<Vec<Vec<f64>>> {
    let k = (n as f64).powf(1.0 / m as f64).round() as usize;
    if k == 0 || k.pow(m as u32) != n {
        return Err(AmvError::invalid(format!(
            "grid sampling needs n = k^m; n = {n} is not a perfect {m}-th power"
        )));
    }
    let mut points = Vec::with_capacity(n);
    let mut idx = vec![0usize; m];
    loop {
        points.push(idx.iter().map(|&i| coord(i, k)).collect());
        // odometer increment
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < k {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == m {
                return Ok(points);
            }
        }
    }
}

fn iid_points(space: &SpaceDescriptor, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    match space.kind {
        SpaceKind::FlatTorusLinf | SpaceKind::FlatTorusEuclid => {
            for _ in 0..n {
                points.push((0..space.m).map(|_| rng.gen_range(-1.0..1.0)).collect());
            }
        }
        SpaceKind::Hypercube | SpaceKind::Interval => {
            for _ in 0..n {
                points.push((0..space.m).map(|_| rng.gen_range(0.0..space.side)).collect());
            }
        }
        SpaceKind::Sphere2 => {
            for _ in 0..n {
                // normalized Gaussian triple; rejection on tiny norms
                loop {
                    let v: Vec<f64> = (0..3).map(|_| gaussian(&mut rng)).collect();
                    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                    if norm > 1e-6 {
                        points.push(v.into_iter().map(|c| c / norm).collect());
                        break;
                    }
                }
            }
        }
        SpaceKind::CustomCloud => {
            return Err(AmvError::UnsupportedStrategy(
                "point clouds are imported, not sampled".into(),
            ))
        }
    }
    Ok(points)
}

/// Box-Muller, one deviate per call.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Golden-angle lattice on the unit sphere.
fn fibonacci_sphere(n: usize) -> Vec<Vec<f64>> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden_angle * i as f64;
            vec![rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Open-ball adjacency at radius `r`: `neighbors[i]` lists every `j` with
/// `d(x_i, x_j) < r` (strict), sorted, always containing `i` itself.
#[derive(Clone, Debug)]
pub struct BallIndex {
    pub r: f64,
    pub neighbors: Vec<Vec<u32>>,
}

impl BallIndex {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Total number of stored (i, j) pairs.
    pub fn nnz(&self) -> usize {
        self.neighbors.iter().map(|n| n.len()).sum()
    }
}

fn validate_radius(space: &SpaceDescriptor, r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(AmvError::invalid("ball radius must be positive"));
    }
    let max = space.max_radius();
    if r >= max {
        return Err(AmvError::invalid(format!(
            "ball radius {r} exceeds the admissible bound {max} for {}",
            space.kind
        )));
    }
    Ok(())
}

/// Exact O(n^2) scan. Reference implementation; the accelerated path must
/// reproduce it verbatim.
pub fn ball_index_brute_force(samples: &SampleSet, r: f64) -> Result<BallIndex> {
    validate_radius(&samples.space, r)?;
    let space = &samples.space;
    let pts = &samples.points;
    let neighbors: Vec<Vec<u32>> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for j in 0..pts.len() {
                let d = space
                    .distance(&pts[i], &pts[j])
                    .expect("points validated at construction");
                if d < r {
                    row.push(j as u32);
                }
            }
            row
        })
        .collect();
    Ok(BallIndex { r, neighbors })
}

/// Open-ball adjacency, cell-list accelerated where the geometry allows it.
/// Candidate pruning never changes membership: every candidate still goes
/// through the exact strict `distance < r` test.
pub fn ball_index(samples: &SampleSet, r: f64) -> Result<BallIndex> {
    validate_radius(&samples.space, r)?;
    let space = &samples.space;
    // binning coordinates and pruning radius in those coordinates
    let (bin_dim, lo, hi, prune, periodic) = match space.kind {
        SpaceKind::FlatTorusLinf | SpaceKind::FlatTorusEuclid => {
            (space.m, vec![-1.0; space.m], vec![1.0; space.m], r, true)
        }
        SpaceKind::Hypercube | SpaceKind::Interval => {
            (space.m, vec![0.0; space.m], vec![space.side; space.m], r, false)
        }
        SpaceKind::Sphere2 => {
            // geodesic d < r  <=>  chord < 2 sin(r/2)
            (3, vec![-1.0; 3], vec![1.0; 3], 2.0 * (r / 2.0).sin(), false)
        }
        SpaceKind::CustomCloud => return ball_index_brute_force(samples, r),
    };
    if bin_dim > 3 {
        return ball_index_brute_force(samples, r);
    }
    let mut ncells = Vec::with_capacity(bin_dim);
    for d in 0..bin_dim {
        let extent = hi[d] - lo[d];
        ncells.push(((extent / prune).floor() as usize).max(1));
    }
    if ncells.iter().any(|&c| c < 4) {
        return ball_index_brute_force(samples, r);
    }

    let cell_of = |p: &[f64]| -> usize {
        let mut idx = 0usize;
        for d in 0..bin_dim {
            let t = (p[d] - lo[d]) / (hi[d] - lo[d]);
            let c = ((t * ncells[d] as f64) as usize).min(ncells[d] - 1);
            idx = idx * ncells[d] + c;
        }
        idx
    };
    let total_cells: usize = ncells.iter().product();
    let mut cells: Vec<Vec<u32>> = vec![Vec::new(); total_cells];
    for (i, p) in samples.points.iter().enumerate() {
        cells[cell_of(p)].push(i as u32);
    }

    let pts = &samples.points;
    let neighbors: Vec<Vec<u32>> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let p = &pts[i];
            // home cell coordinates
            let mut home = vec![0usize; bin_dim];
            for d in 0..bin_dim {
                let t = (p[d] - lo[d]) / (hi[d] - lo[d]);
                home[d] = ((t * ncells[d] as f64) as usize).min(ncells[d] - 1);
            }
            let mut row = Vec::new();
            // scan the 3^bin_dim neighborhood of cells
            let mut offs = vec![-1i64; bin_dim];
            'outer: loop {
                let mut cell = 0usize;
                let mut skip = false;
                for d in 0..bin_dim {
                    let raw = home[d] as i64 + offs[d];
                    let c = if periodic {
                        raw.rem_euclid(ncells[d] as i64) as usize
                    } else if raw < 0 || raw >= ncells[d] as i64 {
                        skip = true;
                        break;
                    } else {
                        raw as usize
                    };
                    cell = cell * ncells[d] + c;
                }
                if !skip {
                    for &j in &cells[cell] {
                        let d = samples
                            .space
                            .distance(p, &pts[j as usize])
                            .expect("points validated at construction");
                        if d < r {
                            row.push(j);
                        }
                    }
                }
                // odometer over offsets in {-1,0,1}^bin_dim
                let mut d = 0;
                loop {
                    offs[d] += 1;
                    if offs[d] <= 1 {
                        break;
                    }
                    offs[d] = -1;
                    d += 1;
                    if d == bin_dim {
                        break 'outer;
                    }
                }
            }
            row.sort_unstable();
            row
        })
        .collect();
    Ok(BallIndex { r, neighbors })
}

/// How ball volumes are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMode {
    /// Quadrature mass of the sampled ball (always includes the center's own
    /// weight).
    Empirical,
    /// Closed-form measure of the continuum ball.
    Analytic,
}

impl fmt::Display for VolumeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VolumeMode::Empirical => "empirical",
            VolumeMode::Analytic => "analytic",
        })
    }
}

/// Ball volumes `V_i > 0`, one per sample point.
#[derive(Clone, Debug)]
pub struct VolumeField {
    pub mode: VolumeMode,
    pub values: Vec<f64>,
    pub r: f64,
}

/// Compute the ball-volume field for a sample set and its ball adjacency.
pub fn ball_volume(samples: &SampleSet, idx: &BallIndex, mode: VolumeMode) -> Result<VolumeField> {
    if idx.len() != samples.len() {
        return Err(AmvError::invalid("ball index size does not match sample set"));
    }
    let r = idx.r;
    let values = match mode {
        VolumeMode::Empirical => idx
            .neighbors
            .par_iter()
            .map(|row| {
                let mut acc = KahanSum::new();
                for &j in row {
                    acc.add(samples.weights[j as usize]);
                }
                acc.value()
            })
            .collect(),
        VolumeMode::Analytic => analytic_volumes(samples, r)?,
    };
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(AmvError::NumericFailure(
            "nonpositive ball volume; the sampled measure is not fully supported at this radius".into(),
        ));
    }
    Ok(VolumeField { mode, values, r })
}

fn analytic_volumes(samples: &SampleSet, r: f64) -> Result<Vec<f64>> {
    let space = &samples.space;
    let n = samples.len();
    Ok(match space.kind {
        SpaceKind::FlatTorusLinf => vec![r.powi(space.m as i32); n],
        SpaceKind::FlatTorusEuclid => {
            let v = unit_ball_volume(space.m) * r.powi(space.m as i32) / 2f64.powi(space.m as i32);
            vec![v; n]
        }
        SpaceKind::Hypercube | SpaceKind::Interval => samples
            .points
            .iter()
            .map(|p| {
                let mut v = 1.0;
                for &c in p {
                    v *= (c + r).min(space.side) - (c - r).max(0.0);
                }
                v
            })
            .collect(),
        SpaceKind::Sphere2 => {
            let v = 2.0 * std::f64::consts::PI * (1.0 - r.cos());
            vec![v; n]
        }
        SpaceKind::CustomCloud => {
            return Err(AmvError::UnsupportedMode(
                "no closed-form ball volume for custom point clouds".into(),
            ))
        }
    })
}

/// Lebesgue volume of the unit Euclidean ball in `R^m`.
pub fn unit_ball_volume(m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / m as f64 * unit_ball_volume(m - 2),
    }
}
