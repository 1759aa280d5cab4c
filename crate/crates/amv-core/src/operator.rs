//! Assembly and application of the ball-averaging operators and the
//! symmetrized mean-value Laplacian.
//!
//! Discrete actions, with `w` the quadrature weights and `V` the ball
//! volumes:
//!
//! ```text
//! (A  f)_i = (1/V_i) sum_{j in ball(i)} f_j w_j          averaging
//! (A* f)_i = sum_{j in ball(i)} (f_j / V_j) w_j          weighted adjoint
//! (S  f)_i = sum_{j in ball(i)} a(i,j) f_j w_j           symmetrized, a(i,j) = (1/V_i + 1/V_j)/2
//! (L  f)_i = ((S f)_i - s_i f_i) / r^2                   Laplacian, s_i = (S 1)_i
//! ```
//!
//! The diagonal uses the quadrature value `s = S 1` rather than the analytic
//! value 1, so constants are annihilated exactly.

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{AmvError, Result};
use crate::geometry::{BallIndex, SampleSet, SpaceDescriptor, VolumeField, VolumeMode};
use crate::util::{weighted_dot, KahanSum};

/// The assembled sparse operator. Immutable after construction; all
/// applications are pure functions.
#[derive(Clone, Debug)]
pub struct AmvOperator {
    pub r: f64,
    pub space: SpaceDescriptor,
    pub volume_mode: VolumeMode,
    /// Quadrature weights w_i.
    pub weights: Vec<f64>,
    /// Ball volumes V_i.
    pub volumes: Vec<f64>,
    /// CSR row offsets into `cols` / `kernel`.
    pub row_ptr: Vec<usize>,
    /// Column indices, sorted within each row.
    pub cols: Vec<u32>,
    /// Symmetric kernel values a(i,j) = (1/V_i + 1/V_j)/2.
    pub kernel: Vec<f64>,
    /// s_i = (S 1)_i = sum_j a(i,j) w_j.
    pub avg_one: Vec<f64>,
}

/// Assemble the operator from a sample set, its ball adjacency and a volume
/// field built at the same radius.
pub fn assemble(samples: &SampleSet, idx: &BallIndex, vols: &VolumeField) -> Result<AmvOperator> {
    let n = samples.len();
    if idx.len() != n || vols.values.len() != n {
        return Err(AmvError::invalid("sample set, ball index and volumes disagree in size"));
    }
    if idx.r != vols.r {
        return Err(AmvError::invalid(format!(
            "radius mismatch: ball index built at r = {}, volumes at r = {}",
            idx.r, vols.r
        )));
    }
    let inv_vol: Vec<f64> = vols.values.iter().map(|&v| 1.0 / v).collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0usize);
    for row in &idx.neighbors {
        row_ptr.push(row_ptr.last().unwrap() + row.len());
    }
    let nnz = *row_ptr.last().unwrap();
    let mut cols = vec![0u32; nnz];
    let mut kernel = vec![0.0f64; nnz];

    // rows are independent; parallelize over disjoint slices
    {
        let mut col_rows: Vec<&mut [u32]> = Vec::with_capacity(n);
        let mut ker_rows: Vec<&mut [f64]> = Vec::with_capacity(n);
        let mut crest: &mut [u32] = &mut cols;
        let mut krest: &mut [f64] = &mut kernel;
        for row in &idx.neighbors {
            let (ca, cb) = crest.split_at_mut(row.len());
            let (ka, kb) = krest.split_at_mut(row.len());
            col_rows.push(ca);
            ker_rows.push(ka);
            crest = cb;
            krest = kb;
        }
        idx.neighbors
            .par_iter()
            .zip(col_rows.par_iter_mut().zip(ker_rows.par_iter_mut()))
            .enumerate()
            .for_each(|(i, (row, (crow, krow)))| {
                for (slot, &j) in row.iter().enumerate() {
                    crow[slot] = j;
                    krow[slot] = 0.5 * (inv_vol[i] + inv_vol[j as usize]);
                }
            });
    }

    let avg_one: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = KahanSum::new();
            for t in row_ptr[i]..row_ptr[i + 1] {
                acc.add(kernel[t] * samples.weights[cols[t] as usize]);
            }
            acc.value()
        })
        .collect();

    Ok(AmvOperator {
        r: idx.r,
        space: samples.space.clone(),
        volume_mode: vols.mode,
        weights: samples.weights.clone(),
        volumes: vols.values.clone(),
        row_ptr,
        cols,
        kernel,
        avg_one,
    })
}

impl AmvOperator {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(AmvError::invalid(format!(
                "vector length {} does not match point count {}",
                f.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Ball average `A f`.
    pub fn apply_averaging(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        Ok((0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = KahanSum::new();
                for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.cols[t] as usize;
                    acc.add(f[j] * self.weights[j]);
                }
                acc.value() / self.volumes[i]
            })
            .collect())
    }

    /// Weighted adjoint `A* f` of the ball average.
    pub fn apply_adjoint(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        Ok((0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = KahanSum::new();
                for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.cols[t] as usize;
                    acc.add(f[j] / self.volumes[j] * self.weights[j]);
                }
                acc.value()
            })
            .collect())
    }

    /// Symmetrized average, applied through the stored kernel.
    pub fn apply_symmetrized(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        Ok((0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = KahanSum::new();
                for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.cols[t] as usize;
                    acc.add(self.kernel[t] * f[j] * self.weights[j]);
                }
                acc.value()
            })
            .collect())
    }

    /// The mean-value Laplacian `L f = (S f - s f) / r^2`, evaluated in the
    /// telescoped difference form `sum_j a(i,j) (f_j - f_i) w_j / r^2` so
    /// that constants are annihilated exactly, term by term.
    pub fn apply_amv(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let r2 = self.r * self.r;
        Ok((0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = KahanSum::new();
                for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.cols[t] as usize;
                    acc.add(self.kernel[t] * (f[j] - f[i]) * self.weights[j]);
                }
                acc.value() / r2
            })
            .collect())
    }

    /// The nonnegative quadratic energy form
    /// `E(f) = 1/4 sum_ij a(i,j) ((f_i - f_j)/r)^2 w_i w_j`.
    pub fn energy(&self, f: &[f64]) -> Result<f64> {
        self.energy_bilinear(f, f)
    }

    /// The bilinear form
    /// `E(f,g) = 1/4 sum_ij (1/V_i + 1/V_j) (f_i - f_j)(g_i - g_j)/r^2 w_i w_j`
    /// `       = 1/2 sum_ij a(i,j) (f_i - f_j)(g_i - g_j)/r^2 w_i w_j`,
    /// equal to `< -L f, g >_w` up to roundoff.
    pub fn energy_bilinear(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        self.check_len(g)?;
        let r2 = self.r * self.r;
        let partials: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = KahanSum::new();
                for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.cols[t] as usize;
                    let df = f[i] - f[j];
                    let dg = g[i] - g[j];
                    acc.add(self.kernel[t] * df * dg * self.weights[i] * self.weights[j]);
                }
                acc.value()
            })
            .collect();
        let mut acc = KahanSum::new();
        for p in partials {
            acc.add(p);
        }
        Ok(0.5 * acc.value() / r2)
    }

    /// The same energy written as the ball-average (Korevaar-Schoen style)
    /// form `1/2 sum_i w_i (1/V_i) sum_j ((f_i - f_j)/r)^2 w_j`.
    pub fn energy_korevaar_schoen(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        let r2 = self.r * self.r;
        let partials: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = KahanSum::new();
                for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.cols[t] as usize;
                    let df = f[i] - f[j];
                    acc.add(df * df * self.weights[j]);
                }
                acc.value() * self.weights[i] / self.volumes[i]
            })
            .collect();
        let mut acc = KahanSum::new();
        for p in partials {
            acc.add(p);
        }
        Ok(0.5 * acc.value() / r2)
    }

    /// The sup norm of `A* 1`: `max_i sum_{j in ball(i)} w_j / V_j`.
    pub fn condition_ir(&self) -> f64 {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = KahanSum::new();
                for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.cols[t] as usize;
                    acc.add(self.weights[j] / self.volumes[j]);
                }
                acc.value()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Operator-norm bound `(2 C^(1/2) + C + 1) / (2 r^2)` with
    /// `C = ||A* 1||_inf`.
    pub fn norm_bound(&self) -> f64 {
        let c = self.condition_ir();
        (2.0 * c.sqrt() + c + 1.0) / (2.0 * self.r * self.r)
    }

    pub fn min_volume(&self) -> f64 {
        self.volumes.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_volume(&self) -> f64 {
        self.volumes.iter().cloned().fold(0.0, f64::max)
    }

    /// Weighted inner product with this operator's quadrature weights.
    pub fn dot_w(&self, u: &[f64], v: &[f64]) -> f64 {
        weighted_dot(&self.weights, u, v)
    }

    /// Whether the ball graph is connected.
    pub fn is_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1usize;
        while let Some(i) = stack.pop() {
            for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[t] as usize;
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == n
    }

    /// Dump the matrix of `-L` in 0-based `i j value` coordinate format with
    /// a JSON metadata sidecar `<path>.meta.json`.
    pub fn dump_coo(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let r2 = self.r * self.r;
        for i in 0..self.len() {
            for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[t] as usize;
                let mut v = -self.kernel[t] * self.weights[j] / r2;
                if i == j {
                    v += self.avg_one[i] / r2;
                }
                writeln!(out, "{} {} {}", i, j, v)?;
            }
        }
        out.flush()?;
        let meta = serde_json::json!({
            "r": self.r,
            "n": self.len(),
            "volume_mode": self.volume_mode,
            "space": self.space,
        });
        std::fs::write(path.with_extension("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ball_index, ball_volume, sample, Strategy};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interval_op(n: usize, r: f64, mode: VolumeMode) -> AmvOperator {
        let s = SpaceDescriptor::interval(1.0).unwrap();
        let set = sample(&s, n, Strategy::Grid, 0).unwrap();
        let idx = ball_index(&set, r).unwrap();
        let vols = ball_volume(&set, &idx, mode).unwrap();
        assemble(&set, &idx, &vols).unwrap()
    }

    #[test]
    fn constants_are_annihilated_exactly() {
        let op = interval_op(64, 0.1, VolumeMode::Empirical);
        let f = vec![3.25; 64];
        let lap = op.apply_amv(&f).unwrap();
        assert!(lap.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn singleton_balls_give_identity_average() {
        let op = interval_op(16, 1e-4, VolumeMode::Empirical);
        let f: Vec<f64> = (0..16).map(|i| i as f64).collect();
        assert_eq!(op.apply_averaging(&f).unwrap(), f);
        assert!(op.apply_amv(&f).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(op.condition_ir(), 1.0);
    }

    #[test]
    fn averaging_of_ones_is_one_with_empirical_volumes() {
        let op = interval_op(128, 0.07, VolumeMode::Empirical);
        let ones = vec![1.0; 128];
        for v in op.apply_averaging(&ones).unwrap() {
            assert_relative_eq!(v, 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn adjoint_identity_on_random_pairs() {
        let op = interval_op(200, 0.06, VolumeMode::Empirical);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let u: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = op.dot_w(&op.apply_adjoint(&u).unwrap(), &v);
            let rhs = op.dot_w(&u, &op.apply_averaging(&v).unwrap());
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!((lhs - rhs).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn adjoint_is_weighted_l1_contraction() {
        let op = interval_op(300, 0.05, VolumeMode::Empirical);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u: Vec<f64> = (0..300).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let au = op.apply_adjoint(&u).unwrap();
            let norm = |v: &[f64]| -> f64 {
                v.iter().zip(&op.weights).map(|(x, w)| x.abs() * w).sum()
            };
            assert!(norm(&au) <= norm(&u) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn energy_identities() {
        let op = interval_op(200, 0.08, VolumeMode::Empirical);
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let constant = vec![2.0; 200];
        assert_eq!(op.energy(&constant).unwrap(), 0.0);
        for _ in 0..100 {
            let f: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e = op.energy(&f).unwrap();
            assert!(e >= 0.0);
            // quadratic form
            assert_relative_eq!(op.energy_bilinear(&f, &f).unwrap(), e, max_relative = 1e-14);
            // integration by parts: E(f, g) = < -L f, g >_w; roundoff is
            // relative to the 1/r^2-sized summands, not the cancelling sums
            let lap = op.apply_amv(&f).unwrap();
            let neg: Vec<f64> = lap.iter().map(|&v| -v).collect();
            let ibp = op.dot_w(&neg, &g);
            let norm_w = |v: &[f64]| op.dot_w(v, v).sqrt();
            let scale = op.norm_bound() * norm_w(&f) * norm_w(&g);
            assert!((op.energy_bilinear(&f, &g).unwrap() - ibp).abs() / scale < 1e-13);
            // Korevaar-Schoen equality
            let ks = op.energy_korevaar_schoen(&f).unwrap();
            assert!((e - ks).abs() / e.max(1e-30) < 1e-12);
        }
    }

    #[test]
    fn weighted_self_adjointness() {
        let op = interval_op(150, 0.09, VolumeMode::Empirical);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let f: Vec<f64> = (0..150).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..150).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = op.dot_w(&op.apply_amv(&f).unwrap(), &g);
            let rhs = op.dot_w(&f, &op.apply_amv(&g).unwrap());
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!((lhs - rhs).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn condition_ir_hand_value() {
        // interval grid n = 4, r = 0.3: (A*1)_0 = 0.25/0.5 + 0.25/0.75,
        // interior rows reach 0.25 (1/0.5 + 2/0.75) = 7/6
        let op = interval_op(4, 0.3, VolumeMode::Empirical);
        assert_relative_eq!(op.condition_ir(), 7.0 / 6.0, max_relative = 1e-14);
        let ones = vec![1.0; 4];
        let a_star_one = op.apply_adjoint(&ones).unwrap();
        assert_relative_eq!(a_star_one[0], 0.25 / 0.5 + 0.25 / 0.75, max_relative = 1e-14);
    }

    #[test]
    fn condition_ir_bounded_by_doubling_on_torus() {
        for m in 1..=2usize {
            let t = SpaceDescriptor::flat_torus_linf(m).unwrap();
            let set = sample(&t, 64usize.pow(m as u32), Strategy::Grid, 0).unwrap();
            let idx = ball_index(&set, 0.11).unwrap();
            let vols = ball_volume(&set, &idx, VolumeMode::Empirical).unwrap();
            let op = assemble(&set, &idx, &vols).unwrap();
            assert!(op.condition_ir() <= 2f64.powi(m as i32));
        }
    }

    #[test]
    fn norm_bound_formula() {
        let mut op = interval_op(4, 0.3, VolumeMode::Empirical);
        // force the two worked examples through the formula
        op.r = 0.1;
        op.volumes = vec![1.0; 4];
        op.weights = vec![0.25; 4];
        // condition_ir = 1 when every ball is a singleton with V = w
        op.row_ptr = vec![0, 1, 2, 3, 4];
        op.cols = vec![0, 1, 2, 3];
        op.volumes = vec![0.25; 4];
        assert_relative_eq!(op.norm_bound(), 200.0, max_relative = 1e-13);
        op.r = 0.5;
        op.volumes = vec![0.0625; 4]; // condition_ir = 4
        assert_relative_eq!(op.norm_bound(), 18.0, max_relative = 1e-13);
    }

    #[test]
    fn norm_bound_decreases_in_r() {
        let b = |c: f64, r: f64| (2.0 * c.sqrt() + c + 1.0) / (2.0 * r * r);
        assert!(b(1.0, 0.2) < b(1.0, 0.1));
        assert!(b(4.0, 0.5) < b(4.0, 0.25));
    }

    #[test]
    fn avg_one_at_least_one_half() {
        for mode in [VolumeMode::Empirical, VolumeMode::Analytic] {
            let op = interval_op(256, 0.07, mode);
            assert!(op.avg_one.iter().all(|&s| s >= 0.5));
        }
    }

    #[test]
    fn radius_mismatch_rejected() {
        let s = SpaceDescriptor::interval(1.0).unwrap();
        let set = sample(&s, 16, Strategy::Grid, 0).unwrap();
        let idx = ball_index(&set, 0.2).unwrap();
        let mut vols = ball_volume(&set, &idx, VolumeMode::Empirical).unwrap();
        vols.r = 0.3;
        assert!(assemble(&set, &idx, &vols).is_err());
    }

    #[test]
    fn length_mismatch_rejected() {
        let op = interval_op(16, 0.2, VolumeMode::Empirical);
        assert!(op.apply_averaging(&vec![0.0; 15]).is_err());
        assert!(op.energy(&vec![0.0; 17]).is_err());
    }

    #[test]
    fn coo_dump_writes_rows_and_metadata() {
        let op = interval_op(4, 0.3, VolumeMode::Empirical);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("op.coo");
        op.dump_coo(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), op.cols.len());
        assert!(path.with_extension("meta.json").exists());
    }
}
