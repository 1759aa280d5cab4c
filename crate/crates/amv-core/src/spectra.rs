//! Low spectrum of the negative mean-value Laplacian in the weighted inner
//! product, Rayleigh quotients, tent-function upper bounds and spectral
//! diagnostics.

use std::io::Write as _;
use std::path::Path;

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AmvError, Result};
use crate::geometry::{ball_index, ball_volume, SampleSet, VolumeMode};
use crate::operator::{assemble, AmvOperator};
use crate::util::{weighted_norm, KahanSum};

/// Instances up to this size use the dense symmetric eigendecomposition;
/// larger ones go through Lanczos with full reorthogonalization.
pub const DENSE_LIMIT: usize = 4096;

/// Iterative-path tolerance: relative residual against the operator-norm
/// bound.
pub const LANCZOS_TOL: f64 = 1e-8;

/// Lowest eigenpairs of `-L`, weight-orthonormal eigenvectors, residual
/// norms, and the essential-spectrum threshold `min_i s_i / r^2`.
#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub r: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub essential_threshold: f64,
}

/// The similarity transform `S = D^(1/2) (-L) D^(-1/2)`, `D = diag(w)`.
/// `S` is symmetric in the plain inner product and shares the eigenvalues of
/// `-L` in the weighted space; eigenvectors map back via `D^(-1/2)`.
pub struct SymmetrizedOp<'a> {
    op: &'a AmvOperator,
    sqrt_w: Vec<f64>,
    /// Diagonal `(s_i - a(i,i) w_i) / r^2`, formed from the quadrature value
    /// of `s` so isolated points get an exactly zero row despite the `1/r^2`
    /// amplification.
    diag: Vec<f64>,
}

/// Build the symmetrized action. Fails on nonpositive weights.
pub fn symmetrize(op: &AmvOperator) -> Result<SymmetrizedOp<'_>> {
    if op.weights.iter().any(|&w| !(w > 0.0)) {
        return Err(AmvError::invalid("weights must be positive to symmetrize"));
    }
    let r2 = op.r * op.r;
    let diag = (0..op.len())
        .map(|i| {
            let mut a_ii = 0.0;
            for t in op.row_ptr[i]..op.row_ptr[i + 1] {
                if op.cols[t] as usize == i {
                    a_ii = op.kernel[t];
                    break;
                }
            }
            (op.avg_one[i] - a_ii * op.weights[i]) / r2
        })
        .collect();
    Ok(SymmetrizedOp {
        op,
        sqrt_w: op.weights.iter().map(|&w| w.sqrt()).collect(),
        diag,
    })
}

impl SymmetrizedOp<'_> {
    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.op.is_empty()
    }

    /// `S g`, applied through the sparse kernel.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let op = self.op;
        let r2 = op.r * op.r;
        (0..op.len())
            .map(|i| {
                let mut acc = KahanSum::new();
                for t in op.row_ptr[i]..op.row_ptr[i + 1] {
                    let j = op.cols[t] as usize;
                    if j != i {
                        acc.add(-op.kernel[t] * self.sqrt_w[i] * self.sqrt_w[j] / r2 * g[j]);
                    }
                }
                acc.add(self.diag[i] * g[i]);
                acc.value()
            })
            .collect()
    }

    /// Dense matrix of `S`.
    pub fn to_dense(&self) -> Mat<f64> {
        let op = self.op;
        let n = op.len();
        let r2 = op.r * op.r;
        let mut mat = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for t in op.row_ptr[i]..op.row_ptr[i + 1] {
                let j = op.cols[t] as usize;
                if i == j {
                    mat[(i, i)] = self.diag[i];
                } else {
                    mat[(i, j)] = -op.kernel[t] * self.sqrt_w[i] * self.sqrt_w[j] / r2;
                }
            }
        }
        mat
    }

    /// Map an eigenvector of `S` back to the weighted space.
    pub fn unsymmetrize(&self, g: &[f64]) -> Vec<f64> {
        g.iter().zip(&self.sqrt_w).map(|(&v, &s)| v / s).collect()
    }
}

/// Lower bound of the non-discrete part of the spectrum: `min_i s_i / r^2`.
/// Computed eigenvalues below it sit in the isolated regime.
pub fn essential_threshold(op: &AmvOperator) -> f64 {
    let min_avg = op.avg_one.iter().cloned().fold(f64::INFINITY, f64::min);
    min_avg / (op.r * op.r)
}

/// The `k+1` lowest eigenpairs of `-L`, ascending.
///
/// Dense symmetric eigendecomposition up to [`DENSE_LIMIT`] points; Lanczos
/// with full reorthogonalization beyond, iteration cap `10 k + 200`,
/// relative residual tolerance [`LANCZOS_TOL`]. Deterministic (fixed internal
/// start vector).
pub fn eig_lowest(op: &AmvOperator, k: usize) -> Result<SpectralResult> {
    let n = op.len();
    if k + 1 > n {
        return Err(AmvError::invalid(format!(
            "requested k + 1 = {} eigenpairs from an {n}-point operator",
            k + 1
        )));
    }
    let sym = symmetrize(op)?;
    let (mut evals, gvecs) = if n <= DENSE_LIMIT {
        dense_lowest(&sym, k)?
    } else {
        lanczos_lowest(&sym, op.norm_bound(), k)?
    };

    // residuals in the weighted norm equal plain 2-norm residuals of S
    let mut residuals = Vec::with_capacity(k + 1);
    for (lam, g) in evals.iter().zip(&gvecs) {
        let sg = sym.apply(g);
        let mut acc = KahanSum::new();
        for i in 0..n {
            let d = sg[i] - lam * g[i];
            acc.add(d * d);
        }
        residuals.push(acc.value().sqrt());
    }

    // exact-kernel clamp on connected ball graphs
    if evals[0].abs() < 1e-10 * op.norm_bound() && op.is_connected() {
        evals[0] = 0.0;
    }

    let eigenvectors: Vec<Vec<f64>> = gvecs.iter().map(|g| sym.unsymmetrize(g)).collect();
    Ok(SpectralResult {
        r: op.r,
        eigenvalues: evals,
        eigenvectors,
        residuals,
        essential_threshold: essential_threshold(op),
    })
}

fn dense_lowest(sym: &SymmetrizedOp<'_>, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mat = sym.to_dense();
    let eig = mat
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| AmvError::NumericFailure(format!("dense eigendecomposition failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let evals: Vec<f64> = (0..=k).map(|i| s[i]).collect();
    let gvecs: Vec<Vec<f64>> = (0..=k)
        .map(|i| (0..sym.len()).map(|row| u[(row, i)]).collect())
        .collect();
    Ok((evals, gvecs))
}

/// Largest eigenvalue of `-L` (the discrete spectral radius, since the
/// operator is nonnegative).
pub fn spectral_radius(op: &AmvOperator) -> Result<f64> {
    let sym = symmetrize(op)?;
    let n = op.len();
    if n <= DENSE_LIMIT {
        let eig = sym
            .to_dense()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| AmvError::NumericFailure(format!("dense eigenvalues failed: {e:?}")))?;
        Ok(*eig.last().expect("nonempty spectrum"))
    } else {
        let scale = op.norm_bound();
        let (thetas, _, _) = lanczos_extremal(&|g| sym.apply(g), n, 1, 400, LANCZOS_TOL, scale)?;
        Ok(thetas[0])
    }
}

fn lanczos_lowest(
    sym: &SymmetrizedOp<'_>,
    shift: f64,
    k: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = sym.len();
    let cap = 10 * k + 200;
    // spectrum of shift*I - S lies in [0, shift]; its top end is the bottom
    // of S
    let apply = |g: &[f64]| -> Vec<f64> {
        let sg = sym.apply(g);
        g.iter().zip(sg).map(|(&gi, si)| shift * gi - si).collect()
    };
    let (thetas, vecs, _res) = lanczos_extremal(&apply, n, k + 1, cap, LANCZOS_TOL, shift)?;
    // map back and sort ascending in S
    let mut pairs: Vec<(f64, Vec<f64>)> = thetas
        .into_iter()
        .zip(vecs)
        .map(|(t, v)| (shift - t, v))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// Lanczos with full reorthogonalization; returns the `want` largest Ritz
/// pairs of the symmetric operator `apply`, descending, with residual
/// estimates. `scale` sets the absolute convergence target
/// `tol * scale`.
fn lanczos_extremal(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    n: usize,
    want: usize,
    cap: usize,
    tol: f64,
    scale: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let cap = cap.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let target = tol * scale;
    let mut best: Option<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> = None;

    for step in 0..cap {
        let vj = basis[step].clone();
        let mut w = apply(&vj);
        let alpha: f64 = w.iter().zip(&vj).map(|(a, b)| a * b).sum();
        alphas.push(alpha);
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for b in &basis {
                let proj: f64 = w.iter().zip(b).map(|(a, c)| a * c).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= proj * bi;
                }
            }
        }
        let beta = w.iter().map(|x| x * x).sum::<f64>().sqrt();

        let dim = alphas.len();
        let check_now = beta < 1e-14 * scale || dim % 10 == 0 || step + 1 == cap || dim >= want;
        if check_now && dim >= want {
            let (thetas, svecs) = tridiag_eigen(&alphas, &betas)?;
            // largest `want` Ritz values (thetas ascending)
            let top: Vec<usize> = ((dim - want)..dim).rev().collect();
            let mut res = Vec::with_capacity(want);
            for &idx in &top {
                res.push((beta * svecs[idx][dim - 1]).abs());
            }
            let ritz = |idx: usize| -> Vec<f64> {
                let mut x = vec![0.0; n];
                for (j, b) in basis.iter().take(dim).enumerate() {
                    let c = svecs[idx][j];
                    for (xi, bi) in x.iter_mut().zip(b) {
                        *xi += c * bi;
                    }
                }
                let nx = x.iter().map(|t| t * t).sum::<f64>().sqrt();
                x.iter_mut().for_each(|t| *t /= nx);
                x
            };
            let done = res.iter().all(|&r| r <= target) || beta < 1e-14 * scale;
            let thetas_top: Vec<f64> = top.iter().map(|&i| thetas[i]).collect();
            if done {
                let vecs: Vec<Vec<f64>> = top.iter().map(|&i| ritz(i)).collect();
                return Ok((thetas_top, vecs, res));
            }
            if step + 1 == cap {
                let vecs: Vec<Vec<f64>> = top.iter().map(|&i| ritz(i)).collect();
                best = Some((thetas_top, vecs, res));
            }
        }
        if beta < 1e-14 * scale {
            // invariant subspace smaller than requested
            return Err(AmvError::NumericFailure(
                "Lanczos breakdown before enough Ritz pairs converged".into(),
            ));
        }
        betas.push(beta);
        let next: Vec<f64> = w.into_iter().map(|x| x / beta).collect();
        basis.push(next);
    }

    let (_thetas, _vecs, res) = best.expect("cap >= 1 guarantees a final Ritz solve");
    let worst = res.iter().cloned().fold(0.0, f64::max);
    Err(AmvError::ConvergenceFailure {
        iterations: cap,
        worst_residual: worst,
        residuals: res,
    })
}

/// Eigendecomposition of the Lanczos tridiagonal, ascending; returns
/// (values, vectors) with `vectors[i]` the i-th eigenvector.
fn tridiag_eigen(alphas: &[f64], betas: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dim = alphas.len();
    let mut t = Mat::<f64>::zeros(dim, dim);
    for i in 0..dim {
        t[(i, i)] = alphas[i];
        if i + 1 < dim {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| AmvError::NumericFailure(format!("tridiagonal eigensolve failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let values: Vec<f64> = (0..dim).map(|i| s[i]).collect();
    let vectors: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|row| u[(row, i)]).collect())
        .collect();
    Ok((values, vectors))
}

/// Rayleigh quotient `E(f) / <f, f>_w`; upper-bounds the first nonzero
/// eigenvalue on weighted-mean-zero inputs.
pub fn rayleigh(op: &AmvOperator, f: &[f64]) -> Result<f64> {
    let denom = op.dot_w(f, f);
    if !(denom > 0.0) {
        return Err(AmvError::invalid("rayleigh quotient of the zero vector"));
    }
    Ok(op.energy(f)? / denom)
}

/// Outcome of the tent-function construction.
#[derive(Clone, Debug)]
pub struct TentBoundReport {
    /// `max_i E(f_i)`: an upper bound for the (k)-th min-max value when
    /// `k + 1` centers are supplied.
    pub bound: f64,
    /// Energy of each normalized tent.
    pub energies: Vec<f64>,
    /// Largest cross energy `|E(f_i, f_j)|`, `i != j`; zero when supports
    /// stay disjoint.
    pub max_cross_energy: f64,
    /// Tent support radius: min pairwise center distance over 4.
    pub support_radius: f64,
}

/// Build normalized tent functions `(1 - d(c_i, .) / rbar)^+` at the given
/// centers, with `rbar` a quarter of the minimal center separation, verify
/// their energies do not interact at ball radius `r`, and return the largest
/// single-tent energy.
pub fn tent_upper_bound(
    samples: &SampleSet,
    r: f64,
    centers: &[Vec<f64>],
) -> Result<TentBoundReport> {
    if centers.len() < 1 {
        return Err(AmvError::invalid("need at least one tent center"));
    }
    let space = &samples.space;
    let mut min_sep = f64::INFINITY;
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            min_sep = min_sep.min(space.distance(&centers[i], &centers[j])?);
        }
    }
    let rbar = if centers.len() == 1 {
        // single tent: any support radius below the admissible bound works
        0.5 * space.max_radius().min(space.diameter())
    } else {
        if !(min_sep > 0.0) {
            return Err(AmvError::invalid("tent centers must be pairwise distinct"));
        }
        min_sep / 4.0
    };
    if !(r < rbar) {
        return Err(AmvError::invalid(format!(
            "ball radius {r} must stay below the tent support radius {rbar}; supports may interact"
        )));
    }

    let idx = ball_index(samples, r)?;
    let vols = ball_volume(samples, &idx, VolumeMode::Empirical)?;
    let op = assemble(samples, &idx, &vols)?;

    let mut tents: Vec<Vec<f64>> = Vec::with_capacity(centers.len());
    for c in centers {
        let mut f = Vec::with_capacity(samples.len());
        for p in &samples.points {
            let d = space.distance(c, p)?;
            f.push((1.0 - d / rbar).max(0.0));
        }
        let norm = weighted_norm(&samples.weights, &f);
        if !(norm > 0.0) {
            return Err(AmvError::invalid(
                "a tent support contains no sample points; refine the sampling",
            ));
        }
        f.iter_mut().for_each(|v| *v /= norm);
        tents.push(f);
    }

    let mut energies = Vec::with_capacity(tents.len());
    for f in &tents {
        energies.push(op.energy(f)?);
    }
    let mut max_cross: f64 = 0.0;
    for i in 0..tents.len() {
        for j in (i + 1)..tents.len() {
            max_cross = max_cross.max(op.energy_bilinear(&tents[i], &tents[j])?.abs());
        }
    }
    let bound = energies.iter().cloned().fold(0.0, f64::max);
    Ok(TentBoundReport {
        bound,
        energies,
        max_cross_energy: max_cross,
        support_radius: rbar,
    })
}

impl SpectralResult {
    /// CSV `k,lambda,residual` plus a JSON metadata sidecar
    /// `<path>.meta.json`.
    pub fn write_csv(&self, path: impl AsRef<Path>, op: &AmvOperator) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "k,lambda,residual")?;
        for (k, (lam, res)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            writeln!(out, "{},{},{}", k, lam, res)?;
        }
        out.flush()?;
        let meta = serde_json::json!({
            "r": self.r,
            "n": op.len(),
            "space": op.space,
            "volume_mode": op.volume_mode,
            "essential_threshold": self.essential_threshold,
        });
        std::fs::write(path.with_extension("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Dense eigenvector matrix (one column per eigenpair) as CSV.
    pub fn write_vectors_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let n = self.eigenvectors.first().map_or(0, |v| v.len());
        for row in 0..n {
            let line: Vec<String> = self.eigenvectors.iter().map(|v| v[row].to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}
