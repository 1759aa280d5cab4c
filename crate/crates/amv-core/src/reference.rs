//! Closed-form reference spectra: Laplace eigenvalues of the model spaces,
//! the exact finite-radius spectrum of the sup-metric torus operator, the
//! radius scan of its spectral gap, and the target constants that relate the
//! finite-radius operator to the Laplacian.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{AmvError, Result};
use crate::geometry::{SpaceDescriptor, SpaceKind};

/// Normalized sinc: `sin(pi x) / (pi x)`, `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x == x.round() {
        // exact zero at the integers; sin(pi * k) computed in floating
        // point leaves O(eps) noise that would break ties in the scans
        0.0
    } else {
        let t = PI * x;
        t.sin() / t
    }
}

/// `C_m = 1 / (2 (m + 2))`: the constant with which the finite-radius
/// operator on a Euclidean-ball space converges to the Laplacian,
/// `lambda_k -> C_m mu_k`.
pub fn cm(m: usize) -> f64 {
    1.0 / (2.0 * (m as f64 + 2.0))
}

/// `C_m` as an exact rational `(numerator, denominator)`.
pub fn cm_rational(m: usize) -> (u64, u64) {
    (1, 2 * (m as u64 + 2))
}

/// Ascending Laplace eigenvalues with multiplicities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefSpectrum {
    pub space: SpaceDescriptor,
    /// Distinct eigenvalues, ascending, starting at 0.
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
}

impl RefSpectrum {
    /// Flatten to a list with multiplicities expanded, truncated to `k + 1`
    /// entries (indices `0..=k`).
    pub fn flattened(&self, k: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(k + 1);
        'outer: for (lam, &mult) in self.eigenvalues.iter().zip(&self.multiplicities) {
            for _ in 0..mult {
                out.push(*lam);
                if out.len() > k {
                    break 'outer;
                }
            }
        }
        out
    }
}

/// First `count` distinct Laplace eigenvalues of the model space:
/// torus modes `pi^2 |p|^2`, Neumann cube `(pi / b)^2 sum k_i^2`, interval
/// `(pi k / L)^2`, round sphere `l (l + 1)` with multiplicity `2 l + 1`.
pub fn laplace_spectrum(space: &SpaceDescriptor, count: usize) -> Result<RefSpectrum> {
    if count == 0 {
        return Err(AmvError::invalid("need at least one reference eigenvalue"));
    }
    let (eigenvalues, multiplicities) = match space.kind {
        SpaceKind::FlatTorusLinf | SpaceKind::FlatTorusEuclid => {
            integer_lattice_spectrum(space.m, count, |q| PI * PI * q as f64, true)
        }
        SpaceKind::Hypercube => {
            let b = space.side;
            integer_lattice_spectrum(space.m, count, |q| (PI / b).powi(2) * q as f64, false)
        }
        SpaceKind::Interval => {
            let l = space.side;
            let evs: Vec<f64> = (0..count).map(|k| (PI * k as f64 / l).powi(2)).collect();
            let mults = vec![1; count];
            (evs, mults)
        }
        SpaceKind::Sphere2 => {
            let evs: Vec<f64> = (0..count).map(|l| (l * (l + 1)) as f64).collect();
            let mults: Vec<usize> = (0..count).map(|l| 2 * l + 1).collect();
            (evs, mults)
        }
        SpaceKind::CustomCloud => {
            return Err(AmvError::UnsupportedSpace(
                "no closed-form spectrum for a custom point cloud".into(),
            ))
        }
    };
    Ok(RefSpectrum {
        space: space.clone(),
        eigenvalues,
        multiplicities,
    })
}

/// Distinct values of `|p|^2` over an integer lattice with multiplicities.
/// `signed` counts all of `Z^m` (torus modes); otherwise nonnegative tuples
/// only (Neumann cosine modes).
fn integer_lattice_spectrum(
    m: usize,
    count: usize,
    to_ev: impl Fn(u64) -> f64,
    signed: bool,
) -> (Vec<f64>, Vec<usize>) {
    // enumerate |p|^2 = q for q = 0, 1, 2, ... until `count` distinct
    // realizable values are found
    let mut evs = Vec::with_capacity(count);
    let mut mults = Vec::with_capacity(count);
    let mut q: u64 = 0;
    while evs.len() < count {
        let mult = lattice_multiplicity(m, q, signed);
        if mult > 0 {
            evs.push(to_ev(q));
            mults.push(mult);
        }
        q += 1;
    }
    (evs, mults)
}

/// Number of integer tuples `p` in dimension `m` with `|p|^2 = q`; signed
/// counts negative coordinates too.
fn lattice_multiplicity(m: usize, q: u64, signed: bool) -> usize {
    fn rec(m: usize, q: u64, signed: bool) -> usize {
        if m == 0 {
            return usize::from(q == 0);
        }
        let mut total = 0;
        let mut p: u64 = 0;
        while p * p <= q {
            let ways = if p == 0 || !signed { 1 } else { 2 };
            total += ways * rec(m - 1, q - p * p, signed);
            p += 1;
        }
        total
    }
    rec(m, q, signed)
}

/// Exact finite-radius spectrum of the sup-metric torus operator at radius
/// `r`: mode `p` has eigenvalue `(1 - prod_{i: p_i != 0} sinc(p_i r)) / r^2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SincSpectrum {
    pub m: usize,
    pub r: f64,
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Mode label of each eigenvalue: the nonnegative-sorted representative
    /// of the frequency tuple.
    pub modes: Vec<Vec<u32>>,
    /// Multiplicity of each listed eigenvalue (sign flips and coordinate
    /// permutations of the representative).
    pub multiplicities: Vec<usize>,
}

/// Eigenvalue of torus mode `p` at radius `r` under the sup metric.
pub fn torus_mode_eigenvalue(p: &[u32], r: f64) -> f64 {
    if p.iter().all(|&c| c == 0) {
        return 0.0;
    }
    let mut prod = 1.0;
    for &c in p {
        if c != 0 {
            prod *= sinc(c as f64 * r);
        }
    }
    (1.0 - prod) / (r * r)
}

/// The `count` lowest eigenvalues (distinct mode classes) of the sup-metric
/// torus operator at radius `r`, labelled by mode. Requires `0 < r < 1`
/// (admissible torus radii).
pub fn torus_linf_amv_spectrum(m: usize, r: f64, count: usize) -> Result<SincSpectrum> {
    if !(r > 0.0 && r < 1.0) {
        return Err(AmvError::invalid(format!(
            "torus radius must lie in (0, 1), got {r}"
        )));
    }
    if m == 0 || count == 0 {
        return Err(AmvError::invalid("need m >= 1 and count >= 1"));
    }
    // enumerate nonincreasing nonnegative tuples (class representatives) up
    // to a frequency cutoff large enough to contain the `count` lowest
    // values; grow the cutoff until the answer is stable
    let mut pmax: u32 = 8;
    loop {
        let mut items: Vec<(f64, Vec<u32>)> = Vec::new();
        let mut stack: Vec<Vec<u32>> = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            if prefix.len() == m {
                items.push((torus_mode_eigenvalue(&prefix, r), prefix));
                continue;
            }
            // nonincreasing: the next coordinate stays at or below the last
            let hi = prefix.last().copied().unwrap_or(pmax);
            for c in 0..=hi {
                let mut next = prefix.clone();
                next.push(c);
                stack.push(next);
            }
        }
        // items currently enumerates nonincreasing tuples once each
        items.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        items.dedup_by(|a, b| a.1 == b.1);
        if items.len() < count {
            pmax *= 2;
            continue;
        }
        // a class whose every coordinate is below pmax cannot be displaced
        // by higher frequencies only if the eigenvalue ceiling is safe; the
        // max eigenvalue of any mode is bounded by (1 + 1) / r^2 while modes
        // with a coordinate at pmax have value >= (1 - sinc(pmax r)) / r^2.
        // doubling pmax until the reported list stops changing is simpler
        // and cheap at these sizes.
        let head: Vec<(f64, Vec<u32>)> = items.into_iter().take(count).collect();
        if pmax >= 64 {
            let eigenvalues: Vec<f64> = head.iter().map(|(v, _)| *v).collect();
            let modes: Vec<Vec<u32>> = head.iter().map(|(_, p)| p.clone()).collect();
            let multiplicities = modes.iter().map(|p| mode_class_size(p)).collect();
            return Ok(SincSpectrum {
                m,
                r,
                eigenvalues,
                modes,
                multiplicities,
            });
        }
        pmax *= 2;
    }
}

/// Number of integer tuples obtained from a nonnegative nonincreasing
/// representative by sign flips and coordinate permutations.
fn mode_class_size(rep: &[u32]) -> usize {
    let m = rep.len();
    // permutations of the multiset times 2^(number of nonzero coordinates)
    let mut counts = std::collections::BTreeMap::new();
    for &c in rep {
        *counts.entry(c).or_insert(0usize) += 1;
    }
    let fact = |k: usize| (1..=k).product::<usize>();
    let mut perms = fact(m);
    for &c in counts.values() {
        perms /= fact(c);
    }
    let nonzero = rep.iter().filter(|&&c| c != 0).count();
    perms << nonzero
}

/// One point of the radius scan of the sup-metric torus spectral gap.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SincScanPoint {
    pub r: f64,
    /// Smallest nonzero eigenvalue over all modes up to `pmax`.
    pub gap: f64,
    /// Mode attaining the gap (first in enumeration order on ties).
    pub argmin: Vec<u32>,
}

/// Scan the spectral gap `min_{p != 0} (1 - prod sinc(p_i r)) / r^2` over a
/// radius grid. Modes are class representatives (nonincreasing tuples) with
/// coordinates up to `pmax`, enumerated in lexicographic order; the argmin
/// keeps the first mode that attains the strict minimum.
pub fn sinc_scan(m: usize, radii: &[f64], pmax: u32) -> Result<Vec<SincScanPoint>> {
    if m == 0 || pmax == 0 {
        return Err(AmvError::invalid("need m >= 1 and pmax >= 1"));
    }
    // the scan evaluates the closed-form symbol only, so r = 1 (the ball
    // covering the whole torus, where every sinc factor vanishes) is allowed
    if radii.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(AmvError::invalid("scan radii must lie in (0, 1]"));
    }
    // nonincreasing representatives in lexicographic order
    let mut modes: Vec<Vec<u32>> = Vec::new();
    let mut stack: Vec<Vec<u32>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        if prefix.len() == m {
            if prefix.iter().any(|&c| c != 0) {
                modes.push(prefix);
            }
            continue;
        }
        let hi = prefix.last().copied().unwrap_or(pmax);
        // push in reverse so the stack pops in increasing coordinate order
        for c in (0..=hi).rev() {
            let mut next = prefix.clone();
            next.push(c);
            stack.push(next);
        }
    }

    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        // per-radius sinc table over 1..=pmax
        let table: Vec<f64> = (0..=pmax).map(|c| sinc(c as f64 * r)).collect();
        let mut gap = f64::INFINITY;
        let mut argmin: Vec<u32> = Vec::new();
        for p in &modes {
            let mut prod = 1.0;
            for &c in p {
                if c != 0 {
                    prod *= table[c as usize];
                }
            }
            let val = (1.0 - prod) / (r * r);
            if val < gap {
                gap = val;
                argmin = p.clone();
            }
        }
        out.push(SincScanPoint { r, gap, argmin });
    }
    Ok(out)
}

/// Symbol of the Euclidean-ball averaging operator in dimension `m` at
/// radius `r` and frequency `xi`: the average of `cos(xi t)` of the first
/// coordinate `t` over the ball of radius `r`. The finite-radius eigenvalue
/// of Fourier mode `xi` is `(1 - symbol) / r^2`, which tends to
/// `C_m xi^2` as `r -> 0`.
pub fn round_ball_symbol(m: usize, r: f64, xi: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(AmvError::invalid("radius must be positive"));
    }
    match m {
        1 => Ok(sinc(xi * r / PI)),
        2 => {
            // weight of coordinate t in the disk: 2 sqrt(r^2 - t^2) / (pi r^2)
            let f = |t: f64| 2.0 * (r * r - t * t).max(0.0).sqrt() / (PI * r * r) * (xi * t).cos();
            Ok(adaptive_simpson(&f, -r, r, 1e-12, 30))
        }
        3 => {
            // weight: pi (r^2 - t^2) / ((4/3) pi r^3)
            let c = 3.0 / (4.0 * r * r * r);
            let f = |t: f64| c * (r * r - t * t).max(0.0) * (xi * t).cos();
            Ok(adaptive_simpson(&f, -r, r, 1e-12, 30))
        }
        _ => Err(AmvError::UnsupportedSpace(format!(
            "round-ball symbol implemented for m <= 3, got m = {m}"
        ))),
    }
}

/// Adaptive Simpson quadrature.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(a, b, fa, fm, fb);
    rec(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert_relative_eq!(sinc(0.5), 2.0 / PI, max_relative = 1e-15);
        assert!(sinc(1.0).abs() < 1e-15);
        assert!(sinc(2.0).abs() < 1e-15);
    }

    #[test]
    fn cm_values() {
        assert_eq!(cm(1), 1.0 / 6.0);
        assert_eq!(cm(2), 1.0 / 8.0);
        assert_eq!(cm(3), 0.1);
        assert_eq!(cm_rational(1), (1, 6));
        assert_eq!(cm_rational(2), (1, 8));
    }

    #[test]
    fn torus_laplace_spectrum_m1() {
        let t = SpaceDescriptor::flat_torus_linf(1).unwrap();
        let spec = laplace_spectrum(&t, 3).unwrap();
        assert_eq!(spec.eigenvalues[0], 0.0);
        assert_eq!(spec.multiplicities[0], 1);
        assert_relative_eq!(spec.eigenvalues[1], PI * PI, max_relative = 1e-15);
        assert_eq!(spec.multiplicities[1], 2);
        assert_relative_eq!(spec.eigenvalues[2], 4.0 * PI * PI, max_relative = 1e-15);
        assert_eq!(spec.multiplicities[2], 2);
    }

    #[test]
    fn torus_laplace_spectrum_m2_multiplicities() {
        let t = SpaceDescriptor::flat_torus_linf(2).unwrap();
        let spec = laplace_spectrum(&t, 4).unwrap();
        // |p|^2 = 0, 1, 2, 4 (q = 3 is not a sum of two squares)
        assert_eq!(spec.multiplicities, vec![1, 4, 4, 4]);
        assert_relative_eq!(spec.eigenvalues[2], 2.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(spec.eigenvalues[3], 4.0 * PI * PI, max_relative = 1e-15);
    }

    #[test]
    fn interval_and_cube_spectra() {
        let i = SpaceDescriptor::interval(1.0).unwrap();
        let spec = laplace_spectrum(&i, 3).unwrap();
        assert_eq!(spec.eigenvalues[1], PI * PI);
        assert_eq!(spec.eigenvalues[2], 4.0 * PI * PI);

        let c = SpaceDescriptor::hypercube(2, 0.5).unwrap();
        let spec = laplace_spectrum(&c, 3).unwrap();
        // (pi / 0.5)^2 * {0, 1, 2}
        assert_relative_eq!(spec.eigenvalues[1], 4.0 * PI * PI, max_relative = 1e-15);
        assert_eq!(spec.multiplicities[1], 2);
    }

    #[test]
    fn sphere_spectrum() {
        let s = SpaceDescriptor::sphere2();
        let spec = laplace_spectrum(&s, 4).unwrap();
        assert_eq!(spec.eigenvalues, vec![0.0, 2.0, 6.0, 12.0]);
        assert_eq!(spec.multiplicities, vec![1, 3, 5, 7]);
        // flattened ordering for comparisons
        assert_eq!(spec.flattened(8), vec![0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0]);
    }

    #[test]
    fn cloud_has_no_reference() {
        let c = SpaceDescriptor::custom_cloud(2, 1.0).unwrap();
        assert!(matches!(
            laplace_spectrum(&c, 2),
            Err(AmvError::UnsupportedSpace(_))
        ));
    }

    #[test]
    fn sinc_spectrum_m1_values() {
        let r = 0.5;
        let spec = torus_linf_amv_spectrum(1, r, 4).unwrap();
        assert_eq!(spec.eigenvalues[0], 0.0);
        assert_eq!(spec.modes[0], vec![0]);
        // mode 1: (1 - sinc(0.5)) / 0.25 = 4 (1 - 2/pi)
        assert_relative_eq!(
            spec.eigenvalues[1],
            4.0 * (1.0 - 2.0 / PI),
            max_relative = 1e-14
        );
        assert_eq!(spec.modes[1], vec![1]);
        assert_eq!(spec.multiplicities[1], 2);
        // 4 (1 - 2/pi) = 1.45352...
        assert_relative_eq!(spec.eigenvalues[1], 1.4535209105296, max_relative = 1e-12);
        // odd modes p = 5, 9, ... have sinc(p/2) = 1/(p pi / 2) > 0, so
        // their eigenvalues accumulate at 1/r^2 = 4 from below and precede
        // mode 2 (whose sinc vanishes)
        assert_eq!(spec.modes[2], vec![5]);
        assert_relative_eq!(
            spec.eigenvalues[2],
            4.0 * (1.0 - 2.0 / (5.0 * PI)),
            max_relative = 1e-14
        );
        assert_eq!(spec.modes[3], vec![9]);
        assert_relative_eq!(
            spec.eigenvalues[3],
            4.0 * (1.0 - 2.0 / (9.0 * PI)),
            max_relative = 1e-14
        );
    }

    #[test]
    fn sinc_spectrum_small_r_approaches_laplace_times_cm() {
        // lambda_p(r) -> (pi^2 p^2) / 6 per coordinate as r -> 0
        let r = 1e-3;
        let spec = torus_linf_amv_spectrum(1, r, 3).unwrap();
        assert_relative_eq!(spec.eigenvalues[1], PI * PI / 6.0, max_relative = 1e-5);
        assert_relative_eq!(
            spec.eigenvalues[2],
            4.0 * PI * PI / 6.0,
            max_relative = 1e-5
        );
        // m = 2: mode (1, 0) has the same value; mode (1, 1) adds per
        // coordinate at leading order
        let spec2 = torus_linf_amv_spectrum(2, r, 3).unwrap();
        assert_eq!(spec2.modes[1], vec![1, 0]);
        assert_relative_eq!(spec2.eigenvalues[1], PI * PI / 6.0, max_relative = 1e-5);
        assert_eq!(spec2.modes[2], vec![1, 1]);
        assert_relative_eq!(
            spec2.eigenvalues[2],
            2.0 * PI * PI / 6.0,
            max_relative = 1e-5
        );
    }

    #[test]
    fn sinc_spectrum_rejects_bad_radius() {
        assert!(torus_linf_amv_spectrum(1, 0.0, 2).is_err());
        assert!(torus_linf_amv_spectrum(1, 1.0, 2).is_err());
        assert!(torus_linf_amv_spectrum(1, 1.5, 2).is_err());
    }

    #[test]
    fn mode_class_sizes() {
        assert_eq!(mode_class_size(&[0, 0]), 1);
        assert_eq!(mode_class_size(&[1, 0]), 4);
        assert_eq!(mode_class_size(&[1, 1]), 4);
        assert_eq!(mode_class_size(&[2, 1]), 8);
        assert_eq!(mode_class_size(&[1]), 2);
    }

    #[test]
    fn scan_small_r_limit_and_integer_radius_plateau() {
        // r -> 0: gap -> pi^2 / 6 = 1.6449...
        let pts = sinc_scan(1, &[1e-3], 32).unwrap();
        assert_relative_eq!(pts[0].gap, PI * PI / 6.0, max_relative = 1e-5);
        assert_eq!(pts[0].argmin, vec![1]);

        // near r = 1 every sinc(p r) is small, so the gap approaches
        // (1 - sinc(r)) / r^2 with sinc(0.99) tiny; gap stays above 0.5
        let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let pts = sinc_scan(1, &grid, 32).unwrap();
        let min = pts.iter().map(|p| p.gap).fold(f64::INFINITY, f64::min);
        assert!(min > 0.5, "scan minimum {min}");
    }

    #[test]
    fn scan_m2_matches_m1() {
        // the minimizing mode always has one active coordinate, so the gap
        // profile is dimension-independent
        let grid: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        let a = sinc_scan(1, &grid, 16).unwrap();
        let b = sinc_scan(2, &grid, 16).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x.gap, y.gap, max_relative = 1e-14);
            assert_eq!(y.argmin, vec![x.argmin[0], 0]);
        }
    }

    #[test]
    fn round_ball_symbol_limits() {
        // m = 1 closed form
        assert_relative_eq!(
            round_ball_symbol(1, 0.5, PI).unwrap(),
            sinc(0.5),
            max_relative = 1e-14
        );
        // (1 - symbol) / r^2 -> C_m xi^2 as r -> 0
        for m in 1..=3 {
            let xi = PI;
            let target = cm(m) * xi * xi;
            let mut prev_err = f64::INFINITY;
            for &r in &[0.2, 0.1, 0.05] {
                let s = round_ball_symbol(m, r, xi).unwrap();
                let val = (1.0 - s) / (r * r);
                let err = (val - target).abs() / target;
                assert!(err < prev_err, "m = {m}: error should shrink with r");
                prev_err = err;
            }
            assert!(prev_err < 5e-3, "m = {m}: residual error {prev_err}");
        }
    }

    #[test]
    fn simpson_exactness() {
        let val = adaptive_simpson(&|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 1e-12, 20);
        // integral of x^3 - 2x + 1 over [-1, 2] = 15/4 - 3 + 3 = 15/4
        assert_relative_eq!(val, 15.0 / 4.0, max_relative = 1e-12);
        let val = adaptive_simpson(&|x: f64| x.cos(), 0.0, PI / 2.0, 1e-12, 30);
        assert_relative_eq!(val, 1.0, max_relative = 1e-11);
    }
}
