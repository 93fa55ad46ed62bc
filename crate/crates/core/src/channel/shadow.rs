//! Spatially correlated log-normal shadowing.
//!
//! Each site `s` sees the field `S_s(x) = σ (Z_0(x) + Z_s(x)) / √2`, where
//! `Z_0` is shared by all sites and the `Z_s` are independent. Every `Z` is a
//! zero-mean, unit-variance Gaussian field with correlation
//! `exp(-d / d_corr)` in wrapped distance, so two sites' values at the same
//! point have correlation exactly 1/2.
//!
//! Two realisations are available:
//!
//! - dense: factorise the point-to-point correlation matrix (O(n³)), for
//!   small point sets;
//! - grid: sample the field exactly on a periodic grid spanning the
//!   wrap-around torus (the grid covariance is block-circulant, so a 2-D FFT
//!   diagonalises it) and interpolate to the points.
//!
//! In both cases a correlation matrix that is not numerically positive
//! semi-definite is repaired by clipping negative eigenvalues to zero and
//! renormalising to unit diagonal.

use std::f64::consts::SQRT_2;
use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::deployment::{NetworkLayout, Point, WrapLattice};
use crate::error::{Result, SimError};
use crate::report::fmt_num;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShadowGenerator {
    /// Dense up to `dense_limit` points, grid above.
    Auto,
    Dense,
    Grid,
}

impl ShadowGenerator {
    pub fn as_str(self) -> &'static str {
        match self {
            ShadowGenerator::Auto => "auto",
            ShadowGenerator::Dense => "dense",
            ShadowGenerator::Grid => "grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowConfig {
    pub sigma_db: f64,
    pub d_corr: f64,
    pub generator: ShadowGenerator,
    pub dense_limit: usize,
    /// Target grid spacing in meters for the grid generator.
    pub grid_spacing: f64,
}

impl Default for ShadowConfig {
    fn default() -> Self {
        ShadowConfig {
            sigma_db: 7.0,
            d_corr: 25.0,
            generator: ShadowGenerator::Auto,
            dense_limit: 4000,
            grid_spacing: 25.0 / 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShadowMethod {
    Zero,
    Dense,
    Grid,
}

/// Shadowing in dB per (point, site).
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowField {
    values: Vec<f64>,
    n_sites: usize,
    pub sigma_db: f64,
    pub d_corr: f64,
    pub method: ShadowMethod,
    /// Whether the correlation structure needed PSD repair.
    pub repaired: bool,
}

impl ShadowField {
    /// A field with no shadowing.
    pub fn zeros(n_points: usize, n_sites: usize) -> Self {
        ShadowField {
            values: vec![0.0; n_points * n_sites],
            n_sites,
            sigma_db: 0.0,
            d_corr: 0.0,
            method: ShadowMethod::Zero,
            repaired: false,
        }
    }

    /// Wraps precomputed values laid out point-major.
    pub fn from_values(values: Vec<f64>, n_sites: usize) -> Self {
        assert!(n_sites > 0 && values.len() % n_sites == 0);
        ShadowField {
            values,
            n_sites,
            sigma_db: 0.0,
            d_corr: 0.0,
            method: ShadowMethod::Zero,
            repaired: false,
        }
    }

    #[inline]
    pub fn value(&self, point: usize, site: usize) -> f64 {
        self.values[point * self.n_sites + site]
    }

    pub fn row(&self, point: usize) -> &[f64] {
        &self.values[point * self.n_sites..(point + 1) * self.n_sites]
    }

    pub fn num_points(&self) -> usize {
        if self.n_sites == 0 {
            0
        } else {
            self.values.len() / self.n_sites
        }
    }

    pub fn num_sites(&self) -> usize {
        self.n_sites
    }

    /// Same-point correlation between two different sites.
    pub fn cross_corr(&self) -> f64 {
        0.5
    }
}

/// Square-root factor `F` of a correlation matrix, `F Fᵀ = R`.
#[derive(Debug, Clone)]
pub struct CorrelationFactor {
    factor: DMatrix<f64>,
    pub repaired: bool,
}

impl CorrelationFactor {
    pub fn new(corr: DMatrix<f64>) -> Self {
        match corr.clone().cholesky() {
            Some(ch) => CorrelationFactor {
                factor: ch.l(),
                repaired: false,
            },
            None => CorrelationFactor {
                factor: repair_correlation(corr),
                repaired: true,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Realised correlation `F Fᵀ`.
    pub fn correlation(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.dim();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        &self.factor * z
    }
}

/// Square-root factor of the nearest-by-clipping correlation matrix: negative
/// eigenvalues of `corr` are set to zero and the result is rescaled to unit
/// diagonal.
pub fn repair_correlation(corr: DMatrix<f64>) -> DMatrix<f64> {
    let n = corr.nrows();
    let eig = SymmetricEigen::new(corr);
    let mut b = eig.eigenvectors;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        b.column_mut(k).scale_mut(s);
    }
    for i in 0..n {
        let norm = b.row(i).norm();
        if norm > 0.0 {
            b.row_mut(i).scale_mut(1.0 / norm);
        }
    }
    b
}

/// Exact sampler of unit-variance exponential-correlation fields on a periodic
/// grid aligned with the wrap-around lattice: grid point `(i, j)` sits at
/// `(i/N)·t1 + (j/N)·t2`.
pub struct TorusGridSampler {
    n: usize,
    lattice: WrapLattice,
    sqrt_spectrum: Vec<f64>,
    corr: Vec<f64>,
    inverse: Arc<dyn Fft<f64>>,
    pub repaired: bool,
}

impl std::fmt::Debug for TorusGridSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusGridSampler")
            .field("n", &self.n)
            .field("repaired", &self.repaired)
            .finish()
    }
}

fn next_smooth(mut n: usize) -> usize {
    fn smooth(mut k: usize) -> bool {
        for p in [2, 3, 5, 7] {
            while k % p == 0 {
                k /= p;
            }
        }
        k == 1
    }
    n = n.max(1);
    while !smooth(n) {
        n += 1;
    }
    n
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn fft2(data: &mut [Complex64], n: usize, fft: &dyn Fft<f64>) {
    fft.process(data);
    transpose(data, n);
    fft.process(data);
    transpose(data, n);
}

impl TorusGridSampler {
    pub fn new(lattice: &WrapLattice, d_corr: f64, spacing: f64) -> Self {
        let (t1, t2) = lattice.basis();
        let n = next_smooth((t1.norm() / spacing).ceil() as usize);
        let m = (n * n) as f64;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        let mut buf: Vec<Complex64> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let p = t1 * (i as f64 / n as f64) + t2 * (j as f64 / n as f64);
                Complex64::new((-lattice.min_image(p).norm() / d_corr).exp(), 0.0)
            })
            .collect();
        fft2(&mut buf, n, forward.as_ref());

        let max_eig = buf.iter().map(|c| c.re).fold(0.0, f64::max);
        let repaired = buf.iter().any(|c| c.re < -1e-12 * max_eig);
        let mut spectrum: Vec<f64> = buf.iter().map(|c| c.re.max(0.0)).collect();
        let diag = spectrum.iter().sum::<f64>() / m;
        for l in &mut spectrum {
            *l /= diag;
        }

        let mut corr_buf: Vec<Complex64> = spectrum.iter().map(|&l| Complex64::new(l, 0.0)).collect();
        fft2(&mut corr_buf, n, inverse.as_ref());
        let corr = corr_buf.iter().map(|c| c.re / m).collect();
        let sqrt_spectrum = spectrum.iter().map(|&l| (l / m).sqrt()).collect();

        TorusGridSampler {
            n,
            lattice: *lattice,
            sqrt_spectrum,
            corr,
            inverse,
            repaired,
        }
    }

    /// Grid points per lattice axis.
    pub fn size(&self) -> usize {
        self.n
    }

    /// Correlation between grid points offset by `(di, dj)` grid steps.
    pub fn grid_correlation(&self, di: isize, dj: isize) -> f64 {
        let n = self.n as isize;
        self.corr[(di.rem_euclid(n) * n + dj.rem_euclid(n)) as usize]
    }

    /// Two independent fields on the grid.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex64> = self
            .sqrt_spectrum
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * s, im * s)
            })
            .collect();
        fft2(&mut buf, self.n, self.inverse.as_ref());
        (buf.iter().map(|c| c.re).collect(), buf.iter().map(|c| c.im).collect())
    }

    /// Bilinear interpolation of a grid field at `p`, with the variance of
    /// the interpolated value (1 at grid points, less in between).
    pub fn interpolate(&self, field: &[f64], p: Point) -> (f64, f64) {
        let n = self.n;
        let (u, v) = self.lattice.coords(p);
        let gu = (u - u.floor()) * n as f64;
        let gv = (v - v.floor()) * n as f64;
        let (fu, fv) = (gu - gu.floor(), gv - gv.floor());
        let i0 = (gu.floor() as usize) % n;
        let j0 = (gv.floor() as usize) % n;
        let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);

        let w = [(1.0 - fu) * (1.0 - fv), fu * (1.0 - fv), (1.0 - fu) * fv, fu * fv];
        let z = [
            field[i0 * n + j0],
            field[i1 * n + j0],
            field[i0 * n + j1],
            field[i1 * n + j1],
        ];
        let value: f64 = w.iter().zip(z).map(|(w, z)| w * z).sum();

        let c10 = self.grid_correlation(1, 0);
        let c01 = self.grid_correlation(0, 1);
        let c11 = self.grid_correlation(1, 1);
        let c1m = self.grid_correlation(1, -1);
        let var = w.iter().map(|w| w * w).sum::<f64>()
            + 2.0
                * (w[0] * w[1] * c10
                    + w[0] * w[2] * c01
                    + w[0] * w[3] * c11
                    + w[1] * w[2] * c1m
                    + w[1] * w[3] * c01
                    + w[2] * w[3] * c10);
        (value, var)
    }
}

fn combine(sigma: f64, common: &[f64], per_site: &[Vec<f64>]) -> Vec<f64> {
    let n_sites = per_site.len();
    let mut values = vec![0.0; common.len() * n_sites];
    for (i, &c) in common.iter().enumerate() {
        for (s, site) in per_site.iter().enumerate() {
            values[i * n_sites + s] = sigma * (c + site[i]) / SQRT_2;
        }
    }
    values
}

/// Shadowing for every `(point, site)` of the layout.
pub fn generate_shadow_field<R: Rng + ?Sized>(
    layout: &NetworkLayout,
    points: &[Point],
    cfg: &ShadowConfig,
    rng: &mut R,
) -> Result<ShadowField> {
    if !(cfg.sigma_db >= 0.0) {
        return Err(SimError::config("channel.shadow_sigma_db", "must be non-negative"));
    }
    if !(cfg.d_corr > 0.0) {
        return Err(SimError::config("channel.shadow_d_corr", "must be positive"));
    }
    let n_sites = layout.sites.len();
    let n = points.len();
    if n == 0 || cfg.sigma_db == 0.0 {
        return Ok(ShadowField::zeros(n, n_sites));
    }
    let dense = match cfg.generator {
        ShadowGenerator::Dense => {
            if n > cfg.dense_limit {
                return Err(SimError::config(
                    "channel.shadow_generator",
                    format!(
                        "{n} points exceed the dense factorisation limit of {}; use the grid generator",
                        cfg.dense_limit
                    ),
                ));
            }
            true
        }
        ShadowGenerator::Auto => n <= cfg.dense_limit,
        ShadowGenerator::Grid => false,
    };

    let (values, method, repaired) = if dense {
        let metric = layout.metric();
        let corr = DMatrix::from_fn(n, n, |i, j| {
            (-metric.distance(points[i], points[j]) / cfg.d_corr).exp()
        });
        let factor = CorrelationFactor::new(corr);
        let common: Vec<f64> = factor.sample(rng).iter().copied().collect();
        let per_site: Vec<Vec<f64>> = (0..n_sites)
            .map(|_| factor.sample(rng).iter().copied().collect())
            .collect();
        (combine(cfg.sigma_db, &common, &per_site), ShadowMethod::Dense, factor.repaired)
    } else {
        let lattice = layout.metric().lattice().copied().ok_or_else(|| {
            SimError::config(
                "channel.shadow_generator",
                "the grid generator needs a wrap-around layout (deployment.tiers >= 1)",
            )
        })?;
        let sampler = TorusGridSampler::new(&lattice, cfg.d_corr, cfg.grid_spacing);
        let mut fields: Vec<Vec<f64>> = Vec::with_capacity(n_sites + 1);
        while fields.len() < n_sites + 1 {
            let (a, b) = sampler.sample_pair(rng);
            for grid in [a, b] {
                if fields.len() < n_sites + 1 {
                    // Interpolation loses the variance of the field's fine
                    // structure; it is restored as independent per-point
                    // noise, which keeps the 25 m correlation unbiased where
                    // rescaling would inflate it.
                    let field = points
                        .iter()
                        .map(|&p| {
                            let (v, var) = sampler.interpolate(&grid, p);
                            let z: f64 = rng.sample(StandardNormal);
                            v + (1.0 - var).max(0.0).sqrt() * z
                        })
                        .collect();
                    fields.push(field);
                }
            }
        }
        let common = fields.remove(0);
        (combine(cfg.sigma_db, &common, &fields), ShadowMethod::Grid, sampler.repaired)
    };

    Ok(ShadowField {
        values,
        n_sites,
        sigma_db: cfg.sigma_db,
        d_corr: cfg.d_corr,
        method,
        repaired,
    })
}

/// CSV dump: one row per (point, site).
pub fn write_shadow_csv<W: Write>(mut w: W, field: &ShadowField) -> io::Result<()> {
    writeln!(w, "point,site,shadow_db")?;
    for p in 0..field.num_points() {
        for s in 0..field.num_sites() {
            writeln!(w, "{p},{s},{}", fmt_num(field.value(p, s)))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn repair_clips_and_renormalises() {
        // Pairwise-consistent but jointly infeasible correlations.
        let bad = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        assert!(bad.clone().cholesky().is_none());
        let f = CorrelationFactor::new(bad);
        assert!(f.repaired);
        let r = f.correlation();
        for i in 0..3 {
            assert!((r[(i, i)] - 1.0).abs() < 1e-12);
        }
        let eig = SymmetricEigen::new(r).eigenvalues;
        assert!(eig.iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn cholesky_path_reproduces_matrix() {
        let good = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        let f = CorrelationFactor::new(good.clone());
        assert!(!f.repaired);
        assert!((f.correlation() - good).abs().max() < 1e-12);
    }

    #[test]
    fn grid_kernel_matches_exponential() {
        let layout = NetworkLayout::build(500.0, 2).unwrap();
        let lattice = *layout.metric().lattice().unwrap();
        let s = TorusGridSampler::new(&lattice, 25.0, 25.0 / 4.0);
        assert!(s.size() >= 349);
        assert!((s.grid_correlation(0, 0) - 1.0).abs() < 1e-9);
        let h = lattice.basis().0.norm() / s.size() as f64;
        assert!((s.grid_correlation(1, 0) - (-h / 25.0).exp()).abs() < 1e-6);
        assert!((s.grid_correlation(1, 1) - (-h * 3f64.sqrt() / 25.0).exp()).abs() < 1e-6);
        assert!((s.grid_correlation(1, -1) - (-h / 25.0).exp()).abs() < 1e-6);
    }

    #[test]
    fn interpolation_keeps_unit_variance_at_grid_points() {
        let layout = NetworkLayout::build(500.0, 2).unwrap();
        let lattice = *layout.metric().lattice().unwrap();
        let s = TorusGridSampler::new(&lattice, 25.0, 25.0);
        let mut rng = stream_rng(2, 0, Stream::Shadow);
        let (a, _) = s.sample_pair(&mut rng);
        let (t1, t2) = lattice.basis();
        let n = s.size();
        let p = t1 * (3.0 / n as f64) + t2 * (5.0 / n as f64);
        let (v, var) = s.interpolate(&a, p);
        assert!((v - a[3 * n + 5]).abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-9);
        let mid = t1 * (3.5 / n as f64) + t2 * (5.5 / n as f64);
        let (_, var) = s.interpolate(&a, mid);
        assert!(var < 0.9 && var > 0.3);
    }

    #[test]
    fn dense_limit_is_enforced() {
        let layout = NetworkLayout::build(500.0, 2).unwrap();
        let pts = vec![Point::new(0.0, 0.0); 11];
        let cfg = ShadowConfig {
            generator: ShadowGenerator::Dense,
            dense_limit: 10,
            ..ShadowConfig::default()
        };
        let mut rng = stream_rng(1, 0, Stream::Shadow);
        let err = generate_shadow_field(&layout, &pts, &cfg, &mut rng).unwrap_err();
        assert!(err.to_string().contains("grid"));
    }

    #[test]
    fn same_seed_same_field() {
        let layout = NetworkLayout::build(500.0, 2).unwrap();
        let pts: Vec<Point> = (0..50).map(|i| Point::new(i as f64 * 7.0, -(i as f64) * 3.0)).collect();
        for generator in [ShadowGenerator::Dense, ShadowGenerator::Grid] {
            let cfg = ShadowConfig { generator, ..ShadowConfig::default() };
            let a = generate_shadow_field(&layout, &pts, &cfg, &mut stream_rng(9, 2, Stream::Shadow)).unwrap();
            let b = generate_shadow_field(&layout, &pts, &cfg, &mut stream_rng(9, 2, Stream::Shadow)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.num_points(), 50);
            assert_eq!(a.num_sites(), 19);
        }
    }

    #[test]
    fn zero_lag_correlation_is_one() {
        let layout = NetworkLayout::build(500.0, 2).unwrap();
        let pts = vec![Point::new(40.0, 40.0), Point::new(40.0, 40.0)];
        let cfg = ShadowConfig { generator: ShadowGenerator::Dense, ..ShadowConfig::default() };
        let f = generate_shadow_field(&layout, &pts, &cfg, &mut stream_rng(1, 0, Stream::Shadow)).unwrap();
        for s in 0..19 {
            assert!((f.value(0, s) - f.value(1, s)).abs() < 1e-6);
        }
    }
}
