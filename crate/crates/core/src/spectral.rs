//! Grids, Hermitian Fourier fields, norms, projectors and dealiased products.
//!
//! A [`SpectralField`] stores the coefficients of a real 2π-periodic function on
//! the lattice `ξ ∈ {−M/2+1, …, M/2}` in FFT order. Coefficients follow
//! `û(ξ) = (2π)^{-1/2} ∫ u e^{-ixξ} dx`, the Nyquist mode is always zero and
//! `û(−ξ) = conj(û(ξ))` holds exactly.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub(crate) fn sqrt_2pi() -> f64 {
    (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    modes: usize,
}

impl Grid {
    pub fn new(modes: usize) -> Result<Self> {
        if modes < 8 || modes % 2 != 0 {
            return Err(Error::Config(format!(
                "grid modes must be even and >= 8, got {modes}"
            )));
        }
        Ok(Self { modes })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Largest stored frequency `M/2` (the Nyquist mode, always zero).
    pub fn nyquist(&self) -> i64 {
        (self.modes / 2) as i64
    }

    /// Largest frequency retained by the 2/3 dealiasing rule.
    ///
    /// A product of two fields supported in `|ξ| ≤ K` aliases onto `|ξ| ≤ K` only if
    /// `3K < M`.
    pub fn dealias_cut(&self) -> i64 {
        ((self.modes - 1) / 3) as i64
    }

    /// Storage index of frequency `xi`, if it lies on the lattice.
    pub fn index(&self, xi: i64) -> Option<usize> {
        let m = self.modes as i64;
        if xi > m / 2 || xi <= -m / 2 {
            return None;
        }
        Some(xi.rem_euclid(m) as usize)
    }

    /// Frequency stored at index `idx`.
    pub fn freq(&self, idx: usize) -> i64 {
        let m = self.modes as i64;
        let k = idx as i64;
        if k > m / 2 {
            k - m
        } else {
            k
        }
    }

    /// Frequencies in storage order.
    pub fn frequencies(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.modes).map(move |i| self.freq(i))
    }

    /// Physical sample points `x_n = 2πn/M`.
    pub fn points(&self) -> Vec<f64> {
        (0..self.modes)
            .map(|n| 2.0 * PI * n as f64 / self.modes as f64)
            .collect()
    }
}

/// Cached forward/inverse FFT plans for one grid.
#[derive(Clone)]
pub struct Transformer {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Transformer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transformer").field("grid", &self.grid).finish()
    }
}

impl Transformer {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.modes),
            inverse: planner.plan_fft_inverse(grid.modes),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Complex samples to coefficients, in place.
    pub fn to_spectral(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
        let scale = sqrt_2pi() / self.grid.modes as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }

    /// Coefficients to complex samples, in place.
    pub fn to_physical(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / sqrt_2pi();
        buf.iter_mut().for_each(|c| *c *= scale);
    }

    /// Dealiased product of two coefficient arrays (not necessarily Hermitian).
    ///
    /// Inputs are truncated to `|ξ| ≤ dealias_cut`, multiplied in physical space and
    /// the result truncated again, which equals the direct lattice convolution
    /// `(2π)^{-1/2} Σ_{η} a(η) b(ξ−η)` over the retained band.
    pub fn dealiased_product(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let kc = self.grid.dealias_cut();
        let mut pa = a.to_vec();
        let mut pb = b.to_vec();
        truncate_band(self.grid, &mut pa, kc);
        truncate_band(self.grid, &mut pb, kc);
        self.to_physical(&mut pa);
        self.to_physical(&mut pb);
        for (x, y) in pa.iter_mut().zip(&pb) {
            *x *= *y;
        }
        self.to_spectral(&mut pa);
        truncate_band(self.grid, &mut pa, kc);
        pa
    }
}

pub(crate) fn truncate_band(grid: Grid, coeffs: &mut [Complex64], cut: i64) {
    for (i, c) in coeffs.iter_mut().enumerate() {
        if grid.freq(i).abs() > cut {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `|ξ| ≤ N`
    Low,
    /// `|ξ| > N`
    High,
}

/// A real periodic function stored as Hermitian Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.modes],
        }
    }

    /// Builds a field from coefficients in storage order, enforcing Hermitian
    /// symmetry by averaging `c(ξ)` with `conj(c(−ξ))` and zeroing Nyquist.
    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.modes {
            return Err(Error::Config(format!(
                "expected {} coefficients, got {}",
                grid.modes,
                coeffs.len()
            )));
        }
        let mut f = Self { grid, coeffs };
        f.symmetrize();
        Ok(f)
    }

    /// Builds a field from its nonnegative-frequency coefficients `ξ = 0..M/2`.
    /// The imaginary part of `c(0)` and the Nyquist entry are discarded.
    pub fn from_half_spectrum(grid: Grid, half: &[Complex64]) -> Result<Self> {
        let n = grid.nyquist() as usize;
        if half.len() != n + 1 {
            return Err(Error::Config(format!(
                "expected {} half-spectrum coefficients, got {}",
                n + 1,
                half.len()
            )));
        }
        let mut f = Self::zeros(grid);
        f.coeffs[0] = Complex64::new(half[0].re, 0.0);
        for xi in 1..n as i64 {
            f.set_pair(xi, half[xi as usize]);
        }
        Ok(f)
    }

    /// Forward transform of real samples at the grid points.
    pub fn forward(grid: Grid, samples: &[f64]) -> Result<Self> {
        if samples.len() != grid.modes {
            return Err(Error::Config(format!(
                "sample count {} does not match grid modes {}",
                samples.len(),
                grid.modes
            )));
        }
        let tr = Transformer::new(grid);
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        tr.to_spectral(&mut buf);
        Self::from_coeffs(grid, buf)
    }

    /// Samples `f` at the grid points and transforms.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let samples: Vec<f64> = grid.points().into_iter().map(f).collect();
        Self::forward(grid, &samples).expect("sample count matches grid")
    }

    /// Mean-zero field with coefficients uniform in the unit square on
    /// `1 ≤ ξ ≤ band`, scaled to unit L² norm. Deterministic in `seed`.
    pub fn random_band_limited(grid: Grid, band: i64, seed: u64) -> Result<Self> {
        if band < 1 || band >= grid.nyquist() {
            return Err(Error::Config(format!(
                "band must lie in 1..{}, got {band}",
                grid.nyquist()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Self::zeros(grid);
        for xi in 1..=band {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            f.set_pair(xi, c);
        }
        let n = f.l2_norm();
        Ok(f.scale(1.0 / n))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient at `xi`; zero off the lattice.
    pub fn coeff(&self, xi: i64) -> Complex64 {
        self.grid
            .index(xi)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    pub fn is_mean_zero(&self) -> bool {
        self.coeffs[0] == Complex64::new(0.0, 0.0)
    }

    /// Sets `c(ξ) = value` and `c(−ξ) = conj(value)` for `0 < ξ < M/2`.
    pub fn set_pair(&mut self, xi: i64, value: Complex64) {
        assert!(xi > 0 && xi < self.grid.nyquist(), "set_pair needs 0 < xi < M/2");
        let i = self.grid.index(xi).expect("on lattice");
        let j = self.grid.index(-xi).expect("on lattice");
        self.coeffs[i] = value;
        self.coeffs[j] = value.conj();
    }

    fn symmetrize(&mut self) {
        let n = self.grid.nyquist();
        self.coeffs[0] = Complex64::new(self.coeffs[0].re, 0.0);
        for xi in 1..n {
            let i = self.grid.index(xi).unwrap();
            let j = self.grid.index(-xi).unwrap();
            let avg = 0.5 * (self.coeffs[i] + self.coeffs[j].conj());
            self.coeffs[i] = avg;
            self.coeffs[j] = avg.conj();
        }
        let ny = self.grid.index(n).unwrap();
        self.coeffs[ny] = Complex64::new(0.0, 0.0);
    }

    /// Inverse transform to real samples at the grid points.
    pub fn to_samples(&self) -> Vec<f64> {
        let tr = Transformer::new(self.grid);
        let mut buf = self.coeffs.clone();
        tr.to_physical(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// `‖f‖_{L²}` from the coefficients (Plancherel).
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `‖f‖_{L²}` by the rectangle rule on the samples, exact for trigonometric
    /// polynomials of the stored band.
    pub fn l2_norm_quadrature(&self) -> f64 {
        let h = 2.0 * PI / self.grid.modes as f64;
        (h * self.to_samples().iter().map(|x| x * x).sum::<f64>()).sqrt()
    }

    /// `sup_ξ |f̂(ξ)|`.
    pub fn sup_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Dirichlet projector `P_{≤N}` (`Side::Low`) or `P_{>N}` (`Side::High`).
    pub fn project(&self, n: f64, side: Side) -> Self {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let low = (self.grid.freq(i).abs() as f64) <= n;
            if low != (side == Side::Low) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Transform of the pointwise product, `(2π)^{-1/2} f̂ * ĝ`, computed by the
    /// 2/3-rule dealiased physical-space product.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Config("convolve: fields live on different grids".into()));
        }
        let tr = Transformer::new(self.grid);
        Self::from_coeffs(self.grid, tr.dealiased_product(&self.coeffs, &other.coeffs))
    }

    /// Splits off the spatial mean: returns `(f − mean, mean)`.
    pub fn galilean_reduce(&self) -> (Self, f64) {
        let mean = self.coeffs[0].re / sqrt_2pi();
        let mut out = self.clone();
        out.coeffs[0] = Complex64::new(0.0, 0.0);
        (out, mean)
    }

    /// Applies `f(ξ, c)` to every coefficient. The map must send Hermitian
    /// pairs to Hermitian pairs; the result is re-symmetrized.
    pub fn map_coeffs(&self, f: impl Fn(i64, Complex64) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| f(self.grid.freq(i), c))
            .collect();
        let mut out = Self {
            grid: self.grid,
            coeffs,
        };
        out.symmetrize();
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid, "axpy on different grids");
        Self {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x + y * a)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// Writes the text record: a header line `M <modes> mean_zero <0|1>` followed by
    /// one `re im` line per frequency `ξ = 0..M/2`.
    pub fn write_record<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "M {} mean_zero {}",
            self.grid.modes,
            u8::from(self.is_mean_zero())
        )?;
        for xi in 0..=self.grid.nyquist() {
            let c = self.coeff(xi);
            writeln!(w, "{:.17e} {:.17e}", c.re, c.im)?;
        }
        Ok(())
    }

    pub fn read_record<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty field record".into()))?
            .map_err(|e| Error::Config(e.to_string()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "M" || parts[2] != "mean_zero" {
            return Err(Error::Config(format!("bad field record header: {header}")));
        }
        let modes: usize = parts[1]
            .parse()
            .map_err(|_| Error::Config(format!("bad mode count: {}", parts[1])))?;
        let mean_zero = match parts[3] {
            "0" => false,
            "1" => true,
            other => return Err(Error::Config(format!("bad mean_zero flag: {other}"))),
        };
        let grid = Grid::new(modes)?;
        let mut half = Vec::with_capacity(modes / 2 + 1);
        for line in lines.take(modes / 2 + 1) {
            let line = line.map_err(|e| Error::Config(e.to_string()))?;
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad coefficient line '{line}': {e}")))?;
            if nums.len() != 2 {
                return Err(Error::Config(format!("bad coefficient line '{line}'")));
            }
            half.push(Complex64::new(nums[0], nums[1]));
        }
        let field = Self::from_half_spectrum(grid, &half)?;
        if field.is_mean_zero() != mean_zero {
            return Err(Error::Config(
                "mean_zero flag disagrees with the zero-mode coefficient".into(),
            ));
        }
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(m: usize) -> Grid {
        Grid::new(m).unwrap()
    }

    #[test]
    fn grid_rejects_odd_and_small() {
        assert!(Grid::new(7).is_err());
        assert!(Grid::new(6).is_err());
        assert!(Grid::new(9).is_err());
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn lattice_indexing() {
        let g = grid(16);
        assert_eq!(g.index(8), Some(8));
        assert_eq!(g.index(-8), None);
        assert_eq!(g.index(-7), Some(9));
        for i in 0..16 {
            assert_eq!(g.index(g.freq(i)), Some(i));
        }
        assert_eq!(g.dealias_cut(), 5);
        assert_eq!(grid(128).dealias_cut(), 42);
    }

    #[test]
    fn constant_and_cosine_coefficients() {
        let g = grid(32);
        let one = SpectralField::from_fn(g, |_| 1.0);
        assert_abs_diff_eq!(one.coeff(0).re, sqrt_2pi(), epsilon = 1e-14);
        for xi in 1..16 {
            assert_abs_diff_eq!(one.coeff(xi).norm(), 0.0, epsilon = 1e-14);
        }
        let c = SpectralField::from_fn(g, f64::cos);
        assert_abs_diff_eq!(c.coeff(1).re, sqrt_2pi() / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.coeff(-1).re, sqrt_2pi() / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.coeff(0).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.coeff(2).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn forward_length_mismatch() {
        let err = SpectralField::forward(grid(16), &[0.0; 15]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = grid(64);
        assert_eq!(SpectralField::zeros(g).l2_norm(), 0.0);
        let c = SpectralField::from_fn(g, f64::cos);
        assert_abs_diff_eq!(c.l2_norm(), PI.sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(c.l2_norm_quadrature(), PI.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn projections_of_harmonics() {
        let g = grid(32);
        let c1 = SpectralField::from_fn(g, f64::cos);
        let low = c1.project(2.0, Side::Low);
        assert!(low.sub(&c1).l2_norm() < 1e-15);
        let c3 = SpectralField::from_fn(g, |x| (3.0 * x).cos());
        assert!(c3.project(2.0, Side::Low).l2_norm() < 1e-14);
        assert_abs_diff_eq!(c3.project(2.0, Side::High).l2_norm(), PI.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn exponential_squared_under_convolution() {
        // e^{ix} has coefficient √(2π) at ξ = 1; its square e^{2ix} has √(2π) at ξ = 2.
        let g = grid(16);
        let tr = Transformer::new(g);
        let mut a = vec![Complex64::new(0.0, 0.0); 16];
        a[g.index(1).unwrap()] = Complex64::new(sqrt_2pi(), 0.0);
        let out = tr.dealiased_product(&a, &a);
        assert_abs_diff_eq!(out[g.index(2).unwrap()].re, sqrt_2pi(), epsilon = 1e-13);
        assert_abs_diff_eq!(out[g.index(2).unwrap()].im, 0.0, epsilon = 1e-13);
        let others: f64 = out
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != g.index(2).unwrap())
            .map(|(_, c)| c.norm())
            .sum();
        assert!(others < 1e-13);
    }

    #[test]
    fn cosine_squared() {
        let g = grid(16);
        let c = SpectralField::from_fn(g, f64::cos);
        let sq = c.convolve(&c).unwrap();
        assert_abs_diff_eq!(sq.coeff(0).re, sqrt_2pi() / 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(sq.coeff(2).re, sqrt_2pi() / 4.0, epsilon = 1e-13);
        let zero = SpectralField::zeros(g).convolve(&c).unwrap();
        assert_eq!(zero.l2_norm(), 0.0);
    }

    #[test]
    fn convolve_rejects_grid_mismatch() {
        let a = SpectralField::zeros(grid(16));
        let b = SpectralField::zeros(grid(32));
        assert!(a.convolve(&b).is_err());
    }

    #[test]
    fn galilean_reduction() {
        let g = grid(32);
        let f = SpectralField::from_fn(g, |x| x.cos() + 0.5);
        let (r, mean) = f.galilean_reduce();
        assert_abs_diff_eq!(mean, 0.5, epsilon = 1e-14);
        assert!(r.is_mean_zero());
        let c = SpectralField::from_fn(g, f64::cos);
        assert!(r.sub(&c).l2_norm() < 1e-13);

        let (same, m0) = r.galilean_reduce();
        assert_eq!(same, r);
        assert_eq!(m0, 0.0);

        let two = SpectralField::from_fn(g, |_| 2.0);
        let (z, m2) = two.galilean_reduce();
        assert!(z.l2_norm() < 1e-13);
        assert_abs_diff_eq!(m2, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn nyquist_is_dropped() {
        let g = grid(8);
        // cos(4x) lives entirely on the Nyquist mode.
        let f = SpectralField::from_fn(g, |x| (4.0 * x).cos());
        assert_eq!(f.coeff(4), Complex64::new(0.0, 0.0));
        assert!(f.l2_norm() < 1e-14);
    }

    #[test]
    fn record_round_trip() {
        let g = grid(16);
        let f = SpectralField::from_fn(g, |x| (x.sin() + 0.3 * (2.0 * x).cos()).exp())
            .galilean_reduce()
            .0;
        let mut buf = Vec::new();
        f.write_record(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("M 16 mean_zero 1\n"));
        assert_eq!(text.lines().count(), 1 + 9);
        let back = SpectralField::read_record(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn record_rejects_bad_header() {
        assert!(SpectralField::read_record(&b"N 16 mean_zero 1\n"[..]).is_err());
        assert!(SpectralField::read_record(&b""[..]).is_err());
        let bad_flag = "M 8 mean_zero 1\n1 0\n0 0\n0 0\n0 0\n0 0\n";
        assert!(SpectralField::read_record(bad_flag.as_bytes()).is_err());
    }
}
