//! Periodic collocation grid on `[-L, L)^2` with its discrete Fourier basis.
//!
//! Fields are stored row-major: the value at node `(i1, i2)` lives at index
//! `i1 * n + i2`, where `i1` indexes `x_1` and `i2` indexes `x_2`. Spectra use
//! the same layout over wavenumber indices in FFT order.
//!
//! The forward transform carries the `1/n^2` factor, so the zero mode of a
//! spectrum is the mean of the field. First derivatives zero the Nyquist row
//! and column so that derivatives of real fields stay real; the Laplacian and
//! the linear propagator use the same effective wavenumbers.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rows per parallel FFT task. Grids smaller than this run single-threaded.
const ROWS_PER_TASK: usize = 16;

/// Spatial axis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X1, Axis::X2];

    pub fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
        }
    }
}

struct GridInner<T: Real> {
    n: usize,
    half_length: T,
    dx: T,
    coords: Vec<T>,
    wavenumbers: Vec<T>,
    deriv_wavenumbers: Vec<T>,
    radius: Vec<T>,
    filter: OnceLock<Vec<T>>,
    fft: Arc<dyn Fft<T>>,
    ifft: Arc<dyn Fft<T>>,
}

/// Truncated periodic domain. Cloning is cheap; the grid is immutable and
/// shareable across threads.
#[derive(Clone)]
pub struct Grid<T: Real> {
    inner: Arc<GridInner<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n())
            .field("half_length", &self.half_length())
            .finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || (self.n() == other.n() && self.half_length() == other.half_length())
    }
}

impl<T: Real> Grid<T> {
    /// `n` must be an even power of two, at least 4.
    pub fn new(n: usize, half_length: T) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "points per axis must be a power of two >= 4, got {n}"
            )));
        }
        if !(half_length > T::zero()) || !half_length.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "half length must be positive and finite, got {half_length}"
            )));
        }
        let nt = T::from_usize_lossy(n);
        let two = T::lit(2.0);
        let dx = two * half_length / nt;
        let coords: Vec<T> = (0..n).map(|i| -half_length + T::from_usize_lossy(i) * dx).collect();
        let base = T::PI() / half_length;
        let half = n / 2;
        let wavenumbers: Vec<T> = (0..n)
            .map(|i| {
                let m = if i < half { i as f64 } else { i as f64 - n as f64 };
                T::lit(m) * base
            })
            .collect();
        let mut deriv_wavenumbers = wavenumbers.clone();
        deriv_wavenumbers[half] = T::zero();

        let mut radius = Vec::with_capacity(n * n);
        for &x1 in &coords {
            for &x2 in &coords {
                radius.push((x1 * x1 + x2 * x2).sqrt());
            }
        }

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                n,
                half_length,
                dx,
                coords,
                wavenumbers,
                deriv_wavenumbers,
                radius,
                filter: OnceLock::new(),
                fft,
                ifft,
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_length(&self) -> T {
        self.inner.half_length
    }

    pub fn dx(&self) -> T {
        self.inner.dx
    }

    /// Area element `dx^2`.
    pub fn cell_area(&self) -> T {
        self.inner.dx * self.inner.dx
    }

    /// Box area `(2L)^2`.
    pub fn area(&self) -> T {
        let side = T::lit(2.0) * self.inner.half_length;
        side * side
    }

    /// One-dimensional collocation coordinates, shared by both axes.
    pub fn coords(&self) -> &[T] {
        &self.inner.coords
    }

    /// Wavenumbers in FFT order (integer multiples of `pi / L`).
    pub fn wavenumbers(&self) -> &[T] {
        &self.inner.wavenumbers
    }

    /// Wavenumbers used by differentiation: Nyquist entry zeroed.
    pub fn deriv_wavenumbers(&self) -> &[T] {
        &self.inner.deriv_wavenumbers
    }

    /// Largest axis wavenumber `(n/2) pi / L`.
    pub fn xi_max(&self) -> T {
        T::from_usize_lossy(self.inner.n / 2) * T::PI() / self.inner.half_length
    }

    /// Radial coordinate at every node.
    pub fn radius(&self) -> &[T] {
        &self.inner.radius
    }

    /// Coordinates `(x1, x2)` of flat node index `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> (T, T) {
        let n = self.inner.n;
        (self.inner.coords[idx / n], self.inner.coords[idx % n])
    }

    pub fn coordinate_field(&self, axis: Axis) -> Field<T> {
        Field::from_fn(self, |x1, x2| match axis {
            Axis::X1 => x1,
            Axis::X2 => x2,
        })
    }

    pub fn radius_field(&self) -> Field<T> {
        Field::from_values(self, self.inner.radius.clone())
    }

    /// Effective `|xi|` (Nyquist zeroed) at flat spectral index `idx`.
    #[inline]
    pub fn deriv_modulus(&self, idx: usize) -> T {
        let n = self.inner.n;
        let k1 = self.inner.deriv_wavenumbers[idx / n];
        let k2 = self.inner.deriv_wavenumbers[idx % n];
        (k1 * k1 + k2 * k2).sqrt()
    }

    /// True `|xi|` at flat spectral index `idx`.
    #[inline]
    pub fn modulus(&self, idx: usize) -> T {
        let n = self.inner.n;
        let k1 = self.inner.wavenumbers[idx / n];
        let k2 = self.inner.wavenumbers[idx % n];
        (k1 * k1 + k2 * k2).sqrt()
    }

    /// Multiplier of the exponential low-pass filter
    /// `exp(-36 (|xi| / xi_max)^36)` at every spectral index.
    pub fn exponential_filter(&self) -> &[T] {
        self.inner.filter.get_or_init(|| {
            let xi_max = self.xi_max();
            let strength = T::lit(36.0);
            (0..self.len())
                .map(|idx| {
                    let ratio = self.modulus(idx) / xi_max;
                    (-strength * ratio.powi(36)).exp()
                })
                .collect()
        })
    }

    pub fn ensure_same(&self, other: &Grid<T>) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: format!("n = {}, L = {}", self.n(), self.half_length()),
                found: format!("n = {}, L = {}", other.n(), other.half_length()),
            })
        }
    }

    fn fft_rows(&self, buf: &mut [Complex<T>], inverse: bool) {
        let plan = if inverse { &self.inner.ifft } else { &self.inner.fft };
        let n = self.inner.n;
        let scratch_len = plan.get_inplace_scratch_len();
        if n < 2 * ROWS_PER_TASK {
            let mut scratch = vec![Complex::new(T::zero(), T::zero()); scratch_len];
            plan.process_with_scratch(buf, &mut scratch);
        } else {
            buf.par_chunks_mut(n * ROWS_PER_TASK).for_each(|chunk| {
                let mut scratch = vec![Complex::new(T::zero(), T::zero()); scratch_len];
                plan.process_with_scratch(chunk, &mut scratch);
            });
        }
    }

    fn transpose(&self, buf: &mut [Complex<T>]) {
        let n = self.inner.n;
        for i in 0..n {
            for j in (i + 1)..n {
                buf.swap(i * n + j, j * n + i);
            }
        }
    }

    fn fft2(&self, buf: &mut [Complex<T>], inverse: bool) {
        self.fft_rows(buf, inverse);
        self.transpose(buf);
        self.fft_rows(buf, inverse);
        self.transpose(buf);
    }
}

/// Real field sampled at the collocation nodes.
#[derive(Clone)]
pub struct Field<T: Real> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("sup", &self.sup_abs())
            .finish()
    }
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: &Grid<T>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Panics if `values.len()` does not match the grid.
    pub fn from_values(grid: &Grid<T>, values: Vec<T>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length must equal n^2");
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x1, x2) = grid.point(idx);
                f(x1, x2)
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::DivergedField {
                context: context.to_string(),
            })
        }
    }

    pub fn sup_abs(&self) -> T {
        self.values.iter().fold(
            T::zero(),
            |acc, &v| if v.abs() > acc || v.is_nan() { v.abs() } else { acc },
        )
    }

    /// Quadrature `(sum v^2 dx^2)^(1/2)`.
    pub fn l2_norm(&self) -> T {
        self.l2_norm_squared().sqrt()
    }

    pub fn l2_norm_squared(&self) -> T {
        let s: T = self.values.iter().map(|&v| v * v).sum();
        s * self.grid.cell_area()
    }

    pub fn l1_norm(&self) -> T {
        let s: T = self.values.iter().map(|&v| v.abs()).sum();
        s * self.grid.cell_area()
    }

    /// Quadrature of the field over the box.
    pub fn integral(&self) -> T {
        let s: T = self.values.iter().copied().sum();
        s * self.grid.cell_area()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination; panics on grid mismatch.
    pub fn zip_map(&self, other: &Field<T>, f: impl Fn(T, T) -> T) -> Self {
        assert!(self.grid == other.grid, "fields live on different grids");
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map(|v| c * v)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: T, other: &Field<T>) {
        assert!(self.grid == other.grid, "fields live on different grids");
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + c * b;
        }
    }

    pub fn add(&self, other: &Field<T>) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field<T>) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field<T>) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn forward_transform(&self) -> Result<Spectrum<T>> {
        forward_transform(self)
    }

    pub fn derivative(&self, axis: Axis) -> Result<Field<T>> {
        spectral_derivative(self, axis)
    }

    pub fn laplacian(&self) -> Result<Field<T>> {
        laplacian(self)
    }
}

/// Complex coefficients over wavenumber pairs. Spectra of real fields are
/// conjugate symmetric.
#[derive(Clone, Debug)]
pub struct Spectrum<T: Real> {
    grid: Grid<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn from_coeffs(grid: &Grid<T>, coeffs: Vec<Complex<T>>) -> Self {
        assert_eq!(coeffs.len(), grid.len(), "spectrum length must equal n^2");
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    /// Coefficient at signed wavenumber indices `(m1, m2)`, i.e. `xi = (m1, m2) pi / L`.
    pub fn mode(&self, m1: i64, m2: i64) -> Complex<T> {
        let n = self.grid.n() as i64;
        let i = m1.rem_euclid(n) as usize;
        let j = m2.rem_euclid(n) as usize;
        self.coeffs[i * n as usize + j]
    }

    /// Parseval L2 norm: `(2L) (sum |c|^2)^(1/2)`.
    pub fn l2_norm(&self) -> T {
        let s: T = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (self.grid.area() * s).sqrt()
    }

    /// Largest violation of `c(-xi) = conj(c(xi))`.
    pub fn conjugate_symmetry_defect(&self) -> T {
        let n = self.grid.n();
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let a = self.coeffs[i * n + j];
                let b = self.coeffs[((n - i) % n) * n + (n - j) % n].conj();
                let d = (a - b).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Multiply every coefficient by a real symbol evaluated at its index.
    pub fn apply_symbol(&mut self, symbol: impl Fn(usize) -> T) {
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            *c = c.scale(symbol(idx));
        }
    }

    pub fn apply_mask(&mut self, mask: &[T]) {
        assert_eq!(mask.len(), self.coeffs.len());
        for (c, &m) in self.coeffs.iter_mut().zip(mask) {
            *c = c.scale(m);
        }
    }

    /// Spectrum of the derivative along `axis`.
    pub fn derivative(&self, axis: Axis) -> Spectrum<T> {
        let n = self.grid.n();
        let k = self.grid.deriv_wavenumbers();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let kk = match axis {
                    Axis::X1 => k[idx / n],
                    Axis::X2 => k[idx % n],
                };
                Complex::new(-c.im * kk, c.re * kk)
            })
            .collect();
        Spectrum {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    /// Spectrum of the Laplacian, `-(k1^2 + k2^2) c`.
    pub fn laplacian(&self) -> Spectrum<T> {
        let mut out = self.clone();
        let n = self.grid.n();
        let k = self.grid.deriv_wavenumbers();
        for (idx, c) in out.coeffs.iter_mut().enumerate() {
            let k1 = k[idx / n];
            let k2 = k[idx % n];
            *c = c.scale(-(k1 * k1 + k2 * k2));
        }
        out
    }

    pub fn inverse_transform(&self) -> Field<T> {
        inverse_transform(self)
    }
}

pub fn forward_transform<T: Real>(f: &Field<T>) -> Result<Spectrum<T>> {
    f.ensure_finite("forward transform input")?;
    let grid = f.grid();
    let mut buf: Vec<Complex<T>> = f.values().iter().map(|&v| Complex::new(v, T::zero())).collect();
    grid.fft2(&mut buf, false);
    let norm = T::one() / T::from_usize_lossy(grid.len());
    for c in &mut buf {
        *c = c.scale(norm);
    }
    Ok(Spectrum {
        grid: grid.clone(),
        coeffs: buf,
    })
}

/// Inverse transform; the imaginary part (roundoff for symmetric spectra) is dropped.
pub fn inverse_transform<T: Real>(s: &Spectrum<T>) -> Field<T> {
    let grid = s.grid();
    let mut buf = s.coeffs.clone();
    grid.fft2(&mut buf, true);
    Field {
        grid: grid.clone(),
        values: buf.into_iter().map(|c| c.re).collect(),
    }
}

pub fn spectral_derivative<T: Real>(f: &Field<T>, axis: Axis) -> Result<Field<T>> {
    Ok(forward_transform(f)?.derivative(axis).inverse_transform())
}

pub fn laplacian<T: Real>(f: &Field<T>) -> Result<Field<T>> {
    Ok(forward_transform(f)?.laplacian().inverse_transform())
}

/// Both first derivatives from one forward transform.
pub fn gradient<T: Real>(f: &Field<T>) -> Result<[Field<T>; 2]> {
    let s = forward_transform(f)?;
    Ok([
        s.derivative(Axis::X1).inverse_transform(),
        s.derivative(Axis::X2).inverse_transform(),
    ])
}

/// Gradient and Laplacian from one forward transform.
pub fn gradient_and_laplacian<T: Real>(f: &Field<T>) -> Result<([Field<T>; 2], Field<T>)> {
    let s = forward_transform(f)?;
    Ok((
        [
            s.derivative(Axis::X1).inverse_transform(),
            s.derivative(Axis::X2).inverse_transform(),
        ],
        s.laplacian().inverse_transform(),
    ))
}
