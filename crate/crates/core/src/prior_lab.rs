//! Denoisers induced by quadratic priors `rho(x) = (w/2) |Bx|^2`:
//! `f(x) = x - grad rho(x) = x - w B^T B x`, so that
//! `x^T (x - f(x)) / 2 = rho(x)`. Small instances can be kernelized into the
//! explicit filter matrix `W = I - w B^T B`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::denoise::{DenseLinearEngine, Denoiser};
use crate::error::{contract, Error, Result};
use crate::fft::{self, difference_gain_sq};
use crate::image::Image;

/// Largest instance [`kernelize`] accepts (pixels).
pub const MAX_KERNELIZE_PIXELS: usize = 4096;

/// Linear operator `B` of a quadratic prior.
#[derive(Clone, Debug, PartialEq)]
pub enum PriorOperator {
    /// Periodic horizontal first difference `x[i+1] - x[i]` along each row.
    Difference1D,
    /// Stacked periodic horizontal and vertical first differences.
    Gradient2D,
    Identity,
    /// Periodic convolution with `kernel`, origin at the kernel's top-left.
    Circulant { kernel: Image },
}

impl PriorOperator {
    /// A size-independent upper bound on `|B^T B|`.
    pub fn normal_bound(&self) -> f64 {
        match self {
            Self::Difference1D => 4.0,
            Self::Gradient2D => 8.0,
            Self::Identity => 1.0,
            Self::Circulant { kernel } => {
                let l1: f64 = kernel.data().iter().map(|v| v.abs()).sum();
                l1 * l1
            }
        }
    }

    /// `B^T B x`.
    pub fn normal(&self, x: &Image) -> Image {
        match self {
            Self::Difference1D => Image::from_fn(x.width(), x.height(), |i, j| {
                let (i, j) = (i as isize, j as isize);
                2.0 * x.get_periodic(i, j) - x.get_periodic(i - 1, j) - x.get_periodic(i + 1, j)
            }),
            Self::Gradient2D => Image::from_fn(x.width(), x.height(), |i, j| {
                let (i, j) = (i as isize, j as isize);
                4.0 * x.get_periodic(i, j)
                    - x.get_periodic(i - 1, j)
                    - x.get_periodic(i + 1, j)
                    - x.get_periodic(i, j - 1)
                    - x.get_periodic(i, j + 1)
            }),
            Self::Identity => x.clone(),
            Self::Circulant { kernel } => circ_correlate(&circ_convolve(x, kernel), kernel),
        }
    }

    /// `|Bx|^2`.
    pub fn energy(&self, x: &Image) -> f64 {
        match self {
            Self::Difference1D => (0..x.height())
                .flat_map(|j| (0..x.width()).map(move |i| (i as isize, j as isize)))
                .map(|(i, j)| (x.get_periodic(i + 1, j) - x.get_periodic(i, j)).powi(2))
                .sum(),
            Self::Gradient2D => (0..x.height())
                .flat_map(|j| (0..x.width()).map(move |i| (i as isize, j as isize)))
                .map(|(i, j)| {
                    let c = x.get_periodic(i, j);
                    (x.get_periodic(i + 1, j) - c).powi(2) + (x.get_periodic(i, j + 1) - c).powi(2)
                })
                .sum(),
            Self::Identity => x.norm_sq(),
            Self::Circulant { kernel } => circ_convolve(x, kernel).norm_sq(),
        }
    }

    /// Fourier symbol of `B^T B` on a `width x height` grid, FFT bin order.
    pub fn normal_symbol(&self, width: usize, height: usize) -> Vec<f64> {
        match self {
            Self::Difference1D => (0..height)
                .flat_map(|_| (0..width).map(move |k| difference_gain_sq(k, width)))
                .collect(),
            Self::Gradient2D => (0..height)
                .flat_map(|l| (0..width).map(move |k| difference_gain_sq(k, width) + difference_gain_sq(l, height)))
                .collect(),
            Self::Identity => vec![1.0; width * height],
            Self::Circulant { kernel } => {
                let mut embedded = Image::zeros(width, height);
                for j in 0..kernel.height() {
                    for i in 0..kernel.width() {
                        let (a, b) = (i % width, j % height);
                        embedded.set(a, b, embedded.get(a, b) + kernel.get(i, j));
                    }
                }
                fft::forward(&embedded).iter().map(|c| c.norm_sqr()).collect()
            }
        }
    }

    fn name(&self) -> String {
        match self {
            Self::Difference1D => "diff1d".into(),
            Self::Gradient2D => "grad2d".into(),
            Self::Identity => "identity".into(),
            Self::Circulant { kernel } => format!("circulant{}x{}", kernel.width(), kernel.height()),
        }
    }
}

/// `out[p] = sum_o k[o] x[p - o]`
fn circ_convolve(x: &Image, k: &Image) -> Image {
    Image::from_fn(x.width(), x.height(), |i, j| {
        let mut acc = 0.0;
        for b in 0..k.height() {
            for a in 0..k.width() {
                acc += k.get(a, b) * x.get_periodic(i as isize - a as isize, j as isize - b as isize);
            }
        }
        acc
    })
}

/// `out[p] = sum_o k[o] x[p + o]`, the adjoint of [`circ_convolve`].
fn circ_correlate(x: &Image, k: &Image) -> Image {
    Image::from_fn(x.width(), x.height(), |i, j| {
        let mut acc = 0.0;
        for b in 0..k.height() {
            for a in 0..k.width() {
                acc += k.get(a, b) * x.get_periodic(i as isize + a as isize, j as isize + b as isize);
            }
        }
        acc
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticPrior {
    pub operator: PriorOperator,
    pub weight: f64,
}

impl QuadraticPrior {
    pub fn new(operator: PriorOperator, weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(contract(format!("prior weight must be nonnegative, got {weight}")));
        }
        Ok(Self { operator, weight })
    }

    /// `(w/2) |Bx|^2`
    pub fn rho(&self, x: &Image) -> f64 {
        0.5 * self.weight * self.operator.energy(x)
    }

    /// `w B^T B x`
    pub fn gradient(&self, x: &Image) -> Image {
        self.operator.normal(x).scale(self.weight)
    }

    /// `w |B^T B|` bound used by the passivity guard.
    pub fn passivity_bound(&self) -> f64 {
        self.weight * self.operator.normal_bound()
    }
}

/// `f(x) = x - w B^T B x`.
#[derive(Clone, Debug)]
pub struct InducedDenoiser {
    prior: QuadraticPrior,
}

impl InducedDenoiser {
    pub fn prior(&self) -> &QuadraticPrior {
        &self.prior
    }
}

impl Denoiser for InducedDenoiser {
    fn denoise(&self, x: &Image) -> Image {
        let mut out = x.clone();
        out.axpy(-1.0, &self.prior.gradient(x));
        out
    }
    fn name(&self) -> String {
        format!("induced({}, w={})", self.prior.operator.name(), self.prior.weight)
    }
}

/// Builds the denoiser induced by `prior`; refuses weights for which
/// `I - w B^T B` could have eigenvalues outside `[-1, 1]`.
pub fn induced_denoiser(prior: &QuadraticPrior) -> Result<InducedDenoiser> {
    let bound = prior.passivity_bound();
    if bound > 1.0 {
        return Err(Error::PassivityViolated { bound });
    }
    Ok(InducedDenoiser { prior: prior.clone() })
}

/// Explicit `n x n` filter matrix over row-major pixels.
#[derive(Clone, Debug)]
pub struct DenseFilterMatrix {
    pub width: usize,
    pub height: usize,
    pub matrix: DMatrix<f64>,
    pub symmetric: bool,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl DenseFilterMatrix {
    pub fn new(width: usize, height: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let n = width * height;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(contract(format!("expected a {n}x{n} matrix")));
        }
        let mut m = Self {
            width,
            height,
            matrix,
            symmetric: false,
        };
        m.symmetric = m.symmetry_deviation() <= SYMMETRY_TOL;
        Ok(m)
    }

    /// `max |W_ij - W_ji|`
    pub fn symmetry_deviation(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn apply(&self, x: &Image) -> Result<Image> {
        if x.dims() != (self.width, self.height) {
            return Err(contract("image shape does not match the filter matrix"));
        }
        let v = &self.matrix * nalgebra::DVector::from_column_slice(x.data());
        Image::new(self.width, self.height, v.as_slice().to_vec())
    }

    /// Ascending eigenvalues of a symmetric matrix.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.symmetric {
            return Err(Error::Unsupported("eigenvalues are only computed for symmetric W".into()));
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    pub fn into_engine(self) -> DenseLinearEngine {
        DenseLinearEngine::new(self.width, self.height, self.matrix).expect("shape checked at construction")
    }
}

/// `W = I - w B^T B` materialized column by column; `O(n)` operator
/// applications and `O(n^2)` memory.
pub fn kernelize(prior: &QuadraticPrior, width: usize, height: usize) -> Result<DenseFilterMatrix> {
    let n = width * height;
    if n == 0 || n > MAX_KERNELIZE_PIXELS {
        return Err(contract(format!(
            "kernelize needs 1..={MAX_KERNELIZE_PIXELS} pixels, got {n}"
        )));
    }
    let f = InducedDenoiser { prior: prior.clone() };
    let mut m = DMatrix::zeros(n, n);
    let mut e = Image::zeros(width, height);
    for col in 0..n {
        e.data_mut()[col] = 1.0;
        let c = f.denoise(&e);
        m.column_mut(col).copy_from_slice(c.data());
        e.data_mut()[col] = 0.0;
    }
    DenseFilterMatrix::new(width, height, m)
}

/// Eigenvalues of `I - w B^T B` from the Fourier symbol, FFT bin order.
pub fn circulant_eigenvalues(prior: &QuadraticPrior, width: usize, height: usize) -> Vec<f64> {
    prior
        .operator
        .normal_symbol(width, height)
        .into_iter()
        .map(|g| 1.0 - prior.weight * g)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RowStochasticReport {
    /// Every row sums to 1 within `1e-10`.
    pub row_stochastic: bool,
    pub max_row_deviation: f64,
    /// Reported separately; not part of the verdict.
    pub nonnegative: bool,
    pub min_entry: f64,
}

pub const ROW_SUM_TOL: f64 = 1e-10;

pub fn row_stochastic_check(w: &DenseFilterMatrix) -> RowStochasticReport {
    let max_row_deviation = w
        .matrix
        .row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    let min_entry = w.matrix.min();
    RowStochasticReport {
        row_stochastic: max_row_deviation <= ROW_SUM_TOL,
        max_row_deviation,
        nonnegative: min_entry >= 0.0,
        min_entry,
    }
}

/// `|f(x) - W x| / |x|` with `W` from [`kernelize`]; 0 for `x = 0`.
pub fn directional_consistency(prior: &QuadraticPrior, x: &Image) -> Result<f64> {
    let w = kernelize(prior, x.width(), x.height())?;
    let f = InducedDenoiser { prior: prior.clone() };
    let gap = (&f.denoise(x) - &w.apply(x)?).norm();
    let nx = x.norm();
    Ok(if nx > 0.0 { gap / nx } else { gap })
}
