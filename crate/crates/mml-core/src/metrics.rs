//! The three similarity branches between a query image and a support class:
//!
//! * **part-level** — cosine correlation between part descriptors (channel
//!   planes), summing the ξ largest entries per row;
//! * **pixel-level** — image-to-class cosine correlation between pixel
//!   descriptors (channel fibers), summing the k largest entries per row;
//! * **distribution-level** — a divergence between multivariate Gaussians
//!   fitted to the pixel descriptors of the query and of the pooled support
//!   class: KL divergence, exact 2-Wasserstein, or its cheap approximation.
//!
//! Part- and pixel-level values are similarities (larger = more similar);
//! the distribution-level value is a distance (larger = less similar).

use alloc::vec::Vec;

use crate::descriptors::{part_view, pixel_view, FeatureMap, PartView, PixelView};
use crate::error::{invalid_arg, numerical};
use crate::tensor::{
    cholesky, cholesky_solve, cosine_matrix, covariance, forward_solve, log_det_from_cholesky,
    mean_vector, row_topk_sum, sqrt_psd, Matrix, Vector,
};
use crate::Result;

/// Default covariance shrinkage, expressed relative to the mean diagonal of
/// the unshrunk sample covariance. Keeps KL well-defined when descriptor
/// counts are small against the channel dimension without materially
/// perturbing well-conditioned fits.
pub const DEFAULT_RELATIVE_SHRINKAGE: f64 = 1e-3;

/// Which Gaussian divergence the distribution branch uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    /// Closed-form KL divergence between the two Gaussians.
    Kl,
    /// Exact squared 2-Wasserstein distance (matrix square roots via
    /// symmetric eigendecomposition).
    WassersteinExact,
    /// Approximate squared 2-Wasserstein: squared mean gap plus squared
    /// Frobenius norm of the covariance gap.
    WassersteinApprox,
}

/// Argument order of the KL divergence in the distribution branch.
///
/// The branch defaults to KL(support ‖ query); the opposite direction is
/// available behind this flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlDirection {
    /// KL(S ‖ Q): support distribution against the query distribution.
    SupportToQuery,
    /// KL(Q ‖ S).
    QueryToSupport,
}

/// Configuration of the three metric branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    /// Part-level neighbour count ξ (how many largest cosines per part
    /// descriptor are summed). Typically 1.
    pub xi: usize,
    /// Pixel-level neighbour count k. Typically 1.
    pub k: usize,
    /// Distribution divergence variant.
    pub distribution: DistributionKind,
    /// Covariance shrinkage, relative to the mean diagonal of the unshrunk
    /// sample covariance (see [`fit_gaussian_relative`]).
    pub shrinkage: f64,
    /// KL argument order; ignored by the Wasserstein variants.
    pub kl_direction: KlDirection,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            xi: 1,
            k: 1,
            distribution: DistributionKind::Kl,
            shrinkage: DEFAULT_RELATIVE_SHRINKAGE,
            kl_direction: KlDirection::SupportToQuery,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.xi < 1 {
            return Err(invalid_arg!("xi must be >= 1"));
        }
        if self.k < 1 {
            return Err(invalid_arg!("k must be >= 1"));
        }
        if !self.shrinkage.is_finite() || self.shrinkage < 0.0 {
            return Err(invalid_arg!(
                "shrinkage must be a finite value >= 0, got {}",
                self.shrinkage
            ));
        }
        Ok(())
    }
}

/// Mean vector and covariance matrix of a descriptor set, under the
/// multivariate-Gaussian assumption of the distribution branch.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    mu: Vector,
    sigma: Matrix,
}

impl GaussianStats {
    pub fn new(mu: Vector, sigma: Matrix) -> Result<Self> {
        if !sigma.is_square() || sigma.rows() != mu.dim() {
            return Err(invalid_arg!(
                "covariance shape {}x{} does not match mean dimension {}",
                sigma.rows(),
                sigma.cols(),
                mu.dim()
            ));
        }
        for i in 0..sigma.rows() {
            for j in (i + 1)..sigma.cols() {
                if sigma.get(i, j) != sigma.get(j, i) {
                    return Err(invalid_arg!(
                        "covariance is not symmetric at ({i}, {j})"
                    ));
                }
            }
        }
        Ok(Self { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    /// Scales both the mean and the covariance by `s` (test and calibration
    /// helper; note Σ scales linearly here, not quadratically).
    pub fn scaled(&self, s: f64) -> Self {
        let mu = Vector::from_values(self.mu.values().iter().map(|v| v * s).collect()).unwrap();
        let sigma = Matrix::from_values(
            self.sigma.rows(),
            self.sigma.cols(),
            self.sigma.values().iter().map(|v| v * s).collect(),
        )
        .unwrap();
        Self { mu, sigma }
    }
}

/// Per-class similarity triple for one query. `d_part` and `d_pixel` are
/// similarities; `d_dist` is a distance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchScores {
    pub d_part: f64,
    pub d_pixel: f64,
    pub d_dist: f64,
}

/// Part-level similarity: builds the `C×MC` cosine correlation matrix
/// between query and support part descriptors and sums the ξ largest
/// entries of each row.
pub fn part_score(query: &PartView, support: &PartView, xi: usize) -> Result<f64> {
    if query.dim() != support.dim() {
        return Err(invalid_arg!(
            "part descriptor dimensions differ: query HW={}, support HW={}",
            query.dim(),
            support.dim()
        ));
    }
    if xi < 1 || xi > support.count() {
        return Err(invalid_arg!(
            "xi={xi} out of range 1..={} support part descriptors",
            support.count()
        ));
    }
    let corr = cosine_matrix(query.columns(), support.columns())?;
    row_topk_sum(&corr, xi)
}

/// Pixel-level image-to-class similarity: builds the `HW×MHW` cosine
/// correlation matrix between query and support pixel descriptors and sums
/// the k largest entries of each row.
pub fn pixel_score(query: &PixelView, support: &PixelView, k: usize) -> Result<f64> {
    if query.dim() != support.dim() {
        return Err(invalid_arg!(
            "pixel descriptor dimensions differ: query C={}, support C={}",
            query.dim(),
            support.dim()
        ));
    }
    if k < 1 || k > support.count() {
        return Err(invalid_arg!(
            "k={k} out of range 1..={} support pixel descriptors",
            support.count()
        ));
    }
    let corr = cosine_matrix(query.columns(), support.columns())?;
    row_topk_sum(&corr, k)
}

/// Fits a Gaussian to a pixel descriptor set: `mu` is the column mean,
/// `sigma` the biased sample covariance plus `shrinkage·I` (absolute
/// shrinkage).
pub fn fit_gaussian(pixels: &PixelView, shrinkage: f64) -> Result<GaussianStats> {
    if pixels.count() == 0 {
        return Err(invalid_arg!("cannot fit a Gaussian to an empty descriptor set"));
    }
    let mu = mean_vector(pixels.columns())?;
    let sigma = covariance(pixels.columns(), shrinkage)?;
    Ok(GaussianStats { mu, sigma })
}

/// Fits a Gaussian with shrinkage scaled to the data: the ridge added to the
/// diagonal is `relative_shrinkage` times the mean diagonal of the unshrunk
/// sample covariance. A zero-variance descriptor set gets no ridge and will
/// fail downstream SPD checks, which is the correct signal.
pub fn fit_gaussian_relative(pixels: &PixelView, relative_shrinkage: f64) -> Result<GaussianStats> {
    if !relative_shrinkage.is_finite() || relative_shrinkage < 0.0 {
        return Err(invalid_arg!(
            "relative shrinkage must be >= 0, got {relative_shrinkage}"
        ));
    }
    if pixels.count() == 0 {
        return Err(invalid_arg!("cannot fit a Gaussian to an empty descriptor set"));
    }
    let mu = mean_vector(pixels.columns())?;
    let raw = covariance(pixels.columns(), 0.0)?;
    let d = raw.rows();
    let mean_diag = raw.trace() / d as f64;
    let ridge = relative_shrinkage * mean_diag;
    let mut values = raw.values().to_vec();
    for i in 0..d {
        values[i * d + i] += ridge;
    }
    Ok(GaussianStats {
        mu,
        sigma: Matrix::from_values(d, d, values)?,
    })
}

/// Closed-form KL divergence KL(s ‖ q) between Gaussians:
/// `½(trace(Σq⁻¹Σs) + ln(detΣq/detΣs) + (μq−μs)ᵀΣq⁻¹(μq−μs) − c)`.
///
/// Determinants enter as a difference of log-determinants from the Cholesky
/// factors, so the value stays finite at large dimension.
pub fn kl_divergence(s: &GaussianStats, q: &GaussianStats) -> Result<f64> {
    let c = common_dim(s, q)?;
    let lq = cholesky(q.sigma()).map_err(spd_hint)?;
    let ls = cholesky(s.sigma()).map_err(spd_hint)?;

    let mut trace_term = 0.0;
    for j in 0..c {
        let col = s.sigma().col(j);
        let x = cholesky_solve(&lq, &col);
        trace_term += x[j];
    }
    let log_det_ratio = log_det_from_cholesky(&lq) - log_det_from_cholesky(&ls);

    let delta: Vec<f64> = (0..c).map(|i| q.mu().get(i) - s.mu().get(i)).collect();
    let z = forward_solve(&lq, &delta);
    let quad: f64 = z.iter().map(|v| v * v).sum();

    Ok(0.5 * (trace_term + log_det_ratio + quad - c as f64))
}

/// Exact squared 2-Wasserstein distance between Gaussians:
/// `‖μa−μb‖² + trace(Σa + Σb − 2(Σa^½ Σb Σa^½)^½)`.
///
/// Matrix square roots use the symmetric eigendecomposition with negative
/// eigenvalues clamped to zero, so positive semidefinite inputs are accepted.
pub fn wasserstein_exact(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    let c = common_dim(a, b)?;
    let root_a = sqrt_psd(a.sigma())?;
    let mut inner = root_a.matmul(b.sigma())?.matmul(&root_a)?;
    symmetrize(&mut inner);
    let cross = sqrt_psd(&inner)?;

    let mean_gap: f64 = (0..c)
        .map(|i| {
            let d = a.mu().get(i) - b.mu().get(i);
            d * d
        })
        .sum();
    Ok(mean_gap + a.sigma().trace() + b.sigma().trace() - 2.0 * cross.trace())
}

/// Approximate squared 2-Wasserstein distance:
/// `‖μa−μb‖² + ‖Σa−Σb‖_F²`.
pub fn wasserstein_approx(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    let c = common_dim(a, b)?;
    let mean_gap: f64 = (0..c)
        .map(|i| {
            let d = a.mu().get(i) - b.mu().get(i);
            d * d
        })
        .sum();
    let cov_gap: f64 = a
        .sigma()
        .values()
        .iter()
        .zip(b.sigma().values())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    Ok(mean_gap + cov_gap)
}

/// Distribution-level distance between two fitted Gaussians under `cfg`.
pub fn distribution_distance(
    query: &GaussianStats,
    support: &GaussianStats,
    cfg: &MetricConfig,
) -> Result<f64> {
    match cfg.distribution {
        DistributionKind::Kl => match cfg.kl_direction {
            KlDirection::SupportToQuery => kl_divergence(support, query),
            KlDirection::QueryToSupport => kl_divergence(query, support),
        },
        DistributionKind::WassersteinExact => wasserstein_exact(query, support),
        DistributionKind::WassersteinApprox => wasserstein_approx(query, support),
    }
}

/// All three branch scores for one (query, support class) pair.
///
/// The query Gaussian is fitted on the query's `HW` pixel descriptors, the
/// support Gaussian on the class's pooled `M·HW` descriptors; both use the
/// relative shrinkage from `cfg`.
pub fn branch_scores(
    query_map: &FeatureMap,
    support_maps: &[FeatureMap],
    cfg: &MetricConfig,
) -> Result<BranchScores> {
    cfg.validate()?;
    let query = core::slice::from_ref(query_map);

    let d_part = part_score(&part_view(query)?, &part_view(support_maps)?, cfg.xi)?;

    let query_pixels = pixel_view(query)?;
    let support_pixels = pixel_view(support_maps)?;
    let d_pixel = pixel_score(&query_pixels, &support_pixels, cfg.k)?;

    let q_gauss = fit_gaussian_relative(&query_pixels, cfg.shrinkage)?;
    let s_gauss = fit_gaussian_relative(&support_pixels, cfg.shrinkage)?;
    let d_dist = distribution_distance(&q_gauss, &s_gauss, cfg)?;

    Ok(BranchScores {
        d_part,
        d_pixel,
        d_dist,
    })
}

fn common_dim(a: &GaussianStats, b: &GaussianStats) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(invalid_arg!(
            "Gaussian dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        ));
    }
    Ok(a.dim())
}

fn spd_hint(e: crate::MmlError) -> crate::MmlError {
    match e {
        crate::MmlError::NumericalDomain(_) => numerical!(
            "covariance is not positive definite; raise shrinkage to regularize the fit"
        ),
        other => other,
    }
}

fn symmetrize(m: &mut Matrix) {
    let n = m.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, s);
            m.set(j, i, s);
        }
    }
}
