//! k-space sub-sampling: mask generation, the selection operator and its
//! adjoint, the noisy measurement model and the zero-filled phase estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::fft::{dft_inverse, DftPlan};
use crate::volume::{ComplexVolume, GridShape, ScalarVolume};

/// Geometry of the variable-density Gaussian sampling pattern.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskParams {
    /// Side of the always-sampled central cube as a fraction of each axis.
    pub cube_frac: f64,
    /// Per-axis standard deviation as a fraction of the Nyquist index `dim/2`.
    pub sigma_frac: f64,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            cube_frac: 1.0 / 32.0,
            sigma_frac: 0.5,
        }
    }
}

/// Set of acquired k-space indices (standard DFT order).
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    shape: GridShape,
    selected: Vec<usize>,
    seed: u64,
    target_pct: f64,
}

impl SamplingMask {
    /// Builds a mask from explicit indices; they are sorted and deduplicated.
    pub fn from_indices(shape: GridShape, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::InvalidArgument("mask selects no k-space points".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= shape.len() {
                return Err(Error::InvalidArgument(format!(
                    "mask index {last} outside grid of {} voxels",
                    shape.len()
                )));
            }
        }
        let target_pct = 100.0 * indices.len() as f64 / shape.len() as f64;
        Ok(Self {
            shape,
            selected: indices,
            seed: 0,
            target_pct,
        })
    }

    pub fn full(shape: GridShape) -> Self {
        let n = shape.len();
        Self {
            shape,
            selected: (0..n).collect(),
            seed: 0,
            target_pct: 100.0,
        }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    /// Ascending selected indices.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn count(&self) -> usize {
        self.selected.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn target_pct(&self) -> f64 {
        self.target_pct
    }

    /// Dense 0/1 representation.
    pub fn to_dense(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.shape.len()];
        for &i in &self.selected {
            out[i] = 1;
        }
        out
    }

    pub fn contains(&self, index: usize) -> bool {
        self.selected.binary_search(&index).is_ok()
    }
}

/// Maps a centered (fftshifted) frequency index to standard DFT order.
fn centered_to_standard(k: usize, dim: usize) -> usize {
    (k + dim - dim / 2) % dim
}

/// Side length of the central cube along an axis of length `dim`.
pub fn cube_side(dim: usize, cube_frac: f64) -> usize {
    ((cube_frac * dim as f64).round() as usize).max(2).min(dim)
}

/// Standard-order indices of the fully sampled central cube.
pub fn central_cube(shape: &GridShape, cube_frac: f64) -> Vec<usize> {
    let axes: Vec<Vec<usize>> = shape
        .dims()
        .iter()
        .map(|&dim| {
            let side = cube_side(dim, cube_frac);
            let start = dim / 2 - side / 2;
            (start..start + side).map(|k| centered_to_standard(k, dim)).collect()
        })
        .collect();
    let mut out = vec![0usize];
    for (a, ax) in axes.iter().enumerate() {
        let d = shape.dims()[a];
        out = out
            .iter()
            .flat_map(|&base| ax.iter().map(move |&k| base * d + k))
            .collect();
    }
    out.sort_unstable();
    out
}

/// Probability that `round(center + sigma * z)` equals `k`, z ~ N(0, 1).
fn discretized_gaussian(k: usize, center: f64, sigma: f64) -> f64 {
    let phi = |x: f64| 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
    let k = k as f64;
    phi((k + 0.5 - center) / sigma) - phi((k - 0.5 - center) / sigma)
}

/// Variable-density random mask: a central cube plus points drawn from a
/// separable Gaussian centered on DC, without replacement, until exactly
/// `round(pct/100 * N)` points are selected.
///
/// Sequential rejection of duplicates is equivalent to weighted sampling
/// without replacement, which is done here in one pass with exponential
/// keys `ln(u) / w` (largest keys win) so that high percentages terminate
/// in bounded time.
pub fn make_gaussian_mask(
    shape: &GridShape,
    pct: f64,
    params: &MaskParams,
    seed: u64,
) -> Result<SamplingMask> {
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::InvalidArgument(format!(
            "sampling percentage {pct} outside (0, 100]"
        )));
    }
    if !(params.sigma_frac > 0.0) || !(params.cube_frac >= 0.0) {
        return Err(Error::InvalidArgument("invalid mask geometry".into()));
    }
    let n = shape.len();
    let target = ((pct / 100.0) * n as f64).round() as usize;
    let cube = central_cube(shape, params.cube_frac);
    if target < cube.len() {
        return Err(Error::InvalidArgument(format!(
            "{pct}% selects {target} points, fewer than the {}-point central cube",
            cube.len()
        )));
    }
    if target >= n {
        let mut m = SamplingMask::full(shape.clone());
        m.seed = seed;
        m.target_pct = pct;
        return Ok(m);
    }

    // Per-axis weights in standard index order.
    let weights: Vec<Vec<f64>> = shape
        .dims()
        .iter()
        .map(|&dim| {
            let center = (dim / 2) as f64;
            let sigma = params.sigma_frac * dim as f64 / 2.0;
            let mut w = vec![0.0; dim];
            for kc in 0..dim {
                w[centered_to_standard(kc, dim)] = discretized_gaussian(kc, center, sigma);
            }
            w
        })
        .collect();

    let mut in_cube = vec![false; n];
    for &i in &cube {
        in_cube[i] = true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(n - cube.len());
    for i in 0..n {
        // Draw for every index so the stream position never depends on the cube.
        let u: f64 = 1.0 - rng.random::<f64>();
        if in_cube[i] {
            continue;
        }
        let idx = shape.unravel(i);
        let w: f64 = idx.iter().zip(&weights).map(|(&k, wa)| wa[k]).product();
        let key = if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY };
        keyed.push((key, i));
    }
    let extra = target - cube.len();
    let mut selected = cube;
    if extra > 0 {
        let cmp = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        keyed.select_nth_unstable_by(extra - 1, cmp);
        selected.extend(keyed[..extra].iter().map(|&(_, i)| i));
    }
    selected.sort_unstable();
    Ok(SamplingMask {
        shape: shape.clone(),
        selected,
        seed,
        target_pct: pct,
    })
}

/// Sub-sampled k-space values `S d`, ordered by ascending linear index.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceMeasurement {
    mask: SamplingMask,
    values: Vec<Complex64>,
}

impl KSpaceMeasurement {
    pub fn new(mask: SamplingMask, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != mask.count() {
            return Err(Error::LengthMismatch {
                expected: mask.count(),
                found: values.len(),
            });
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("measurement value".into()));
        }
        Ok(Self { mask, values })
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn shape(&self) -> &GridShape {
        self.mask.shape()
    }

    /// Squared 2-norm of the measured values.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mask: self.mask.clone(),
            values: self.values.iter().map(|z| z * factor).collect(),
        }
    }
}

/// Applies the selection operator S.
pub fn subsample(d: &ComplexVolume, mask: &SamplingMask) -> Result<KSpaceMeasurement> {
    mask.shape().ensure_same(d.shape())?;
    let values = mask.selected().iter().map(|&i| d.data()[i]).collect();
    Ok(KSpaceMeasurement {
        mask: mask.clone(),
        values,
    })
}

/// Adjoint of [`subsample`]: scatters the values, zeros elsewhere.
pub fn zero_fill(m: &KSpaceMeasurement) -> ComplexVolume {
    let mut out = ComplexVolume::zeros(m.shape().clone());
    let data = out.data_mut();
    for (&i, &z) in m.mask.selected().iter().zip(&m.values) {
        data[i] = z;
    }
    out
}

/// `S F x + noise`, with circular complex Gaussian noise of total standard
/// deviation `noise_std` (each of the real and imaginary parts has
/// `noise_std / sqrt(2)`).
pub fn simulate_measurement(
    x: &ComplexVolume,
    mask: &SamplingMask,
    noise_std: f64,
    seed: u64,
) -> Result<KSpaceMeasurement> {
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::InvalidArgument(format!("noise std {noise_std} must be >= 0")));
    }
    let spectrum = DftPlan::new(x.shape()).forward(x)?;
    let mut m = subsample(&spectrum, mask)?;
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_std / std::f64::consts::SQRT_2)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for z in &mut m.values {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *z += Complex64::new(re, im);
        }
    }
    Ok(m)
}

/// Phase of the zero-filled inverse DFT.
pub fn estimate_phase(m: &KSpaceMeasurement) -> ScalarVolume {
    dft_inverse(&zero_fill(m)).phase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::dft_forward;

    fn shape(d: &[usize]) -> GridShape {
        GridShape::new(d).unwrap()
    }

    #[test]
    fn full_percentage_selects_everything() {
        let s = shape(&[8, 6]);
        for seed in [0, 5] {
            let m = make_gaussian_mask(&s, 100.0, &MaskParams::default(), seed).unwrap();
            assert_eq!(m.selected(), (0..48).collect::<Vec<_>>().as_slice());
        }
    }

    #[test]
    fn one_percent_of_64_cubed() {
        let s = shape(&[64, 64, 64]);
        let m = make_gaussian_mask(&s, 1.0, &MaskParams::default(), 7).unwrap();
        assert_eq!(m.count(), 2621);
        let cube = central_cube(&s, 1.0 / 32.0);
        assert_eq!(cube.len(), 8);
        assert!(cube.iter().all(|&i| m.contains(i)));
        // DC is in the cube.
        assert!(m.contains(0));
        let mut sorted = m.selected().to_vec();
        sorted.dedup();
        assert_eq!(sorted.len(), m.count());
    }

    #[test]
    fn seed_determinism() {
        let s = shape(&[32, 24]);
        let p = MaskParams::default();
        let a = make_gaussian_mask(&s, 10.0, &p, 3).unwrap();
        let b = make_gaussian_mask(&s, 10.0, &p, 3).unwrap();
        let c = make_gaussian_mask(&s, 10.0, &p, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.selected(), c.selected());
        assert_eq!(a.count(), c.count());
    }

    #[test]
    fn mask_errors() {
        let s = shape(&[16, 16]);
        let p = MaskParams::default();
        assert!(make_gaussian_mask(&s, 0.0, &p, 0).is_err());
        assert!(make_gaussian_mask(&s, 100.5, &p, 0).is_err());
        // 4-point cube needs at least 4/256 = 1.5625%.
        assert!(make_gaussian_mask(&s, 1.0, &p, 0).is_err());
        assert!(make_gaussian_mask(&s, 1.6, &p, 0).is_ok());
    }

    #[test]
    fn mask_density_is_centered() {
        let s = shape(&[64, 64]);
        let m = make_gaussian_mask(&s, 10.0, &MaskParams::default(), 11).unwrap();
        // The band |k| < 16 on both axes covers a quarter of k-space; a
        // uniform mask would put 25% of its points there.
        let low = m
            .selected()
            .iter()
            .filter(|&&i| {
                let idx = s.unravel(i);
                idx.iter().all(|&k| k.min(64 - k) < 16)
            })
            .count();
        assert!(low as f64 > 0.35 * m.count() as f64, "low = {low} of {}", m.count());
    }

    #[test]
    fn subsample_zero_fill_pair() {
        let s = shape(&[4, 4]);
        let data: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let d = ComplexVolume::new(s.clone(), data.clone()).unwrap();
        let full = subsample(&d, &SamplingMask::full(s.clone())).unwrap();
        assert_eq!(full.values(), data.as_slice());

        let mask = SamplingMask::from_indices(s.clone(), vec![3, 1, 9]).unwrap();
        let m = subsample(&d, &mask).unwrap();
        assert_eq!(m.values(), &[data[1], data[3], data[9]]);
        let back = subsample(&zero_fill(&m), &mask).unwrap();
        assert_eq!(back, m);
        let zeros = KSpaceMeasurement::new(mask, vec![Complex64::new(0.0, 0.0); 3]).unwrap();
        assert!(zero_fill(&zeros).data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn dc_of_constant_image() {
        let s = shape(&[4, 6]);
        let c = 0.75;
        let x = ComplexVolume::new(s.clone(), vec![Complex64::new(c, 0.0); 24]).unwrap();
        let mask = SamplingMask::from_indices(s, vec![0]).unwrap();
        let m = simulate_measurement(&x, &mask, 0.0, 0).unwrap();
        assert!((m.values()[0] - Complex64::new(c * 24f64.sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn noiseless_full_mask_is_spectrum() {
        let s = shape(&[6, 4]);
        let x = ComplexVolume::new(
            s.clone(),
            (0..24).map(|i| Complex64::new((i as f64).cos(), 0.3 * i as f64)).collect(),
        )
        .unwrap();
        let m = simulate_measurement(&x, &SamplingMask::full(s), 0.0, 9).unwrap();
        assert_eq!(m.values(), dft_forward(&x).data());
    }

    #[test]
    fn noise_variance_matches() {
        let s = shape(&[400, 250]);
        let x = ComplexVolume::zeros(s.clone());
        let sigma = 0.3;
        let m = simulate_measurement(&x, &SamplingMask::full(s), sigma, 42).unwrap();
        let n = m.values().len() as f64;
        let var = m.values().iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.02, "var = {var}");
        let mean: Complex64 = m.values().iter().sum::<Complex64>() / n;
        assert!(mean.norm() < 4.0 * sigma / n.sqrt());
    }

    #[test]
    fn real_image_gives_zero_phase() {
        let s = shape(&[8, 8]);
        let x = ComplexVolume::new(
            s.clone(),
            (0..64).map(|i| Complex64::new(1.0 + (i as f64 * 0.4).sin().abs(), 0.0)).collect(),
        )
        .unwrap();
        let m = simulate_measurement(&x, &SamplingMask::full(s), 0.0, 0).unwrap();
        let phi = estimate_phase(&m);
        assert!(phi.data().iter().all(|p| p.abs() < 1e-12));
    }
}
