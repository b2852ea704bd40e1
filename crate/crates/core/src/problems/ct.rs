//! Parallel-beam projection matrices on a square pixel grid and the
//! forward/backprojector pair derived from them.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, DenseMatrix};
use crate::sampling::RngState;
use crate::solver::PAIRING_TOLERANCE;
use crate::solver::SystemPair;

/// Rays grouped into one row of `A` / one averaged row of `V`.
pub const RAYS_PER_GROUP: usize = 3;

/// Standard scan for a grid of side `grid_n`: 36 angles 0..175 degrees,
/// `3 * grid_n` rays per angle over a detector of `1.4 * grid_n` pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanGeometry {
    pub grid_n: usize,
    pub angles: Vec<f64>,
    pub rays_per_angle: usize,
    pub detector_span: f64,
}

impl ScanGeometry {
    pub fn standard(grid_n: usize) -> Self {
        ScanGeometry {
            grid_n,
            angles: (0..36).map(|k| 5.0 * k as f64).collect(),
            rays_per_angle: RAYS_PER_GROUP * grid_n,
            detector_span: 1.4 * grid_n as f64,
        }
    }

    pub fn matrix(&self) -> Result<DenseMatrix> {
        parallel_beam_matrix(self.grid_n, &self.angles, self.rays_per_angle, self.detector_span)
    }
}

/// Lateral detector positions, evenly spaced cell centres over `span`.
pub fn ray_offsets(rays: usize, span: f64) -> Vec<f64> {
    (0..rays)
        .map(|j| -0.5 * span + (j as f64 + 0.5) * span / rays as f64)
        .collect()
}

/// Intersection lengths of one ray with the unit-pixel grid centred at the
/// origin. The ray is `{ s * (cos t, sin t) + u * (-sin t, cos t) }` for the
/// angle `t` in degrees. Pixel `(row, col)` has index `row * grid_n + col`,
/// row 0 at the top. Returns `(index, length)` pairs in traversal order.
pub fn trace_ray(grid_n: usize, angle_deg: f64, offset: f64) -> Vec<(usize, f64)> {
    let half = 0.5 * grid_n as f64;
    let t = angle_deg.to_radians();
    let (sin, cos) = t.sin_cos();
    let (px, py) = (offset * cos, offset * sin);
    let (dx, dy) = (-sin, cos);
    const FLAT: f64 = 1e-12;

    // parametric interval inside the square [-half, half]^2
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (p, d) in [(px, dx), (py, dy)] {
        if d.abs() < FLAT {
            if p <= -half || p >= half {
                return Vec::new();
            }
        } else {
            let (a, b) = ((-half - p) / d, (half - p) / d);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    if hi - lo <= 0.0 {
        return Vec::new();
    }

    // crossings with interior grid lines
    let mut cuts = vec![lo, hi];
    for (p, d) in [(px, dx), (py, dy)] {
        if d.abs() < FLAT {
            continue;
        }
        for k in 1..grid_n {
            let u = (-half + k as f64 - p) / d;
            if u > lo && u < hi {
                cuts.push(u);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);

    let mut out: Vec<(usize, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-12 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let (x, y) = (px + mid * dx, py + mid * dy);
        let col = ((x + half).floor() as isize).clamp(0, grid_n as isize - 1) as usize;
        let row = ((half - y).floor() as isize).clamp(0, grid_n as isize - 1) as usize;
        let idx = row * grid_n + col;
        match out.last_mut() {
            Some((last, l)) if *last == idx => *l += len,
            _ => out.push((idx, len)),
        }
    }
    out
}

/// Dense parallel-beam system matrix, rows ordered angle-major then by
/// lateral offset. Rays that miss the grid give zero rows.
pub fn parallel_beam_matrix(
    grid_n: usize,
    angles: &[f64],
    rays_per_angle: usize,
    detector_span: f64,
) -> Result<DenseMatrix> {
    if grid_n < 2 {
        return Err(Error::InvalidInput(format!("grid size {grid_n} < 2")));
    }
    if angles.is_empty() || rays_per_angle == 0 {
        return Err(Error::InvalidInput("need at least one angle and one ray".into()));
    }
    if !(detector_span.is_finite() && detector_span > 0.0) || angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidInput("detector span and angles must be finite, span > 0".into()));
    }
    let offsets = ray_offsets(rays_per_angle, detector_span);
    let mut m = DenseMatrix::zeros(angles.len() * rays_per_angle, grid_n * grid_n);
    for (ia, &ang) in angles.iter().enumerate() {
        for (j, &s) in offsets.iter().enumerate() {
            let row = m.row_mut(ia * rays_per_angle + j);
            for (idx, len) in trace_ray(grid_n, ang, s) {
                row[idx] += len;
            }
        }
    }
    Ok(m)
}

/// Forward/backprojector pair extracted from a fine projection matrix.
#[derive(Clone, Debug)]
pub struct CtPair {
    pub system: SystemPair,
    /// Index into the group list (full row / 3) of every kept row.
    pub kept_groups: Vec<usize>,
    pub dropped_zero: usize,
    pub dropped_pairing: usize,
}

/// Row of each triple used for the forward projector: the middle ray, so
/// the averaged backprojection bin is centred on it.
pub const FORWARD_ROW: usize = 1;

/// `A` takes the middle row of each consecutive triple of `full`, `V` the
/// triple's mean, `b` the matching entry of `b_full`. Rows with zero `a_i`
/// or a near-zero pairing are dropped from `A`, `V` and `b` together.
pub fn ct_mismatch_pair(full: &DenseMatrix, b_full: &[f64], truth: Option<Vec<f64>>) -> Result<CtPair> {
    ct_mismatch_pair_at(full, b_full, truth, FORWARD_ROW)
}

/// [`ct_mismatch_pair`] with the forward row taken at position `forward`
/// (0, 1 or 2) inside each triple. With `forward = 0` the forward ray sits
/// at the edge of the averaged bin.
pub fn ct_mismatch_pair_at(
    full: &DenseMatrix,
    b_full: &[f64],
    truth: Option<Vec<f64>>,
    forward: usize,
) -> Result<CtPair> {
    if forward >= RAYS_PER_GROUP {
        return Err(Error::InvalidInput(format!(
            "forward row {forward} outside a group of {RAYS_PER_GROUP}"
        )));
    }
    let (rows, n) = full.shape();
    if rows % RAYS_PER_GROUP != 0 {
        return Err(Error::Dimension(format!(
            "full matrix has {rows} rows, not a multiple of {RAYS_PER_GROUP}"
        )));
    }
    if b_full.len() != rows {
        return Err(Error::Dimension(format!(
            "b has length {}, expected {rows}",
            b_full.len()
        )));
    }
    let mut a_rows = Vec::new();
    let mut v_rows = Vec::new();
    let mut b = Vec::new();
    let mut kept = Vec::new();
    let (mut dropped_zero, mut dropped_pairing) = (0, 0);
    for g in 0..rows / RAYS_PER_GROUP {
        let a = full.row(RAYS_PER_GROUP * g + forward);
        if a.iter().all(|&x| x == 0.0) {
            dropped_zero += 1;
            continue;
        }
        let mut v = vec![0.0; n];
        for k in 0..RAYS_PER_GROUP {
            for (acc, x) in v.iter_mut().zip(full.row(RAYS_PER_GROUP * g + k)) {
                *acc += x;
            }
        }
        v.iter_mut().for_each(|x| *x /= RAYS_PER_GROUP as f64);
        if dot(a, &v) <= PAIRING_TOLERANCE * norm(a) * norm(&v) {
            dropped_pairing += 1;
            continue;
        }
        a_rows.extend_from_slice(a);
        v_rows.extend(v);
        b.push(b_full[RAYS_PER_GROUP * g + forward]);
        kept.push(g);
    }
    if kept.is_empty() {
        return Err(Error::EmptySystem);
    }
    let m = kept.len();
    let a = DenseMatrix::new(m, n, a_rows)?;
    let v = DenseMatrix::new(m, n, v_rows)?;
    let system = SystemPair::new(a, v, b, None, truth)?;
    Ok(CtPair {
        system,
        kept_groups: kept,
        dropped_zero,
        dropped_pairing,
    })
}

/// Fraction of pixels kept by [`power_law_field`].
pub const PHANTOM_SUPPORT: f64 = 0.3;
/// Spectral decay exponent of [`power_law_field`].
pub const PHANTOM_DECAY: f64 = 1.3;

/// Random nonnegative pattern: modulus of the inverse DFT of a spectrum
/// with amplitude `|f|^-decay` and uniform random phases, keeping the
/// largest `support` fraction of pixels and scaled to maximum 1.
pub fn power_law_field(grid_n: usize, support: f64, decay: f64, seed: u64) -> Result<Vec<f64>> {
    if grid_n == 0 {
        return Err(Error::InvalidInput("grid size must be positive".into()));
    }
    if !(support > 0.0 && support <= 1.0) || !decay.is_finite() {
        return Err(Error::InvalidInput(format!(
            "support {support} must be in (0, 1], decay finite"
        )));
    }
    let n = grid_n;
    let mut rng = RngState::new(seed);
    let freq = |i: usize| (2.0 * i as f64 + 1.0) / n as f64 - 1.0;
    let floor = 1.0 / (n * n) as f64;
    let mut re = vec![0.0; n * n];
    let mut im = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let r2 = (freq(i).powi(2) + freq(j).powi(2)).max(floor);
            let amp = r2.powf(-0.5 * decay);
            let (s, c) = (std::f64::consts::TAU * rng.random::<f64>()).sin_cos();
            re[i * n + j] = amp * c;
            im[i * n + j] = amp * s;
        }
    }
    // separable inverse DFT, rows then columns
    let twiddle: Vec<(f64, f64)> = (0..n)
        .map(|k| (std::f64::consts::TAU * k as f64 / n as f64).sin_cos())
        .collect();
    let idft = |re: &[f64], im: &[f64], stride: usize, step: usize| -> (Vec<f64>, Vec<f64>) {
        let (mut or, mut oi) = (vec![0.0; n * n], vec![0.0; n * n]);
        for line in 0..n {
            for a in 0..n {
                let (mut sr, mut si) = (0.0, 0.0);
                for b in 0..n {
                    let (s, c) = twiddle[(a * b) % n];
                    let idx = line * stride + b * step;
                    sr += re[idx] * c - im[idx] * s;
                    si += re[idx] * s + im[idx] * c;
                }
                let idx = line * stride + a * step;
                or[idx] = sr;
                oi[idx] = si;
            }
        }
        (or, oi)
    };
    let (re, im) = idft(&re, &im, n, 1);
    let (re, im) = idft(&re, &im, 1, n);
    let mut field: Vec<f64> = re.iter().zip(&im).map(|(a, b)| a.hypot(*b)).collect();

    let mut sorted = field.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let keep = ((support * (n * n) as f64).round() as usize).clamp(1, n * n);
    let threshold = sorted[keep - 1];
    let max = sorted[0];
    for x in field.iter_mut() {
        *x = if *x < threshold || max == 0.0 { 0.0 } else { *x / max };
    }
    Ok(field)
}

/// Smooth nonnegative test image: [`power_law_field`] blurred with a
/// Gaussian of width `0.08 * grid_n` pixels and scaled to maximum 1.
/// Row-major, length `grid_n^2`.
pub fn smooth_phantom(grid_n: usize, seed: u64) -> Result<Vec<f64>> {
    let raw = power_law_field(grid_n, PHANTOM_SUPPORT, PHANTOM_DECAY, seed)?;
    let sigma = (0.08 * grid_n as f64).max(0.5);
    let mut img = gaussian_blur(&raw, grid_n, sigma);
    let max = img.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        img.iter_mut().for_each(|x| *x /= max);
    }
    Ok(img)
}

fn gaussian_blur(img: &[f64], n: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / total).collect();
    let clamp = |i: isize| i.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            tmp[r * n + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * img[r * n + clamp(c as isize + k as isize - radius)])
                .sum();
        }
    }
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[clamp(r as isize + k as isize - radius) * n + c])
                .sum();
        }
    }
    out
}

/// Sum of squared horizontal and vertical neighbour differences.
pub fn gradient_energy(img: &[f64], n: usize) -> f64 {
    let mut e = 0.0;
    for r in 0..n {
        for c in 0..n {
            if c + 1 < n {
                e += (img[r * n + c + 1] - img[r * n + c]).powi(2);
            }
            if r + 1 < n {
                e += (img[(r + 1) * n + c] - img[r * n + c]).powi(2);
            }
        }
    }
    e
}
