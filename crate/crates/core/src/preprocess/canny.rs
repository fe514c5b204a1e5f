//! Canny edge detection: Gaussian smoothing, Sobel gradient, non-maximum
//! suppression along the quantized gradient direction, and two-threshold
//! hysteresis tracking over 8-connected neighbours.

use super::gradient::{sobel_gradient, GradientField};
use super::kernel::{gaussian_blur, gaussian_kernel};
use super::PreprocessError;
use crate::imaging::{to_grayscale, ImageBuffer};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CannyParams<T> {
    pub sigma: T,
    pub t_low: T,
    pub t_high: T,
}

impl<T: Real> Default for CannyParams<T> {
    fn default() -> Self {
        Self {
            sigma: T::of(1.4),
            t_low: T::of(80.0),
            t_high: T::of(140.0),
        }
    }
}

impl<T: Real> CannyParams<T> {
    pub fn new(sigma: T, t_low: T, t_high: T) -> Result<Self, PreprocessError> {
        let params = Self {
            sigma,
            t_low,
            t_high,
        };
        params.validate()?;
        Ok(params)
    }

    /// Requires `sigma > 0` and `0 < t_low <= t_high`.
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !self.sigma.is_finite() || self.sigma <= T::zero() {
            return Err(PreprocessError::InvalidSigma(self.sigma.as_f64()));
        }
        if !(self.t_low > T::zero() && self.t_low <= self.t_high && self.t_high.is_finite()) {
            return Err(PreprocessError::InvalidParams(format!(
                "thresholds must satisfy 0 < t_low <= t_high, got {} / {}",
                self.t_low, self.t_high
            )));
        }
        Ok(())
    }
}

/// Binary edge image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub edge: Vec<bool>,
}

impl EdgeMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            edge: vec![false; width * height],
        }
    }

    #[inline]
    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.edge[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.edge.iter().filter(|&&e| e).count()
    }

    /// White (255) edges on black.
    pub fn to_image(&self) -> ImageBuffer {
        let data = self.edge.iter().map(|&e| if e { 255 } else { 0 }).collect();
        ImageBuffer::new(self.width, self.height, 1, data).expect("edge map dims are valid")
    }

    /// True when every edge pixel here is also set in `other`.
    pub fn is_subset_of(&self, other: &EdgeMap) -> bool {
        self.edge.iter().zip(&other.edge).all(|(&a, &b)| !a || b)
    }
}

/// Intermediate products of one Canny run.
#[derive(Clone, Debug)]
pub struct CannyStages<T> {
    pub smoothed: ImageBuffer,
    pub gradient: GradientField<T>,
    /// Pixels surviving non-maximum suppression.
    pub thinned: EdgeMap,
    pub edges: EdgeMap,
}

/// Offsets `(forward, backward)` along the gradient, for a direction folded to `[0, 180)` degrees.
fn neighbour_offsets<T: Real>(direction: T) -> ((isize, isize), (isize, isize)) {
    let mut deg = direction.to_degrees();
    if deg < T::zero() {
        deg += T::of(180.0);
    }
    let deg = deg.as_f64();
    if !(22.5..157.5).contains(&deg) {
        ((1, 0), (-1, 0))
    } else if deg < 67.5 {
        ((1, 1), (-1, -1))
    } else if deg < 112.5 {
        ((0, 1), (0, -1))
    } else {
        ((-1, 1), (1, -1))
    }
}

/// Keep pixels whose magnitude is a local maximum along the quantized
/// gradient direction: `>=` the backward neighbour and `>` the forward one.
/// Neighbours outside the image count as zero.
pub fn non_maximum_suppression<T: Real>(g: &GradientField<T>) -> EdgeMap {
    let (w, h) = (g.width as isize, g.height as isize);
    let mag = |x: isize, y: isize| -> T {
        if x < 0 || y < 0 || x >= w || y >= h {
            T::zero()
        } else {
            g.magnitude[(y * w + x) as usize]
        }
    };
    let mut out = EdgeMap::empty(g.width, g.height);
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            let m = g.magnitude[i];
            if m <= T::zero() {
                continue;
            }
            let ((fx, fy), (bx, by)) = neighbour_offsets(g.direction[i]);
            out.edge[i] = m >= mag(x + bx, y + by) && m > mag(x + fx, y + fy);
        }
    }
    out
}

/// Seed from thinned pixels with magnitude `>= t_high`, then grow through
/// 8-connected thinned pixels with magnitude `>= t_low`.
pub fn hysteresis<T: Real>(g: &GradientField<T>, thinned: &EdgeMap, t_low: T, t_high: T) -> EdgeMap {
    let (w, h) = (g.width, g.height);
    let mut out = EdgeMap::empty(w, h);
    let mut stack = Vec::new();
    for i in 0..w * h {
        if !thinned.edge[i] || out.edge[i] || g.magnitude[i] < t_high {
            continue;
        }
        out.edge[i] = true;
        stack.push(i);
        while let Some(p) = stack.pop() {
            let (px, py) = ((p % w) as isize, (p / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (px + dx, py + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if thinned.edge[q] && !out.edge[q] && g.magnitude[q] >= t_low {
                        out.edge[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
    }
    out
}

/// Run all four stages, keeping the intermediates. Color input is converted
/// to grayscale first.
pub fn canny_stages<T: Real>(
    img: &ImageBuffer,
    params: &CannyParams<T>,
) -> Result<CannyStages<T>, PreprocessError> {
    params.validate()?;
    let gray = to_grayscale(img);
    let kernel = gaussian_kernel(params.sigma, params.sigma)?;
    let smoothed = gaussian_blur(&gray, &kernel);
    let gradient = sobel_gradient(&smoothed)?;
    let thinned = non_maximum_suppression(&gradient);
    let edges = hysteresis(&gradient, &thinned, params.t_low, params.t_high);
    Ok(CannyStages {
        smoothed,
        gradient,
        thinned,
        edges,
    })
}

pub fn canny<T: Real>(img: &ImageBuffer, params: &CannyParams<T>) -> Result<EdgeMap, PreprocessError> {
    Ok(canny_stages(img, params)?.edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step() -> ImageBuffer {
        ImageBuffer::gray_from_fn(8, 8, |x, _| if x < 4 { 0 } else { 255 })
    }

    #[test]
    fn constant_image_has_no_edges() {
        let e = canny(&ImageBuffer::filled(10, 10, 1, 128), &CannyParams::<f64>::default()).unwrap();
        assert_eq!(e.count(), 0);
    }

    #[test]
    fn step_gives_single_vertical_line() {
        let e = canny(&step(), &CannyParams::<f64>::default()).unwrap();
        for y in 0..8 {
            let row: Vec<usize> = (0..8).filter(|&x| e.is_edge(x, y)).collect();
            assert_eq!(row, vec![4], "row {y}");
        }
        // Also true for the mirrored step, and for f32.
        let mirrored = ImageBuffer::gray_from_fn(8, 8, |x, _| if x < 4 { 255 } else { 0 });
        let e = canny(&mirrored, &CannyParams::<f32>::default()).unwrap();
        assert_eq!(e.count(), 8);
        assert!((0..8).all(|y| (0..8).filter(|&x| e.is_edge(x, y)).count() == 1));
    }

    #[test]
    fn huge_thresholds_give_nothing() {
        let p = CannyParams::new(1.4f64, 1e6, 1e6).unwrap();
        assert_eq!(canny(&step(), &p).unwrap().count(), 0);
    }

    #[test]
    fn invalid_params() {
        assert!(CannyParams::new(1.4f64, 150.0, 140.0).is_err());
        assert!(CannyParams::new(1.4f64, 0.0, 140.0).is_err());
        assert!(CannyParams::new(0.0f64, 80.0, 140.0).is_err());
        let bad = CannyParams {
            sigma: 1.4f64,
            t_low: -1.0,
            t_high: 5.0,
        };
        assert!(matches!(
            canny(&step(), &bad),
            Err(PreprocessError::InvalidParams(_))
        ));
    }

    #[test]
    fn edges_subset_of_thinned_and_connected_to_strong() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let img = ImageBuffer::gray_from_fn(24, 24, |_, _| rng.random());
            let p = CannyParams::<f64>::default();
            let s = canny_stages(&img, &p).unwrap();
            assert!(s.edges.is_subset_of(&s.thinned));
            // Every edge pixel reaches a strong pixel through edge pixels.
            let (w, h) = (24usize, 24usize);
            let mut reach = vec![false; w * h];
            let mut stack: Vec<usize> = (0..w * h)
                .filter(|&i| s.edges.edge[i] && s.gradient.magnitude[i] >= p.t_high)
                .collect();
            for &i in &stack {
                reach[i] = true;
            }
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % w) as isize, (i / w) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                            let j = ny as usize * w + nx as usize;
                            if s.edges.edge[j] && !reach[j] {
                                reach[j] = true;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
            assert!((0..w * h).all(|i| !s.edges.edge[i] || reach[i]));
        }
    }
}
