use super::PreprocessError;
use crate::imaging::ImageBuffer;
use crate::scalar::Real;

/// Per-pixel Sobel derivatives with the L1 magnitude approximation.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField<T> {
    pub width: usize,
    pub height: usize,
    pub fx: Vec<T>,
    pub fy: Vec<T>,
    /// `|fx| + |fy|`.
    pub magnitude: Vec<T>,
    /// `atan2(fy, fx)`, in `(-pi, pi]`.
    pub direction: Vec<T>,
}

impl<T: Real> GradientField<T> {
    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Euclidean magnitude `sqrt(fx^2 + fy^2)` at pixel index `i`.
    pub fn l2_magnitude(&self, i: usize) -> T {
        self.fx[i].hypot(self.fy[i])
    }
}

const SOBEL_X: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
const SOBEL_Y: [[i32; 3]; 3] = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]];

/// 3x3 Sobel gradient of a single-channel image with replicate borders.
pub fn sobel_gradient<T: Real>(img: &ImageBuffer) -> Result<GradientField<T>, PreprocessError> {
    if img.channels() != 1 {
        return Err(PreprocessError::Channels {
            expected: 1,
            got: img.channels(),
        });
    }
    let (w, h) = img.dims();
    let n = w * h;
    let mut field = GradientField {
        width: w,
        height: h,
        fx: Vec::with_capacity(n),
        fy: Vec::with_capacity(n),
        magnitude: Vec::with_capacity(n),
        direction: Vec::with_capacity(n),
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut gx, mut gy) = (0i32, 0i32);
            for (j, dy) in (-1..=1).enumerate() {
                for (i, dx) in (-1..=1).enumerate() {
                    let v = i32::from(img.get_clamped(x + dx, y + dy, 0));
                    gx += SOBEL_X[j][i] * v;
                    gy += SOBEL_Y[j][i] * v;
                }
            }
            let (fx, fy) = (T::of(gx as f64), T::of(gy as f64));
            field.fx.push(fx);
            field.fy.push(fy);
            field.magnitude.push(fx.abs() + fy.abs());
            field.direction.push(fy.atan2(fx));
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_image_has_zero_gradient() {
        let g = sobel_gradient::<f64>(&ImageBuffer::filled(5, 4, 1, 200)).unwrap();
        assert!(g.fx.iter().chain(&g.fy).chain(&g.magnitude).all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step() {
        let img = ImageBuffer::gray_from_fn(8, 8, |x, _| if x < 4 { 0 } else { 255 });
        let g = sobel_gradient::<f64>(&img).unwrap();
        for y in 0..8 {
            for x in [3, 4] {
                let i = g.index(x, y);
                assert_eq!(g.fx[i], 1020.0);
                assert_eq!(g.fy[i], 0.0);
                assert_eq!(g.magnitude[i], 1020.0);
                assert_eq!(g.direction[i], 0.0);
            }
            assert_eq!(g.magnitude[g.index(0, y)], 0.0);
        }
        let flipped = ImageBuffer::gray_from_fn(8, 8, |x, _| if x < 4 { 255 } else { 0 });
        let g = sobel_gradient::<f32>(&flipped).unwrap();
        let i = g.index(3, 2);
        assert_eq!(g.fx[i], -1020.0);
        assert_eq!(g.direction[i], std::f32::consts::PI);
    }

    #[test]
    fn rejects_color() {
        assert!(matches!(
            sobel_gradient::<f64>(&ImageBuffer::filled(2, 2, 3, 0)),
            Err(PreprocessError::Channels { .. })
        ));
    }

    proptest! {
        #[test]
        fn l1_magnitude_bounds(data in proptest::collection::vec(any::<u8>(), 36)) {
            let img = ImageBuffer::new(6, 6, 1, data).unwrap();
            let g = sobel_gradient::<f64>(&img).unwrap();
            for i in 0..36 {
                let l2 = g.l2_magnitude(i);
                let l1 = g.magnitude[i];
                prop_assert!(g.fx[i].abs().max(g.fy[i].abs()) <= l2 + 1e-9);
                prop_assert!(l2 <= l1 + 1e-9);
                prop_assert!(l1 <= std::f64::consts::SQRT_2 * l2 + 1e-9);
                prop_assert!(g.direction[i] > -std::f64::consts::PI);
                prop_assert!(g.direction[i] <= std::f64::consts::PI);
            }
        }
    }
}
