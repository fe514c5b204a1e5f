//! Harmonic hole filling by Jacobi iteration of the 4-neighbour mean.

use super::model::composite;
use super::{InpaintError, InpaintRequest};
use crate::imaging::ImageBuffer;
use crate::scalar::quantize;

/// Per-sweep statistics of a diffusion run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiffusionTrace {
    /// Mean absolute change over hole samples, in gray levels, per sweep.
    pub changes: Vec<f64>,
    pub converged: bool,
}

impl DiffusionTrace {
    pub fn iterations(&self) -> usize {
        self.changes.len()
    }
}

pub fn diffusion_inpaint(req: &InpaintRequest) -> Result<ImageBuffer, InpaintError> {
    diffusion_inpaint_traced(req).map(|(img, _)| img)
}

/// Holes start at the per-channel mean of valid pixels. Each sweep replaces
/// every hole sample by the mean of its 4 neighbours (coordinates clamped to
/// the image, valid pixels held fixed) until the mean absolute change drops to
/// `diffusion_tol` or `diffusion_iters` sweeps have run.
pub fn diffusion_inpaint_traced(req: &InpaintRequest) -> Result<(ImageBuffer, DiffusionTrace), InpaintError> {
    req.validate()?;
    let img = &req.image;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mask = &req.mask;
    let holes: Vec<usize> = (0..w * h).filter(|&p| !mask.as_slice()[p]).collect();
    let mut trace = DiffusionTrace::default();
    if holes.is_empty() {
        trace.converged = true;
        return Ok((img.clone(), trace));
    }

    // planar working copy, one plane per channel
    let mut cur = vec![0.0f64; w * h * ch];
    for c in 0..ch {
        let plane = &mut cur[c * w * h..(c + 1) * w * h];
        let (mut sum, mut n) = (0.0, 0usize);
        for (p, v) in plane.iter_mut().enumerate() {
            *v = f64::from(img.data()[p * ch + c]);
            if mask.as_slice()[p] {
                sum += *v;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        for &p in &holes {
            plane[p] = mean;
        }
    }

    let neighbours: Vec<[usize; 4]> = holes
        .iter()
        .map(|&p| {
            let (x, y) = (p % w, p / w);
            [
                y * w + x.saturating_sub(1),
                y * w + (x + 1).min(w - 1),
                y.saturating_sub(1) * w + x,
                (y + 1).min(h - 1) * w + x,
            ]
        })
        .collect();

    let samples = (holes.len() * ch) as f64;
    let mut next = cur.clone();
    for _ in 0..req.diffusion_iters {
        let mut change = 0.0;
        for c in 0..ch {
            let base = c * w * h;
            for (&p, nb) in holes.iter().zip(&neighbours) {
                let v = 0.25 * nb.iter().map(|&q| cur[base + q]).sum::<f64>();
                change += (v - cur[base + p]).abs();
                next[base + p] = v;
            }
        }
        std::mem::swap(&mut cur, &mut next);
        let mean_change = change / samples;
        trace.changes.push(mean_change);
        if mean_change <= req.diffusion_tol {
            trace.converged = true;
            break;
        }
    }

    let out = composite(img, mask, |c, x, y| quantize(cur[c * w * h + y * w + x]));
    Ok((out, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::MaskImage;
    use proptest::prelude::*;

    #[test]
    fn constant_image_fills_exactly() {
        let img = ImageBuffer::filled(12, 9, 3, 100);
        let mask = MaskImage::with_rect_hole(12, 9, 3, 2, 5, 4);
        let out = diffusion_inpaint(&InpaintRequest::new(img.clone(), mask)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn linear_ramp_is_reproduced() {
        let img = ImageBuffer::gray_from_fn(10, 6, |x, _| (x * 10) as u8);
        let mask = MaskImage::from_fn(10, 6, |x, _| !(4..=5).contains(&x));
        let mut req = InpaintRequest::new(img.clone(), mask);
        req.diffusion_tol = 1e-6;
        req.diffusion_iters = 20_000;
        let (out, trace) = diffusion_inpaint_traced(&req).unwrap();
        assert!(trace.converged);
        for y in 0..6 {
            for x in 4..=5 {
                let d = i32::from(out.get(x, y, 0)) - (x as i32 * 10);
                assert!(d.abs() <= 1, "({x},{y}) got {}", out.get(x, y, 0));
            }
        }
    }

    #[test]
    fn hole_touching_image_border() {
        let img = ImageBuffer::gray_from_fn(8, 8, |x, y| (x * 10 + y * 5) as u8);
        let mask = MaskImage::with_rect_hole(8, 8, 0, 0, 3, 8);
        let out = diffusion_inpaint(&InpaintRequest::new(img.clone(), mask.clone())).unwrap();
        for y in 0..8 {
            for x in 3..8 {
                assert_eq!(out.get(x, y, 0), img.get(x, y, 0));
            }
        }
    }

    #[test]
    fn iteration_limit_is_respected() {
        let img = ImageBuffer::gray_from_fn(16, 16, |x, _| if x < 8 { 0 } else { 255 });
        let mut req = InpaintRequest::new(img, MaskImage::with_rect_hole(16, 16, 2, 2, 12, 12));
        req.diffusion_iters = 3;
        req.diffusion_tol = 0.0;
        let (_, trace) = diffusion_inpaint_traced(&req).unwrap();
        assert_eq!(trace.iterations(), 3);
        assert!(!trace.converged);
    }

    fn arb_case() -> impl Strategy<Value = (ImageBuffer, MaskImage)> {
        (2usize..14, 2usize..14, prop::bool::ANY).prop_flat_map(|(w, h, rgb)| {
            let ch = if rgb { 3 } else { 1 };
            (
                prop::collection::vec(any::<u8>(), w * h * ch),
                prop::collection::vec(prop::bool::weighted(0.6), w * h),
                0..w * h,
            )
                .prop_map(move |(data, mut valid, keep)| {
                    valid[keep] = true;
                    (
                        ImageBuffer::new(w, h, ch, data).unwrap(),
                        MaskImage::new(w, h, valid).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn maximum_principle_and_compositing((img, mask) in arb_case()) {
            let out = diffusion_inpaint(&InpaintRequest::new(img.clone(), mask.clone())).unwrap();
            for c in 0..img.channels() {
                let valid: Vec<u8> = (0..img.pixel_count())
                    .filter(|&p| mask.as_slice()[p])
                    .map(|p| img.data()[p * img.channels() + c])
                    .collect();
                let (lo, hi) = (*valid.iter().min().unwrap(), *valid.iter().max().unwrap());
                for p in 0..img.pixel_count() {
                    let v = out.data()[p * img.channels() + c];
                    if mask.as_slice()[p] {
                        prop_assert_eq!(v, img.data()[p * img.channels() + c]);
                    } else {
                        prop_assert!(lo <= v && v <= hi);
                    }
                }
            }
        }

        #[test]
        fn changes_do_not_increase_after_first_sweep((img, mask) in arb_case()) {
            let mut req = InpaintRequest::new(img, mask);
            req.diffusion_iters = 300;
            req.diffusion_tol = 0.0;
            let (_, trace) = diffusion_inpaint_traced(&req).unwrap();
            for pair in trace.changes.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-9, "{:?}", pair);
            }
        }

        #[test]
        fn deterministic((img, mask) in arb_case()) {
            let req = InpaintRequest::new(img, mask);
            prop_assert_eq!(diffusion_inpaint(&req).unwrap(), diffusion_inpaint(&req).unwrap());
        }
    }
}
