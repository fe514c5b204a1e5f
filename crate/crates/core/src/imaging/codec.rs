use std::io::Cursor;

use png::{BitDepth, ColorType, Transformations};

use super::{ImageBuffer, ImageError, MaskImage};

/// Decode an 8-bit PNG into a 1- or 3-channel buffer.
///
/// Palette and sub-byte gray images are expanded to 8 bits. Alpha is
/// discarded without compositing. 16-bit images are rejected.
pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| ImageError::MalformedFile(e.to_string()))?;
    if reader.info().bit_depth == BitDepth::Sixteen {
        return Err(ImageError::UnsupportedFormat(
            "16-bit PNG; only 8-bit samples are supported".into(),
        ));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::MalformedFile("image too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| ImageError::MalformedFile(e.to_string()))?;
    if frame.bit_depth != BitDepth::Eight {
        return Err(ImageError::UnsupportedFormat(format!(
            "unexpected output depth {:?}",
            frame.bit_depth
        )));
    }
    let (width, height) = (frame.width as usize, frame.height as usize);
    buf.truncate(frame.buffer_size());

    let stride = frame.line_size;
    let (src_channels, keep) = match frame.color_type {
        ColorType::Grayscale => (1, 1),
        ColorType::GrayscaleAlpha => (2, 1),
        ColorType::Rgb => (3, 3),
        ColorType::Rgba => (4, 3),
        ColorType::Indexed => {
            return Err(ImageError::UnsupportedFormat(
                "palette image was not expanded".into(),
            ))
        }
    };
    let mut data = Vec::with_capacity(width * height * keep);
    for row in buf.chunks_exact(stride).take(height) {
        for px in row[..width * src_channels].chunks_exact(src_channels) {
            data.extend_from_slice(&px[..keep]);
        }
    }
    ImageBuffer::new(width, height, keep, data)
}

/// Encode as an 8-bit grayscale or truecolor PNG.
pub fn encode_png(img: &ImageBuffer) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        encoder.set_color(if img.channels() == 1 {
            ColorType::Grayscale
        } else {
            ColorType::Rgb
        });
        encoder.set_depth(BitDepth::Eight);
        // Writing to a Vec only fails on a shape bug, which ImageBuffer rules out.
        let mut writer = encoder.write_header().expect("png header");
        writer.write_image_data(img.data()).expect("png data");
        writer.finish().expect("png finish");
    }
    out
}

/// Decode a mask PNG (gray, samples >= 128 valid). RGB masks use their first channel.
pub fn decode_mask(bytes: &[u8]) -> Result<MaskImage, ImageError> {
    let img = decode_image(bytes)?;
    let gray = if img.channels() == 1 { img } else { img.channel(0) };
    MaskImage::from_gray(&gray)
}

pub fn encode_mask_png(mask: &MaskImage) -> Vec<u8> {
    encode_png(&mask.to_gray())
}
