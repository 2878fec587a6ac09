use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};

/// `round(255·clamp(x, 0, 1))`.
pub fn to_gray8(x: f64) -> u8 {
    (255.0 * x.clamp(0.0, 1.0)).round() as u8
}

pub fn encode_png_gray(values: &[f64], height: usize, width: usize) -> Result<Vec<u8>> {
    if values.len() != height * width {
        return Err(Error::ShapeMismatch(format!(
            "{height}x{width} image needs {} values, got {}",
            height * width,
            values.len()
        )));
    }
    let pixels: Vec<u8> = values.iter().map(|&v| to_gray8(v)).collect();
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| Error::Format(format!("png: {e}")))?;
        writer.write_image_data(&pixels).map_err(|e| Error::Format(format!("png: {e}")))?;
    }
    Ok(out)
}

/// Writes an 8-bit grayscale PNG.
pub fn write_png_gray(path: &Path, values: &[f64], height: usize, width: usize) -> Result<()> {
    let bytes = encode_png_gray(values, height, width)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    std::io::Write::write_all(&mut w, &bytes).map_err(|e| Error::io(path, e))
}

/// Decodes an 8-bit grayscale PNG into `(height, width, pixels)`.
pub fn decode_png_gray(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| Error::Format(format!("png: {e}")))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Format(format!("png: {e}")))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format("expected 8-bit grayscale png".into()));
    }
    buf.truncate(info.buffer_size());
    Ok((info.height as usize, info.width as usize, buf))
}
