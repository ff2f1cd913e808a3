use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, ImageReader, Rgb, RgbImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format{}", .0.as_deref().map(|f| format!(" ({f})")).unwrap_or_default())]
    UnsupportedFormat(Option<String>),
    #[error("decode failure: {0}")]
    Decode(#[from] image::ImageError),
    #[error("image has zero width or height")]
    ZeroDimensions,
}

/// Reads a JPEG or PNG file into 8-bit RGB.
pub fn decode_image(path: impl AsRef<Path>) -> Result<RgbImage, DecodeError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| DecodeError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    decode_bytes(&bytes)
}

/// Decodes an in-memory JPEG or PNG. The format is sniffed from content.
/// 16-bit samples are reduced with `round(v * 255 / 65535)`; alpha is dropped.
pub fn decode_bytes(bytes: &[u8]) -> Result<RgbImage, DecodeError> {
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| DecodeError::Decode(image::ImageError::IoError(e)))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        other => {
            return Err(DecodeError::UnsupportedFormat(
                other.map(|f| format!("{f:?}")),
            ))
        }
    }
    let dynamic = reader.decode()?;
    if dynamic.width() == 0 || dynamic.height() == 0 {
        return Err(DecodeError::ZeroDimensions);
    }
    Ok(to_rgb8(dynamic))
}

#[inline]
fn round16(v: u16) -> u8 {
    ((v as u32 * 255 + 32767) / 65535) as u8
}

fn to_rgb8(img: DynamicImage) -> RgbImage {
    match img {
        DynamicImage::ImageRgb16(buf) => RgbImage::from_fn(buf.width(), buf.height(), |x, y| {
            let p = buf.get_pixel(x, y).0;
            Rgb([round16(p[0]), round16(p[1]), round16(p[2])])
        }),
        DynamicImage::ImageRgba16(buf) => RgbImage::from_fn(buf.width(), buf.height(), |x, y| {
            let p = buf.get_pixel(x, y).0;
            Rgb([round16(p[0]), round16(p[1]), round16(p[2])])
        }),
        DynamicImage::ImageLuma16(buf) => RgbImage::from_fn(buf.width(), buf.height(), |x, y| {
            let v = round16(buf.get_pixel(x, y).0[0]);
            Rgb([v, v, v])
        }),
        DynamicImage::ImageLumaA16(buf) => RgbImage::from_fn(buf.width(), buf.height(), |x, y| {
            let v = round16(buf.get_pixel(x, y).0[0]);
            Rgb([v, v, v])
        }),
        other => other.to_rgb8(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Rgb};

    fn png_bytes(img: &RgbImage) -> Vec<u8> {
        let mut out = Vec::new();
        img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
            .unwrap();
        out
    }

    #[test]
    fn decodes_png_and_jpeg() {
        let img = RgbImage::from_fn(640, 480, |x, y| Rgb([(x % 256) as u8, (y % 256) as u8, 7]));
        let back = decode_bytes(&png_bytes(&img)).unwrap();
        assert_eq!(back, img);

        let mut jpg = Vec::new();
        img.write_to(&mut Cursor::new(&mut jpg), ImageFormat::Jpeg)
            .unwrap();
        let back = decode_bytes(&jpg).unwrap();
        assert_eq!(back.dimensions(), (640, 480));
    }

    #[test]
    fn truncated_file_fails() {
        let img = RgbImage::from_pixel(64, 64, Rgb([10, 20, 30]));
        let bytes = png_bytes(&img);
        let err = decode_bytes(&bytes[..bytes.len() / 2]).unwrap_err();
        assert!(matches!(err, DecodeError::Decode(_)), "{err:?}");
    }

    #[test]
    fn non_image_rejected() {
        let err = decode_bytes(b"just some text, not an image").unwrap_err();
        assert!(matches!(err, DecodeError::UnsupportedFormat(None)));
        let gif = b"GIF89a\x01\x00\x01\x00\x00\x00\x00;";
        assert!(matches!(
            decode_bytes(gif),
            Err(DecodeError::UnsupportedFormat(Some(_)))
        ));
    }

    #[test]
    fn missing_file_is_unreadable() {
        assert!(matches!(
            decode_image("/nonexistent/definitely/not/here.png"),
            Err(DecodeError::Unreadable { .. })
        ));
    }

    #[test]
    fn sixteen_bit_gradient_rounds() {
        let (w, h) = (256u32, 4u32);
        let buf: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::from_fn(w, h, |x, y| {
            let v = (x * 257 + y * 64) as u16;
            Rgb([v, v.saturating_add(100), 65535 - v])
        });
        let mut bytes = Vec::new();
        DynamicImage::ImageRgb16(buf.clone())
            .write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
            .unwrap();
        let out = decode_bytes(&bytes).unwrap();
        for (x, y, p) in out.enumerate_pixels() {
            let src = buf.get_pixel(x, y).0;
            for (&got, &v) in p.0.iter().zip(&src) {
                assert_eq!(got, (v as f64 * 255.0 / 65535.0).round() as u8);
            }
        }
    }
}
