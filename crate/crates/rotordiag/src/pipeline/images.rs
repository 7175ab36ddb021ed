//! Image-to-tensor loading shared by training and evaluation.

use std::path::Path;

use super::PipelineError;
use crate::nn::Tensor;
use crate::spectrogram::read_image;

/// Load a spectrogram image as a `[3, H, W]` tensor with pixel channels
/// scaled to [0, 1] by dividing by 255.
pub(crate) fn load_image_tensor(
    path: &Path,
    expected_h: usize,
    expected_w: usize,
) -> Result<Tensor, PipelineError> {
    let image = read_image(path)?;
    if image.height != expected_h || image.width != expected_w {
        return Err(PipelineError::ImageSizeMismatch {
            path: path.to_path_buf(),
            height: image.height,
            width: image.width,
            expected_h,
            expected_w,
        });
    }
    let (h, w) = (image.height, image.width);
    let mut data = vec![0.0f32; 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            let px = image.pixel(y, x);
            for c in 0..3 {
                data[(c * h + y) * w + x] = px[c] as f32 / 255.0;
            }
        }
    }
    Ok(Tensor::new(vec![3, h, w], data))
}
