//! 4f pulse shaper: SLM geometry and calibration, mask construction, and the
//! application of masks to classical fields and photon pairs.

mod apply;
mod calibration;
mod geometry;
mod mask;

pub use apply::{
    apply_mask_biphoton, apply_mask_classical, apply_transfer_biphoton, apply_transfer_classical, clip_biphoton,
    clip_classical, clipped_fraction, effective_transfer, transmitted_spectrum, CLIP_TOLERANCE,
};
pub use calibration::{calibration_peaks, fit_pixel_map, PixelMapFit};
pub use geometry::ShaperGeometry;
pub use mask::{mask_build, normalize_phase, MaskKind, SlmMask, Transfer};
