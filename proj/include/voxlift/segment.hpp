#pragma once

#include "voxlift/image.hpp"

namespace voxlift {

/// Region-growing stand-in for a promptable segmenter.
///
/// Pixels are nodes of the 4-connected grid; two neighbours are joined when the
/// Euclidean RGB distance between them is at most `tau`. A point prompt returns
/// the connected component containing the point. A box prompt restricts the
/// graph to the box and returns the component containing the box centre.
///
/// Because the result is a connected component of a fixed graph, re-seeding
/// from any pixel of the returned region reproduces it exactly.
Mask segment_region_grow(const Image& image, const PromptAnnotation& prompt, double tau);

/// Tightest box around the set bits, dilated by `margin` and clipped to the mask.
BBox mask_to_bbox(const Mask& mask, int margin);

/// Pads the shorter side of `box` symmetrically so it becomes square, then
/// clips to a width x height image.
BBox square_box(const BBox& box, int width, int height);

/// Masks the image (pixels outside `mask` become `background`) and bilinearly
/// resamples the `box` region to an out_size x out_size patch.
///
/// Output pixel (i, j) samples the source at continuous coordinate
/// (x0 + (i + 0.5) * w / out_size - 0.5, y0 + (j + 0.5) * h / out_size - 0.5)
/// in pixel-centre units, with edge clamping.
Image apply_mask_crop(const Image& image, const Mask& mask, const BBox& box, int out_size,
                      const Rgb& background = kWhite);

}  // namespace voxlift
