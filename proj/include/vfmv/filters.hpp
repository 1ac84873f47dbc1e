#pragma once

#include <vector>

#include "vfmv/image.hpp"

namespace vfmv {

/// Normalized sampled Gaussian, radius ceil(4 sigma). sigma <= 0 gives [1].
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with replicated borders.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

/// Keeps every second pixel: output (i, j) = input (2i, 2j).
GrayImage decimate2(const GrayImage& img);

/// Bilinear 2x upsampling: output (2i, 2j) = input (i, j), odd samples are
/// midpoints, the last row/column replicates.
GrayImage upsample2(const GrayImage& img);

/// Central-difference gradients (one-sided at the border).
void central_gradient(const GrayImage& img, GrayImage& gx, GrayImage& gy);

}  // namespace vfmv
