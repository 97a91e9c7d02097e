#pragma once

#include <complex>
#include <vector>

#include "stereofov/image.hpp"

namespace stereofov::testing {

/// Full 2D DFT (row-major, width x height) of a real image.
std::vector<std::complex<double>> dft2(const GrayImage& img);

/// Signed frequency (cycles per pixel) of DFT index k on an n-point axis.
double dft_frequency(int k, int n);

/// Power spectrum averaged over annuli of width 1/n cycles per pixel
/// (square images only); element i covers radius [i, i+1) / n.
std::vector<double> radial_power(const GrayImage& img);

}  // namespace stereofov::testing
