#pragma once

#include <array>
#include <vector>

namespace inrpatch {

inline constexpr int kFeatureDim = 12;

// Hand-crafted 12-dim feature vector of an RGB patch in [0,1]:
//   0-2   per-channel mean
//   3-5   per-channel std (population)
//   6-8   per-channel mean of 2x2-block means of the forward-difference
//         gradient magnitude sqrt(dx^2 + dy^2) (last row/col diffs are 0)
//   9-11  per-channel high-frequency energy: mean squared deviation from
//         the 4-neighbour average over interior pixels
std::array<double, kFeatureDim> patch_features(const float* rgb, int w, int h);

struct FeatureStats {
    std::vector<double> mu;  // dim d
    std::vector<double> cov; // d*d, row-major, symmetric PSD
    int dim = 0;
};

FeatureStats fit_stats(const std::vector<std::array<double, kFeatureDim>>& feats);

// Jacobi rotation eigendecomposition of a symmetric matrix (row-major d*d).
// Returns eigenvalues; V holds eigenvectors in columns (A = V diag(l) V^T).
std::vector<double> jacobi_eigen(std::vector<double> a, int d, std::vector<double>& v);

// Frechet distance between Gaussians:
// |mu_a - mu_b|^2 + Tr(Ca + Cb - 2 (Ca^1/2 Cb Ca^1/2)^1/2).
// Matrix square roots by Jacobi eigendecomposition with negative
// eigenvalues clamped to zero. Errors on non-symmetric input.
double pfd(const FeatureStats& a, const FeatureStats& b);

} // namespace inrpatch
