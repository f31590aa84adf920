#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "esmlr/feature_maps.hpp"
#include "esmlr/hsi_data.hpp"

namespace esmlr {

/// Principal components of the spectral samples, variance-descending.
struct PcaModel {
    Eigen::VectorXd mean;         // length d
    Eigen::MatrixXd components;   // d x d, orthonormal columns
    Eigen::VectorXd eigenvalues;  // length d, non-increasing
    int retained = 0;             // smallest c with cumulative share > target
};

/// 8-bit gray image, row-major.
struct GrayImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> levels;

    std::uint8_t at(int row, int col) const {
        return levels[static_cast<std::size_t>(row) * width + col];
    }
    std::uint8_t& at(int row, int col) {
        return levels[static_cast<std::size_t>(row) * width + col];
    }
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(height) * width;
    }
};

/// Attribute-profile parameters: strictly ascending area thresholds and the
/// pixel connectivity (4 or 8).
struct ApSpec {
    std::vector<int> thresholds{100, 200, 500, 1000};
    int connectivity = 4;
};

enum class ProfileKind { Thickening, Original, Thinning };

struct EmapLayer {
    int component = 0;  // principal component index
    int position = 0;   // index inside the profile
    ProfileKind kind = ProfileKind::Original;
    int threshold = 0;  // 0 for the original image
};

/// The stacked attribute-profile images for all retained components.
struct EmapStack {
    int height = 0;
    int width = 0;
    std::vector<GrayImage> images;
    std::vector<EmapLayer> layout;  // one entry per image
};

/// Eigendecomposition of the sample covariance (divisor n-1) of the columns of
/// X. `retained` is the smallest count whose cumulative eigenvalue share
/// exceeds `share`. Throws on rank-zero input.
PcaModel pca_fit(const Eigen::MatrixXd& X, double share = 0.99);

/// Projects every pixel onto the retained components; one raster per component.
std::vector<Eigen::MatrixXd> pca_project_to_images(const PcaModel& model,
                                                   const HsiCube& cube);

/// Linear rescale of [min, max] onto {0,...,255}, round half up. A constant
/// raster maps to all zeros.
GrayImage quantize(const Eigen::MatrixXd& raster);

/// Area opening: every bright connected component with area < threshold is
/// merged with its parent gray level.
GrayImage area_thinning(const GrayImage& img, int area_threshold, int connectivity);

/// Dual of thinning: inverts, thins, inverts back.
GrayImage area_thickening(const GrayImage& img, int area_threshold, int connectivity);

/// The full profile of one image: thickenings with descending thresholds, the
/// original, thinnings with ascending thresholds (2p+1 images for p thresholds).
std::vector<GrayImage> build_ap(const GrayImage& img, const ApSpec& spec);

/// PCA on all pixels, quantize each retained component and build its profile.
/// Expects a normalized cube.
EmapStack build_emaps(const HsiCube& cube, const ApSpec& spec, double share = 0.99);

/// Flattens the stack to a feature block aligned with the given pixel columns;
/// gray levels are rescaled to [0, 1] by /255.
FeatureBlock emap_features(const EmapStack& stack,
                           const std::vector<std::pair<int, int>>& pixel_index);

/// Writes `<base>.f32` (all images concatenated, row-major float32) plus a JSON
/// manifest listing (component, position, threshold) per image.
void dump_emap_stack(const EmapStack& stack, const std::string& basepath);

}  // namespace esmlr
