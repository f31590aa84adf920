#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "esmlr/rng.hpp"

namespace esmlr {

/// A hyperspectral raster stored band-sequentially: all of band 0 in row-major
/// order, then band 1, and so on. Matches the on-disk .bsq layout exactly.
struct HsiCube {
    int height = 0;
    int width = 0;
    int bands = 0;
    std::vector<double> values;  // band-sequential, length height*width*bands
    bool normalized = false;

    double value(int row, int col, int band) const {
        return values[static_cast<std::size_t>(band) * height * width +
                      static_cast<std::size_t>(row) * width + col];
    }
    double& value(int row, int col, int band) {
        return values[static_cast<std::size_t>(band) * height * width +
                      static_cast<std::size_t>(row) * width + col];
    }

    /// Spectral vector of one pixel, length `bands`.
    Eigen::VectorXd spectrum(int row, int col) const;

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(height) * width;
    }
};

/// Per-pixel class labels; 0 means unlabeled. class_count is the largest label
/// and every class in {1,...,class_count} occurs at least once.
struct GroundTruth {
    int height = 0;
    int width = 0;
    std::vector<int> labels;  // row-major
    int class_count = 0;

    int label(int row, int col) const {
        return labels[static_cast<std::size_t>(row) * width + col];
    }

    std::size_t labeled_count() const;
};

/// Labeled pixels flattened to a feature matrix: one column per labeled pixel,
/// columns in raster-scan order so seeds reproduce across platforms.
struct LabeledDataset {
    Eigen::MatrixXd features;                      // d x n
    std::vector<int> labels;                       // length n, values in 1..M
    std::vector<std::pair<int, int>> pixel_index;  // (row, col) per column
    int class_count = 0;

    int sample_count() const { return static_cast<int>(labels.size()); }
};

/// How many training samples to draw per class. Either a single count Q for
/// every class or explicit per-class counts. With cap_rule set, the effective
/// count is min(requested, floor(class_size / 2)).
struct SplitSpec {
    int per_class = 0;              // Q; used when class_counts is empty
    std::vector<int> class_counts;  // explicit counts, one per class
    bool cap_rule = true;
};

struct Split {
    std::vector<int> train_idx;
    std::vector<int> test_idx;
};

/// Reads `<name>.bsq` (raw little-endian float32, band-sequential) described by
/// the sidecar `<name>.json` header. The returned cube is unnormalized.
HsiCube load_cube(const std::string& path);

/// Writes `<name>.bsq` plus its JSON header.
void save_cube(const HsiCube& cube, const std::string& path);

/// Reads labels from `<name>.labels` (raw little-endian uint16, row-major) or
/// `<name>.csv` (rows of `row,col,label`). Both need the sidecar JSON header
/// for dimensions.
GroundTruth load_ground_truth(const std::string& path);

/// Writes `<name>.labels` plus its JSON header.
void save_ground_truth(const GroundTruth& gt, const std::string& path);

/// Divides every value by the global maximum of the whole cube (all bands
/// jointly). Rejects negative inputs and cubes without a positive value.
/// Idempotent.
HsiCube normalize_unit_max(const HsiCube& cube);

/// One column per nonzero-label pixel, raster-scan order. Requires a
/// normalized cube with dimensions matching the ground truth.
LabeledDataset flatten_labeled(const HsiCube& cube, const GroundTruth& gt);

/// Every pixel as a column (d x height*width), raster-scan order.
Eigen::MatrixXd flatten_all(const HsiCube& cube);

/// Draws the per-class training samples uniformly without replacement;
/// everything else goes to test. Deterministic given the generator state.
Split split_per_class(const LabeledDataset& ds, const SplitSpec& spec, Rng& rng);

}  // namespace esmlr
