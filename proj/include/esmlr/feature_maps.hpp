#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace esmlr {

/// The activation families for the random projection.
enum class ActivationKind { Linear, Sigmoid, Gaussian, Hardlimit, Multiquadric };

ActivationKind activation_from_string(const std::string& name);
std::string to_string(ActivationKind kind);

/// A randomly generated projection h(x) = act(A x + b). Regenerating from
/// (seed, L, d, activation) reproduces the weights bit for bit.
struct RandomFeatureMap {
    Eigen::MatrixXd weights;  // L x d, row i holds a_i
    Eigen::VectorXd biases;   // length L
    ActivationKind activation = ActivationKind::Sigmoid;
    std::uint64_t seed = 0;
    bool add_bias_row = true;

    int feature_dim() const { return static_cast<int>(weights.rows()); }
    int input_dim() const { return static_cast<int>(weights.cols()); }
};

/// RBF feature configuration: width sigma and the anchor samples (columns),
/// normally the training set.
struct KernelConfig {
    double sigma = 0.85;
    Eigen::MatrixXd anchors;  // d x n_a
};

enum class BlockTag { Spectral, Spatial, Kernel, Mfl };

/// A feature matrix with one column per sample. When bias_row is set, row 0 is
/// the all-ones intercept row.
struct FeatureBlock {
    Eigen::MatrixXd values;  // L' x n
    BlockTag tag = BlockTag::Spectral;
    bool bias_row = false;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

/// Draws A with entries uniform on [-1, 1] and b uniform on [0, 1].
RandomFeatureMap generate_map(int feature_dim, int input_dim, ActivationKind kind,
                              std::uint64_t seed, bool add_bias_row = true);

/// Evaluates the map on every column of X. Activation formulas:
///   linear        a.x + b
///   sigmoid       1 / (1 + exp(-(a.x + b)))
///   gaussian      exp(-b (a.x)^2)
///   hardlimit     1 if a.x >= 0 else 0
///   multiquadric  (|x - a|^2 + b^2)^2
/// Prepends the intercept row when the map asks for it.
FeatureBlock apply_map(const RandomFeatureMap& map, const Eigen::MatrixXd& X,
                       BlockTag tag = BlockTag::Spectral);

/// Kernel block: row 0 is all ones, row i is exp(-|x - anchor_i|^2 / (2 sigma^2)).
FeatureBlock rbf_features(const KernelConfig& cfg, const Eigen::MatrixXd& X);

/// Stacks spectral over spatial rows under one block. A single intercept row is
/// kept at row 0 when either input carries one.
FeatureBlock concat_mfl(const FeatureBlock& spe, const FeatureBlock& spa);

/// Identity features plus intercept row.
FeatureBlock with_bias_row(const Eigen::MatrixXd& raw, BlockTag tag);

/// Debug dump: `<base>.f32` raw little-endian float32 column-major plus a JSON
/// header with the dimensions.
void dump_feature_block(const FeatureBlock& block, const std::string& basepath);

}  // namespace esmlr
