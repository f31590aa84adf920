#include "esmlr/feature_maps.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "esmlr/errors.hpp"
#include "esmlr/rng.hpp"

namespace esmlr {

ActivationKind activation_from_string(const std::string& name) {
    if (name == "linear") return ActivationKind::Linear;
    if (name == "sigmoid") return ActivationKind::Sigmoid;
    if (name == "gaussian") return ActivationKind::Gaussian;
    if (name == "hardlimit") return ActivationKind::Hardlimit;
    if (name == "multiquadric") return ActivationKind::Multiquadric;
    throw std::invalid_argument("unknown activation: " + name);
}

std::string to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Linear: return "linear";
        case ActivationKind::Sigmoid: return "sigmoid";
        case ActivationKind::Gaussian: return "gaussian";
        case ActivationKind::Hardlimit: return "hardlimit";
        case ActivationKind::Multiquadric: return "multiquadric";
    }
    return "?";
}

RandomFeatureMap generate_map(int feature_dim, int input_dim, ActivationKind kind,
                              std::uint64_t seed, bool add_bias_row) {
    if (feature_dim < 1 || input_dim < 1)
        throw std::invalid_argument("generate_map needs positive dimensions");
    RandomFeatureMap map;
    map.weights.resize(feature_dim, input_dim);
    map.biases.resize(feature_dim);
    map.activation = kind;
    map.seed = seed;
    map.add_bias_row = add_bias_row;

    // Row-major weight fill, then biases: the draw order is part of the
    // reproducibility contract.
    Rng rng(seed);
    for (int i = 0; i < feature_dim; ++i)
        for (int j = 0; j < input_dim; ++j)
            map.weights(i, j) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < feature_dim; ++i) map.biases[i] = rng.uniform01();
    return map;
}

namespace {

double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

FeatureBlock apply_map(const RandomFeatureMap& map, const Eigen::MatrixXd& X,
                       BlockTag tag) {
    if (X.rows() != map.input_dim())
        throw std::invalid_argument("apply_map: input has " + std::to_string(X.rows()) +
                                    " rows, map expects " + std::to_string(map.input_dim()));
    if (!X.allFinite()) throw NumericalError("apply_map: non-finite input");

    const Eigen::Index L = map.weights.rows();
    const Eigen::Index n = X.cols();
    Eigen::MatrixXd H(L, n);

    switch (map.activation) {
        case ActivationKind::Linear:
            H = (map.weights * X).colwise() + map.biases;
            break;
        case ActivationKind::Sigmoid: {
            H = (map.weights * X).colwise() + map.biases;
            H = H.unaryExpr([](double z) { return stable_sigmoid(z); });
            break;
        }
        case ActivationKind::Gaussian: {
            const Eigen::MatrixXd Z = map.weights * X;  // bias scales, not shifts
            for (Eigen::Index i = 0; i < L; ++i)
                for (Eigen::Index j = 0; j < n; ++j)
                    H(i, j) = std::exp(-map.biases[i] * Z(i, j) * Z(i, j));
            break;
        }
        case ActivationKind::Hardlimit: {
            const Eigen::MatrixXd Z = map.weights * X;
            H = (Z.array() >= 0.0).cast<double>();
            break;
        }
        case ActivationKind::Multiquadric: {
            // |x - a|^2 = |x|^2 + |a|^2 - 2 a.x, then (. + b^2)^2
            const Eigen::RowVectorXd xsq = X.colwise().squaredNorm();
            const Eigen::VectorXd asq = map.weights.rowwise().squaredNorm();
            Eigen::MatrixXd D = -2.0 * (map.weights * X);
            D.colwise() += asq;
            D.rowwise() += xsq;
            for (Eigen::Index i = 0; i < L; ++i) {
                const double b2 = map.biases[i] * map.biases[i];
                for (Eigen::Index j = 0; j < n; ++j) {
                    const double s = std::max(D(i, j), 0.0) + b2;
                    H(i, j) = s * s;
                }
            }
            break;
        }
    }

    if (!H.allFinite())
        throw NumericalError("apply_map: activation produced non-finite values");

    FeatureBlock block;
    block.tag = tag;
    block.bias_row = map.add_bias_row;
    if (map.add_bias_row) {
        block.values.resize(L + 1, n);
        block.values.row(0).setOnes();
        block.values.bottomRows(L) = H;
    } else {
        block.values = std::move(H);
    }
    return block;
}

FeatureBlock rbf_features(const KernelConfig& cfg, const Eigen::MatrixXd& X) {
    if (cfg.sigma <= 0.0) throw std::invalid_argument("rbf_features: sigma must be positive");
    if (cfg.anchors.cols() == 0) throw std::invalid_argument("rbf_features: no anchors");
    if (X.rows() != cfg.anchors.rows())
        throw std::invalid_argument("rbf_features: input and anchor dimensions differ");

    const Eigen::Index na = cfg.anchors.cols();
    const Eigen::Index n = X.cols();
    const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);

    const Eigen::RowVectorXd xsq = X.colwise().squaredNorm();
    const Eigen::VectorXd asq = cfg.anchors.colwise().squaredNorm();
    Eigen::MatrixXd D = -2.0 * (cfg.anchors.transpose() * X);
    D.colwise() += asq;
    D.rowwise() += xsq;

    FeatureBlock block;
    block.tag = BlockTag::Kernel;
    block.bias_row = true;
    block.values.resize(na + 1, n);
    block.values.row(0).setOnes();
    block.values.bottomRows(na) =
        (-inv * D.cwiseMax(0.0).array()).exp().matrix();
    return block;
}

FeatureBlock concat_mfl(const FeatureBlock& spe, const FeatureBlock& spa) {
    if (spe.cols() != spa.cols() && spe.rows() != 0 && spa.rows() != 0)
        throw std::invalid_argument("concat_mfl: column counts differ");

    const Eigen::Index n = spe.rows() != 0 ? spe.cols() : spa.cols();
    const Eigen::Index spe_body = spe.rows() - (spe.bias_row ? 1 : 0);
    const Eigen::Index spa_body = spa.rows() - (spa.bias_row ? 1 : 0);
    const bool bias = spe.bias_row || spa.bias_row;

    FeatureBlock out;
    out.tag = BlockTag::Mfl;
    out.bias_row = bias;
    out.values.resize((bias ? 1 : 0) + spe_body + spa_body, n);
    Eigen::Index r = 0;
    if (bias) out.values.row(r++).setOnes();
    if (spe_body > 0) out.values.middleRows(r, spe_body) = spe.values.bottomRows(spe_body);
    r += spe_body;
    if (spa_body > 0) out.values.middleRows(r, spa_body) = spa.values.bottomRows(spa_body);
    return out;
}

FeatureBlock with_bias_row(const Eigen::MatrixXd& raw, BlockTag tag) {
    FeatureBlock block;
    block.tag = tag;
    block.bias_row = true;
    block.values.resize(raw.rows() + 1, raw.cols());
    block.values.row(0).setOnes();
    block.values.bottomRows(raw.rows()) = raw;
    return block;
}

void dump_feature_block(const FeatureBlock& block, const std::string& basepath) {
    std::ofstream raw(basepath + ".f32", std::ios::binary | std::ios::trunc);
    if (!raw) throw DataError("cannot write " + basepath + ".f32");
    for (Eigen::Index j = 0; j < block.cols(); ++j)
        for (Eigen::Index i = 0; i < block.rows(); ++i) {
            const float v = static_cast<float>(block.values(i, j));
            raw.write(reinterpret_cast<const char*>(&v), sizeof v);
        }

    const char* tag = "spectral";
    switch (block.tag) {
        case BlockTag::Spectral: tag = "spectral"; break;
        case BlockTag::Spatial: tag = "spatial"; break;
        case BlockTag::Kernel: tag = "kernel"; break;
        case BlockTag::Mfl: tag = "mfl"; break;
    }
    nlohmann::json h{{"rows", block.rows()},
                     {"cols", block.cols()},
                     {"dtype", "f32le"},
                     {"layout", "col-major"},
                     {"bias_row", block.bias_row},
                     {"tag", tag}};
    std::ofstream out(basepath + ".json");
    if (!out) throw DataError("cannot write " + basepath + ".json");
    out << h.dump(2) << "\n";
}

}  // namespace esmlr
