#include "esmlr/esmlr_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "esmlr/errors.hpp"
#include "esmlr/rng.hpp"

namespace esmlr {

Variant variant_from_string(const std::string& name) {
    if (name == "smlr") return Variant::Smlr;
    if (name == "k-smlr") return Variant::KSmlr;
    if (name == "esmlr") return Variant::Esmlr;
    if (name == "k-esmlr") return Variant::KEsmlr;
    throw std::invalid_argument("unknown variant: " + name);
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Smlr: return "smlr";
        case Variant::KSmlr: return "k-smlr";
        case Variant::Esmlr: return "esmlr";
        case Variant::KEsmlr: return "k-esmlr";
    }
    return "?";
}

FeatureMode mode_from_string(const std::string& name) {
    if (name == "spectral") return FeatureMode::Spectral;
    if (name == "emaps") return FeatureMode::Emaps;
    if (name == "mfl") return FeatureMode::Mfl;
    throw std::invalid_argument("unknown feature mode: " + name);
}

std::string to_string(FeatureMode m) {
    switch (m) {
        case FeatureMode::Spectral: return "spectral";
        case FeatureMode::Emaps: return "emaps";
        case FeatureMode::Mfl: return "mfl";
    }
    return "?";
}

TargetMatrix one_hot_targets(const std::vector<int>& labels, int class_count) {
    if (class_count < 2) throw std::invalid_argument("need at least two classes");
    TargetMatrix y = TargetMatrix::Zero(class_count - 1, static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int label = labels[i];
        if (label < 1 || label > class_count)
            throw std::invalid_argument("label " + std::to_string(label) + " outside 1.." +
                                        std::to_string(class_count));
        if (label < class_count) y(label - 1, static_cast<Eigen::Index>(i)) = 1.0;
    }
    return y;
}

Regressor ridge_init(const FeatureBlock& H, const TargetMatrix& Y, const RidgeConfig& cfg) {
    if (cfg.c <= 0.0) throw std::invalid_argument("ridge C must be positive");
    if (H.cols() != Y.cols()) throw std::invalid_argument("ridge_init: column counts differ");
    if (!H.values.allFinite()) throw NumericalError("ridge_init: non-finite features");

    const Eigen::Index rows = H.rows();
    const Eigen::Index n = H.cols();
    const double shift = 1.0 / cfg.c;
    Regressor w0;

    if (rows <= n) {
        Eigen::MatrixXd gram = H.values * H.values.transpose();
        gram.diagonal().array() += shift;
        // (H H' + I/C) Z = H Y', then W0 = Z'
        w0 = Eigen::LLT<Eigen::MatrixXd>(gram)
                 .solve(H.values * Y.transpose())
                 .transpose();
    } else {
        Eigen::MatrixXd gram = H.values.transpose() * H.values;
        gram.diagonal().array() += shift;
        // W0 = Y (H' H + I/C)^-1 H'
        w0 = (H.values * Eigen::LLT<Eigen::MatrixXd>(gram).solve(Y.transpose()))
                 .transpose();
    }
    if (!w0.allFinite()) throw NumericalError("ridge_init: solve produced non-finite values");
    return w0;
}

namespace {

// Scores with the implicit zero row for the last class handled via the column
// max, so no exp ever overflows.
Eigen::MatrixXd posterior_all(const Eigen::MatrixXd& scores) {
    const Eigen::Index m1 = scores.rows();
    const Eigen::Index n = scores.cols();
    Eigen::MatrixXd p(m1 + 1, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double mx = 0.0;
        for (Eigen::Index i = 0; i < m1; ++i) mx = std::max(mx, scores(i, j));
        double denom = std::exp(-mx);
        p(m1, j) = denom;
        for (Eigen::Index i = 0; i < m1; ++i) {
            const double e = std::exp(scores(i, j) - mx);
            p(i, j) = e;
            denom += e;
        }
        p.col(j) /= denom;
    }
    return p;
}

double log_likelihood(const Eigen::MatrixXd& scores, const std::vector<int>& labels) {
    const Eigen::Index m1 = scores.rows();
    double ll = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        double mx = 0.0;
        for (Eigen::Index k = 0; k < m1; ++k) mx = std::max(mx, scores(k, j));
        double sum = std::exp(-mx);
        for (Eigen::Index k = 0; k < m1; ++k) sum += std::exp(scores(k, j) - mx);
        const double lse = mx + std::log(sum);
        const int label = labels[i];
        if (label <= static_cast<int>(m1)) ll += scores(label - 1, j);
        ll -= lse;
    }
    return ll;
}

}  // namespace

Eigen::MatrixXd mlr_posteriors(const Regressor& w, const FeatureBlock& H) {
    if (w.cols() != H.rows())
        throw std::invalid_argument("mlr_posteriors: regressor and feature shapes differ");
    if (!H.values.allFinite()) throw NumericalError("mlr_posteriors: non-finite features");
    return posterior_all(w * H.values);
}

double map_objective(const Regressor& w, const FeatureBlock& H,
                     const std::vector<int>& labels, double lambda) {
    if (static_cast<Eigen::Index>(labels.size()) != H.cols())
        throw std::invalid_argument("map_objective: label count differs from columns");
    return log_likelihood(w * H.values, labels) - lambda * w.cwiseAbs().sum();
}

Eigen::MatrixXd mlr_gradient(const Regressor& w, const FeatureBlock& H,
                             const TargetMatrix& Y) {
    const Eigen::MatrixXd p = posterior_all(w * H.values);
    return (Y - p.topRows(p.rows() - 1)) * H.values.transpose();
}

std::vector<int> score_argmax(const Eigen::MatrixXd& scores) {
    const Eigen::Index m1 = scores.rows();
    std::vector<int> labels(static_cast<std::size_t>(scores.cols()));
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
        int best = 1;
        double best_score = m1 > 0 ? scores(0, j) : 0.0;
        for (Eigen::Index i = 1; i < m1; ++i)
            if (scores(i, j) > best_score) {
                best_score = scores(i, j);
                best = static_cast<int>(i) + 1;
            }
        if (0.0 > best_score) best = static_cast<int>(m1) + 1;  // implicit last class
        labels[static_cast<std::size_t>(j)] = best;
    }
    return labels;
}

Regressor lorsal_train(const FeatureBlock& H, const std::vector<int>& labels,
                       const Regressor& w0, const LorsalConfig& cfg,
                       TrainStats* stats) {
    if (w0.cols() != H.rows())
        throw std::invalid_argument("lorsal_train: w0 and feature shapes differ");
    if (cfg.lambda < 0.0) throw std::invalid_argument("lorsal_train: lambda must be >= 0");
    if (cfg.max_iter < 1) throw std::invalid_argument("lorsal_train: max_iter must be >= 1");
    const int class_count = static_cast<int>(w0.rows()) + 1;
    const TargetMatrix Y = one_hot_targets(labels, class_count);
    if (Y.cols() != H.cols())
        throw std::invalid_argument("lorsal_train: label count differs from columns");

    const Eigen::Index m1 = w0.rows();
    const Eigen::Index dim = H.rows();
    const double mu = cfg.effective_mu();
    const double lambda = cfg.lambda;

    // Quadratic bound on the multinomial Hessian: the class-coupling factor
    // 0.5 (I - 11'/M) paired with the feature Gram matrix. Both factorized
    // once and reused by every splitting step.
    Eigen::MatrixXd coupling =
        -Eigen::MatrixXd::Constant(m1, m1, 0.5 / class_count);
    coupling.diagonal().array() += 0.5;
    const Eigen::MatrixXd gram = H.values * H.values.transpose();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_c(coupling);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_g(gram);
    if (eig_c.info() != Eigen::Success || eig_g.info() != Eigen::Success)
        throw NumericalError("lorsal_train: bound factorization failed");
    const Eigen::MatrixXd qc = eig_c.eigenvectors();
    const Eigen::MatrixXd qg = eig_g.eigenvectors();
    const Eigen::VectorXd ev_c = eig_c.eigenvalues().cwiseMax(0.0);
    const Eigen::VectorXd ev_g = eig_g.eigenvalues().cwiseMax(0.0);
    // denom(i, j) = ev_c_i * ev_g_j + mu
    const Eigen::MatrixXd denom =
        (ev_c * ev_g.transpose()).array() + mu;

    const auto bound_product = [&](const Eigen::MatrixXd& x) {
        return coupling * x * gram;
    };
    // Surrogate value relative to the expansion point, minus the l1 penalty.
    const auto surrogate = [&](const Eigen::MatrixXd& grad, const Eigen::MatrixXd& expand,
                               const Eigen::MatrixXd& x) {
        const Eigen::MatrixXd delta = x - expand;
        return grad.cwiseProduct(delta).sum() -
               0.5 * delta.cwiseProduct(bound_product(delta)).sum() -
               lambda * x.cwiseAbs().sum();
    };

    Regressor u = w0;
    Eigen::MatrixXd dual = Eigen::MatrixXd::Zero(m1, dim);
    double objective = map_objective(u, H, labels, lambda);
    if (stats) {
        stats->objective.clear();
        stats->objective.push_back(objective);
        stats->outer_iterations = 0;
        stats->converged = false;
    }

    for (int outer = 0; outer < cfg.max_iter; ++outer) {
        const Regressor expand = u;
        const Eigen::MatrixXd grad = mlr_gradient(expand, H, Y);
        const Eigen::MatrixXd base_t =
            qc.transpose() * (grad + bound_product(expand)) * qg;
        const double floor_value = surrogate(grad, expand, expand);

        bool ascended = false;
        for (int attempt = 0; attempt < 2 && !ascended; ++attempt) {
            for (int k = 0; k < cfg.inner_max_iter; ++k) {
                const Eigen::MatrixXd rhs_t =
                    base_t + mu * (qc.transpose() * (u - dual) * qg);
                const Eigen::MatrixXd v =
                    qc * (rhs_t.cwiseQuotient(denom)) * qg.transpose();
                const Eigen::MatrixXd shifted = v + dual;
                Regressor u_next =
                    shifted.unaryExpr([&](double s) { return soft_threshold(s, lambda / mu); });
                dual += v - u_next;
                const double gap = (v - u_next).norm();
                u = std::move(u_next);
                if (gap <= cfg.inner_tol * std::max(1.0, u.norm())) break;
            }
            ascended = surrogate(grad, expand, u) >=
                       floor_value - 1e-12 * std::max(1.0, std::abs(floor_value));
        }
        if (!ascended) {
            // Splitting could not improve the surrogate; keep the last good iterate.
            u = expand;
            if (stats) stats->converged = true;
            break;
        }
        if (!u.allFinite()) throw NumericalError("lorsal_train: non-finite iterate");

        const double next = map_objective(u, H, labels, lambda);
        if (next < objective - 1e-9)
            throw NumericalError("lorsal_train: objective decreased");
        if (stats) {
            stats->objective.push_back(next);
            stats->outer_iterations = outer + 1;
        }
        const bool done = std::abs(next - objective) <= cfg.tol * std::max(1.0, std::abs(objective));
        objective = next;
        if (done) {
            if (stats) stats->converged = true;
            break;
        }
    }
    return u;
}

TrainedModel train(const Eigen::MatrixXd& spectral, const Eigen::MatrixXd& spatial,
                   const std::vector<int>& labels, int class_count,
                   const TrainConfig& cfg, TrainStats* stats) {
    const bool kernel_variant =
        cfg.variant == Variant::KSmlr || cfg.variant == Variant::KEsmlr;
    if (kernel_variant && cfg.mode == FeatureMode::Mfl)
        throw std::invalid_argument("kernel variants cannot be combined with MFL fusion");

    Eigen::MatrixXd raw;
    PipelineDesc pd;
    pd.variant = cfg.variant;
    pd.mode = cfg.mode;
    pd.emap_thresholds = cfg.emap_thresholds;
    pd.connectivity = cfg.connectivity;
    pd.pca_share = cfg.pca_share;

    switch (cfg.mode) {
        case FeatureMode::Spectral:
            if (spectral.rows() == 0) throw std::invalid_argument("train: no spectral features");
            raw = spectral;
            break;
        case FeatureMode::Emaps:
            if (spatial.rows() == 0) throw std::invalid_argument("train: no spatial features");
            raw = spatial;
            break;
        case FeatureMode::Mfl: {
            if (spectral.rows() == 0 || spatial.rows() == 0)
                throw std::invalid_argument("train: MFL needs both spectral and spatial blocks");
            FeatureBlock spe{spectral, BlockTag::Spectral, false};
            FeatureBlock spa{spatial, BlockTag::Spatial, false};
            raw = concat_mfl(spe, spa).values;
            pd.spectral_dim = static_cast<int>(spectral.rows());
            pd.spatial_dim = static_cast<int>(spatial.rows());
            break;
        }
    }
    pd.input_dim = static_cast<int>(raw.rows());
    if (raw.cols() != static_cast<Eigen::Index>(labels.size()))
        throw std::invalid_argument("train: label count differs from sample count");

    switch (cfg.variant) {
        case Variant::Smlr:
            break;
        case Variant::Esmlr:
            pd.has_map = true;
            pd.map_dim = cfg.map_dim;
            pd.activation = cfg.activation;
            pd.map_seed = cfg.seed;
            break;
        case Variant::KSmlr:
        case Variant::KEsmlr:
            pd.has_kernel = true;
            pd.sigma = cfg.sigma;
            pd.kernel_on_mapped = cfg.kernel_on_mapped;
            if (cfg.kernel_on_mapped) {
                pd.has_map = true;
                pd.map_dim = cfg.map_dim;
                pd.activation = cfg.activation;
                pd.map_seed = cfg.seed;
                const auto map = generate_map(cfg.map_dim, pd.input_dim, cfg.activation,
                                              cfg.seed, /*add_bias_row=*/false);
                pd.anchors = apply_map(map, raw).values;
            } else {
                pd.anchors = raw;
            }
            break;
    }

    const FeatureBlock features = pipeline_features(pd, raw);
    const TargetMatrix targets = one_hot_targets(labels, class_count);

    Regressor w0;
    if (cfg.variant == Variant::Esmlr || cfg.variant == Variant::KEsmlr) {
        w0 = ridge_init(features, targets, RidgeConfig{cfg.ridge_c});
    } else {
        w0 = Regressor::Zero(class_count - 1, features.rows());
    }

    TrainedModel model;
    model.pipeline = std::move(pd);
    model.class_count = class_count;
    model.regressor = lorsal_train(features, labels, w0, cfg.lorsal, stats);
    return model;
}

FeatureBlock pipeline_features(const PipelineDesc& pipeline, const Eigen::MatrixXd& X) {
    if (X.rows() != pipeline.input_dim)
        throw std::invalid_argument("pipeline_features: input has " + std::to_string(X.rows()) +
                                    " rows, pipeline expects " + std::to_string(pipeline.input_dim));
    const BlockTag tag = pipeline.mode == FeatureMode::Spectral ? BlockTag::Spectral
                         : pipeline.mode == FeatureMode::Emaps  ? BlockTag::Spatial
                                                                : BlockTag::Mfl;
    if (pipeline.has_kernel) {
        Eigen::MatrixXd z = X;
        if (pipeline.kernel_on_mapped) {
            const auto map = generate_map(pipeline.map_dim, pipeline.input_dim,
                                          pipeline.activation, pipeline.map_seed,
                                          /*add_bias_row=*/false);
            z = apply_map(map, X).values;
        }
        return rbf_features(KernelConfig{pipeline.sigma, pipeline.anchors}, z);
    }
    if (pipeline.has_map) {
        const auto map = generate_map(pipeline.map_dim, pipeline.input_dim,
                                      pipeline.activation, pipeline.map_seed,
                                      /*add_bias_row=*/true);
        return apply_map(map, X, tag);
    }
    return with_bias_row(X, tag);
}

std::vector<int> predict(const TrainedModel& model, const Eigen::MatrixXd& X) {
    const FeatureBlock features = pipeline_features(model.pipeline, X);
    if (model.regressor.cols() != features.rows())
        throw std::invalid_argument("predict: regressor and pipeline dimensions differ");
    return score_argmax(model.regressor * features.values);
}

namespace {

void write_f32(const std::string& path, const double* data, std::size_t count) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    for (std::size_t i = 0; i < count; ++i) {
        const float v = static_cast<float>(data[i]);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

Eigen::MatrixXd read_f32(const std::string& path, Eigen::Index rows, Eigen::Index cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) {
            float v;
            in.read(reinterpret_cast<char*>(&v), sizeof v);
            m(i, j) = v;
        }
    if (!in) throw DataError("short read on " + path);
    return m;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& basepath) {
    const PipelineDesc& pd = model.pipeline;
    nlohmann::json j{
        {"class_count", model.class_count},
        {"variant", to_string(pd.variant)},
        {"mode", to_string(pd.mode)},
        {"input_dim", pd.input_dim},
        {"spectral_dim", pd.spectral_dim},
        {"spatial_dim", pd.spatial_dim},
        {"has_map", pd.has_map},
        {"map_dim", pd.map_dim},
        {"activation", to_string(pd.activation)},
        {"map_seed", pd.map_seed},
        {"has_kernel", pd.has_kernel},
        {"sigma", pd.sigma},
        {"kernel_on_mapped", pd.kernel_on_mapped},
        {"anchor_count", pd.anchors.cols()},
        {"anchor_dim", pd.anchors.rows()},
        {"emap_thresholds", pd.emap_thresholds},
        {"connectivity", pd.connectivity},
        {"pca_share", pd.pca_share},
        {"regressor_rows", model.regressor.rows()},
        {"regressor_cols", model.regressor.cols()},
        {"weights_file", "w.f32"},
        {"anchors_file", pd.has_kernel ? "anchors.f32" : ""},
    };
    std::ofstream out(basepath + ".json");
    if (!out) throw DataError("cannot write " + basepath + ".json");
    out << j.dump(2) << "\n";

    // Column-major like Eigen's storage, little-endian float32.
    write_f32(basepath + ".w.f32", model.regressor.data(),
              static_cast<std::size_t>(model.regressor.size()));
    if (pd.has_kernel)
        write_f32(basepath + ".anchors.f32", pd.anchors.data(),
                  static_cast<std::size_t>(pd.anchors.size()));
}

TrainedModel load_model(const std::string& basepath) {
    std::ifstream in(basepath + ".json");
    if (!in) throw DataError("cannot open " + basepath + ".json");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad model descriptor: " + std::string(e.what()));
    }

    TrainedModel model;
    model.class_count = j.at("class_count").get<int>();
    PipelineDesc& pd = model.pipeline;
    pd.variant = variant_from_string(j.at("variant").get<std::string>());
    pd.mode = mode_from_string(j.at("mode").get<std::string>());
    pd.input_dim = j.at("input_dim").get<int>();
    pd.spectral_dim = j.at("spectral_dim").get<int>();
    pd.spatial_dim = j.at("spatial_dim").get<int>();
    pd.has_map = j.at("has_map").get<bool>();
    pd.map_dim = j.at("map_dim").get<int>();
    pd.activation = activation_from_string(j.at("activation").get<std::string>());
    pd.map_seed = j.at("map_seed").get<std::uint64_t>();
    pd.has_kernel = j.at("has_kernel").get<bool>();
    pd.sigma = j.at("sigma").get<double>();
    pd.kernel_on_mapped = j.at("kernel_on_mapped").get<bool>();
    pd.emap_thresholds = j.at("emap_thresholds").get<std::vector<int>>();
    pd.connectivity = j.at("connectivity").get<int>();
    pd.pca_share = j.at("pca_share").get<double>();

    const auto rows = j.at("regressor_rows").get<Eigen::Index>();
    const auto cols = j.at("regressor_cols").get<Eigen::Index>();
    model.regressor = read_f32(basepath + ".w.f32", rows, cols);
    if (pd.has_kernel) {
        const auto adim = j.at("anchor_dim").get<Eigen::Index>();
        const auto acount = j.at("anchor_count").get<Eigen::Index>();
        pd.anchors = read_f32(basepath + ".anchors.f32", adim, acount);
    }
    return model;
}

}  // namespace esmlr
