#include "esmlr/emaps.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "esmlr/errors.hpp"

namespace esmlr {

PcaModel pca_fit(const Eigen::MatrixXd& X, double share) {
    if (X.cols() < 2) throw std::invalid_argument("pca_fit needs at least 2 samples");
    if (share <= 0.0 || share >= 1.0)
        throw std::invalid_argument("pca_fit: share must lie in (0, 1)");

    PcaModel model;
    model.mean = X.rowwise().mean();
    const Eigen::MatrixXd centered = X.colwise() - model.mean;
    const Eigen::MatrixXd cov =
        centered * centered.transpose() / static_cast<double>(X.cols() - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
        throw NumericalError("pca_fit: eigendecomposition failed");

    // Eigen sorts ascending; flip to variance-descending.
    const Eigen::Index d = cov.rows();
    model.eigenvalues.resize(d);
    model.components.resize(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        model.eigenvalues[k] = eig.eigenvalues()[d - 1 - k];
        model.components.col(k) = eig.eigenvectors().col(d - 1 - k);
        // Deterministic sign: largest-magnitude entry positive.
        Eigen::Index imax;
        model.components.col(k).cwiseAbs().maxCoeff(&imax);
        if (model.components(imax, k) < 0.0) model.components.col(k) = -model.components.col(k);
    }

    double total = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) total += std::max(model.eigenvalues[k], 0.0);
    if (total <= 0.0) throw NumericalError("pca_fit: rank-zero input");

    double cumulative = 0.0;
    model.retained = static_cast<int>(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        cumulative += std::max(model.eigenvalues[k], 0.0);
        if (cumulative / total > share) {
            model.retained = static_cast<int>(k) + 1;
            break;
        }
    }
    return model;
}

std::vector<Eigen::MatrixXd> pca_project_to_images(const PcaModel& model,
                                                   const HsiCube& cube) {
    if (cube.bands != model.mean.size())
        throw std::invalid_argument("pca_project_to_images: band count differs from model");

    std::vector<Eigen::MatrixXd> rasters(static_cast<std::size_t>(model.retained));
    for (auto& r : rasters) r.resize(cube.height, cube.width);

    for (int row = 0; row < cube.height; ++row) {
        for (int col = 0; col < cube.width; ++col) {
            const Eigen::VectorXd x = cube.spectrum(row, col) - model.mean;
            for (int k = 0; k < model.retained; ++k)
                rasters[static_cast<std::size_t>(k)](row, col) = model.components.col(k).dot(x);
        }
    }
    return rasters;
}

GrayImage quantize(const Eigen::MatrixXd& raster) {
    if (!raster.allFinite()) throw NumericalError("quantize: non-finite raster");
    GrayImage img;
    img.height = static_cast<int>(raster.rows());
    img.width = static_cast<int>(raster.cols());
    img.levels.resize(img.pixel_count());

    const double lo = raster.minCoeff();
    const double hi = raster.maxCoeff();
    if (hi <= lo) return img;  // constant raster -> all zero

    const double scale = 255.0 / (hi - lo);
    std::size_t i = 0;
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c, ++i) {
            const double v = std::floor((raster(r, c) - lo) * scale + 0.5);
            img.levels[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    return img;
}

namespace {

// Union-find area opening (Meijster-Wilkinson). Pixels are processed from
// bright to dark; negative parent values hold -area for active roots. A root
// adjacent to a settled brighter region is capped at -threshold, which marks
// the component as large enough without tracking its true area.
class AreaOpening {
public:
    AreaOpening(const GrayImage& img, int area_threshold, int connectivity)
        : img_(img), lambda_(area_threshold), conn_(connectivity) {}

    GrayImage run() {
        const int n = static_cast<int>(img_.pixel_count());
        order_.resize(static_cast<std::size_t>(n));
        std::iota(order_.begin(), order_.end(), 0);
        std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) {
            return img_.levels[static_cast<std::size_t>(a)] >
                   img_.levels[static_cast<std::size_t>(b)];
        });

        parent_.assign(static_cast<std::size_t>(n), UNSEEN);
        rank_of_.resize(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k)
            rank_of_[static_cast<std::size_t>(order_[static_cast<std::size_t>(k)])] = k;

        for (int p : order_) {
            parent_[static_cast<std::size_t>(p)] = -1;  // singleton, area 1
            for_each_neighbor(p, [&](int q) {
                if (rank_of_[static_cast<std::size_t>(q)] < rank_of_[static_cast<std::size_t>(p)])
                    unite(q, p);
            });
        }

        GrayImage out;
        out.height = img_.height;
        out.width = img_.width;
        out.levels.resize(img_.pixel_count());
        // Resolve darkest-first so parents are final before their children.
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            const auto p = static_cast<std::size_t>(*it);
            out.levels[p] = parent_[p] < 0
                                ? img_.levels[p]
                                : out.levels[static_cast<std::size_t>(parent_[p])];
        }
        return out;
    }

private:
    static constexpr int UNSEEN = std::numeric_limits<int>::min();

    int find_root(int p) {
        int r = p;
        while (parent_[static_cast<std::size_t>(r)] >= 0)
            r = parent_[static_cast<std::size_t>(r)];
        while (parent_[static_cast<std::size_t>(p)] >= 0) {
            const int next = parent_[static_cast<std::size_t>(p)];
            parent_[static_cast<std::size_t>(p)] = r;
            p = next;
        }
        return r;
    }

    void unite(int q, int p) {
        const int r = find_root(q);
        if (r == p) return;
        const auto rp = static_cast<std::size_t>(p);
        const auto rr = static_cast<std::size_t>(r);
        if (img_.levels[rr] == img_.levels[rp] || -parent_[rr] < lambda_) {
            parent_[rp] += parent_[rr];  // areas add (both negative)
            parent_[rr] = p;
        } else {
            // Settled brighter neighbor: p's component is large by inclusion.
            parent_[rp] = -lambda_;
        }
    }

    template <typename F>
    void for_each_neighbor(int p, F&& f) const {
        const int r = p / img_.width;
        const int c = p % img_.width;
        const bool diag = conn_ == 8;
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                if (!diag && dr != 0 && dc != 0) continue;
                const int nr = r + dr;
                const int nc = c + dc;
                if (nr < 0 || nr >= img_.height || nc < 0 || nc >= img_.width) continue;
                f(nr * img_.width + nc);
            }
    }

    const GrayImage& img_;
    int lambda_;
    int conn_;
    std::vector<int> order_;
    std::vector<int> parent_;
    std::vector<int> rank_of_;
};

GrayImage invert(const GrayImage& img) {
    GrayImage out = img;
    for (auto& v : out.levels) v = static_cast<std::uint8_t>(255 - v);
    return out;
}

void check_morph_args(int area_threshold, int connectivity) {
    if (area_threshold < 1)
        throw std::invalid_argument("area threshold must be >= 1");
    if (connectivity != 4 && connectivity != 8)
        throw std::invalid_argument("connectivity must be 4 or 8");
}

}  // namespace

GrayImage area_thinning(const GrayImage& img, int area_threshold, int connectivity) {
    check_morph_args(area_threshold, connectivity);
    if (area_threshold == 1 || img.pixel_count() == 0) return img;
    return AreaOpening(img, area_threshold, connectivity).run();
}

GrayImage area_thickening(const GrayImage& img, int area_threshold, int connectivity) {
    check_morph_args(area_threshold, connectivity);
    if (area_threshold == 1 || img.pixel_count() == 0) return img;
    return invert(area_thinning(invert(img), area_threshold, connectivity));
}

std::vector<GrayImage> build_ap(const GrayImage& img, const ApSpec& spec) {
    if (spec.thresholds.empty())
        throw std::invalid_argument("attribute profile needs at least one threshold");
    for (std::size_t i = 1; i < spec.thresholds.size(); ++i)
        if (spec.thresholds[i] <= spec.thresholds[i - 1])
            throw std::invalid_argument("thresholds must be strictly ascending");

    std::vector<GrayImage> profile;
    profile.reserve(2 * spec.thresholds.size() + 1);
    for (auto it = spec.thresholds.rbegin(); it != spec.thresholds.rend(); ++it)
        profile.push_back(area_thickening(img, *it, spec.connectivity));
    profile.push_back(img);
    for (int t : spec.thresholds)
        profile.push_back(area_thinning(img, t, spec.connectivity));
    return profile;
}

EmapStack build_emaps(const HsiCube& cube, const ApSpec& spec, double share) {
    if (!cube.normalized)
        throw std::invalid_argument("build_emaps expects a normalized cube");

    EmapStack stack;
    stack.height = cube.height;
    stack.width = cube.width;

    const Eigen::MatrixXd X = flatten_all(cube);
    std::vector<Eigen::MatrixXd> rasters;
    const Eigen::VectorXd spread =
        X.rowwise().maxCoeff() - X.rowwise().minCoeff();
    if (spread.maxCoeff() <= 0.0) {
        // Constant cube: one all-zero component raster instead of a PCA fit.
        rasters.emplace_back(Eigen::MatrixXd::Zero(cube.height, cube.width));
    } else {
        const PcaModel model = pca_fit(X, share);
        rasters = pca_project_to_images(model, cube);
    }

    const int p = static_cast<int>(spec.thresholds.size());
    for (std::size_t k = 0; k < rasters.size(); ++k) {
        const GrayImage base = quantize(rasters[k]);
        std::vector<GrayImage> profile = build_ap(base, spec);
        for (std::size_t pos = 0; pos < profile.size(); ++pos) {
            EmapLayer layer;
            layer.component = static_cast<int>(k);
            layer.position = static_cast<int>(pos);
            if (static_cast<int>(pos) < p) {
                layer.kind = ProfileKind::Thickening;
                layer.threshold = spec.thresholds[static_cast<std::size_t>(p) - 1 - pos];
            } else if (static_cast<int>(pos) == p) {
                layer.kind = ProfileKind::Original;
                layer.threshold = 0;
            } else {
                layer.kind = ProfileKind::Thinning;
                layer.threshold = spec.thresholds[pos - static_cast<std::size_t>(p) - 1];
            }
            stack.layout.push_back(layer);
            stack.images.push_back(std::move(profile[pos]));
        }
    }
    return stack;
}

FeatureBlock emap_features(const EmapStack& stack,
                           const std::vector<std::pair<int, int>>& pixel_index) {
    FeatureBlock block;
    block.tag = BlockTag::Spatial;
    block.bias_row = false;
    block.values.resize(static_cast<Eigen::Index>(stack.images.size()),
                        static_cast<Eigen::Index>(pixel_index.size()));
    for (std::size_t i = 0; i < stack.images.size(); ++i) {
        const GrayImage& img = stack.images[i];
        for (std::size_t j = 0; j < pixel_index.size(); ++j) {
            const auto [r, c] = pixel_index[j];
            block.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                img.at(r, c) / 255.0;
        }
    }
    return block;
}

void dump_emap_stack(const EmapStack& stack, const std::string& basepath) {
    std::ofstream raw(basepath + ".f32", std::ios::binary | std::ios::trunc);
    if (!raw) throw DataError("cannot write " + basepath + ".f32");
    for (const GrayImage& img : stack.images)
        for (std::uint8_t v : img.levels) {
            const float f = v / 255.0f;
            raw.write(reinterpret_cast<const char*>(&f), sizeof f);
        }

    nlohmann::json layers = nlohmann::json::array();
    for (const EmapLayer& l : stack.layout) {
        const char* kind = l.kind == ProfileKind::Thickening ? "thickening"
                           : l.kind == ProfileKind::Original ? "original"
                                                             : "thinning";
        layers.push_back({{"component", l.component},
                          {"position", l.position},
                          {"kind", kind},
                          {"threshold", l.threshold}});
    }
    nlohmann::json manifest{{"height", stack.height},
                            {"width", stack.width},
                            {"images", stack.images.size()},
                            {"dtype", "f32le"},
                            {"layout", layers}};
    std::ofstream out(basepath + ".json");
    if (!out) throw DataError("cannot write " + basepath + ".json");
    out << manifest.dump(2) << "\n";
}

}  // namespace esmlr
