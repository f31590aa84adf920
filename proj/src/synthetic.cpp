#include "esmlr/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "esmlr/rng.hpp"

namespace esmlr {

std::pair<HsiCube, GroundTruth> make_blob_scene(const BlobSceneSpec& spec,
                                                std::uint64_t seed) {
    if (spec.height < 8 || spec.width < 8) throw std::invalid_argument("scene too small");
    if (spec.bands < 2) throw std::invalid_argument("need at least two bands");
    if (spec.classes < 1 || spec.classes > 6)
        throw std::invalid_argument("blob scene supports 1..6 classes");

    GroundTruth gt;
    gt.height = spec.height;
    gt.width = spec.width;
    gt.class_count = spec.classes;
    gt.labels.assign(static_cast<std::size_t>(spec.height) * spec.width, 0);

    const double cy = 0.5 * (spec.height - 1);
    const double cx = 0.5 * (spec.width - 1);
    const double orbit = 0.30 * std::min(spec.height, spec.width);
    const double radius = 0.16 * std::min(spec.height, spec.width);
    for (int r = 0; r < spec.height; ++r)
        for (int c = 0; c < spec.width; ++c)
            for (int k = 0; k < spec.classes; ++k) {
                const double angle = 2.0 * std::numbers::pi * k / spec.classes;
                const double by = cy + orbit * std::cos(angle);
                const double bx = cx + orbit * std::sin(angle);
                const double d2 = (r - by) * (r - by) + (c - bx) * (c - bx);
                if (d2 <= radius * radius) {
                    gt.labels[static_cast<std::size_t>(r) * spec.width + c] = k + 1;
                    break;
                }
            }

    // Smooth per-class signature in (0, 1); label 0 is a flat background.
    const auto signature = [&](int label, int band) {
        if (label == 0) return 0.45;
        const double t = static_cast<double>(band) / (spec.bands - 1);
        const double freq = 1.0 + 0.35 * label;
        const double phase = 2.0 * std::numbers::pi * label / (spec.classes + 1);
        return 0.55 + 0.32 * std::sin(2.0 * std::numbers::pi * freq * t + phase);
    };

    HsiCube cube;
    cube.height = spec.height;
    cube.width = spec.width;
    cube.bands = spec.bands;
    cube.normalized = false;
    cube.values.assign(static_cast<std::size_t>(spec.height) * spec.width * spec.bands, 0.0);

    Rng rng(seed);
    for (int r = 0; r < spec.height; ++r)
        for (int c = 0; c < spec.width; ++c) {
            const int label = gt.labels[static_cast<std::size_t>(r) * spec.width + c];
            for (int b = 0; b < spec.bands; ++b) {
                double v = signature(label, b) + spec.noise_sigma * rng.normal();
                if (v < 0.0) v = 0.0;
                const std::size_t at = static_cast<std::size_t>(b) * spec.height * spec.width +
                                       static_cast<std::size_t>(r) * spec.width + c;
                cube.values[at] = spec.peak * v;
            }
        }
    return {std::move(cube), std::move(gt)};
}

}  // namespace esmlr
