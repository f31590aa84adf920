#pragma once

#include <cstdint>
#include <utility>

#include "esmlr/hsi_data.hpp"

namespace esmlr {

/// Synthetic scene: spatially contiguous class blobs on a background, each
/// class a Gaussian cluster around its own smooth spectral signature.
/// Values are non-negative counts, unnormalized.
struct BlobSceneSpec {
    int height = 40;
    int width = 40;
    int bands = 20;
    int classes = 3;
    double noise_sigma = 0.06;  // relative to the unit signature scale
    double peak = 1000.0;       // amplitude of the stored counts
};

std::pair<HsiCube, GroundTruth> make_blob_scene(const BlobSceneSpec& spec,
                                                std::uint64_t seed);

}  // namespace esmlr
