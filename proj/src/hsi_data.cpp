#include "esmlr/hsi_data.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "esmlr/errors.hpp"

namespace esmlr {

namespace {

using nlohmann::json;

std::string sidecar_path(const std::string& path) {
    std::filesystem::path p(path);
    p.replace_extension(".json");
    return p.string();
}

json read_header(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing header: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("bad header " + path + ": " + e.what());
    }
    return j;
}

int header_int(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw DataError("header " + path + " lacks integer field '" + key + "'");
    int v = j[key].get<int>();
    if (v <= 0) throw DataError("header " + path + ": '" + key + "' must be positive");
    return v;
}

std::vector<char> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<char> buf(size);
    in.read(buf.data(), static_cast<std::streamsize>(size));
    if (!in) throw DataError("short read on " + path);
    return buf;
}

void write_all(const std::string& path, const void* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw DataError("short write on " + path);
}

// On-disk scalars are little-endian; these assume a little-endian host, which
// the build targets.
float le_float(const char* p) {
    float f;
    std::memcpy(&f, p, sizeof f);
    return f;
}

std::uint16_t le_u16(const char* p) {
    std::uint16_t v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

GroundTruth ground_truth_from_csv(const std::string& path, int height, int width) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    GroundTruth gt;
    gt.height = height;
    gt.width = width;
    gt.labels.assign(static_cast<std::size_t>(height) * width, 0);
    std::vector<bool> seen(gt.labels.size(), false);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        long row, col, label;
        if (std::sscanf(line.c_str(), "%ld ,%ld ,%ld", &row, &col, &label) != 3)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected row,col,label");
        if (label < 0)
            throw DataError(path + ":" + std::to_string(lineno) + ": negative label");
        if (row < 0 || row >= height || col < 0 || col >= width)
            throw DataError(path + ":" + std::to_string(lineno) + ": pixel outside declared dimensions");
        const std::size_t idx = static_cast<std::size_t>(row) * width + col;
        if (seen[idx])
            throw DataError(path + ":" + std::to_string(lineno) + ": duplicate pixel");
        seen[idx] = true;
        gt.labels[idx] = static_cast<int>(label);
    }
    return gt;
}

void check_classes(GroundTruth& gt, const std::string& path) {
    int max_label = 0;
    for (int v : gt.labels) max_label = std::max(max_label, v);
    if (max_label == 0) throw DataError(path + ": no labeled pixels");
    std::vector<long> counts(static_cast<std::size_t>(max_label) + 1, 0);
    for (int v : gt.labels) ++counts[static_cast<std::size_t>(v)];
    for (int c = 1; c <= max_label; ++c)
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw DataError(path + ": class " + std::to_string(c) + " has no samples");
    gt.class_count = max_label;
}

}  // namespace

Eigen::VectorXd HsiCube::spectrum(int row, int col) const {
    Eigen::VectorXd x(bands);
    for (int b = 0; b < bands; ++b) x[b] = value(row, col, b);
    return x;
}

std::size_t GroundTruth::labeled_count() const {
    return static_cast<std::size_t>(
        std::count_if(labels.begin(), labels.end(), [](int v) { return v != 0; }));
}

HsiCube load_cube(const std::string& path) {
    const std::string header_path = sidecar_path(path);
    const json h = read_header(header_path);
    HsiCube cube;
    cube.height = header_int(h, "height", header_path);
    cube.width = header_int(h, "width", header_path);
    cube.bands = header_int(h, "bands", header_path);
    if (h.value("interleave", "bsq") != "bsq")
        throw DataError(header_path + ": unsupported interleave (expected bsq)");
    if (h.value("dtype", "f32le") != "f32le")
        throw DataError(header_path + ": unsupported dtype (expected f32le)");

    const std::vector<char> raw = read_all(path);
    const std::size_t expected =
        static_cast<std::size_t>(cube.height) * cube.width * cube.bands * sizeof(float);
    if (raw.size() != expected)
        throw DataError(path + ": file holds " + std::to_string(raw.size()) +
                        " bytes, header implies " + std::to_string(expected));

    cube.values.resize(expected / sizeof(float));
    for (std::size_t i = 0; i < cube.values.size(); ++i)
        cube.values[i] = static_cast<double>(le_float(raw.data() + i * sizeof(float)));
    cube.normalized = false;
    return cube;
}

void save_cube(const HsiCube& cube, const std::string& path) {
    std::vector<float> raw(cube.values.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<float>(cube.values[i]);
    write_all(path, raw.data(), raw.size() * sizeof(float));

    json h{{"height", cube.height},
           {"width", cube.width},
           {"bands", cube.bands},
           {"interleave", "bsq"},
           {"dtype", "f32le"}};
    std::ofstream out(sidecar_path(path));
    if (!out) throw DataError("cannot write " + sidecar_path(path));
    out << h.dump(2) << "\n";
}

GroundTruth load_ground_truth(const std::string& path) {
    const std::string header_path = sidecar_path(path);
    const json h = read_header(header_path);
    const int height = header_int(h, "height", header_path);
    const int width = header_int(h, "width", header_path);

    GroundTruth gt;
    if (std::filesystem::path(path).extension() == ".csv") {
        gt = ground_truth_from_csv(path, height, width);
    } else {
        if (h.value("dtype", "u16le") != "u16le")
            throw DataError(header_path + ": unsupported dtype (expected u16le)");
        const std::vector<char> raw = read_all(path);
        const std::size_t expected =
            static_cast<std::size_t>(height) * width * sizeof(std::uint16_t);
        if (raw.size() != expected)
            throw DataError(path + ": file holds " + std::to_string(raw.size()) +
                            " bytes, header implies " + std::to_string(expected));
        gt.height = height;
        gt.width = width;
        gt.labels.resize(expected / sizeof(std::uint16_t));
        for (std::size_t i = 0; i < gt.labels.size(); ++i)
            gt.labels[i] = le_u16(raw.data() + i * sizeof(std::uint16_t));
    }
    check_classes(gt, path);
    return gt;
}

void save_ground_truth(const GroundTruth& gt, const std::string& path) {
    std::vector<std::uint16_t> raw(gt.labels.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<std::uint16_t>(gt.labels[i]);
    write_all(path, raw.data(), raw.size() * sizeof(std::uint16_t));

    json h{{"height", gt.height},
           {"width", gt.width},
           {"bands", 1},
           {"interleave", "bsq"},
           {"dtype", "u16le"}};
    std::ofstream out(sidecar_path(path));
    if (!out) throw DataError("cannot write " + sidecar_path(path));
    out << h.dump(2) << "\n";
}

HsiCube normalize_unit_max(const HsiCube& cube) {
    if (cube.normalized) return cube;
    double max = 0.0;
    for (double v : cube.values) {
        if (v < 0.0) throw DataError("negative value in cube; expected radiance counts");
        max = std::max(max, v);
    }
    if (max <= 0.0) throw DataError("cube has no positive value to normalize by");
    HsiCube out = cube;
    for (double& v : out.values) v /= max;
    out.normalized = true;
    return out;
}

LabeledDataset flatten_labeled(const HsiCube& cube, const GroundTruth& gt) {
    if (cube.height != gt.height || cube.width != gt.width)
        throw DataError("cube and ground truth dimensions differ");
    if (!cube.normalized)
        throw std::invalid_argument("flatten_labeled expects a normalized cube");

    LabeledDataset ds;
    ds.class_count = gt.class_count;
    const auto n = gt.labeled_count();
    ds.features.resize(cube.bands, static_cast<Eigen::Index>(n));
    ds.labels.reserve(n);
    ds.pixel_index.reserve(n);

    Eigen::Index col = 0;
    for (int r = 0; r < cube.height; ++r) {
        for (int c = 0; c < cube.width; ++c) {
            const int label = gt.label(r, c);
            if (label == 0) continue;
            for (int b = 0; b < cube.bands; ++b)
                ds.features(b, col) = cube.value(r, c, b);
            ds.labels.push_back(label);
            ds.pixel_index.emplace_back(r, c);
            ++col;
        }
    }
    return ds;
}

Eigen::MatrixXd flatten_all(const HsiCube& cube) {
    Eigen::MatrixXd X(cube.bands, static_cast<Eigen::Index>(cube.pixel_count()));
    Eigen::Index col = 0;
    for (int r = 0; r < cube.height; ++r)
        for (int c = 0; c < cube.width; ++c, ++col)
            for (int b = 0; b < cube.bands; ++b)
                X(b, col) = cube.value(r, c, b);
    return X;
}

Split split_per_class(const LabeledDataset& ds, const SplitSpec& spec, Rng& rng) {
    const int m = ds.class_count;
    if (!spec.class_counts.empty() &&
        static_cast<int>(spec.class_counts.size()) != m)
        throw std::invalid_argument("explicit class counts must list every class");

    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(m));
    for (int i = 0; i < ds.sample_count(); ++i)
        by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)] - 1)].push_back(i);

    Split split;
    for (int c = 0; c < m; ++c) {
        auto& members = by_class[static_cast<std::size_t>(c)];
        const int size = static_cast<int>(members.size());
        if (size < 2)
            throw std::invalid_argument("class " + std::to_string(c + 1) +
                                        " has fewer than 2 samples");
        int want = spec.class_counts.empty() ? spec.per_class
                                             : spec.class_counts[static_cast<std::size_t>(c)];
        if (want < 1)
            throw std::invalid_argument("requested training count must be >= 1");
        // Explicit counts are a hard protocol: they must fit before any capping.
        if (!spec.class_counts.empty() && want > size)
            throw std::invalid_argument("class " + std::to_string(c + 1) + " has " +
                                        std::to_string(size) + " samples, " +
                                        std::to_string(want) + " requested");
        if (spec.cap_rule)
            want = std::min(want, size / 2);
        if (want > size)
            throw std::invalid_argument("class " + std::to_string(c + 1) + " has " +
                                        std::to_string(size) + " samples, " +
                                        std::to_string(want) + " requested");

        // Partial Fisher-Yates over the class members, raster order to start.
        for (int k = 0; k < want; ++k) {
            const auto j = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(size - k)));
            std::swap(members[static_cast<std::size_t>(k)], members[static_cast<std::size_t>(j)]);
        }
        split.train_idx.insert(split.train_idx.end(), members.begin(), members.begin() + want);
        split.test_idx.insert(split.test_idx.end(), members.begin() + want, members.end());
    }
    std::sort(split.train_idx.begin(), split.train_idx.end());
    std::sort(split.test_idx.begin(), split.test_idx.end());
    return split;
}

}  // namespace esmlr
