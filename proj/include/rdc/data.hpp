#pragma once

// Datasets: CSV and raw-f64 I/O, Z-score normalization, the Gaussian noise
// protocol, image augmentation and the four-arc synthetic generator.

#include "numeric.hpp"
#include "rng.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rdc {

struct GridShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;

    std::size_t size() const { return height * width * channels; }
    bool operator==(const GridShape&) const = default;
};

struct Dataset {
    Matrix X;
    std::optional<std::vector<int>> labels;
    std::optional<GridShape> grid;
    std::string name;

    std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }

    void validate() const {
        if (labels && labels->size() != size())
            throw ShapeError("dataset '" + name + "': label count does not match row count");
        if (grid && grid->size() != dim())
            throw ShapeError("dataset '" + name + "': grid shape does not match feature count");
    }
};

inline Matrix gather_rows(const Matrix& X, const std::vector<std::size_t>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), X.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(idx[r]));
    return out;
}

// ---------------------------------------------------------------------------
// Normalization and noise

struct ZScore {
    Matrix X;
    RowVector mean;
    RowVector stddev;
};

/// Feature-wise (x - mu) / sigma with the population divisor N. Constant
/// columns are returned unchanged and report mean 0, stddev 1.
inline ZScore zscore_normalize(const Matrix& X) {
    if (X.rows() < 2) throw ShapeError("zscore_normalize needs at least two rows");
    const double n = static_cast<double>(X.rows());
    ZScore z;
    z.X = X;
    z.mean = RowVector::Zero(X.cols());
    z.stddev = RowVector::Ones(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double mu = X.col(j).sum() / n;
        const double var = (X.col(j).array() - mu).square().sum() / n;
        const double sd = std::sqrt(var);
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) continue;
        z.mean[j] = mu;
        z.stddev[j] = sd;
        z.X.col(j) = (X.col(j).array() - mu) / sd;
    }
    return z;
}

struct NoiseSpec {
    double sigma_p = 0.0;
    std::uint64_t seed = 0;
};

inline constexpr std::array<double, 6> kNoiseLevels{0.0, 0.05, 0.10, 0.15, 0.20, 0.25};

inline Matrix add_gaussian_noise(const Matrix& X, const NoiseSpec& spec) {
    if (spec.sigma_p < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
    if (spec.sigma_p == 0.0) return X;
    Engine e = stream(spec.seed, "noise");
    std::normal_distribution<double> nd(0.0, spec.sigma_p);
    Matrix out = X;
    for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] += nd(e);
    return out;
}

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentDraw {
    double shift_y = 0.0;  // pixels
    double shift_x = 0.0;
    double angle_deg = 0.0;
};

/// One image (row of h*w*c values, channel-last) shifted and rotated about its
/// centre. Nearest-neighbour resampling, zero fill outside the source.
inline RowVector transform_image(const RowVector& image, const GridShape& g, const AugmentDraw& d) {
    if (static_cast<std::size_t>(image.size()) != g.size()) throw ShapeError("image does not match grid shape");
    RowVector out = RowVector::Zero(image.size());
    const double th = d.angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(th), s = std::sin(th);
    const double cy = (static_cast<double>(g.height) - 1.0) / 2.0;
    const double cx = (static_cast<double>(g.width) - 1.0) / 2.0;
    const auto H = static_cast<long>(g.height), W = static_cast<long>(g.width);
    for (long y = 0; y < H; ++y) {
        for (long x = 0; x < W; ++x) {
            // inverse map: undo the shift, then rotate back by -theta
            const double py = static_cast<double>(y) - d.shift_y - cy;
            const double px = static_cast<double>(x) - d.shift_x - cx;
            const double sy = c * py - s * px + cy;
            const double sx = s * py + c * px + cx;
            const long iy = std::lround(sy), ix = std::lround(sx);
            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
            for (std::size_t ch = 0; ch < g.channels; ++ch) {
                const auto dst = (static_cast<std::size_t>(y) * g.width + static_cast<std::size_t>(x)) * g.channels + ch;
                const auto src = (static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)) * g.channels + ch;
                out[static_cast<Eigen::Index>(dst)] = image[static_cast<Eigen::Index>(src)];
            }
        }
    }
    return out;
}

/// Random per-sample shift in [0, 0.1]*h, [0, 0.1]*w and rotation in [0, 10] degrees.
inline Matrix augment(const Matrix& batch, const std::optional<GridShape>& grid, Engine& rng) {
    if (!grid) {
        std::cerr << "warning: augmentation requested without a grid shape; passing batch through\n";
        return batch;
    }
    Matrix out(batch.rows(), batch.cols());
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
        AugmentDraw d;
        d.shift_y = 0.1 * static_cast<double>(grid->height) * uniform01(rng);
        d.shift_x = 0.1 * static_cast<double>(grid->width) * uniform01(rng);
        d.angle_deg = 10.0 * uniform01(rng);
        out.row(i) = transform_image(batch.row(i), *grid, d);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic four-arc data

struct Arc {
    double cx, cy, radius, theta0, theta1;

    std::array<double, 2> at(double theta) const {
        return {cx + radius * std::cos(theta), cy + radius * std::sin(theta)};
    }
};

// Two moon pairs side by side. Within a pair the lower arc sits 0.4 below the
// upper arc's chord and is shifted right by one radius, so the arcs hook into
// each other without crossing. Unit radii.
inline constexpr double kLowerArcDy = -0.4;
inline constexpr double kPairOffsetX = 4.0;

inline std::array<Arc, 4> curved_cluster_arcs() {
    constexpr double pi = std::numbers::pi;
    return {Arc{0.0, 0.0, 1.0, 0.0, pi}, Arc{1.0, kLowerArcDy, 1.0, pi, 2.0 * pi},
            Arc{kPairOffsetX, 0.0, 1.0, 0.0, pi}, Arc{1.0 + kPairOffsetX, kLowerArcDy, 1.0, pi, 2.0 * pi}};
}

inline Dataset gen_curved_clusters(std::size_t n_per_cluster, double noise_scale, std::uint64_t seed) {
    if (n_per_cluster < 1) throw std::invalid_argument("n_per_cluster must be >= 1");
    if (noise_scale < 0.0) throw std::invalid_argument("noise_scale must be >= 0");
    Engine pos = stream(seed, "synth-position");
    Engine jit = stream(seed, "synth-jitter");
    std::normal_distribution<double> nd(0.0, 1.0);
    const auto arcs = curved_cluster_arcs();
    Dataset ds;
    ds.name = "curved-clusters";
    ds.X.resize(static_cast<Eigen::Index>(4 * n_per_cluster), 2);
    ds.labels.emplace();
    ds.labels->reserve(4 * n_per_cluster);
    Eigen::Index r = 0;
    for (int k = 0; k < 4; ++k) {
        const Arc& a = arcs[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < n_per_cluster; ++i, ++r) {
            const double t = a.theta0 + (a.theta1 - a.theta0) * uniform01(pos);
            auto p = a.at(t);
            const double jx = nd(jit), jy = nd(jit);
            ds.X(r, 0) = p[0] + noise_scale * jx;
            ds.X(r, 1) = p[1] + noise_scale * jy;
            ds.labels->push_back(k);
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// File formats
//
// CSV: one sample per line, comma separated. With has_labels the last column
// is an integer label. A first line that does not parse as numbers is
// treated as a header.
//
// raw-f64: <path> holds rows*cols little-endian IEEE-754 doubles, row-major.
// <path>.json is the sidecar:
//   {"format":"rdc-raw-f64-v1","rows":N,"cols":d,"name":..., "labels":[...]?, "grid":[h,w,c]?}

enum class DataFormat { Csv, RawF64 };

inline DataFormat data_format_from_string(const std::string& s) {
    if (s == "csv") return DataFormat::Csv;
    if (s == "raw" || s == "raw-f64" || s == "f64") return DataFormat::RawF64;
    throw std::invalid_argument("unknown dataset format '" + s + "' (expected csv or raw-f64)");
}

inline DataFormat guess_format(const std::filesystem::path& p) {
    return p.extension() == ".csv" ? DataFormat::Csv : DataFormat::RawF64;
}

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline bool parse_double(const std::string& s, double& v) {
    const char* b = s.c_str();
    while (*b == ' ' || *b == '\t') ++b;
    char* e = nullptr;
    v = std::strtod(b, &e);
    if (e == b) return false;
    while (*e == ' ' || *e == '\t' || *e == '\r') ++e;
    return *e == '\0';
}

inline std::string sidecar_path(const std::filesystem::path& p) { return p.string() + ".json"; }

}  // namespace detail

inline Dataset load_csv(const std::filesystem::path& path, bool has_labels) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    std::size_t lineno = 0, width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv(line);
        std::vector<double> vals(cells.size());
        bool ok = true;
        for (std::size_t c = 0; c < cells.size() && ok; ++c) ok = detail::parse_double(cells[c], vals[c]);
        if (!ok) {
            if (rows.empty() && lineno == 1) continue;  // header
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
        if (width == 0) width = vals.size();
        if (vals.size() != width)
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                              " columns, got " + std::to_string(vals.size()));
        if (has_labels) {
            const double lab = vals.back();
            if (lab != std::floor(lab))
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": label is not an integer");
            labels.push_back(static_cast<int>(lab));
            vals.pop_back();
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw FormatError(path.string() + ": no data rows");
    if (rows.front().empty()) throw FormatError(path.string() + ": no feature columns");
    Dataset ds;
    ds.name = path.stem().string();
    ds.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            ds.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    if (has_labels) ds.labels = std::move(labels);
    return ds;
}

inline void save_csv(const Dataset& ds, const std::filesystem::path& path, bool with_labels) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    char buf[64];
    for (Eigen::Index r = 0; r < ds.X.rows(); ++r) {
        for (Eigen::Index c = 0; c < ds.X.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.X(r, c));
            out << (c ? "," : "") << buf;
        }
        if (with_labels && ds.labels) out << "," << (*ds.labels)[static_cast<std::size_t>(r)];
        out << "\n";
    }
}

inline void save_raw(const Dataset& ds, const std::filesystem::path& path) {
    static_assert(std::endian::native == std::endian::little, "raw-f64 writer assumes a little-endian host");
    ds.validate();
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw FormatError("cannot write " + path.string());
        out.write(reinterpret_cast<const char*>(ds.X.data()), static_cast<std::streamsize>(ds.X.size() * sizeof(double)));
    }
    nlohmann::ordered_json meta;
    meta["format"] = "rdc-raw-f64-v1";
    meta["name"] = ds.name;
    meta["rows"] = ds.X.rows();
    meta["cols"] = ds.X.cols();
    if (ds.labels) meta["labels"] = *ds.labels;
    if (ds.grid) meta["grid"] = {ds.grid->height, ds.grid->width, ds.grid->channels};
    std::ofstream side(detail::sidecar_path(path));
    if (!side) throw FormatError("cannot write sidecar for " + path.string());
    side << meta.dump(2) << "\n";
}

inline Dataset load_raw(const std::filesystem::path& path) {
    std::ifstream side(detail::sidecar_path(path));
    if (!side) throw FormatError("missing sidecar " + detail::sidecar_path(path));
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(side);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad sidecar for " + path.string() + ": " + e.what());
    }
    if (meta.value("format", "") != "rdc-raw-f64-v1") throw FormatError("sidecar has unexpected format tag");
    const auto rows = meta.at("rows").get<std::size_t>();
    const auto cols = meta.at("cols").get<std::size_t>();
    Dataset ds;
    ds.name = meta.value("name", path.stem().string());
    ds.X.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != rows * cols * sizeof(double))
        throw FormatError(path.string() + ": size " + std::to_string(bytes) + " bytes does not match sidecar " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(ds.X.data()), static_cast<std::streamsize>(bytes));
    if (meta.contains("labels")) ds.labels = meta["labels"].get<std::vector<int>>();
    if (meta.contains("grid")) {
        const auto g = meta["grid"].get<std::vector<std::size_t>>();
        if (g.size() != 3) throw FormatError("grid must be [height, width, channels]");
        ds.grid = GridShape{g[0], g[1], g[2]};
    }
    ds.validate();
    return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path, DataFormat format, bool csv_labels = false) {
    if (!std::filesystem::exists(path)) throw FormatError("dataset not found: " + path.string());
    return format == DataFormat::Csv ? load_csv(path, csv_labels) : load_raw(path);
}

}  // namespace rdc
