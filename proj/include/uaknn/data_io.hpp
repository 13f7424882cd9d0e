#pragma once

// CSV ingestion and output, dataset statistics, and the seeded synthetic
// clustered-LDL generator.
//
// CSV layout: f0..f{N-1},y0..y{L-1}, optional header row, '.' decimal point.
// Error messages cite 1-based file line and column numbers.

#include "core.hpp"
#include "metrics.hpp"
#include "rng.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace uaknn {

struct DatasetManifest {
    std::filesystem::path path;
    std::size_t n_features = 0;
    /// When unset, every column after the features is a label.
    std::optional<std::size_t> n_labels;
    bool has_header = false;
    char delimiter = ',';
    bool zscore = false;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char delimiter)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(delimiter, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline double parse_number(std::string_view field, std::size_t line, std::size_t column)
{
    field = trim(field);
    if (!field.empty() && field.front() == '+') {
        field.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
        throw Error(Errc::parse, "line " + std::to_string(line) + ", column "
                                     + std::to_string(column) + ": cannot parse '"
                                     + std::string(field) + "' as a number");
    }
    if (!std::isfinite(value)) {
        throw Error(Errc::parse, "line " + std::to_string(line) + ", column "
                                     + std::to_string(column) + ": value is not finite");
    }
    return value;
}

/// Reads every data row of a delimited numeric file.
inline std::vector<std::pair<std::size_t, std::vector<double>>>
read_numeric_rows(const std::filesystem::path& path, bool has_header, char delimiter,
                  std::size_t expected_columns)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::io, "cannot open " + path.string());
    }
    std::vector<std::pair<std::size_t, std::vector<double>>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && has_header) {
            continue;
        }
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_fields(line, delimiter);
        if (fields.size() != expected_columns) {
            throw Error(Errc::parse, "line " + std::to_string(line_no) + ": expected "
                                         + std::to_string(expected_columns) + " columns, found "
                                         + std::to_string(fields.size()));
        }
        std::vector<double> values(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            values[c] = parse_number(fields[c], line_no, c + 1);
        }
        rows.emplace_back(line_no, std::move(values));
    }
    if (in.bad()) {
        throw Error(Errc::io, "read error on " + path.string());
    }
    return rows;
}

inline std::size_t count_columns(const std::filesystem::path& path, char delimiter)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::io, "cannot open " + path.string());
    }
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) {
            return split_fields(line, delimiter).size();
        }
    }
    throw Error(Errc::parse, path.string() + " is empty");
}

/// Shortest representation that parses back to the same double.
inline void write_double(std::ostream& out, double v)
{
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    out.write(buf, ptr - buf);
}

} // namespace detail

/// Standardizes every feature column to zero mean and unit variance;
/// constant columns are only centred.
inline std::vector<FeatureVector> zscore_features(const std::vector<FeatureVector>& rows)
{
    if (rows.empty()) {
        return {};
    }
    const std::size_t n = rows.front().size();
    std::vector<double> mean(n, 0.0);
    std::vector<double> var(n, 0.0);
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < n; ++j) {
            mean[j] += r[j];
        }
    }
    for (double& m : mean) {
        m /= static_cast<double>(rows.size());
    }
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < n; ++j) {
            var[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
        }
    }
    std::vector<FeatureVector> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        std::vector<double> v(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double sd = std::sqrt(var[j] / static_cast<double>(rows.size()));
            v[j] = sd > 0.0 ? (r[j] - mean[j]) / sd : r[j] - mean[j];
        }
        out.emplace_back(std::move(v));
    }
    return out;
}

inline LdlDataset load_csv(const DatasetManifest& manifest)
{
    if (manifest.n_features == 0) {
        throw Error(Errc::bad_config, "n_features must be >= 1");
    }
    const std::size_t columns = manifest.n_labels
                                    ? manifest.n_features + *manifest.n_labels
                                    : detail::count_columns(manifest.path, manifest.delimiter);
    if (columns < manifest.n_features + 2) {
        throw Error(Errc::parse, manifest.path.string() + ": " + std::to_string(columns)
                                     + " columns leave fewer than 2 label columns after "
                                     + std::to_string(manifest.n_features) + " features");
    }
    const auto rows = detail::read_numeric_rows(manifest.path, manifest.has_header,
                                                manifest.delimiter, columns);
    if (rows.empty()) {
        throw Error(Errc::parse, manifest.path.string() + " has no data rows");
    }
    std::vector<FeatureVector> features;
    std::vector<LabelDistribution> labels;
    features.reserve(rows.size());
    labels.reserve(rows.size());
    for (const auto& [line, values] : rows) {
        std::vector<double> x(values.begin(),
                              values.begin() + static_cast<std::ptrdiff_t>(manifest.n_features));
        std::vector<double> y(values.begin() + static_cast<std::ptrdiff_t>(manifest.n_features),
                              values.end());
        FeatureVector fv(std::move(x));
        if (fv.is_zero() && !manifest.zscore) {
            throw Error(Errc::zero_feature_vector,
                        "line " + std::to_string(line) + ": all features are zero");
        }
        try {
            labels.push_back(LabelDistribution::validate(std::move(y)));
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line) + ": " + e.detail());
        }
        features.push_back(std::move(fv));
    }
    if (manifest.zscore) {
        features = zscore_features(features);
        for (std::size_t i = 0; i < features.size(); ++i) {
            if (features[i].is_zero()) {
                throw Error(Errc::zero_feature_vector,
                            "line " + std::to_string(rows[i].first)
                                + ": all features are zero after standardization");
            }
        }
    }
    return LdlDataset(std::move(features), std::move(labels),
                      manifest.path.stem().string());
}

/// Feature-only rows (queries for prediction).
inline std::vector<FeatureVector> load_features_csv(const std::filesystem::path& path,
                                                    std::size_t n_features, bool has_header,
                                                    char delimiter = ',')
{
    const auto rows = detail::read_numeric_rows(path, has_header, delimiter, n_features);
    std::vector<FeatureVector> out;
    out.reserve(rows.size());
    for (const auto& [line, values] : rows) {
        (void)line;
        out.emplace_back(values);
    }
    return out;
}

inline void write_csv(std::ostream& out, const LdlDataset& data, bool header = true,
                      char delimiter = ',')
{
    const std::size_t n = data.feature_count();
    const std::size_t l = data.label_count();
    if (header) {
        for (std::size_t j = 0; j < n; ++j) {
            out << 'f' << j << delimiter;
        }
        for (std::size_t j = 0; j < l; ++j) {
            out << 'y' << j << (j + 1 < l ? std::string(1, delimiter) : "\n");
        }
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            detail::write_double(out, data.features(i)[j]);
            out << delimiter;
        }
        for (std::size_t j = 0; j < l; ++j) {
            detail::write_double(out, data.labels(i)[j]);
            out << (j + 1 < l ? delimiter : '\n');
        }
    }
}

inline void save_csv(const LdlDataset& data, const std::filesystem::path& path,
                     bool header = true, char delimiter = ',')
{
    std::ofstream out(path);
    if (!out) {
        throw Error(Errc::io, "cannot write " + path.string());
    }
    write_csv(out, data, header, delimiter);
    if (!out) {
        throw Error(Errc::io, "write failed for " + path.string());
    }
}

/// One distribution per row, columns y0..y{L-1}.
inline void write_predictions_csv(std::ostream& out, std::span<const LabelDistribution> preds,
                                  char delimiter = ',')
{
    if (preds.empty()) {
        return;
    }
    const std::size_t l = preds.front().size();
    for (std::size_t j = 0; j < l; ++j) {
        out << 'y' << j << (j + 1 < l ? delimiter : '\n');
    }
    for (const auto& p : preds) {
        for (std::size_t j = 0; j < l; ++j) {
            detail::write_double(out, p[j]);
            out << (j + 1 < l ? delimiter : '\n');
        }
    }
}

struct DatasetStats {
    std::size_t examples = 0;
    std::size_t features = 0;
    std::size_t labels = 0;
    std::vector<double> mean_degree;
    std::vector<std::size_t> prototype_counts;
    double mean_entropy = 0.0;
};

inline DatasetStats dataset_stats(const LdlDataset& data)
{
    DatasetStats s;
    s.examples = data.size();
    s.features = data.feature_count();
    s.labels = data.label_count();
    s.mean_degree.assign(s.labels, 0.0);
    s.prototype_counts.assign(s.labels, 0);
    for (const auto& d : data.all_labels()) {
        for (std::size_t j = 0; j < s.labels; ++j) {
            s.mean_degree[j] += d[j];
        }
        ++s.prototype_counts[d.argmax()];
        s.mean_entropy += shannon_entropy(d);
    }
    for (double& m : s.mean_degree) {
        m /= static_cast<double>(s.examples);
    }
    s.mean_entropy /= static_cast<double>(s.examples);
    return s;
}

struct SyntheticSpec {
    std::size_t m = 1000;
    std::size_t n = 16;
    std::size_t l = 4;
    /// Per-coordinate standard deviation of the feature noise.
    double spread = 0.05;
    /// Dirichlet parameter on the generating cluster's label (1 elsewhere).
    double concentration = 8.0;
    std::uint64_t seed = 0;
    std::string name = "synthetic";
};

namespace detail {

/// Unit-norm anchors: e_k for k < N; for later rounds r = k / N the
/// normalized sum e_{k mod N} + e_{(k + r) mod N}.
inline std::vector<std::vector<double>> cluster_centers(std::size_t l, std::size_t n)
{
    std::vector<std::vector<double>> centers(l, std::vector<double>(n, 0.0));
    for (std::size_t k = 0; k < l; ++k) {
        const std::size_t round = k / n;
        if (round == 0) {
            centers[k][k] = 1.0;
        } else {
            centers[k][k % n] += 1.0 / std::sqrt(2.0);
            centers[k][(k + round) % n] += 1.0 / std::sqrt(2.0);
        }
    }
    return centers;
}

} // namespace detail

inline LdlDataset generate_synthetic(const SyntheticSpec& spec)
{
    if (spec.m < 1 || spec.n < 1 || spec.l < 2 || !(spec.spread >= 0.0)
        || !(spec.concentration >= 1.0) || !std::isfinite(spec.concentration)) {
        throw Error(Errc::bad_spec, "synthetic spec needs m >= 1, n >= 1, l >= 2, spread >= 0, "
                                    "concentration >= 1");
    }
    if (spec.l > spec.n * spec.n) {
        throw Error(Errc::bad_spec, "at most n^2 distinct cluster anchors are available");
    }
    const auto centers = detail::cluster_centers(spec.l, spec.n);
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < spec.l; ++a) {
        for (std::size_t b = a + 1; b < spec.l; ++b) {
            double acc = 0.0;
            for (std::size_t j = 0; j < spec.n; ++j) {
                acc += (centers[a][j] - centers[b][j]) * (centers[a][j] - centers[b][j]);
            }
            min_gap = std::min(min_gap, std::sqrt(acc));
        }
    }
    if (!(min_gap > 0.0) || min_gap < 4.0 * spec.spread) {
        throw Error(Errc::bad_spec, "cluster anchors closer than 4 x spread");
    }

    std::vector<FeatureVector> features;
    std::vector<LabelDistribution> labels;
    features.reserve(spec.m);
    labels.reserve(spec.m);
    for (std::size_t i = 0; i < spec.m; ++i) {
        Rng rng(spec.seed, i);
        const auto cluster = static_cast<std::size_t>(
            (static_cast<unsigned __int128>(spec.l) * rng.next_u64()) >> 64);
        std::vector<double> x;
        do {
            x = centers[cluster];
            for (double& v : x) {
                v += spec.spread * rng.standard_normal();
            }
        } while (std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; }));

        std::vector<double> y(spec.l);
        double sum = 0.0;
        for (std::size_t j = 0; j < spec.l; ++j) {
            y[j] = gamma_draw(rng, j == cluster ? spec.concentration : 1.0);
            sum += y[j];
        }
        for (double& v : y) {
            v /= sum;
        }
        features.emplace_back(std::move(x));
        labels.push_back(LabelDistribution::validate(std::move(y)));
    }
    return LdlDataset(std::move(features), std::move(labels), spec.name);
}

/// Shapes of two benchmark datasets, for desk-scale runs.
inline SyntheticSpec movie_like_spec(std::uint64_t seed = 0)
{
    return {.m = 7755, .n = 1869, .l = 5, .spread = 0.05, .concentration = 2.0, .seed = seed,
            .name = "movie-like"};
}

inline SyntheticSpec sbu_like_spec(std::uint64_t seed = 0)
{
    return {.m = 2500, .n = 243, .l = 6, .spread = 0.05, .concentration = 2.0, .seed = seed,
            .name = "sbu-like"};
}

} // namespace uaknn
