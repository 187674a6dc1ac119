#include "hwnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace hwnn {

const char *norm_method_name(NormMethod m) {
    switch (m) {
    case NormMethod::None: return "none";
    case NormMethod::MinMax: return "minmax";
    case NormMethod::ZScore: return "zscore";
    }
    return "?";
}

NormMethod norm_method_from_name(const std::string &name) {
    if (name == "none") return NormMethod::None;
    if (name == "minmax") return NormMethod::MinMax;
    if (name == "zscore") return NormMethod::ZScore;
    throw ConfigError("unknown normalization method: " + name);
}

void Dataset::validate() const {
    if (features.rows() != labels.size())
        throw IoError("dataset " + name + ": feature/label count mismatch");
    if (!features.all_finite()) throw IoError("dataset " + name + ": non-finite features");
    for (int l : labels)
        if (l < 0 || l >= class_count)
            throw IoError("dataset " + name + ": label out of range");
}

namespace {

std::string trim(const std::string &s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool parse_double(const std::string &tok, double &out) {
    if (tok.empty()) return false;
    char *end = nullptr;
    out = std::strtod(tok.c_str(), &end);
    return end == tok.c_str() + tok.size() && std::isfinite(out);
}

} // namespace

Dataset load_delimited(const std::string &path, const DelimitedSchema &schema,
                       std::size_t *skipped_rows) {
    std::ifstream in(path);
    if (!in) throw IoError("load_delimited: cannot open " + path);

    std::vector<std::vector<double>> rows;
    std::vector<std::string> raw_labels;
    std::size_t skipped = 0;
    std::size_t expected_cols = 0;
    std::string line;
    bool first = true;
    std::size_t line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (first && schema.has_header) {
            first = false;
            continue;
        }
        first = false;
        line = trim(line);
        if (line.empty()) continue;

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, schema.delimiter)) fields.push_back(trim(tok));
        if (line.back() == schema.delimiter) fields.push_back("");

        if (expected_cols == 0) expected_cols = fields.size();
        std::size_t label_idx;
        if (schema.label_col < 0)
            label_idx = fields.size() + schema.label_col;
        else
            label_idx = static_cast<std::size_t>(schema.label_col);

        bool ok = fields.size() == expected_cols && label_idx < fields.size() &&
                  !fields[label_idx].empty();
        std::vector<double> feats;
        if (ok) {
            feats.reserve(fields.size() - 1);
            for (std::size_t i = 0; i < fields.size() && ok; ++i) {
                if (i == label_idx) continue;
                double v;
                ok = parse_double(fields[i], v);
                feats.push_back(v);
            }
        }
        if (!ok) {
            ++skipped;
            std::cerr << "warning: " << path << ": skipping malformed row at line " << line_no
                      << "\n";
            continue;
        }
        rows.push_back(std::move(feats));
        raw_labels.push_back(fields[label_idx]);
    }
    if (skipped_rows) *skipped_rows = skipped;
    if (rows.empty()) throw IoError("load_delimited: no usable rows in " + path);

    // Dense class ids in order of first appearance.
    std::map<std::string, int> label_ids;
    std::vector<int> labels;
    labels.reserve(raw_labels.size());
    for (const auto &s : raw_labels) {
        auto [it, inserted] = label_ids.try_emplace(s, static_cast<int>(label_ids.size()));
        labels.push_back(it->second);
    }

    Dataset ds;
    ds.name = path;
    ds.features = Matrix(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].begin(), rows[r].end(), ds.features.row_ptr(r));
    ds.labels = std::move(labels);
    ds.class_count = static_cast<int>(label_ids.size());
    ds.validate();
    return ds;
}

namespace {

std::uint32_t read_be32(std::ifstream &in, const std::string &path, std::size_t offset) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char *>(buf), 4))
        throw IoError("load_idx: " + path + " truncated at offset " + std::to_string(offset));
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

} // namespace

Dataset load_idx(const std::string &images_path, const std::string &labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("load_idx: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("load_idx: cannot open " + labels_path);

    const std::uint32_t img_magic = read_be32(img, images_path, 0);
    if (img_magic != 0x00000803u)
        throw IoError("load_idx: bad image magic in " + images_path + " (got " +
                      std::to_string(img_magic) + ")");
    const std::uint32_t n_images = read_be32(img, images_path, 4);
    const std::uint32_t rows = read_be32(img, images_path, 8);
    const std::uint32_t cols = read_be32(img, images_path, 12);

    const std::uint32_t lab_magic = read_be32(lab, labels_path, 0);
    if (lab_magic != 0x00000801u)
        throw IoError("load_idx: bad label magic in " + labels_path + " (got " +
                      std::to_string(lab_magic) + ")");
    const std::uint32_t n_labels = read_be32(lab, labels_path, 4);
    if (n_images != n_labels)
        throw IoError("load_idx: image count " + std::to_string(n_images) +
                      " != label count " + std::to_string(n_labels));

    const std::size_t pixels = std::size_t(rows) * cols;
    Dataset ds;
    ds.name = images_path;
    ds.features = Matrix(n_images, pixels);
    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(pixels)))
            throw IoError("load_idx: " + images_path + " truncated at offset " +
                          std::to_string(16 + std::size_t(i) * pixels));
        double *row = ds.features.row_ptr(i);
        for (std::size_t p = 0; p < pixels; ++p) row[p] = buf[p] / 255.0;
    }
    ds.labels.resize(n_images);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        char c;
        if (!lab.read(&c, 1))
            throw IoError("load_idx: " + labels_path + " truncated at offset " +
                          std::to_string(8 + i));
        ds.labels[i] = static_cast<unsigned char>(c);
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.class_count = max_label + 1;
    ds.validate();
    return ds;
}

Dataset subset(const Dataset &data, const std::vector<std::size_t> &rows) {
    Dataset out;
    out.name = data.name;
    out.class_count = data.class_count;
    out.stats = data.stats;
    out.features = Matrix(rows.size(), data.dims());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(data.features.row_ptr(rows[i]), data.features.row_ptr(rows[i]) + data.dims(),
                  out.features.row_ptr(i));
        out.labels.push_back(data.labels[rows[i]]);
    }
    return out;
}

namespace {

NormalizationStats fit_stats(const Dataset &data, NormMethod method) {
    NormalizationStats st;
    st.method = method;
    if (method == NormMethod::None) return st;
    const std::size_t d = data.dims();
    const std::size_t n = data.size();
    st.a.resize(d);
    st.b.resize(d);
    if (method == NormMethod::MinMax) {
        for (std::size_t c = 0; c < d; ++c) {
            double lo = data.features(0, c), hi = lo;
            for (std::size_t r = 1; r < n; ++r) {
                lo = std::min(lo, data.features(r, c));
                hi = std::max(hi, data.features(r, c));
            }
            st.a[c] = lo;
            st.b[c] = hi;
        }
    } else {
        for (std::size_t c = 0; c < d; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < n; ++r) mean += data.features(r, c);
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double x = data.features(r, c) - mean;
                var += x * x;
            }
            st.a[c] = mean;
            st.b[c] = std::sqrt(var / static_cast<double>(n));
        }
    }
    return st;
}

} // namespace

Dataset apply_stats(const Dataset &data, const NormalizationStats &stats) {
    if (stats.method == NormMethod::None) {
        Dataset out = data;
        out.stats = stats;
        return out;
    }
    if (stats.a.size() != data.dims())
        throw IoError("apply_stats: stats dimension mismatch for " + data.name);
    Dataset out = data;
    out.stats = stats;
    bool warned = false;
    for (std::size_t c = 0; c < data.dims(); ++c) {
        const bool degenerate = (stats.method == NormMethod::MinMax) ? stats.b[c] == stats.a[c]
                                                                     : stats.b[c] == 0.0;
        if (degenerate) {
            if (!warned) {
                std::cerr << "warning: " << data.name
                          << ": constant feature column(s) left unnormalized\n";
                warned = true;
            }
            continue;
        }
        for (std::size_t r = 0; r < data.size(); ++r) {
            double &x = out.features(r, c);
            x = (stats.method == NormMethod::MinMax) ? (x - stats.a[c]) / (stats.b[c] - stats.a[c])
                                                     : (x - stats.a[c]) / stats.b[c];
        }
    }
    return out;
}

Dataset normalize(const Dataset &data, NormMethod method) {
    return apply_stats(data, fit_stats(data, method));
}

std::pair<Dataset, Dataset> split(const Dataset &data, const SplitSpec &spec, NormMethod method) {
    if (data.size() < 2) throw ConfigError("split: need at least 2 samples");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("split: train_fraction must be in (0,1)");

    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(spec.seed);
    rng.shuffle(idx);

    const std::size_t n_train =
        static_cast<std::size_t>(spec.train_fraction * static_cast<double>(data.size()));
    if (n_train == 0 || n_train == data.size())
        throw ConfigError("split: train_fraction yields an empty side");

    Dataset train = subset(data, {idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train)});
    Dataset test = subset(data, {idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end()});
    const NormalizationStats st = fit_stats(train, method);
    return {apply_stats(train, st), apply_stats(test, st)};
}

Matrix one_hot(const std::vector<int> &labels, int class_count) {
    Matrix t(labels.size(), static_cast<std::size_t>(class_count));
    for (std::size_t r = 0; r < labels.size(); ++r) t(r, static_cast<std::size_t>(labels[r])) = 1.0;
    return t;
}

Matrix targets_for(const std::vector<int> &labels, int class_count, std::size_t output_width) {
    if (output_width == 1 && class_count == 2) {
        Matrix t(labels.size(), 1);
        for (std::size_t r = 0; r < labels.size(); ++r) t(r, 0) = labels[r];
        return t;
    }
    if (static_cast<std::size_t>(class_count) != output_width)
        throw std::invalid_argument("targets_for: output width " + std::to_string(output_width) +
                                    " does not match class count " + std::to_string(class_count));
    return one_hot(labels, class_count);
}

namespace {

constexpr char kCacheMagic[8] = {'H', 'W', 'N', 'N', 'D', 'S', '1', '\n'};

template <typename T>
void write_pod(std::ofstream &out, const T &v) {
    out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream &in, T &v, const std::string &path) {
    if (!in.read(reinterpret_cast<char *>(&v), sizeof(T)))
        throw IoError("load_cache: truncated " + path);
}

} // namespace

// Layout (little-endian): magic, u32 name length + bytes, u64 rows, u64 cols,
// i32 class_count, u8 method, u8 has_stats, stats arrays, features, labels.
void save_cache(const Dataset &data, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_cache: cannot open " + path);
    out.write(kCacheMagic, sizeof(kCacheMagic));
    const std::uint32_t name_len = static_cast<std::uint32_t>(data.name.size());
    write_pod(out, name_len);
    out.write(data.name.data(), name_len);
    write_pod(out, static_cast<std::uint64_t>(data.features.rows()));
    write_pod(out, static_cast<std::uint64_t>(data.features.cols()));
    write_pod(out, static_cast<std::int32_t>(data.class_count));
    write_pod(out, static_cast<std::uint8_t>(data.stats.method));
    const std::uint8_t has_stats = data.stats.a.empty() ? 0 : 1;
    write_pod(out, has_stats);
    if (has_stats) {
        out.write(reinterpret_cast<const char *>(data.stats.a.data()),
                  static_cast<std::streamsize>(data.stats.a.size() * sizeof(double)));
        out.write(reinterpret_cast<const char *>(data.stats.b.data()),
                  static_cast<std::streamsize>(data.stats.b.size() * sizeof(double)));
    }
    out.write(reinterpret_cast<const char *>(data.features.data().data()),
              static_cast<std::streamsize>(data.features.size() * sizeof(double)));
    std::vector<std::int32_t> labels(data.labels.begin(), data.labels.end());
    out.write(reinterpret_cast<const char *>(labels.data()),
              static_cast<std::streamsize>(labels.size() * sizeof(std::int32_t)));
    if (!out) throw IoError("save_cache: write failed for " + path);
}

Dataset load_cache(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_cache: cannot open " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCacheMagic, 8) != 0)
        throw IoError("load_cache: bad magic in " + path);
    std::uint32_t name_len;
    read_pod(in, name_len, path);
    Dataset ds;
    ds.name.resize(name_len);
    if (name_len && !in.read(ds.name.data(), name_len)) throw IoError("load_cache: truncated " + path);
    std::uint64_t rows, cols;
    read_pod(in, rows, path);
    read_pod(in, cols, path);
    std::int32_t class_count;
    read_pod(in, class_count, path);
    ds.class_count = class_count;
    std::uint8_t method, has_stats;
    read_pod(in, method, path);
    read_pod(in, has_stats, path);
    ds.stats.method = static_cast<NormMethod>(method);
    if (has_stats) {
        ds.stats.a.resize(cols);
        ds.stats.b.resize(cols);
        if (!in.read(reinterpret_cast<char *>(ds.stats.a.data()),
                     static_cast<std::streamsize>(cols * sizeof(double))) ||
            !in.read(reinterpret_cast<char *>(ds.stats.b.data()),
                     static_cast<std::streamsize>(cols * sizeof(double))))
            throw IoError("load_cache: truncated " + path);
    }
    ds.features = Matrix(rows, cols);
    if (!in.read(reinterpret_cast<char *>(ds.features.data().data()),
                 static_cast<std::streamsize>(rows * cols * sizeof(double))))
        throw IoError("load_cache: truncated " + path);
    std::vector<std::int32_t> labels(rows);
    if (rows && !in.read(reinterpret_cast<char *>(labels.data()),
                         static_cast<std::streamsize>(rows * sizeof(std::int32_t))))
        throw IoError("load_cache: truncated " + path);
    ds.labels.assign(labels.begin(), labels.end());
    ds.validate();
    return ds;
}

} // namespace hwnn
