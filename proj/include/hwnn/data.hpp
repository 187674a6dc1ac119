#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hwnn/errors.hpp"
#include "hwnn/linalg.hpp"

namespace hwnn {

enum class NormMethod { None, MinMax, ZScore };

const char *norm_method_name(NormMethod m);
NormMethod norm_method_from_name(const std::string &name);

// Per-feature statistics fitted on a training split. For MinMax `a` holds the
// minima and `b` the maxima; for ZScore `a` holds means and `b` standard
// deviations.
struct NormalizationStats {
    NormMethod method = NormMethod::None;
    std::vector<double> a;
    std::vector<double> b;
};

struct Dataset {
    std::string name;
    Matrix features; // samples x dims
    std::vector<int> labels;
    int class_count = 0;
    NormalizationStats stats;

    std::size_t size() const { return features.rows(); }
    std::size_t dims() const { return features.cols(); }
    void validate() const;
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

struct DelimitedSchema {
    char delimiter = ',';
    bool has_header = false;
    int label_col = -1; // negative counts from the end, -1 = last column
};

// Delimited text loader. Rows with missing or non-numeric feature fields are
// skipped and counted; label values are mapped to dense ids in order of first
// appearance.
Dataset load_delimited(const std::string &path, const DelimitedSchema &schema,
                       std::size_t *skipped_rows = nullptr);

// IDX (big-endian) image/label pair. Pixels are flattened and scaled to [0,1].
Dataset load_idx(const std::string &images_path, const std::string &labels_path);

// Seeded shuffle followed by a prefix split. Normalization stats are fitted on
// the train side and applied to both.
std::pair<Dataset, Dataset> split(const Dataset &data, const SplitSpec &spec,
                                  NormMethod method = NormMethod::MinMax);

// Fit stats on the dataset itself and transform it. Constant features are left
// untouched (with a warning to stderr).
Dataset normalize(const Dataset &data, NormMethod method);
// Transform with stats fitted elsewhere (train-split stats onto a test split).
Dataset apply_stats(const Dataset &data, const NormalizationStats &stats);

Dataset subset(const Dataset &data, const std::vector<std::size_t> &rows);

Matrix one_hot(const std::vector<int> &labels, int class_count);

// Targets for an output layer: one-hot columns, except that a two-class task
// driving a single output unit gets the label as one column of 0/1.
Matrix targets_for(const std::vector<int> &labels, int class_count, std::size_t output_width);

// Versioned little-endian binary cache, bit-exact round trip.
void save_cache(const Dataset &data, const std::string &path);
Dataset load_cache(const std::string &path);

} // namespace hwnn
