#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ulab/common.hpp"

namespace ulab::data {

// Feature matrix in [0,1]^{n x d} with integer class labels.
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    int num_classes = 0;
    std::string name;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
};

enum class SplitMode { sample, class_mode };

// Index partition of a dataset into retain/forget training parts and a
// held-out test set. retain + forget always cover the training indices.
struct UnlearnTask {
    Dataset dataset;
    std::vector<int> retain_idx;
    std::vector<int> forget_idx;
    std::vector<int> test_idx;
    SplitMode mode = SplitMode::sample;
    std::optional<int> forget_class;
    double forget_fraction = 0.0;

    std::vector<int> train_idx() const;
};

Dataset gen_blobs(int num_classes, int per_class, int dim, double spread, std::uint64_t seed);

// Two interleaved half-circles with Gaussian noise, 2 classes in 2-D.
Dataset gen_moons(int per_class, double noise, std::uint64_t seed);

Dataset load_csv(const std::string& path);

// Min-max normalizes each column into [0,1]; constant columns map to 0.
void normalize_columns(Matrix& features);

UnlearnTask split_unlearn(Dataset dataset, SplitMode mode, int forget_class, double forget_fraction,
                          double test_fraction, std::uint64_t seed);

// Gathers the rows/labels selected by indices into a contiguous batch.
Matrix gather_rows(const Matrix& features, std::span<const int> indices);
std::vector<int> gather_labels(std::span<const int> labels_in, std::span<const int> indices);

}  // namespace ulab::data
