#include "ulab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ulab/rng.hpp"

namespace ulab::data {

std::vector<int> UnlearnTask::train_idx() const {
    std::vector<int> idx;
    idx.reserve(retain_idx.size() + forget_idx.size());
    idx.insert(idx.end(), retain_idx.begin(), retain_idx.end());
    idx.insert(idx.end(), forget_idx.begin(), forget_idx.end());
    std::sort(idx.begin(), idx.end());
    return idx;
}

void normalize_columns(Matrix& features) {
    for (std::size_t j = 0; j < features.cols(); ++j) {
        double lo = features(0, j);
        double hi = features(0, j);
        for (std::size_t i = 1; i < features.rows(); ++i) {
            lo = std::min(lo, features(i, j));
            hi = std::max(hi, features(i, j));
        }
        const double range = hi - lo;
        if (range > 0.0) {
            const double inv = 1.0 / range;
            for (std::size_t i = 0; i < features.rows(); ++i) {
                features(i, j) = (features(i, j) - lo) * inv;
            }
        } else {
            for (std::size_t i = 0; i < features.rows(); ++i) {
                features(i, j) = 0.0;
            }
        }
    }
}

Dataset gen_blobs(int num_classes, int per_class, int dim, double spread, std::uint64_t seed) {
    if (num_classes < 2 || per_class < 2 || dim < 1 || !(spread > 0.0)) {
        throw ConfigError("gen_blobs: need num_classes >= 2, per_class >= 2, dim >= 1, spread > 0");
    }
    Rng rng(seed);
    const std::size_t n = static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(per_class);

    // Distinct cluster centers in the unit cube, then Gaussian scatter.
    Matrix centers(static_cast<std::size_t>(num_classes), static_cast<std::size_t>(dim));
    for (double& v : centers.flat()) {
        v = rng.next_unit();
    }

    Dataset ds;
    ds.features = Matrix(n, static_cast<std::size_t>(dim));
    ds.labels.resize(n);
    ds.num_classes = num_classes;
    ds.name = "blobs";
    std::size_t row = 0;
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < per_class; ++i, ++row) {
            ds.labels[row] = c;
            auto x = ds.features.row(row);
            const auto mu = centers.row(static_cast<std::size_t>(c));
            for (int j = 0; j < dim; ++j) {
                x[static_cast<std::size_t>(j)] = mu[static_cast<std::size_t>(j)] + spread * rng.next_normal();
            }
        }
    }
    normalize_columns(ds.features);
    return ds;
}

Dataset gen_moons(int per_class, double noise, std::uint64_t seed) {
    if (per_class < 2 || noise < 0.0) {
        throw ConfigError("gen_moons: need per_class >= 2 and noise >= 0");
    }
    Rng rng(seed);
    const double pi = 3.14159265358979323846;
    Dataset ds;
    ds.features = Matrix(2 * static_cast<std::size_t>(per_class), 2);
    ds.labels.resize(2 * static_cast<std::size_t>(per_class));
    ds.num_classes = 2;
    ds.name = "moons";
    for (int i = 0; i < per_class; ++i) {
        const double t = pi * static_cast<double>(i) / static_cast<double>(per_class - 1);
        auto outer = ds.features.row(static_cast<std::size_t>(i));
        outer[0] = std::cos(t) + noise * rng.next_normal();
        outer[1] = std::sin(t) + noise * rng.next_normal();
        ds.labels[static_cast<std::size_t>(i)] = 0;
        auto inner = ds.features.row(static_cast<std::size_t>(per_class + i));
        inner[0] = 1.0 - std::cos(t) + noise * rng.next_normal();
        inner[1] = 0.5 - std::sin(t) + noise * rng.next_normal();
        ds.labels[static_cast<std::size_t>(per_class + i)] = 1;
    }
    normalize_columns(ds.features);
    return ds;
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("load_csv: cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("load_csv: empty file '" + path + "'");
    }
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::size_t expected_cols = 0;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<double> cells;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t consumed = 0;
            double value = 0.0;
            try {
                value = std::stod(cell, &consumed);
            } catch (const std::exception&) {
                throw ParseError("load_csv: non-numeric cell at row " + std::to_string(line_no));
            }
            while (consumed < cell.size() && std::isspace(static_cast<unsigned char>(cell[consumed]))) {
                ++consumed;
            }
            if (consumed != cell.size()) {
                throw ParseError("load_csv: non-numeric cell at row " + std::to_string(line_no));
            }
            cells.push_back(value);
        }
        if (cells.size() < 2) {
            throw ParseError("load_csv: missing column at row " + std::to_string(line_no));
        }
        if (expected_cols == 0) {
            expected_cols = cells.size();
        } else if (cells.size() != expected_cols) {
            throw ParseError("load_csv: missing column at row " + std::to_string(line_no));
        }
        const double label_value = cells.back();
        cells.pop_back();
        if (label_value != std::floor(label_value) || label_value < 0.0) {
            throw ParseError("load_csv: label must be a non-negative integer at row " + std::to_string(line_no));
        }
        if (label_value >= 1000.0) {
            throw ParseError("load_csv: label out of range at row " + std::to_string(line_no));
        }
        labels.push_back(static_cast<int>(label_value));
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) {
        throw ParseError("load_csv: no data rows in '" + path + "'");
    }

    Dataset ds;
    ds.features = Matrix(rows.size(), expected_cols - 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].begin(), rows[i].end(), ds.features.row(i).begin());
    }
    ds.labels = std::move(labels);
    ds.num_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    if (ds.num_classes < 2) {
        throw ParseError("load_csv: need at least 2 classes in '" + path + "'");
    }
    ds.name = path;
    normalize_columns(ds.features);
    return ds;
}

UnlearnTask split_unlearn(Dataset dataset, SplitMode mode, int forget_class, double forget_fraction,
                          double test_fraction, std::uint64_t seed) {
    if (!(forget_fraction > 0.0) || forget_fraction > 1.0 || !(test_fraction > 0.0) || test_fraction > 1.0) {
        throw ConfigError("split_unlearn: fractions must lie in (0,1]");
    }
    if (forget_class < 0 || forget_class >= dataset.num_classes) {
        throw ConfigError("split_unlearn: forget_class " + std::to_string(forget_class) + " out of range");
    }
    const std::size_t n = dataset.size();

    // Class-stratified test split.
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(dataset.num_classes));
    for (std::size_t i = 0; i < n; ++i) {
        by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(static_cast<int>(i));
    }
    if (by_class[static_cast<std::size_t>(forget_class)].empty()) {
        throw ConfigError("split_unlearn: forget_class absent from data");
    }

    Rng test_rng(Rng::mix(seed, 0x7e57));
    std::vector<char> is_test(n, 0);
    for (auto& members : by_class) {
        test_rng.shuffle(members);
        const std::size_t take =
            static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(members.size()) + 0.5));
        for (std::size_t i = 0; i < take && i < members.size(); ++i) {
            is_test[static_cast<std::size_t>(members[i])] = 1;
        }
    }

    std::vector<int> forget_pool;
    std::vector<int> train_all;
    for (std::size_t i = 0; i < n; ++i) {
        if (is_test[i]) {
            continue;
        }
        train_all.push_back(static_cast<int>(i));
        if (dataset.labels[i] == forget_class) {
            forget_pool.push_back(static_cast<int>(i));
        }
    }
    if (forget_pool.empty()) {
        throw ConfigError("split_unlearn: forget_class has no training samples after the test split");
    }

    UnlearnTask task;
    task.mode = mode;
    task.forget_class = forget_class;
    task.forget_fraction = mode == SplitMode::class_mode ? 1.0 : forget_fraction;

    Rng forget_rng(Rng::mix(seed, 0xf043));
    if (mode == SplitMode::class_mode) {
        task.forget_idx = forget_pool;
    } else {
        forget_rng.shuffle(forget_pool);
        const std::size_t take = static_cast<std::size_t>(
            std::floor(forget_fraction * static_cast<double>(forget_pool.size()) + 0.5));
        task.forget_idx.assign(forget_pool.begin(), forget_pool.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(task.forget_idx.begin(), task.forget_idx.end());

    std::vector<char> is_forget(n, 0);
    for (int i : task.forget_idx) {
        is_forget[static_cast<std::size_t>(i)] = 1;
    }
    for (int i : train_all) {
        if (!is_forget[static_cast<std::size_t>(i)]) {
            task.retain_idx.push_back(i);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (is_test[i]) {
            task.test_idx.push_back(static_cast<int>(i));
        }
    }
    task.dataset = std::move(dataset);
    return task;
}

Matrix gather_rows(const Matrix& features, std::span<const int> indices) {
    Matrix out(indices.size(), features.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = features.row(static_cast<std::size_t>(indices[i]));
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

std::vector<int> gather_labels(std::span<const int> labels_in, std::span<const int> indices) {
    std::vector<int> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out[i] = labels_in[static_cast<std::size_t>(indices[i])];
    }
    return out;
}

}  // namespace ulab::data
