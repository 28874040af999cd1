#pragma once

#include <string>
#include <vector>

#include "tbe/rng.hpp"
#include "tbe/tensor.hpp"

namespace tbe {

/// Immutable dataset: images (N x D or N x C x H x W), integer labels, and
/// the normalization applied so it can be reproduced exactly.
struct Dataset {
    Tensor images;
    std::vector<int> labels;
    int num_classes = 0;
    std::string split;
    double norm_mean = 0.0;
    double norm_std = 1.0;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_size() const { return size() ? images.size() / size() : 0; }
    std::vector<std::size_t> sample_shape() const {
        return {images.shape().begin() + 1, images.shape().end()};
    }
};

/// Labeled subset used for relevance aggregation.
struct ReferenceSet {
    Tensor images;
    std::vector<int> labels;
};

/// Parse one IDX file (big-endian). Magic 0x00000803 = images (uint8,
/// N x H x W), 0x00000801 = labels (uint8, N).
Tensor load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path, int num_classes = 10);

/// MNIST from a directory holding the four canonical IDX files. Pixels are
/// scaled to [0,1] then standardized with the train split's global mean/std
/// (recorded on both splits). Images are flattened to N x 784.
std::pair<Dataset, Dataset> load_mnist(const std::string& dir);

/// CIFAR-10 binary batches (per record: 1 label byte + 3072 pixel bytes).
Dataset load_cifar10(const std::vector<std::string>& batch_paths, const std::string& split);
/// CIFAR-100 binary (per record: coarse byte + fine byte + 3072 pixels);
/// fine labels are used.
Dataset load_cifar100(const std::string& path, const std::string& split);

/// Gaussian blobs: class means pairwise `separation` apart, unit covariance,
/// deterministic by seed.
Dataset make_synthetic(int n_classes, int n_per_class, int dim, double separation,
                       std::uint64_t seed);

/// Exactly per_class samples per class, uniform without replacement,
/// deterministic by seed. `indices` restricts the draw (empty = whole set);
/// `relabel` maps original labels to head-local ones (empty = identity over
/// classes present).
ReferenceSet sample_reference(const Dataset& ds, int per_class, std::uint64_t seed,
                              const std::vector<std::size_t>& indices = {},
                              const std::vector<int>& class_list = {});

/// Synthetic-dataset CSV round trip (label, then pixel values per row).
void write_dataset_csv(const Dataset& ds, const std::string& path);
Dataset read_dataset_csv(const std::string& path, const std::string& split);

/// CRC-32 (IEEE) of a whole file, for dataset checksum verification.
std::uint32_t file_crc32(const std::string& path);

}  // namespace tbe
