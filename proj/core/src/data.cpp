#include "tbe/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include "tbe/errors.hpp"

namespace tbe {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path +
                      " (run `tbe fetch-data --help` for how to obtain the datasets)");
    in.seekg(0, std::ios::end);
    const auto n = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(buf.data()), n);
    return buf;
}

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

}  // namespace

Tensor load_idx_images(const std::string& path) {
    const auto buf = read_file(path);
    if (buf.size() < 16) throw FormatError(path + ": truncated IDX header (offset 0)");
    const std::uint32_t magic = be32(buf.data());
    if (magic != 0x00000803)
        throw FormatError(path + ": bad IDX image magic 0x" + [&] {
            std::ostringstream os;
            os << std::hex << magic;
            return os.str();
        }() + " at offset 0 (expected 0x803)");
    const std::size_t n = be32(buf.data() + 4);
    const std::size_t h = be32(buf.data() + 8);
    const std::size_t w = be32(buf.data() + 12);
    const std::size_t expected = 16 + n * h * w;
    if (buf.size() != expected)
        throw FormatError(path + ": expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(buf.size()));
    Tensor t({n, h, w});
    for (std::size_t i = 0; i < n * h * w; ++i) t[i] = static_cast<double>(buf[16 + i]);
    return t;
}

std::vector<int> load_idx_labels(const std::string& path, int num_classes) {
    const auto buf = read_file(path);
    if (buf.size() < 8) throw FormatError(path + ": truncated IDX header (offset 0)");
    const std::uint32_t magic = be32(buf.data());
    if (magic != 0x00000801)
        throw FormatError(path + ": bad IDX label magic at offset 0 (expected 0x801)");
    const std::size_t n = be32(buf.data() + 4);
    if (buf.size() != 8 + n)
        throw FormatError(path + ": expected " + std::to_string(8 + n) + " bytes, got " +
                          std::to_string(buf.size()));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = buf[8 + i];
        if (labels[i] >= num_classes)
            throw FormatError(path + ": label " + std::to_string(labels[i]) + " at record " +
                              std::to_string(i) + " outside [0, " + std::to_string(num_classes) +
                              ")");
    }
    return labels;
}

std::pair<Dataset, Dataset> load_mnist(const std::string& dir) {
    Tensor train_img = load_idx_images(dir + "/train-images-idx3-ubyte");
    Tensor test_img = load_idx_images(dir + "/t10k-images-idx3-ubyte");
    std::vector<int> train_lab = load_idx_labels(dir + "/train-labels-idx1-ubyte");
    std::vector<int> test_lab = load_idx_labels(dir + "/t10k-labels-idx1-ubyte");

    const std::size_t d = train_img.dim(1) * train_img.dim(2);
    auto flatten_scale = [&](Tensor& t) {
        for (double& v : t.values()) v /= 255.0;
        t = t.reshaped({t.dim(0), d});
    };
    flatten_scale(train_img);
    flatten_scale(test_img);

    double mean = 0.0;
    for (double v : train_img.values()) mean += v;
    mean /= static_cast<double>(train_img.size());
    double var = 0.0;
    for (double v : train_img.values()) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(train_img.size()));

    auto standardize = [&](Tensor& t) {
        for (double& v : t.values()) v = (v - mean) / sd;
    };
    standardize(train_img);
    standardize(test_img);

    Dataset train{std::move(train_img), std::move(train_lab), 10, "train", mean, sd};
    Dataset test{std::move(test_img), std::move(test_lab), 10, "test", mean, sd};
    return {std::move(train), std::move(test)};
}

namespace {

Dataset finish_cifar(std::vector<double> pixels, std::vector<int> labels, int num_classes,
                     const std::string& split) {
    const std::size_t n = labels.size();
    Tensor img = Tensor::from({n, 3, 32, 32}, std::move(pixels));
    for (double& v : img.values()) v /= 255.0;
    double mean = 0.0;
    for (double v : img.values()) mean += v;
    mean /= static_cast<double>(img.size());
    double var = 0.0;
    for (double v : img.values()) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(img.size()));
    for (double& v : img.values()) v = (v - mean) / sd;
    return Dataset{std::move(img), std::move(labels), num_classes, split, mean, sd};
}

}  // namespace

Dataset load_cifar10(const std::vector<std::string>& batch_paths, const std::string& split) {
    std::vector<double> pixels;
    std::vector<int> labels;
    for (const auto& path : batch_paths) {
        const auto buf = read_file(path);
        constexpr std::size_t rec = 1 + 3072;
        if (buf.size() % rec != 0)
            throw FormatError(path + ": size not a multiple of " + std::to_string(rec));
        for (std::size_t off = 0; off < buf.size(); off += rec) {
            const int lab = buf[off];
            if (lab >= 10) throw FormatError(path + ": label out of range at offset " +
                                             std::to_string(off));
            labels.push_back(lab);
            for (std::size_t i = 0; i < 3072; ++i)
                pixels.push_back(static_cast<double>(buf[off + 1 + i]));
        }
    }
    return finish_cifar(std::move(pixels), std::move(labels), 10, split);
}

Dataset load_cifar100(const std::string& path, const std::string& split) {
    const auto buf = read_file(path);
    constexpr std::size_t rec = 2 + 3072;
    if (buf.size() % rec != 0)
        throw FormatError(path + ": size not a multiple of " + std::to_string(rec));
    std::vector<double> pixels;
    std::vector<int> labels;
    for (std::size_t off = 0; off < buf.size(); off += rec) {
        const int fine = buf[off + 1];
        if (fine >= 100)
            throw FormatError(path + ": fine label out of range at offset " + std::to_string(off));
        labels.push_back(fine);
        for (std::size_t i = 0; i < 3072; ++i)
            pixels.push_back(static_cast<double>(buf[off + 2 + i]));
    }
    return finish_cifar(std::move(pixels), std::move(labels), 100, split);
}

Dataset make_synthetic(int n_classes, int n_per_class, int dim, double separation,
                       std::uint64_t seed) {
    if (separation < 0.0) throw ConfigError("synthetic separation must be >= 0");
    Rng rng(seed);

    // Class means pairwise `separation` apart: scaled basis vectors when they
    // fit, random unit directions otherwise.
    std::vector<std::vector<double>> means(static_cast<std::size_t>(n_classes),
                                           std::vector<double>(static_cast<std::size_t>(dim)));
    const double radius = separation / std::sqrt(2.0);
    for (int c = 0; c < n_classes; ++c) {
        if (n_classes <= dim) {
            means[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)] = radius;
        } else {
            double norm = 0.0;
            for (double& v : means[static_cast<std::size_t>(c)]) {
                v = rng.next_normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
            for (double& v : means[static_cast<std::size_t>(c)])
                v = norm > 0.0 ? v / norm * radius : 0.0;
        }
    }

    const std::size_t n = static_cast<std::size_t>(n_classes) *
                          static_cast<std::size_t>(n_per_class);
    Tensor img({n, static_cast<std::size_t>(dim)});
    std::vector<int> labels(n);
    std::size_t row = 0;
    for (int c = 0; c < n_classes; ++c)
        for (int s = 0; s < n_per_class; ++s, ++row) {
            labels[row] = c;
            for (int d = 0; d < dim; ++d)
                img[row * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)] =
                    means[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] +
                    rng.next_normal();
        }
    return Dataset{std::move(img), std::move(labels), n_classes, "synthetic", 0.0, 1.0};
}

ReferenceSet sample_reference(const Dataset& ds, int per_class, std::uint64_t seed,
                              const std::vector<std::size_t>& indices,
                              const std::vector<int>& class_list) {
    std::vector<std::size_t> pool;
    if (indices.empty()) {
        pool.resize(ds.size());
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    } else {
        pool = indices;
    }

    // Per-class candidate lists, in pool order.
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i : pool) by_class[ds.labels[i]].push_back(i);

    std::vector<int> classes = class_list;
    if (classes.empty())
        for (const auto& [c, v] : by_class) classes.push_back(c);

    std::vector<std::string> deficient;
    for (int c : classes)
        if (by_class[c].size() < static_cast<std::size_t>(per_class))
            deficient.push_back(std::to_string(c));
    if (!deficient.empty()) {
        std::string msg = "sample_reference: not enough samples for class(es) ";
        for (std::size_t i = 0; i < deficient.size(); ++i)
            msg += (i ? ", " : "") + deficient[i];
        throw Error(msg);
    }

    Rng rng(seed);
    const std::size_t d = ds.sample_size();
    ReferenceSet refs;
    refs.images = Tensor({classes.size() * static_cast<std::size_t>(per_class), d});
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < classes.size(); ++ci) {
        auto& cand = by_class[classes[ci]];
        // Partial Fisher-Yates: first per_class entries are the draw.
        for (int k = 0; k < per_class; ++k) {
            const std::size_t j =
                static_cast<std::size_t>(k) +
                static_cast<std::size_t>(rng.next_below(cand.size() - static_cast<std::size_t>(k)));
            std::swap(cand[static_cast<std::size_t>(k)], cand[j]);
            const std::size_t src = cand[static_cast<std::size_t>(k)];
            std::copy_n(ds.images.data() + src * d, d, refs.images.data() + row * d);
            // Head-local label = position in class_list when one is given.
            refs.labels.push_back(class_list.empty() ? classes[ci] : static_cast<int>(ci));
            ++row;
        }
    }
    refs.images = refs.images.reshaped([&] {
        std::vector<std::size_t> s{row};
        auto rest = ds.sample_shape();
        s.insert(s.end(), rest.begin(), rest.end());
        return s;
    }());
    return refs;
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    const std::size_t d = ds.sample_size();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.labels[i];
        for (std::size_t j = 0; j < d; ++j) out << "," << ds.images[i * d + j];
        out << "\n";
    }
}

Dataset read_dataset_csv(const std::string& path, const std::string& split) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<double> pixels;
    std::vector<int> labels;
    std::size_t dim = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        labels.push_back(std::stoi(cell));
        std::size_t d = 0;
        while (std::getline(ls, cell, ',')) {
            pixels.push_back(std::stod(cell));
            ++d;
        }
        if (dim == 0)
            dim = d;
        else if (d != dim)
            throw FormatError(path + ": inconsistent row width");
    }
    int ncls = 0;
    for (int l : labels) ncls = std::max(ncls, l + 1);
    Tensor img = Tensor::from({labels.size(), dim}, std::move(pixels));
    return Dataset{std::move(img), std::move(labels), ncls, split, 0.0, 1.0};
}

std::uint32_t file_crc32(const std::string& path) {
    static std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    const auto buf = read_file(path);
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::uint8_t b : buf) crc = table[(crc ^ b) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

}  // namespace tbe
