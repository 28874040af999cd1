#include "tbe/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace tbe {

namespace {

constexpr char kMagic[8] = {'T', 'B', 'E', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_str(std::ofstream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_shape(std::ofstream& out, const std::vector<std::size_t>& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    for (std::size_t d : s) put<std::uint64_t>(out, d);
}

template <typename T>
T get(std::ifstream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("checkpoint truncated");
    return v;
}

std::string get_str(std::ifstream& in) {
    const auto n = get<std::uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw FormatError("checkpoint truncated");
    return s;
}

std::vector<std::size_t> get_shape(std::ifstream& in) {
    const auto n = get<std::uint32_t>(in);
    std::vector<std::size_t> s(n);
    for (auto& d : s) d = static_cast<std::size_t>(get<std::uint64_t>(in));
    return s;
}

}  // namespace

void save_checkpoint(const Network& net, const FreezeState& freeze, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);

    put_shape(out, net.input_shape());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_count()));
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        const LayerSpec& ls = net.layer(i).spec;
        put<std::uint8_t>(out, static_cast<std::uint8_t>(ls.kind));
        switch (ls.kind) {
            case LayerKind::Dense: {
                const auto& d = ls.as_dense();
                put<std::uint64_t>(out, d.in_dim);
                put<std::uint64_t>(out, d.out_dim);
                break;
            }
            case LayerKind::Conv2D: {
                const auto& c = ls.as_conv();
                put<std::uint64_t>(out, c.in_channels);
                put<std::uint64_t>(out, c.out_channels);
                put<std::uint64_t>(out, c.kernel_h);
                put<std::uint64_t>(out, c.kernel_w);
                put<std::uint64_t>(out, c.stride);
                put<std::uint64_t>(out, c.padding);
                break;
            }
            case LayerKind::HeadGroup: {
                const auto& h = ls.as_heads();
                put<std::uint64_t>(out, h.shared_in_dim);
                put<std::uint32_t>(out, static_cast<std::uint32_t>(h.heads.size()));
                for (const auto& [id, dim] : h.heads) {
                    put_str(out, id);
                    put<std::uint64_t>(out, dim);
                }
                break;
            }
            default:
                break;
        }
    }

    const auto keys = net.param_keys();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(keys.size()));
    for (const auto& [layer, name] : keys) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(layer));
        put_str(out, name);
        const Tensor& t = net.param(layer, name);
        put_shape(out, t.shape());
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    }

    const auto& mults = freeze.multipliers();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(mults.size()));
    for (const auto& [u, m] : mults) {
        put<std::int32_t>(out, u.layer_index);
        put<std::int32_t>(out, u.unit_index);
        put<double>(out, m);
        const auto fb = freeze.frozen_by(u);
        put<std::int32_t>(out, fb ? *fb : -1);
    }
    if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError(path + ": not a network checkpoint");
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));

    const auto input_shape = get_shape(in);
    const auto n_layers = get<std::uint32_t>(in);
    std::vector<LayerSpec> specs;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const auto kind = static_cast<LayerKind>(get<std::uint8_t>(in));
        switch (kind) {
            case LayerKind::Dense: {
                const auto a = get<std::uint64_t>(in);
                const auto b = get<std::uint64_t>(in);
                specs.push_back(LayerSpec::dense(a, b));
                break;
            }
            case LayerKind::Conv2D: {
                const auto ic = get<std::uint64_t>(in);
                const auto oc = get<std::uint64_t>(in);
                const auto kh = get<std::uint64_t>(in);
                const auto kw = get<std::uint64_t>(in);
                const auto st = get<std::uint64_t>(in);
                const auto pd = get<std::uint64_t>(in);
                specs.push_back(LayerSpec::conv2d(ic, oc, kh, kw, st, pd));
                break;
            }
            case LayerKind::ReLU:
                specs.push_back(LayerSpec::relu());
                break;
            case LayerKind::Flatten:
                specs.push_back(LayerSpec::flatten());
                break;
            case LayerKind::HeadGroup: {
                const auto shared = get<std::uint64_t>(in);
                const auto n = get<std::uint32_t>(in);
                std::vector<std::pair<std::string, std::size_t>> heads;
                for (std::uint32_t h = 0; h < n; ++h) {
                    std::string id = get_str(in);
                    heads.emplace_back(std::move(id),
                                       static_cast<std::size_t>(get<std::uint64_t>(in)));
                }
                specs.push_back(LayerSpec::head_group(shared, std::move(heads)));
                break;
            }
            default:
                throw FormatError(path + ": unknown layer kind");
        }
    }

    Checkpoint ckpt{Network(input_shape, std::move(specs)), FreezeState{}};

    const auto n_params = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const auto layer = static_cast<int>(get<std::uint32_t>(in));
        const std::string name = get_str(in);
        const auto shape = get_shape(in);
        Tensor& t = ckpt.net.param(layer, name);
        if (t.shape() != shape)
            throw FormatError(path + ": parameter shape mismatch for layer " +
                              std::to_string(layer) + " '" + name + "'");
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw FormatError(path + ": truncated parameter data");
    }
    ckpt.net.bump_param_version();

    ckpt.freeze = FreezeState::fresh(ckpt.net);
    const auto n_units = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_units; ++i) {
        UnitId u{get<std::int32_t>(in), get<std::int32_t>(in)};
        const double m = get<double>(in);
        const auto task = get<std::int32_t>(in);
        ckpt.freeze.set_multiplier(u, m,
                                   task >= 0 ? std::optional<int>(task) : std::nullopt);
    }
    return ckpt;
}

}  // namespace tbe
