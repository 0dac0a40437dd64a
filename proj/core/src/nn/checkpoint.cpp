#include "streamvae/nn/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "streamvae/errors.hpp"

namespace streamvae::nn {

namespace {

constexpr char kMagic[8] = {'S', 'V', 'A', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
T to_le(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

template <class T>
void put(std::ostream& out, T v) {
    v = to_le(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("truncated checkpoint");
    return to_le(v);
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
    if (n > (1ULL << 32)) throw DataError("implausible length in checkpoint");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw DataError("truncated checkpoint");
    return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    const std::string header = ckpt.header.dump();
    put<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    put<std::uint64_t>(out, ckpt.params.size());
    for (const auto& e : ckpt.params.entries()) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
        for (auto d : e.value.shape()) put<std::uint64_t>(out, d);
        for (double v : e.value.data()) put<double>(out, v);
    }
    if (!out) throw DataError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError("not a checkpoint file (bad magic)");
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    const auto header_len = get<std::uint64_t>(in);
    const std::string header = get_bytes(in, header_len);
    try {
        ckpt.header = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt checkpoint header: ") + e.what());
    }
    const auto n = get<std::uint64_t>(in);
    for (std::uint64_t k = 0; k < n; ++k) {
        std::string name = get_bytes(in, get<std::uint32_t>(in));
        const auto rank = get<std::uint32_t>(in);
        if (rank > 8) throw DataError("implausible tensor rank in checkpoint");
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in));
        Tensor t(shape);
        for (double& v : t.data()) v = get<double>(in);
        ckpt.params.add(std::move(name), std::move(t));
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
    return read_checkpoint(in);
}

}  // namespace streamvae::nn
