#include "ecgaug/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ecgaug {

namespace {

constexpr char kMagic[8] = {'E', 'C', 'G', 'A', 'U', 'G', 'P', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(os, v);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("checkpoint: truncated file");
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw IoError("checkpoint: truncated file");
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

double get_f64(std::istream& is) {
    uint64_t v = get_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<nn::ParamRef>& state) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("checkpoint: cannot open " + tmp.string() + " for writing");
        os.write(kMagic, 8);
        put_u32(os, kVersion);
        put_u64(os, state.size());
        for (const nn::ParamRef& p : state) {
            put_u32(os, static_cast<uint32_t>(p.name.size()));
            os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
            const Shape& s = p.tensor.shape();
            put_u32(os, static_cast<uint32_t>(s.size()));
            for (int64_t e : s) put_u64(os, static_cast<uint64_t>(e));
            for (double v : p.tensor.data()) put_f64(os, v);
        }
        if (!os) throw IoError("checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::map<std::string, Tensor> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw ParseError("checkpoint: bad magic in " + path.string());
    uint32_t version = get_u32(is);
    if (version != kVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    uint64_t count = get_u64(is);
    std::map<std::string, Tensor> out;
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw IoError("checkpoint: truncated name");
        uint32_t rank = get_u32(is);
        Shape shape(rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int64_t>(get_u64(is));
        int64_t n = shape_numel(shape);
        std::vector<double> data(static_cast<size_t>(n));
        for (double& v : data) v = get_f64(is);
        out.emplace(std::move(name), Tensor::from(std::move(shape), std::move(data)));
    }
    return out;
}

void restore_state(std::vector<nn::ParamRef> state, const std::filesystem::path& path) {
    auto loaded = load_checkpoint(path);
    for (nn::ParamRef& p : state) {
        auto it = loaded.find(p.name);
        if (it == loaded.end())
            throw ParseError("checkpoint: missing entry '" + p.name + "' in " + path.string());
        if (it->second.shape() != p.tensor.shape())
            throw ShapeError("checkpoint: entry '" + p.name + "' has shape " +
                             shape_str(it->second.shape()) + ", expected " +
                             shape_str(p.tensor.shape()));
        auto dst = p.tensor.raw_data();
        auto src = it->second.data();
        std::copy(src.begin(), src.end(), dst.begin());
    }
}

} // namespace ecgaug
