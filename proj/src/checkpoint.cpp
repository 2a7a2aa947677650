#include "inrpatch/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

namespace inrpatch {

namespace {

constexpr uint32_t kVersion = 1;

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<uint8_t>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint truncated: " + path);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(buf[pos] | (buf[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + static_cast<size_t>(i)]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + static_cast<size_t>(i)]) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    uint8_t u8() {
        need(1);
        return buf[pos++];
    }
};

void write_block(std::vector<uint8_t>& out, uint32_t& crc, const std::string& name, const Tensor& t) {
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<uint8_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
    const size_t payload_start = out.size();
    out.resize(out.size() + static_cast<size_t>(t.size()) * 4);
    std::memcpy(out.data() + payload_start, t.ptr(), static_cast<size_t>(t.size()) * 4);
    crc = crc32(crc, out.data() + payload_start, static_cast<uInt>(t.size() * 4));
}

} // namespace

void save_checkpoint(const std::string& path, const GeneratorParams& params, uint64_t seed) {
    std::vector<uint8_t> out;
    out.insert(out.end(), {'I', 'N', 'R', 'P'});
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(params.H));
    put_u32(out, static_cast<uint32_t>(params.stage));
    put_u32(out, static_cast<uint32_t>(params.grid_n));
    put_u32(out, static_cast<uint32_t>(params.cfg.z_dim));
    put_u32(out, static_cast<uint32_t>(params.cfg.w_dim));
    put_u32(out, static_cast<uint32_t>(params.cfg.embed_pairs));
    put_u32(out, static_cast<uint32_t>(params.cfg.const_dim));
    put_u32(out, static_cast<uint32_t>(params.cfg.layers));
    put_u32(out, static_cast<uint32_t>(params.cfg.width));
    put_f32(out, params.cfg.fourier_sigma);
    put_f32(out, params.cfg.lrelu_slope);
    put_u32(out, static_cast<uint32_t>(params.cfg.init));
    put_u64(out, seed);

    uint32_t nblocks = 1; // fourier
    params.for_each_param([&](const std::string&, const Tensor&) { ++nblocks; });
    put_u32(out, nblocks);

    uint32_t crc = crc32(0L, Z_NULL, 0);
    write_block(out, crc, "fourier", params.fourier);
    params.for_each_param([&](const std::string& n, const Tensor& t) { write_block(out, crc, n, t); });
    put_u32(out, crc);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

GeneratorParams load_checkpoint(const std::string& path, uint64_t* seed_out) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf, 0, path};

    r.need(4);
    if (std::memcmp(buf.data(), "INRP", 4) != 0)
        throw std::runtime_error("not an INRP checkpoint: " + path);
    r.pos = 4;
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + ": " + path);

    GenConfig cfg;
    const int H = static_cast<int>(r.u32());
    const int stage = static_cast<int>(r.u32());
    const int grid_n = static_cast<int>(r.u32());
    cfg.z_dim = static_cast<int>(r.u32());
    cfg.w_dim = static_cast<int>(r.u32());
    cfg.embed_pairs = static_cast<int>(r.u32());
    cfg.const_dim = static_cast<int>(r.u32());
    cfg.layers = static_cast<int>(r.u32());
    cfg.width = static_cast<int>(r.u32());
    cfg.fourier_sigma = r.f32();
    cfg.lrelu_slope = r.f32();
    cfg.init = static_cast<InitStrategy>(r.u32());
    const uint64_t seed = r.u64();
    const uint32_t nblocks = r.u32();

    std::map<std::string, Tensor> blocks;
    std::vector<std::string> order;
    uint32_t crc = crc32(0L, Z_NULL, 0);
    for (uint32_t bi = 0; bi < nblocks; ++bi) {
        const uint16_t nl = r.u16();
        r.need(nl);
        std::string name(reinterpret_cast<const char*>(buf.data() + r.pos), nl);
        r.pos += nl;
        const uint8_t ndim = r.u8();
        Shape shape;
        for (uint8_t i = 0; i < ndim; ++i) shape.push_back(static_cast<int>(r.u32()));
        const int64_t n = numel(shape);
        r.need(static_cast<size_t>(n) * 4);
        std::vector<float> vals(static_cast<size_t>(n));
        std::memcpy(vals.data(), buf.data() + r.pos, static_cast<size_t>(n) * 4);
        crc = crc32(crc, buf.data() + r.pos, static_cast<uInt>(n * 4));
        r.pos += static_cast<size_t>(n) * 4;
        blocks.emplace(name, constant(shape, std::move(vals)));
        order.push_back(name);
    }
    const uint32_t stored = r.u32();
    if (stored != crc) throw std::runtime_error("checkpoint checksum mismatch: " + path);

    // rebuild a params struct of the right architecture, then fill blocks
    GeneratorParams p = init_generator(cfg, H, seed);
    p.stage = stage;
    p.grid_n = grid_n;
    if (p.has_const()) p.const_grid = zeros({grid_n * grid_n, cfg.const_dim});
    auto take = [&](const std::string& name) -> Tensor {
        auto it = blocks.find(name);
        if (it == blocks.end()) throw std::runtime_error("checkpoint missing block '" + name + "': " + path);
        return it->second;
    };
    p.fourier = take("fourier");
    p.for_each_param([&](const std::string& n, Tensor& t) {
        Tensor loaded = take(n);
        if (loaded.shape != t.shape)
            throw std::runtime_error("checkpoint block '" + n + "' has shape " + shape_str(loaded.shape) +
                                     ", expected " + shape_str(t.shape) + ": " + path);
        t = loaded;
    });
    if (seed_out) *seed_out = seed;
    return p;
}

} // namespace inrpatch
