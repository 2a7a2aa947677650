#include "inrpatch/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace inrpatch {

namespace {

const uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32be(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void write_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    put_u32be(out, static_cast<uint32_t>(data.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + start, static_cast<uInt>(4 + data.size()));
    put_u32be(out, crc);
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

void write_png_rgb8(const std::string& path, const ImageU8& img) {
    if (img.w < 1 || img.h < 1 || img.rgb.size() != static_cast<size_t>(img.w) * img.h * 3)
        throw std::invalid_argument("write_png_rgb8: bad image buffer for " + path);

    std::vector<uint8_t> ihdr;
    put_u32be(ihdr, static_cast<uint32_t>(img.w));
    put_u32be(ihdr, static_cast<uint32_t>(img.h));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // color type RGB
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter method
    ihdr.push_back(0); // no interlace

    // filter type 0 on every row
    const size_t rowbytes = static_cast<size_t>(img.w) * 3;
    std::vector<uint8_t> raw((rowbytes + 1) * static_cast<size_t>(img.h));
    for (int y = 0; y < img.h; ++y) {
        raw[static_cast<size_t>(y) * (rowbytes + 1)] = 0;
        std::memcpy(raw.data() + static_cast<size_t>(y) * (rowbytes + 1) + 1,
                    img.rgb.data() + static_cast<size_t>(y) * rowbytes, rowbytes);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> idat(bound);
    if (compress2(idat.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png_rgb8: deflate failed for " + path);
    idat.resize(bound);

    std::vector<uint8_t> out;
    out.insert(out.end(), kSignature, kSignature + 8);
    write_chunk(out, "IHDR", ihdr);
    write_chunk(out, "IDAT", idat);
    write_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_png_rgb8: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_png_rgb8: write failed for " + path);
}

void write_png_rgb8(const std::string& path, const float* rgb, int w, int h) {
    ImageU8 img;
    img.w = w;
    img.h = h;
    img.rgb.resize(static_cast<size_t>(w) * h * 3);
    for (size_t i = 0; i < img.rgb.size(); ++i) {
        float v = rgb[i];
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        img.rgb[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
    write_png_rgb8(path, img);
}

ImageU8 read_png_rgb8(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_png_rgb8: cannot open " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 8 || std::memcmp(buf.data(), kSignature, 8) != 0)
        throw std::runtime_error("read_png_rgb8: not a PNG file: " + path);

    int w = 0, h = 0;
    bool saw_ihdr = false;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 8 <= buf.size()) {
        const uint32_t len = get_u32be(buf.data() + pos);
        if (pos + 12 + len > buf.size())
            throw std::runtime_error("read_png_rgb8: truncated chunk in " + path);
        const char* type = reinterpret_cast<const char*>(buf.data() + pos + 4);
        const uint8_t* data = buf.data() + pos + 8;
        uint32_t crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, buf.data() + pos + 4, 4 + len);
        if (crc != get_u32be(buf.data() + pos + 8 + len))
            throw std::runtime_error("read_png_rgb8: chunk CRC mismatch in " + path);
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw std::runtime_error("read_png_rgb8: bad IHDR in " + path);
            w = static_cast<int>(get_u32be(data));
            h = static_cast<int>(get_u32be(data + 4));
            const int depth = data[8], color = data[9], interlace = data[12];
            if (depth != 8) throw std::runtime_error("read_png_rgb8: " + path + " is not 8-bit (depth " + std::to_string(depth) + ")");
            if (color != 2) throw std::runtime_error("read_png_rgb8: " + path + " is not plain RGB (color type " + std::to_string(color) + ")");
            if (interlace != 0) throw std::runtime_error("read_png_rgb8: " + path + " is interlaced");
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || w < 1 || h < 1) throw std::runtime_error("read_png_rgb8: missing IHDR in " + path);
    if (idat.empty()) throw std::runtime_error("read_png_rgb8: no image data in " + path);

    const size_t rowbytes = static_cast<size_t>(w) * 3;
    std::vector<uint8_t> raw((rowbytes + 1) * static_cast<size_t>(h));
    uLongf rawlen = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &rawlen, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        rawlen != raw.size())
        throw std::runtime_error("read_png_rgb8: inflate failed for " + path);

    ImageU8 img;
    img.w = w;
    img.h = h;
    img.rgb.assign(rowbytes * static_cast<size_t>(h), 0);
    std::vector<uint8_t> prev(rowbytes, 0);
    for (int y = 0; y < h; ++y) {
        const uint8_t* src = raw.data() + static_cast<size_t>(y) * (rowbytes + 1);
        const uint8_t filter = src[0];
        uint8_t* dst = img.rgb.data() + static_cast<size_t>(y) * rowbytes;
        for (size_t x = 0; x < rowbytes; ++x) {
            const int cur = src[1 + x];
            const int left = x >= 3 ? dst[x - 3] : 0;
            const int up = prev[x];
            const int ul = x >= 3 ? prev[x - 3] : 0;
            int v = 0;
            switch (filter) {
                case 0: v = cur; break;
                case 1: v = cur + left; break;
                case 2: v = cur + up; break;
                case 3: v = cur + (left + up) / 2; break;
                case 4: v = cur + paeth(left, up, ul); break;
                default: throw std::runtime_error("read_png_rgb8: bad filter byte in " + path);
            }
            dst[x] = static_cast<uint8_t>(v & 0xFF);
        }
        std::memcpy(prev.data(), dst, rowbytes);
    }
    return img;
}

std::vector<float> to_float(const ImageU8& img) {
    std::vector<float> out(img.rgb.size());
    for (size_t i = 0; i < img.rgb.size(); ++i) out[i] = static_cast<float>(img.rgb[i]) / 255.0f;
    return out;
}

} // namespace inrpatch
