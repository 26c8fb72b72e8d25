#include "dcan/image_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dcan {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open for reading");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    return out;
}

// Reads one whitespace-delimited token, skipping '#' comments (PNM style).
std::string pnm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (!std::isspace(ch)) {
            tok.push_back(static_cast<char>(ch));
            while ((ch = in.get()) != EOF && !std::isspace(ch)) tok.push_back(static_cast<char>(ch));
            break;
        }
    }
    return tok;
}

std::uint8_t quantize(double v) {
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

}  // namespace

ImageRgb read_ppm(const std::string& path) {
    std::ifstream in = open_in(path);
    if (pnm_token(in) != "P6") fail(path, "not a binary PPM (P6)");
    const int w = std::stoi(pnm_token(in));
    const int h = std::stoi(pnm_token(in));
    const int maxval = std::stoi(pnm_token(in));
    if (w <= 0 || h <= 0) fail(path, "bad dimensions");
    if (maxval != 255) fail(path, "only 8-bit PPM supported");
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) fail(path, "truncated pixel data");
    ImageRgb img(w, h);
    std::size_t i = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(c, x, y) = raw[i++] / 255.0;
    return img;
}

void write_ppm(const std::string& path, const ImageRgb& image) {
    std::ofstream out = open_out(path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(image.width) * image.height * 3);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c) raw.push_back(quantize(image.at(c, x, y)));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) fail(path, "write failed");
}

ImageRgb read_pgm(const std::string& path) {
    std::ifstream in = open_in(path);
    if (pnm_token(in) != "P5") fail(path, "not a binary PGM (P5)");
    const int w = std::stoi(pnm_token(in));
    const int h = std::stoi(pnm_token(in));
    const int maxval = std::stoi(pnm_token(in));
    if (w <= 0 || h <= 0) fail(path, "bad dimensions");
    if (maxval != 255) fail(path, "only 8-bit PGM supported");
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) fail(path, "truncated pixel data");
    ImageRgb img(w, h);
    std::size_t i = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x, ++i)
            for (int c = 0; c < 3; ++c) img.at(c, x, y) = raw[i] / 255.0;
    return img;
}

InstanceMask read_imask(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string magic, version;
    int w = 0, h = 0;
    in >> magic >> version >> w >> h;
    if (magic != "IMASK" || version != "v1") fail(path, "missing IMASK v1 header");
    if (!in || w <= 0 || h <= 0) fail(path, "bad IMASK dimensions");
    InstanceMask mask(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::int64_t v;
            if (!(in >> v)) fail(path, "truncated at row " + std::to_string(y));
            if (v < 0) fail(path, "negative label at (" + std::to_string(x) + "," + std::to_string(y) + ")");
            mask.at(x, y) = static_cast<std::int32_t>(v);
        }
    }
    return mask;
}

void write_imask(const std::string& path, const InstanceMask& mask) {
    std::ofstream out = open_out(path);
    out << "IMASK v1 " << mask.width << " " << mask.height << "\n";
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (x) out << ' ';
            out << mask.at(x, y);
        }
        out << '\n';
    }
    if (!out) fail(path, "write failed");
}

void write_imask(const std::string& path, const BinaryMask& mask) {
    InstanceMask m(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) m.labels[i] = mask.bits[i] ? 1 : 0;
    write_imask(path, m);
}

void write_le_doubles(std::ostream& out, const double* values, std::size_t count) {
    std::vector<char> buf(count * 8);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t b = std::bit_cast<std::uint64_t>(values[i]);
        for (int k = 0; k < 8; ++k) buf[i * 8 + k] = static_cast<char>((b >> (8 * k)) & 0xff);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void read_le_doubles(std::istream& in, double* values, std::size_t count) {
    std::vector<char> buf(count * 8);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
        throw std::runtime_error("truncated double payload");
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t b = 0;
        for (int k = 0; k < 8; ++k)
            b |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[i * 8 + k])) << (8 * k);
        values[i] = std::bit_cast<double>(b);
    }
}

ProbabilityMaps read_pmap(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string magic, version;
    int w = 0, h = 0;
    in >> magic >> version >> w >> h;
    if (magic != "PMAP" || version != "v1") fail(path, "missing PMAP v1 header");
    if (!in || w <= 0 || h <= 0) fail(path, "bad PMAP dimensions");
    in.get();  // newline terminating the header
    ProbabilityMaps maps(w, h);
    try {
        read_le_doubles(in, maps.p_object.data(), maps.p_object.size());
        read_le_doubles(in, maps.p_contour.data(), maps.p_contour.size());
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
    return maps;
}

void write_pmap(const std::string& path, const ProbabilityMaps& maps) {
    std::ofstream out = open_out(path);
    out << "PMAP v1 " << maps.width << " " << maps.height << "\n";
    write_le_doubles(out, maps.p_object.data(), maps.p_object.size());
    write_le_doubles(out, maps.p_contour.data(), maps.p_contour.size());
    if (!out) fail(path, "write failed");
}

}  // namespace dcan
