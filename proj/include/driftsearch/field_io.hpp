#pragma once

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "driftsearch/errors.hpp"
#include "driftsearch/grid.hpp"

namespace driftsearch {

namespace detail {

inline void put_f32le(std::string& out, float v) {
    const uint32_t bits = std::bit_cast<uint32_t>(v);
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

inline float get_f32le(const unsigned char* p) {
    const uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                          (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

inline void append_plane_f32le(std::string& out, const std::vector<double>& plane) {
    for (double v : plane) put_f32le(out, static_cast<float>(v));
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

struct HeaderReader {
    std::istream& in;

    std::string line() {
        std::string s;
        if (!std::getline(in, s)) throw IoError("unexpected end of header");
        return s;
    }

    /// Reads "key v1 v2 ..." and returns the value tokens.
    std::vector<std::string> keyed(const std::string& key) {
        std::istringstream ls(line());
        std::string k;
        ls >> k;
        if (k != key) throw IoError("expected header key '" + key + "', got '" + k + "'");
        std::vector<std::string> vals;
        std::string v;
        while (ls >> v) vals.push_back(v);
        return vals;
    }

    double keyed_double(const std::string& key) {
        const auto vals = keyed(key);
        if (vals.size() != 1) throw IoError("header key '" + key + "' wants one value");
        return std::stod(vals[0]);
    }

    int keyed_int(const std::string& key) {
        const auto vals = keyed(key);
        if (vals.size() != 1) throw IoError("header key '" + key + "' wants one value");
        return std::stoi(vals[0]);
    }
};

inline std::vector<unsigned char> read_rest(std::istream& in) {
    std::vector<unsigned char> buf;
    char chunk[65536];
    while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
        buf.insert(buf.end(), chunk, chunk + in.gcount());
        if (!in) break;
    }
    return buf;
}

inline std::vector<double> take_plane(const std::vector<unsigned char>& buf, size_t& off, size_t n) {
    if (off + 4 * n > buf.size()) throw IoError("field payload truncated");
    std::vector<double> plane(n);
    for (size_t i = 0; i < n; ++i) plane[i] = get_f32le(buf.data() + off + 4 * i);
    off += 4 * n;
    return plane;
}

}  // namespace detail

/// Flow file: text header (dims, origin, spacing, snapshot times) + per
/// snapshot a wx then wy plane, row-major little-endian float32.
inline void write_flow(const std::string& path, const FlowSeries& flow) {
    flow.check();
    const Grid2D& g = *flow.grid;
    std::string out;
    out += "driftsearch-flow 1\n";
    out += "nx " + std::to_string(g.nx) + "\n";
    out += "ny " + std::to_string(g.ny) + "\n";
    out += "origin " + detail::format_double(g.origin.x) + " " + detail::format_double(g.origin.y) + "\n";
    out += "h " + detail::format_double(g.h) + "\n";
    out += "snapshots " + std::to_string(flow.snaps.size()) + "\n";
    out += "times";
    for (const FlowSnapshot& s : flow.snaps) out += " " + detail::format_double(s.t);
    out += "\ndata\n";
    for (const FlowSnapshot& s : flow.snaps) {
        detail::append_plane_f32le(out, s.wx);
        detail::append_plane_f32le(out, s.wy);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path);
}

/// Reads a flow file. The snapshots attach to the caller's grid, which must
/// match the dims recorded in the header.
inline FlowSeries read_flow(const std::string& path, const Grid2D& grid) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    detail::HeaderReader hr{f};
    if (hr.line() != "driftsearch-flow 1") throw IoError("not a flow file: " + path);
    const int nx = hr.keyed_int("nx");
    const int ny = hr.keyed_int("ny");
    if (nx != grid.nx || ny != grid.ny)
        throw IoError("flow file dims " + std::to_string(nx) + "x" + std::to_string(ny) +
                      " do not match grid " + std::to_string(grid.nx) + "x" + std::to_string(grid.ny));
    hr.keyed("origin");
    hr.keyed("h");
    const int count = hr.keyed_int("snapshots");
    const auto time_tokens = hr.keyed("times");
    if (static_cast<int>(time_tokens.size()) != count) throw IoError("snapshot time count mismatch");
    if (hr.line() != "data") throw IoError("missing data marker");
    const auto buf = detail::read_rest(f);
    const size_t n = grid.cell_count();
    size_t off = 0;
    FlowSeries flow;
    flow.grid = &grid;
    for (int k = 0; k < count; ++k) {
        FlowSnapshot s;
        s.t = std::stod(time_tokens[k]);
        s.wx = detail::take_plane(buf, off, n);
        s.wy = detail::take_plane(buf, off, n);
        flow.snaps.push_back(std::move(s));
    }
    flow.check();
    return flow;
}

/// Scalar field file: same layout with a single value plane.
inline void write_field(const std::string& path, const ScalarField& field) {
    const Grid2D& g = *field.grid;
    std::string out;
    out += "driftsearch-field 1\n";
    out += "nx " + std::to_string(g.nx) + "\n";
    out += "ny " + std::to_string(g.ny) + "\n";
    out += "origin " + detail::format_double(g.origin.x) + " " + detail::format_double(g.origin.y) + "\n";
    out += "h " + detail::format_double(g.h) + "\n";
    out += "data\n";
    detail::append_plane_f32le(out, field.data);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path);
}

/// Standalone field read: reconstructs an unmasked grid from the header.
/// Returns the grid by value; the field references the caller's copy.
struct LoadedField {
    Grid2D grid;
    std::vector<double> data;
};

inline LoadedField read_field(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    detail::HeaderReader hr{f};
    if (hr.line() != "driftsearch-field 1") throw IoError("not a field file: " + path);
    LoadedField lf;
    lf.grid.nx = hr.keyed_int("nx");
    lf.grid.ny = hr.keyed_int("ny");
    const auto org = hr.keyed("origin");
    if (org.size() != 2) throw IoError("origin wants two values");
    lf.grid.origin = {std::stod(org[0]), std::stod(org[1])};
    lf.grid.h = hr.keyed_double("h");
    if (hr.line() != "data") throw IoError("missing data marker");
    if (lf.grid.nx < 1 || lf.grid.ny < 1) throw IoError("bad field dims");
    lf.grid.mask.assign(lf.grid.cell_count(), Cell::FLUID);
    const auto buf = detail::read_rest(f);
    size_t off = 0;
    lf.data = detail::take_plane(buf, off, lf.grid.cell_count());
    return lf;
}

/// Mask file: raw row-major bytes, 0 = fluid, 1 = obstacle.
inline void write_mask(const std::string& path, const Grid2D& grid) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    for (Cell c : grid.mask) f.put(c == Cell::OBSTACLE ? '\1' : '\0');
    if (!f) throw IoError("write failed: " + path);
}

inline std::vector<Cell> read_mask(const std::string& path, int nx, int ny) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    const auto buf = detail::read_rest(f);
    const size_t n = static_cast<size_t>(nx) * ny;
    if (buf.size() != n) throw IoError("mask size mismatch: " + path);
    std::vector<Cell> mask(n);
    for (size_t i = 0; i < n; ++i) {
        if (buf[i] > 1) throw IoError("mask byte out of range");
        mask[i] = buf[i] ? Cell::OBSTACLE : Cell::FLUID;
    }
    return mask;
}

namespace detail {

inline std::array<unsigned char, 3> false_color(double v) {
    // Piecewise-linear dark-blue -> cyan -> yellow -> red ramp on [0,1].
    struct Stop { double t; double r, g, b; };
    static constexpr Stop stops[] = {
        {0.00, 0.05, 0.03, 0.30},
        {0.33, 0.00, 0.60, 0.85},
        {0.66, 0.95, 0.90, 0.10},
        {1.00, 0.85, 0.10, 0.05},
    };
    v = std::clamp(v, 0.0, 1.0);
    size_t k = 0;
    while (k + 2 < std::size(stops) && v > stops[k + 1].t) ++k;
    const Stop& a = stops[k];
    const Stop& b = stops[k + 1];
    const double f = (v - a.t) / (b.t - a.t);
    auto ch = [&](double x, double y) {
        return static_cast<unsigned char>(std::clamp(255.0 * (x + f * (y - x)), 0.0, 255.0));
    };
    return {ch(a.r, b.r), ch(a.g, b.g), ch(a.b, b.b)};
}

inline void put_u32be(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

inline void put_png_chunk(std::string& out, const char type[4], const std::string& payload) {
    put_u32be(out, static_cast<uint32_t>(payload.size()));
    std::string body(type, 4);
    body += payload;
    out += body;
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                           static_cast<uInt>(body.size()));
    put_u32be(out, static_cast<uint32_t>(crc));
}

}  // namespace detail

/// Minimal 8-bit RGB PNG writer (zlib-deflated, filter 0 scanlines).
inline void write_png(const std::string& path, int width, int height,
                      const std::vector<unsigned char>& rgb) {
    if (rgb.size() != static_cast<size_t>(width) * height * 3) throw IoError("rgb buffer size mismatch");
    std::string raw;
    raw.reserve(static_cast<size_t>(height) * (1 + 3 * width));
    for (int r = 0; r < height; ++r) {
        raw.push_back('\0');
        raw.append(reinterpret_cast<const char*>(rgb.data()) + static_cast<size_t>(r) * width * 3,
                   static_cast<size_t>(width) * 3);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    if (compress2(comp.data(), &comp_len, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), 9) != Z_OK) {
        throw IoError("png deflate failed");
    }
    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    detail::put_u32be(ihdr, static_cast<uint32_t>(width));
    detail::put_u32be(ihdr, static_cast<uint32_t>(height));
    ihdr += '\x08';  // bit depth
    ihdr += '\x02';  // color type RGB
    ihdr += '\x00';  // compression
    ihdr += '\x00';  // filter
    ihdr += '\x00';  // no interlace
    detail::put_png_chunk(out, "IHDR", ihdr);
    detail::put_png_chunk(out, "IDAT",
                          std::string(reinterpret_cast<char*>(comp.data()), comp_len));
    detail::put_png_chunk(out, "IEND", "");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path);
}

/// Grayscale 8-bit PGM (binary P5), rows top to bottom.
inline void write_pgm(const std::string& path, int width, int height,
                      const std::vector<unsigned char>& gray) {
    if (gray.size() != static_cast<size_t>(width) * height) throw IoError("gray buffer size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "P5\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
    if (!f) throw IoError("write failed: " + path);
}

/// Rasterizes a value plane to an image, normalized by its own max.
/// Row 0 of the image is the top of the domain. Returns RGB triplets.
inline std::vector<unsigned char> rasterize_field(const Grid2D& grid, const std::vector<double>& data,
                                                  bool color) {
    double vmax = 0.0;
    for (size_t i = 0; i < data.size(); ++i) {
        if (grid.mask[i] == Cell::FLUID) vmax = std::max(vmax, std::abs(data[i]));
    }
    if (vmax <= 0.0) vmax = 1.0;
    std::vector<unsigned char> rgb(static_cast<size_t>(grid.nx) * grid.ny * 3);
    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            const size_t src = grid.index(ix, iy);
            const size_t dst = (static_cast<size_t>(grid.ny - 1 - iy) * grid.nx + ix) * 3;
            if (grid.mask[src] == Cell::OBSTACLE) {
                rgb[dst] = rgb[dst + 1] = rgb[dst + 2] = 40;
                continue;
            }
            const double v = std::abs(data[src]) / vmax;
            if (color) {
                const auto c = detail::false_color(v);
                rgb[dst] = c[0];
                rgb[dst + 1] = c[1];
                rgb[dst + 2] = c[2];
            } else {
                const auto g = static_cast<unsigned char>(std::clamp(255.0 * v, 0.0, 255.0));
                rgb[dst] = rgb[dst + 1] = rgb[dst + 2] = g;
            }
        }
    }
    return rgb;
}

}  // namespace driftsearch
