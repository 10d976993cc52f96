#include "pnpdm/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "pnpdm/error.hpp"

namespace pnpdm::io {
namespace {

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InvalidInput("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw InvalidInput("cannot create " + path.string());
    return out;
}

// Next whitespace-delimited token of a PNM header, skipping '#' comments.
std::string pnm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty())
                return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty())
        throw InvalidInput("truncated PGM header");
    return tok;
}

std::size_t parse_dim(const std::string& tok, const char* what) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(tok, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != tok.size() || v == 0)
        throw InvalidInput(std::string("bad ") + what + " '" + tok + "'");
    return static_cast<std::size_t>(v);
}

} // namespace

void write_raster(std::ostream& out, const ImageGrid& img) {
    out << "IMGF32 " << img.width() << ' ' << img.height() << '\n';
    std::string bytes(img.size() * 4, '\0');
    for (std::size_t i = 0; i < img.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(img.data()[i]));
        for (int b = 0; b < 4; ++b)
            bytes[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error("failed writing raster");
}

ImageGrid read_raster(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw InvalidInput("empty raster");
    std::istringstream header(line);
    std::string magic, w, h, extra;
    header >> magic >> w >> h;
    if (magic != "IMGF32" || w.empty() || h.empty() || (header >> extra))
        throw InvalidInput("bad raster header '" + line + "'");
    const std::size_t width = parse_dim(w, "raster width");
    const std::size_t height = parse_dim(h, "raster height");
    std::string bytes(width * height * 4, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size())
        throw InvalidInput("truncated raster payload");
    std::vector<double> data(width * height);
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
        data[i] = std::bit_cast<float>(bits);
    }
    return ImageGrid(height, width, std::move(data));
}

void write_raster(const std::filesystem::path& path, const ImageGrid& img) {
    auto out = open_out(path);
    write_raster(out, img);
}

ImageGrid read_raster(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_raster(in);
}

void write_pgm(std::ostream& out, const ImageGrid& img, PgmDepth depth) {
    const unsigned maxval = depth == PgmDepth::u8 ? 255u : 65535u;
    out << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
    std::string bytes;
    bytes.reserve(img.size() * (depth == PgmDepth::u8 ? 1 : 2));
    for (double v : img.data()) {
        // nearbyint rounds half to even under the default rounding mode
        const auto q = static_cast<unsigned>(std::nearbyint(std::clamp(v, 0.0, 1.0) * maxval));
        if (depth == PgmDepth::u16)
            bytes.push_back(static_cast<char>(q >> 8));
        bytes.push_back(static_cast<char>(q & 0xffu));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error("failed writing PGM");
}

ImageGrid read_pgm(std::istream& in) {
    if (pnm_token(in) != "P5")
        throw InvalidInput("not a binary PGM (P5)");
    const std::size_t width = parse_dim(pnm_token(in), "PGM width");
    const std::size_t height = parse_dim(pnm_token(in), "PGM height");
    const std::size_t maxval = parse_dim(pnm_token(in), "PGM maxval");
    if (maxval > 65535)
        throw InvalidInput("PGM maxval out of range");
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    std::string bytes(width * height * bpp, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size())
        throw InvalidInput("truncated PGM payload");
    std::vector<double> data(width * height);
    for (std::size_t i = 0; i < data.size(); ++i) {
        unsigned q = static_cast<unsigned char>(bytes[bpp * i]);
        if (bpp == 2)
            q = (q << 8) | static_cast<unsigned char>(bytes[bpp * i + 1]);
        data[i] = static_cast<double>(q) / static_cast<double>(maxval);
    }
    return ImageGrid(height, width, std::move(data));
}

void write_pgm(const std::filesystem::path& path, const ImageGrid& img, PgmDepth depth) {
    auto out = open_out(path);
    write_pgm(out, img, depth);
}

ImageGrid read_pgm(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_pgm(in);
}

ImageGrid read_image(const std::filesystem::path& path) {
    return path.extension() == ".pgm" ? read_pgm(path) : read_raster(path);
}

} // namespace pnpdm::io
