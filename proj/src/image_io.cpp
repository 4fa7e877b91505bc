#include "fracgrad/image_io.hpp"

#include "fracgrad/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace fracgrad {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_png_signature(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

Image read_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw FormatError(path.string() + ": " + img.message);
    img.format = (img.format & PNG_FORMAT_FLAG_COLOR) ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw FormatError(path.string() + ": " + msg);
    }
    Image out;
    out.width = img.width;
    out.height = img.height;
    out.channels = PNG_IMAGE_PIXEL_CHANNELS(img.format);
    out.pixels.resize(buffer.size());
    std::transform(buffer.begin(), buffer.end(), out.pixels.begin(), [](png_byte b) { return b / 255.0; });
    return out;
}

std::string next_pgm_token(std::istream& in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
            if (!tok.empty()) break;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) break;
            continue;
        }
        tok += c;
    }
    return tok;
}

Image read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string() + ": cannot open");
    const std::string magic = next_pgm_token(in);
    if (magic != "P5" && magic != "P2") throw FormatError(path.string() + ": unsupported image format");
    std::size_t w = 0, h = 0;
    long maxval = 0;
    try {
        w = std::stoul(next_pgm_token(in));
        h = std::stoul(next_pgm_token(in));
        maxval = std::stol(next_pgm_token(in));
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": malformed PGM header");
    }
    if (w == 0 || h == 0 || maxval <= 0 || maxval > 65535) throw FormatError(path.string() + ": malformed PGM header");

    Image out{w, h, 1, std::vector<double>(w * h)};
    const double scale = 1.0 / static_cast<double>(maxval);
    if (magic == "P5") {
        const std::size_t bytes = maxval < 256 ? 1 : 2;
        std::vector<unsigned char> raw(w * h * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw FormatError(path.string() + ": truncated PGM data");
        for (std::size_t i = 0; i < w * h; ++i) {
            const unsigned v = bytes == 1 ? raw[i] : (raw[2 * i] << 8u) | raw[2 * i + 1];
            out.pixels[i] = std::min(1.0, v * scale);
        }
    } else {
        for (std::size_t i = 0; i < w * h; ++i) {
            const std::string tok = next_pgm_token(in);
            if (tok.empty()) throw FormatError(path.string() + ": truncated PGM data");
            out.pixels[i] = std::min(1.0, std::stol(tok) * scale);
        }
    }
    return out;
}

} // namespace

Image read_image(const std::filesystem::path& path) {
    if (has_png_signature(path)) return read_png(path);
    return read_pgm(path);
}

Image to_luma(const Image& image) {
    if (image.channels == 1) return image;
    // Gray+alpha and RGBA drop the alpha channel.
    const std::size_t colour = (image.channels == 2 || image.channels == 4) ? image.channels - 1 : image.channels;
    Image out{image.width, image.height, 1, std::vector<double>(image.width * image.height)};
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < colour; ++c) acc += image.pixels[i * image.channels + c];
        out.pixels[i] = acc / static_cast<double>(colour);
    }
    return out;
}

Image resize_bilinear(const Image& image, std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) throw ArgumentError("resize target must be non-empty");
    if (image.width == 0 || image.height == 0) throw FormatError("cannot resize an empty image");
    Image out{width, height, image.channels, std::vector<double>(width * height * image.channels)};
    const double sx = static_cast<double>(image.width) / static_cast<double>(width);
    const double sy = static_cast<double>(image.height) / static_cast<double>(height);
    auto sample_axis = [](double pos, std::size_t n, std::size_t& i0, std::size_t& i1, double& t) {
        pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
        i0 = static_cast<std::size_t>(std::floor(pos));
        i1 = std::min(i0 + 1, n - 1);
        t = pos - static_cast<double>(i0);
    };
    for (std::size_t y = 0; y < height; ++y) {
        std::size_t y0, y1;
        double ty;
        sample_axis((static_cast<double>(y) + 0.5) * sy - 0.5, image.height, y0, y1, ty);
        for (std::size_t x = 0; x < width; ++x) {
            std::size_t x0, x1;
            double tx;
            sample_axis((static_cast<double>(x) + 0.5) * sx - 0.5, image.width, x0, x1, tx);
            for (std::size_t c = 0; c < image.channels; ++c) {
                auto at = [&](std::size_t yy, std::size_t xx) {
                    return image.pixels[(yy * image.width + xx) * image.channels + c];
                };
                const double top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * tx;
                const double bottom = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * tx;
                const double v = top + (bottom - top) * ty;
                out.pixels[(y * width + x) * image.channels + c] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

void write_png_gray(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 1) throw ArgumentError("write_png_gray expects a single-channel image");
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_GRAY;
    std::vector<png_byte> buffer(image.pixels.size());
    std::transform(image.pixels.begin(), image.pixels.end(), buffer.begin(),
                   [](double v) { return static_cast<png_byte>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); });
    if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr))
        throw FormatError(path.string() + ": " + img.message);
}

} // namespace fracgrad
