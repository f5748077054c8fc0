#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "robotseg/imaging.hpp"

namespace robotseg {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

// Decoded 8-bit rows, channels in {1, 3}.
struct RawPng {
    std::size_t height = 0, width = 0, channels = 0;
    std::vector<std::uint8_t> data;
};

RawPng read_png(const std::string& path, bool mask_strict) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open: " + path);
    png_byte header[8];
    if (std::fread(header, 1, 8, f.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
        throw IoError("not a PNG file: " + path);

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("libpng init failed: " + path);
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("libpng init failed: " + path);
    if (setjmp(png_jmpbuf(r.png))) throw IoError("corrupt PNG: " + path);

    png_init_io(r.png, f.get());
    png_set_sig_bytes(r.png, 8);
    png_read_info(r.png, r.info);

    png_uint_32 w, h;
    int bit_depth, color_type;
    png_get_IHDR(r.png, r.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    if (mask_strict) {
        if (bit_depth != 8 || color_type != PNG_COLOR_TYPE_GRAY)
            throw IoError("mask must be an 8-bit grayscale PNG: " + path);
    } else {
        if (bit_depth == 16) png_set_strip_16(r.png);
        if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
        if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
        if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
        if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
        if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(r.png);
    }
    png_read_update_info(r.png, r.info);

    std::size_t channels = png_get_channels(r.png, r.info);
    if (channels != 1 && channels != 3) throw IoError("unsupported PNG channel count: " + path);

    RawPng out;
    out.height = h;
    out.width = w;
    out.channels = channels;
    out.data.resize(static_cast<std::size_t>(h) * w * channels);
    std::vector<png_bytep> rows(h);
    for (std::size_t y = 0; y < h; ++y) rows[y] = out.data.data() + y * w * channels;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return out;
}

void write_png(const std::string& path, std::size_t h, std::size_t w, std::size_t channels,
               const std::vector<std::uint8_t>& data) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot open for write: " + path);
    PngWriter wr;
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!wr.png) throw IoError("libpng init failed: " + path);
    wr.info = png_create_info_struct(wr.png);
    if (!wr.info) throw IoError("libpng init failed: " + path);
    if (setjmp(png_jmpbuf(wr.png))) throw IoError("PNG write failed: " + path);

    png_init_io(wr.png, f.get());
    int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    std::vector<png_bytep> rows(h);
    for (std::size_t y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(data.data() + y * w * channels);
    png_write_image(wr.png, rows.data());
    png_write_end(wr.png, nullptr);
}

Image load_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw IoError("not a P6 PPM file: " + path);
    auto next_int = [&]() {
        // Skip whitespace and '#' comments between header fields.
        int c;
        while ((c = f.peek()) != EOF) {
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
        long v = -1;
        f >> v;
        if (!f || v < 0) throw IoError("malformed PPM header: " + path);
        return static_cast<std::size_t>(v);
    };
    std::size_t w = next_int(), h = next_int(), maxval = next_int();
    if (maxval != 255) throw IoError("PPM maxval must be 255: " + path);
    f.get();  // single whitespace after header
    std::vector<std::uint8_t> buf(h * w * 3);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("truncated PPM: " + path);
    Image img = make_image(h, w, 3);
    for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0;
    return img;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

BinaryMask load_mask(const std::string& path) {
    RawPng raw = read_png(path, true);
    BinaryMask mask(raw.height, raw.width);
    for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = raw.data[i] > 127 ? 1 : 0;
    return mask;
}

void save_mask(const BinaryMask& mask, const std::string& path) {
    std::vector<std::uint8_t> buf(mask.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = mask.data[i] ? 255 : 0;
    write_png(path, mask.height, mask.width, 1, buf);
}

Image load_image(const std::string& path) {
    if (ends_with(path, ".ppm")) return load_ppm(path);
    RawPng raw = read_png(path, false);
    Image img = make_image(raw.height, raw.width, raw.channels);
    for (std::size_t i = 0; i < raw.data.size(); ++i) img.data[i] = raw.data[i] / 255.0;
    return img;
}

void save_image_png(const Image& img, const std::string& path) {
    std::vector<std::uint8_t> buf(img.data.size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
        double v = std::min(1.0, std::max(0.0, img.data[i]));
        buf[i] = static_cast<std::uint8_t>(v * 255.0 + 0.5);
    }
    write_png(path, img.height, img.width, img.channels, buf);
}

}  // namespace robotseg
