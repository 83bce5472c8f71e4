#include "karyoseg/image_io.h"

#include <png.h>
#include <tiffio.h>

#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace karyoseg {

RgbImage::RgbImage(const GrayImage& gray) : RgbImage(gray.width(), gray.height()) {
    auto src = gray.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        data[i * 3] = data[i * 3 + 1] = data[i * 3 + 2] = src[i];
    }
}

std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

namespace {

bool is_png(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    return bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0;
}

bool is_tiff(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) return false;
    return (bytes[0] == 'I' && bytes[1] == 'I' && bytes[2] == 42 && bytes[3] == 0) ||
           (bytes[0] == 'M' && bytes[1] == 'M' && bytes[2] == 0 && bytes[3] == 42);
}

std::uint8_t over_white(std::uint8_t v, std::uint8_t a) {
    return static_cast<std::uint8_t>((v * a + 255u * (255u - a) + 127u) / 255u);
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        fail(ErrorCode::Decode, std::string("PNG decode failed: ") + image.message);
    image.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
        png_image_free(&image);
        fail(ErrorCode::Decode, std::string("PNG decode failed: ") + image.message);
    }
    const int w = static_cast<int>(image.width);
    const int h = static_cast<int>(image.height);
    if (w < 1 || h < 1) fail(ErrorCode::Decode, "PNG has empty dimensions");
    GrayImage out(w, h);
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const auto* px = &rgba[i * 4];
        dst[i] = over_white(luminance(px[0], px[1], px[2]), px[3]);
    }
    return out;
}

// In-memory TIFF client.
struct TiffSource {
    std::span<const std::uint8_t> bytes;
    toff_t pos = 0;
};

tsize_t tiff_read(thandle_t h, tdata_t buf, tsize_t size) {
    auto* src = static_cast<TiffSource*>(h);
    const auto avail = static_cast<tsize_t>(src->bytes.size()) - static_cast<tsize_t>(src->pos);
    const auto n = std::max<tsize_t>(0, std::min(size, avail));
    if (n > 0) std::memcpy(buf, src->bytes.data() + src->pos, static_cast<std::size_t>(n));
    src->pos += static_cast<toff_t>(n);
    return n;
}
tsize_t tiff_write(thandle_t, tdata_t, tsize_t) { return 0; }
toff_t tiff_seek(thandle_t h, toff_t off, int whence) {
    auto* src = static_cast<TiffSource*>(h);
    switch (whence) {
        case SEEK_SET: src->pos = off; break;
        case SEEK_CUR: src->pos += off; break;
        case SEEK_END: src->pos = src->bytes.size() + off; break;
        default: return static_cast<toff_t>(-1);
    }
    return src->pos;
}
int tiff_close(thandle_t) { return 0; }
toff_t tiff_size(thandle_t h) { return static_cast<TiffSource*>(h)->bytes.size(); }
int tiff_map(thandle_t, tdata_t*, toff_t*) { return 0; }
void tiff_unmap(thandle_t, tdata_t, toff_t) {}

void tiff_silent(const char*, const char*, va_list) {}

struct TiffCloser {
    void operator()(TIFF* t) const { TIFFClose(t); }
};

GrayImage decode_tiff(std::span<const std::uint8_t> bytes) {
    TIFFSetErrorHandler(tiff_silent);
    TIFFSetWarningHandler(tiff_silent);
    TiffSource src{bytes};
    std::unique_ptr<TIFF, TiffCloser> tif(TIFFClientOpen("memory", "rm", &src, tiff_read, tiff_write,
                                                         tiff_seek, tiff_close, tiff_size, tiff_map,
                                                         tiff_unmap));
    if (!tif) fail(ErrorCode::Decode, "TIFF decode failed: cannot open stream");
    std::uint32_t w = 0, h = 0;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
    if (w == 0 || h == 0) fail(ErrorCode::Decode, "TIFF has empty dimensions");
    std::vector<std::uint32_t> raster(static_cast<std::size_t>(w) * h);
    if (!TIFFReadRGBAImageOriented(tif.get(), w, h, raster.data(), ORIENTATION_TOPLEFT, 0))
        fail(ErrorCode::Decode, "TIFF decode failed: unsupported layout");
    GrayImage out(static_cast<int>(w), static_cast<int>(h));
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const auto px = raster[i];
        dst[i] = over_white(luminance(static_cast<std::uint8_t>(TIFFGetR(px)),
                                      static_cast<std::uint8_t>(TIFFGetG(px)),
                                      static_cast<std::uint8_t>(TIFFGetB(px))),
                            static_cast<std::uint8_t>(TIFFGetA(px)));
    }
    return out;
}

std::vector<std::uint8_t> encode_png_raw(int w, int h, std::uint32_t format, const void* data) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w);
    image.height = static_cast<png_uint_32>(h);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr))
        fail(ErrorCode::Io, std::string("PNG encode failed: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr))
        fail(ErrorCode::Io, std::string("PNG encode failed: ") + image.message);
    out.resize(size);
    return out;
}

}  // namespace

GrayImage decode_image(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) return decode_png(bytes);
    if (is_tiff(bytes)) return decode_tiff(bytes);
    fail(ErrorCode::Decode, "unrecognized image format (expected PNG or TIFF)");
}

GrayImage read_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return decode_image(bytes);
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
    return encode_png_raw(img.width(), img.height(), PNG_FORMAT_GRAY, img.data().data());
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    return encode_png_raw(img.width, img.height, PNG_FORMAT_RGB, img.data.data());
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
    write_file(path, encode_png(img));
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
    write_file(path, encode_png(img));
}

void write_tiff(const std::filesystem::path& path, const GrayImage& img) {
    std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.c_str(), "w"));
    if (!tif) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(img.width()));
    TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(img.height()));
    TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, 1);
    TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, 8);
    TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
    TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(img.height()));
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()));
    for (int y = 0; y < img.height(); ++y) {
        auto r = img.row(y);
        std::copy(r.begin(), r.end(), row.begin());
        if (TIFFWriteScanline(tif.get(), row.data(), static_cast<std::uint32_t>(y), 0) < 0)
            fail(ErrorCode::Io, "TIFF write failed for " + path.string());
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace karyoseg
