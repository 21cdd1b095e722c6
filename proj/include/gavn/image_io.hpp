#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gavn::io {

// Interleaved 8-bit image, row-major (h, w, channels).
struct ImageU8 {
    int h = 0, w = 0, channels = 0;
    std::vector<std::uint8_t> pix;

    std::uint8_t& at(int y, int x, int c) {
        return pix[(std::size_t(y) * w + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return pix[(std::size_t(y) * w + x) * channels + c];
    }
};

// Writes an 8-bit RGB PNG (color type 2, no interlace). The zlib stream uses
// stored deflate blocks, so output bytes are a pure function of the pixels.
void write_png_rgb8(const std::string& path, const ImageU8& img);

// Reads an 8-bit PNG (gray, RGB or RGBA; gray is expanded, alpha dropped).
ImageU8 read_png(const std::string& path);

// Mono 32-bit float WAV. Sample bits round-trip exactly.
void write_wav_f32(const std::string& path, const std::vector<float>& samples, int sample_rate);
std::vector<float> read_wav_f32(const std::string& path, int* sample_rate = nullptr);

std::string sha256_hex(const std::uint8_t* data, std::size_t n);
std::string sha256_file_hex(const std::string& path);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

// zlib-format decompression (RFC 1950/1951: stored, fixed and dynamic
// Huffman blocks). Exposed for tests.
std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& in);

}  // namespace gavn::io
