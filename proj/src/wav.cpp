#include "gavn/image_io.hpp"

#include <cstring>
#include <stdexcept>

namespace gavn::io {

namespace {

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 24));
}

void put_u16_le(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
}

std::uint32_t get_u32_le(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

std::uint16_t get_u16_le(const std::uint8_t* p) {
    return std::uint16_t(p[0] | (p[1] << 8));
}

}  // namespace

void write_wav_f32(const std::string& path, const std::vector<float>& samples, int sample_rate) {
    std::uint32_t data_bytes = std::uint32_t(samples.size() * 4);
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32_le(out, 4 + 24 + 8 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    put_u32_le(out, 16);
    put_u16_le(out, 3);  // IEEE float
    put_u16_le(out, 1);  // mono
    put_u32_le(out, std::uint32_t(sample_rate));
    put_u32_le(out, std::uint32_t(sample_rate) * 4);
    put_u16_le(out, 4);
    put_u16_le(out, 32);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32_le(out, data_bytes);
    std::size_t off = out.size();
    out.resize(off + data_bytes);
    std::memcpy(out.data() + off, samples.data(), data_bytes);
    write_file_bytes(path, out);
}

std::vector<float> read_wav_f32(const std::string& path, int* sample_rate) {
    std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw std::runtime_error("read_wav_f32: not a RIFF/WAVE file: " + path);

    std::size_t pos = 12;
    int rate = 0;
    bool have_fmt = false;
    std::vector<float> samples;
    while (pos + 8 <= bytes.size()) {
        std::uint32_t len = get_u32_le(&bytes[pos + 4]);
        if (pos + 8 + len > bytes.size()) throw std::runtime_error("read_wav_f32: truncated chunk");
        if (std::memcmp(&bytes[pos], "fmt ", 4) == 0) {
            if (get_u16_le(&bytes[pos + 8]) != 3 || get_u16_le(&bytes[pos + 10]) != 1 ||
                get_u16_le(&bytes[pos + 22]) != 32)
                throw std::runtime_error("read_wav_f32: expects mono 32-bit float WAV");
            rate = int(get_u32_le(&bytes[pos + 12]));
            have_fmt = true;
        } else if (std::memcmp(&bytes[pos], "data", 4) == 0) {
            samples.resize(len / 4);
            std::memcpy(samples.data(), &bytes[pos + 8], std::size_t(len / 4) * 4);
        }
        pos += 8 + len + (len % 2);
    }
    if (!have_fmt) throw std::runtime_error("read_wav_f32: missing fmt chunk");
    if (sample_rate) *sample_rate = rate;
    return samples;
}

}  // namespace gavn::io
