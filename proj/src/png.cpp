#include "gavn/image_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gavn::io {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    std::vector<std::uint8_t> bytes(std::size_t(f.tellg()));
    f.seekg(0);
    f.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error("short read: " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::invalid_argument("cannot open file for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error("short write: " + path);
}

namespace {

std::uint32_t crc32_table_entry(std::uint32_t n) {
    for (int k = 0; k < 8; ++k) n = (n & 1) ? 0xedb88320u ^ (n >> 1) : n >> 1;
    return n;
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t crc = 0) {
    static std::uint32_t table[256];
    static bool init = [] {
        for (std::uint32_t i = 0; i < 256; ++i) table[i] = crc32_table_entry(i);
        return true;
    }();
    (void)init;
    crc ^= 0xffffffffu;
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

std::uint32_t adler32(const std::uint8_t* data, std::size_t n) {
    std::uint32_t a = 1, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
    put_u32_be(out, std::uint32_t(data.size()));
    std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    put_u32_be(out, crc32(out.data() + start, out.size() - start));
}

// --- inflate ---------------------------------------------------------------

struct BitReader {
    const std::uint8_t* p;
    std::size_t n, pos = 0;
    std::uint32_t bitbuf = 0;
    int bitcnt = 0;

    BitReader(const std::uint8_t* data, std::size_t len) : p(data), n(len) {}

    int bit() {
        if (bitcnt == 0) {
            if (pos >= n) throw std::runtime_error("inflate: out of input");
            bitbuf = p[pos++];
            bitcnt = 8;
        }
        int b = bitbuf & 1;
        bitbuf >>= 1;
        --bitcnt;
        return b;
    }

    std::uint32_t bits(int count) {
        std::uint32_t v = 0;
        for (int i = 0; i < count; ++i) v |= std::uint32_t(bit()) << i;
        return v;
    }

    void align_byte() { bitcnt = 0; }
};

// Canonical Huffman decoder from code lengths.
struct Huffman {
    std::vector<int> counts, symbols;

    void build(const std::vector<int>& lengths) {
        counts.assign(16, 0);
        for (int l : lengths)
            if (l) counts[std::size_t(l)]++;
        symbols.assign(lengths.size(), 0);
        std::vector<int> offsets(16, 0);
        for (int l = 1; l < 16; ++l) offsets[std::size_t(l)] = offsets[std::size_t(l - 1)] + counts[std::size_t(l - 1)];
        for (std::size_t s = 0; s < lengths.size(); ++s)
            if (lengths[s]) symbols[std::size_t(offsets[std::size_t(lengths[s])]++)] = int(s);
    }

    int decode(BitReader& br) const {
        int code = 0, first = 0, index = 0;
        for (int len = 1; len < 16; ++len) {
            code |= br.bit();
            int count = counts[std::size_t(len)];
            if (code - first < count) return symbols[std::size_t(index + (code - first))];
            index += count;
            first = (first + count) << 1;
            code <<= 1;
        }
        throw std::runtime_error("inflate: bad Huffman code");
    }
};

const int kLenBase[29] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,  15,  17,  19,  23, 27,
                          31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258};
const int kLenExtra[29] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                           2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
const int kDistBase[30] = {1,    2,    3,    4,    5,    7,     9,     13,    17,   25,
                           33,   49,   65,   97,   129,  193,   257,   385,   513,  769,
                           1025, 1537, 2049, 3073, 4097, 6145,  8193,  12289, 16385, 24577};
const int kDistExtra[30] = {0, 0, 0, 0, 1, 1, 2, 2,  3,  3,  4,  4,  5,  5,  6,
                            6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

void inflate_block(BitReader& br, const Huffman& lit, const Huffman& dist,
                   std::vector<std::uint8_t>& out) {
    for (;;) {
        int sym = lit.decode(br);
        if (sym < 256) {
            out.push_back(std::uint8_t(sym));
        } else if (sym == 256) {
            return;
        } else {
            sym -= 257;
            if (sym >= 29) throw std::runtime_error("inflate: bad length symbol");
            int len = kLenBase[sym] + int(br.bits(kLenExtra[sym]));
            int dsym = dist.decode(br);
            if (dsym >= 30) throw std::runtime_error("inflate: bad distance symbol");
            int d = kDistBase[dsym] + int(br.bits(kDistExtra[dsym]));
            if (std::size_t(d) > out.size()) throw std::runtime_error("inflate: distance too far");
            std::size_t from = out.size() - std::size_t(d);
            for (int i = 0; i < len; ++i) out.push_back(out[from + std::size_t(i)]);
        }
    }
}

std::vector<std::uint8_t> inflate(const std::uint8_t* data, std::size_t n) {
    BitReader br(data, n);
    std::vector<std::uint8_t> out;
    for (;;) {
        int final = br.bit();
        int type = int(br.bits(2));
        if (type == 0) {
            br.align_byte();
            if (br.pos + 4 > br.n) throw std::runtime_error("inflate: truncated stored block");
            int len = br.p[br.pos] | (br.p[br.pos + 1] << 8);
            int nlen = br.p[br.pos + 2] | (br.p[br.pos + 3] << 8);
            br.pos += 4;
            if ((len ^ 0xffff) != nlen) throw std::runtime_error("inflate: stored length check failed");
            if (br.pos + std::size_t(len) > br.n) throw std::runtime_error("inflate: truncated stored data");
            out.insert(out.end(), br.p + br.pos, br.p + br.pos + len);
            br.pos += std::size_t(len);
        } else if (type == 1) {
            static Huffman fixed_lit, fixed_dist;
            static bool init = [] {
                std::vector<int> ll(288);
                for (int i = 0; i < 144; ++i) ll[std::size_t(i)] = 8;
                for (int i = 144; i < 256; ++i) ll[std::size_t(i)] = 9;
                for (int i = 256; i < 280; ++i) ll[std::size_t(i)] = 7;
                for (int i = 280; i < 288; ++i) ll[std::size_t(i)] = 8;
                fixed_lit.build(ll);
                fixed_dist.build(std::vector<int>(30, 5));
                return true;
            }();
            (void)init;
            inflate_block(br, fixed_lit, fixed_dist, out);
        } else if (type == 2) {
            int hlit = int(br.bits(5)) + 257;
            int hdist = int(br.bits(5)) + 1;
            int hclen = int(br.bits(4)) + 4;
            static const int order[19] = {16, 17, 18, 0, 8, 7, 9, 6, 10, 5, 11, 4, 12, 3, 13, 2, 14, 1, 15};
            std::vector<int> cl_lengths(19, 0);
            for (int i = 0; i < hclen; ++i) cl_lengths[std::size_t(order[i])] = int(br.bits(3));
            Huffman cl;
            cl.build(cl_lengths);
            std::vector<int> lengths;
            lengths.reserve(std::size_t(hlit + hdist));
            while (int(lengths.size()) < hlit + hdist) {
                int sym = cl.decode(br);
                if (sym < 16) {
                    lengths.push_back(sym);
                } else if (sym == 16) {
                    if (lengths.empty()) throw std::runtime_error("inflate: bad repeat");
                    int rep = 3 + int(br.bits(2));
                    lengths.insert(lengths.end(), std::size_t(rep), lengths.back());
                } else if (sym == 17) {
                    lengths.insert(lengths.end(), 3 + br.bits(3), 0);
                } else {
                    lengths.insert(lengths.end(), 11 + br.bits(7), 0);
                }
            }
            Huffman lit, dist;
            lit.build(std::vector<int>(lengths.begin(), lengths.begin() + hlit));
            dist.build(std::vector<int>(lengths.begin() + hlit, lengths.end()));
            inflate_block(br, lit, dist, out);
        } else {
            throw std::runtime_error("inflate: reserved block type");
        }
        if (final) break;
    }
    return out;
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

}  // namespace

std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& in) {
    if (in.size() < 6) throw std::runtime_error("zlib: stream too short");
    if ((in[0] & 0x0f) != 8) throw std::runtime_error("zlib: not deflate");
    return inflate(in.data() + 2, in.size() - 6);
}

void write_png_rgb8(const std::string& path, const ImageU8& img) {
    if (img.channels != 3 || img.h <= 0 || img.w <= 0)
        throw std::invalid_argument("write_png_rgb8: expects positive RGB image");

    // filter 0 on every scanline
    std::vector<std::uint8_t> raw;
    raw.reserve(std::size_t(img.h) * (std::size_t(img.w) * 3 + 1));
    for (int y = 0; y < img.h; ++y) {
        raw.push_back(0);
        const std::uint8_t* row = img.pix.data() + std::size_t(y) * img.w * 3;
        raw.insert(raw.end(), row, row + std::size_t(img.w) * 3);
    }

    // zlib with stored deflate blocks
    std::vector<std::uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    std::size_t off = 0;
    do {
        std::size_t blk = std::min<std::size_t>(65535, raw.size() - off);
        bool last = off + blk == raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(std::uint8_t(blk & 0xff));
        z.push_back(std::uint8_t(blk >> 8));
        z.push_back(std::uint8_t(~blk & 0xff));
        z.push_back(std::uint8_t((~blk >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + std::ptrdiff_t(off), raw.begin() + std::ptrdiff_t(off + blk));
        off += blk;
    } while (off < raw.size());
    put_u32_be(z, adler32(raw.data(), raw.size()));

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, std::uint32_t(img.w));
    put_u32_be(ihdr, std::uint32_t(img.h));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", z);
    append_chunk(out, "IEND", {});
    write_file_bytes(path, out);
}

ImageU8 read_png(const std::string& path) {
    std::vector<std::uint8_t> bytes = read_file_bytes(path);
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw std::runtime_error("read_png: not a PNG file: " + path);

    int w = 0, h = 0, depth = 0, color = 0, interlace = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        std::uint32_t len = get_u32_be(&bytes[pos]);
        std::string type(bytes.begin() + std::ptrdiff_t(pos + 4), bytes.begin() + std::ptrdiff_t(pos + 8));
        if (pos + 8 + len + 4 > bytes.size()) throw std::runtime_error("read_png: truncated chunk");
        const std::uint8_t* data = &bytes[pos + 8];
        if (type == "IHDR") {
            w = int(get_u32_be(data));
            h = int(get_u32_be(data + 4));
            depth = data[8];
            color = data[9];
            interlace = data[12];
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 8 + len + 4;
    }
    if (w <= 0 || h <= 0) throw std::runtime_error("read_png: missing IHDR");
    if (depth != 8) throw std::runtime_error("read_png: only 8-bit depth supported");
    if (interlace != 0) throw std::runtime_error("read_png: interlaced PNG not supported");
    int nch;
    switch (color) {
        case 0: nch = 1; break;
        case 2: nch = 3; break;
        case 6: nch = 4; break;
        default: throw std::runtime_error("read_png: unsupported color type");
    }

    std::vector<std::uint8_t> raw = zlib_inflate(idat);
    std::size_t stride = std::size_t(w) * std::size_t(nch);
    if (raw.size() != (stride + 1) * std::size_t(h))
        throw std::runtime_error("read_png: decompressed size mismatch");

    // undo per-scanline filters
    std::vector<std::uint8_t> flat(stride * std::size_t(h));
    for (int y = 0; y < h; ++y) {
        int filter = raw[std::size_t(y) * (stride + 1)];
        const std::uint8_t* src = &raw[std::size_t(y) * (stride + 1) + 1];
        std::uint8_t* dst = &flat[std::size_t(y) * stride];
        const std::uint8_t* up = y > 0 ? &flat[std::size_t(y - 1) * stride] : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            int a = i >= std::size_t(nch) ? dst[i - std::size_t(nch)] : 0;
            int b = up ? up[i] : 0;
            int c = (up && i >= std::size_t(nch)) ? up[i - std::size_t(nch)] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw std::runtime_error("read_png: bad filter type");
            }
            dst[i] = std::uint8_t(v & 0xff);
        }
    }

    ImageU8 img;
    img.h = h;
    img.w = w;
    img.channels = 3;
    img.pix.resize(std::size_t(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::uint8_t* s = &flat[std::size_t(y) * stride + std::size_t(x) * std::size_t(nch)];
            std::uint8_t* d = &img.pix[(std::size_t(y) * w + x) * 3];
            if (nch == 1) {
                d[0] = d[1] = d[2] = s[0];
            } else {
                d[0] = s[0];
                d[1] = s[1];
                d[2] = s[2];
            }
        }
    return img;
}

}  // namespace gavn::io
