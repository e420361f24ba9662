#include "proreg/serialize.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <fstream>

namespace proreg {

void ByteWriter::u8(std::uint8_t v) { m_data.push_back(v); }

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) m_data.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) m_data.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::bytes(std::span<const unsigned char> b) {
    m_data.insert(m_data.end(), b.begin(), b.end());
}

void ByteReader::need(std::size_t n) {
    if (m_bytes.size() - m_pos < n) {
        throw TruncationError("byte stream ends early (needed " + std::to_string(n) +
                              " more bytes at offset " + std::to_string(m_pos) + ")");
    }
}

std::uint8_t ByteReader::u8() {
    need(1);
    return m_bytes[m_pos++];
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(m_bytes[m_pos + i]) << (8 * i);
    m_pos += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(m_bytes[m_pos + i]) << (8 * i);
    m_pos += 8;
    return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

void ByteReader::expect_end(std::string_view what) const {
    if (m_pos != m_bytes.size()) {
        throw FormatError(std::string(what) + ": " + std::to_string(m_bytes.size() - m_pos) +
                          " trailing bytes");
    }
}

std::uint32_t crc32_of(std::span<const unsigned char> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        uInt chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
        crc = ::crc32(crc, bytes.data() + pos, chunk);
        pos += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad()) throw FormatError("read failed: " + path);
    return bytes;
}

void write_file(const std::string& path, std::span<const unsigned char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + path);
}

std::vector<unsigned char> seal_envelope(std::string_view magic4, std::uint32_t version,
                                         std::span<const unsigned char> body) {
    if (magic4.size() != 4) throw std::invalid_argument("seal_envelope: magic must be 4 bytes");
    ByteWriter w;
    for (char c : magic4) w.u8(static_cast<std::uint8_t>(c));
    w.u32(version);
    w.u32(crc32_of(body));
    w.bytes(body);
    return w.take();
}

Envelope open_envelope(std::string_view magic4, std::uint32_t min_version,
                       std::uint32_t max_version, std::span<const unsigned char> file) {
    if (magic4.size() != 4) throw std::invalid_argument("open_envelope: magic must be 4 bytes");
    if (file.size() < 12) {
        throw TruncationError("file shorter than the 12-byte envelope header");
    }
    for (std::size_t i = 0; i < 4; ++i) {
        if (file[i] != static_cast<unsigned char>(magic4[i])) {
            throw FormatError("bad magic, expected '" + std::string(magic4) + "'");
        }
    }
    ByteReader head(file.subspan(4, 8));
    std::uint32_t version = head.u32();
    std::uint32_t stored_crc = head.u32();
    if (version < min_version || version > max_version) {
        throw VersionError("unsupported format version " + std::to_string(version) +
                           " (supported " + std::to_string(min_version) + ".." +
                           std::to_string(max_version) + ")");
    }
    std::span<const unsigned char> body = file.subspan(12);
    std::uint32_t actual = crc32_of(body);
    if (actual != stored_crc) {
        throw ChecksumError("checksum mismatch: stored " + std::to_string(stored_crc) +
                            ", computed " + std::to_string(actual));
    }
    return Envelope{version, body};
}

}  // namespace proreg
