#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace proreg {

// Error kinds raised by the binary readers. Anything malformed fails loudly;
// a loader never returns a partially filled object.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};
struct VersionError : FormatError {
    explicit VersionError(const std::string& what) : FormatError(what) {}
};
struct ChecksumError : FormatError {
    explicit ChecksumError(const std::string& what) : FormatError(what) {}
};
struct TruncationError : FormatError {
    explicit TruncationError(const std::string& what) : FormatError(what) {}
};

// Little-endian byte sink. Doubles are written as IEEE-754 bit patterns.
class ByteWriter {
public:
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void bytes(std::span<const unsigned char> b);

    const std::vector<unsigned char>& data() const { return m_data; }
    std::vector<unsigned char> take() { return std::move(m_data); }

private:
    std::vector<unsigned char> m_data;
};

// Little-endian byte source over a borrowed buffer. Overruns raise
// TruncationError.
class ByteReader {
public:
    explicit ByteReader(std::span<const unsigned char> bytes) : m_bytes(bytes) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();

    std::size_t remaining() const { return m_bytes.size() - m_pos; }
    // Throws FormatError if any bytes are left unconsumed.
    void expect_end(std::string_view what) const;

private:
    void need(std::size_t n);
    std::span<const unsigned char> m_bytes;
    std::size_t m_pos = 0;
};

// CRC-32 (ISO 3309, the zlib polynomial).
std::uint32_t crc32_of(std::span<const unsigned char> bytes);

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const unsigned char> bytes);

// Shared envelope for every binary format in this project:
//   magic (4 bytes) | version u32 LE | crc32 u32 LE over body | body
// The crc covers the whole body, so corrupting any body byte fails the load;
// the two fields outside the crc are validated by equality (magic) and by the
// supported range (version) and therefore also fail loudly when damaged.
std::vector<unsigned char> seal_envelope(std::string_view magic4, std::uint32_t version,
                                         std::span<const unsigned char> body);

struct Envelope {
    std::uint32_t version = 0;
    std::span<const unsigned char> body;  // view into the caller's buffer
};

Envelope open_envelope(std::string_view magic4, std::uint32_t min_version,
                       std::uint32_t max_version, std::span<const unsigned char> file);

}  // namespace proreg
