#ifndef HPDNET_BINARY_IO_HPP
#define HPDNET_BINARY_IO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "hpdnet/errors.hpp"

namespace hpdnet {

// Little-endian binary file reader that tracks its byte offset so parse
// errors can point at the exact position.
class BinaryReader {
public:
    explicit BinaryReader(const std::string& path)
        : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open " + path + " for reading");
    }

    std::size_t offset() const { return off_; }

    void raw(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n))
            throw FormatError(path_ + ": unexpected end of file", off_);
        off_ += n;
    }

    std::uint8_t u8() {
        std::uint8_t b;
        raw(&b, 1);
        return b;
    }
    std::uint16_t u16() { return le<std::uint16_t, 2>(); }
    std::uint32_t u32() { return le<std::uint32_t, 4>(); }
    std::uint64_t u64() { return le<std::uint64_t, 8>(); }

    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    // Discards n bytes (skipping unknown length-prefixed sections).
    void skip(std::size_t n) {
        char buf[4096];
        while (n > 0) {
            const std::size_t take = n < sizeof(buf) ? n : sizeof(buf);
            in_.read(buf, static_cast<std::streamsize>(take));
            if (in_.gcount() != static_cast<std::streamsize>(take))
                throw FormatError(path_ + ": unexpected end of file", off_);
            off_ += take;
            n -= take;
        }
    }

    // Rejects trailing bytes beyond the expected payload.
    void expect_eof() {
        char c;
        in_.read(&c, 1);
        if (in_.gcount() != 0)
            throw FormatError(path_ + ": trailing bytes after payload", off_);
    }

private:
    template <typename T, int N>
    T le() {
        std::uint8_t b[N];
        raw(b, N);
        T v = 0;
        for (int i = N - 1; i >= 0; --i) v = static_cast<T>((v << 8) | b[i]);
        return v;
    }

    std::string path_;
    std::ifstream in_;
    std::size_t off_ = 0;
};

// Matching little-endian writer.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("cannot open " + path + " for writing");
    }

    std::size_t offset() const { return off_; }

    void raw(const void* src, std::size_t n) {
        out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
        if (!out_) throw IoError(path_ + ": write failed");
        off_ += n;
    }

    void u8(std::uint8_t v) { raw(&v, 1); }
    void u16(std::uint16_t v) { le<std::uint16_t, 2>(v); }
    void u32(std::uint32_t v) { le<std::uint32_t, 4>(v); }
    void u64(std::uint64_t v) { le<std::uint64_t, 8>(v); }

    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }

    void close() {
        out_.close();
        if (!out_) throw IoError(path_ + ": close failed");
    }

private:
    template <typename T, int N>
    void le(T v) {
        std::uint8_t b[N];
        for (int i = 0; i < N; ++i) b[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
        raw(b, N);
    }

    std::string path_;
    std::ofstream out_;
    std::size_t off_ = 0;
};

}  // namespace hpdnet

#endif  // HPDNET_BINARY_IO_HPP
