#pragma once

// Little-endian byte (de)serialization shared by the FSDS and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sdnn::io {

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
    void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
    void text(const std::string& s)
    {
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }

    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    template <typename T>
    void put_le(T v)
    {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    std::vector<std::uint8_t> bytes_;
};

/// Reads little-endian values; `on_short` is invoked (and must throw) when the
/// input ends early.
template <typename OnShort>
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, OnShort on_short)
        : bytes_(bytes), on_short_(std::move(on_short))
    {
    }

    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() { return get_le<std::uint16_t>(); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    float f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
    std::span<const std::uint8_t> take(std::size_t n)
    {
        if (bytes_.size() - pos_ < n) {
            on_short_(n, bytes_.size() - pos_);
        }
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::string text(std::size_t n)
    {
        auto span = take(n);
        return std::string(span.begin(), span.end());
    }

    bool done() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    template <typename T>
    T get_le()
    {
        auto span = take(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v = static_cast<T>(v | (static_cast<T>(span[i]) << (8 * i)));
        }
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    OnShort on_short_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace sdnn::io
