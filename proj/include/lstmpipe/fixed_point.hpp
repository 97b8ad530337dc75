#pragma once

#include <cstdint>
#include <string>

namespace lstmpipe {

// Two's-complement fixed-point format: word_bits total (including sign),
// frac_bits fractional. A raw integer r encodes the real value r * 2^-frac_bits.
struct FixedFormat {
    int word_bits = 16;
    int frac_bits = 12;

    bool valid() const { return frac_bits >= 1 && word_bits > frac_bits && word_bits <= 64; }
    std::int64_t raw_min() const { return -(std::int64_t(1) << (word_bits - 1)); }
    std::int64_t raw_max() const { return (std::int64_t(1) << (word_bits - 1)) - 1; }
    double lsb() const;     // 2^-frac_bits
    double min_value() const { return double(raw_min()) * lsb(); }
    double max_value() const { return double(raw_max()) * lsb(); }
    std::string to_string() const;  // e.g. "Q4.12" (integer bits count the sign bit's weight)

    friend bool operator==(const FixedFormat&, const FixedFormat&) = default;
};

struct FixedValue {
    std::int64_t raw = 0;
    FixedFormat fmt;

    double to_double() const { return double(raw) * fmt.lsb(); }
};

// Round-to-nearest-even of value / 2^shift (shift >= 0), exact in integers.
std::int64_t rne_shift(__int128 value, int shift);

// Clamp a wide intermediate to the representable raw range of fmt.
std::int64_t saturate_raw(__int128 raw, const FixedFormat& fmt, bool* saturated = nullptr);

// Round-to-nearest-even quantization of a real number, saturating at the
// format limits. If `saturated` is non-null it is set accordingly.
FixedValue quantize(double x, const FixedFormat& fmt, bool* saturated = nullptr);

inline double dequantize(const FixedValue& v) { return v.to_double(); }

// Exact integer product rescaled to out_fmt (round-to-nearest-even, saturating).
FixedValue fx_mul(const FixedValue& a, const FixedValue& b, const FixedFormat& out_fmt);

// Saturating addition; both operands must share a format.
FixedValue fx_add(const FixedValue& a, const FixedValue& b);

}  // namespace lstmpipe
