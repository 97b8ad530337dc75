#include "lstmpipe/fixed_point.hpp"

#include <cassert>
#include <cmath>

#include "lstmpipe/errors.hpp"

namespace lstmpipe {

double FixedFormat::lsb() const { return std::ldexp(1.0, -frac_bits); }

std::string FixedFormat::to_string() const {
    return "Q" + std::to_string(word_bits - frac_bits) + "." + std::to_string(frac_bits);
}

std::int64_t rne_shift(__int128 value, int shift) {
    assert(shift >= 0 && shift < 120);
    if (shift == 0) return std::int64_t(value);
    __int128 q = value >> shift;  // floor division for negative values too
    __int128 r = value - (q << shift);
    __int128 half = __int128(1) << (shift - 1);
    if (r > half || (r == half && (q & 1))) q += 1;
    return std::int64_t(q);
}

std::int64_t saturate_raw(__int128 raw, const FixedFormat& fmt, bool* saturated) {
    __int128 lo = fmt.raw_min(), hi = fmt.raw_max();
    if (saturated) *saturated = false;
    if (raw < lo) {
        if (saturated) *saturated = true;
        return fmt.raw_min();
    }
    if (raw > hi) {
        if (saturated) *saturated = true;
        return fmt.raw_max();
    }
    return std::int64_t(raw);
}

FixedValue quantize(double x, const FixedFormat& fmt, bool* saturated) {
    if (!fmt.valid()) throw SpecError("invalid fixed-point format " + fmt.to_string());
    if (saturated) *saturated = false;
    if (std::isnan(x)) throw SpecError("cannot quantize NaN");

    double scaled = x * std::ldexp(1.0, fmt.frac_bits);
    // Guard the int64 conversion below (also catches +-inf). Word lengths in
    // this project are <= 32 bits, far inside this window.
    if (scaled > 4.6e18) {
        if (saturated) *saturated = true;
        return {fmt.raw_max(), fmt};
    }
    if (scaled < -4.6e18) {
        if (saturated) *saturated = true;
        return {fmt.raw_min(), fmt};
    }

    double fl = std::floor(scaled);
    double frac = scaled - fl;
    std::int64_t r = std::int64_t(fl);
    if (frac > 0.5 || (frac == 0.5 && (r & 1))) r += 1;

    bool sat = false;
    std::int64_t out = saturate_raw(r, fmt, &sat);
    if (saturated) *saturated = sat;
    return {out, fmt};
}

FixedValue fx_mul(const FixedValue& a, const FixedValue& b, const FixedFormat& out_fmt) {
    if (!out_fmt.valid()) throw SpecError("invalid fixed-point format " + out_fmt.to_string());
    __int128 prod = __int128(a.raw) * __int128(b.raw);
    int shift = a.fmt.frac_bits + b.fmt.frac_bits - out_fmt.frac_bits;
    __int128 rescaled;
    if (shift >= 0) {
        rescaled = rne_shift(prod, shift);
    } else {
        rescaled = prod << (-shift);
    }
    return {saturate_raw(rescaled, out_fmt), out_fmt};
}

FixedValue fx_add(const FixedValue& a, const FixedValue& b) {
    if (a.fmt != b.fmt) throw SpecError("fx_add requires matching formats");
    __int128 sum = __int128(a.raw) + __int128(b.raw);
    return {saturate_raw(sum, a.fmt), a.fmt};
}

}  // namespace lstmpipe
