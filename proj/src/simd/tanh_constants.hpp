#pragma once

// Shared constants for the tanh kernels. Every variant evaluates the same
// operation sequence (no fused multiply-add), so results match bit for bit.
//
//   a = |x|
//   a < kSmall:  a + (a * z) * P(z), z = a * a, P the Taylor series in z
//   otherwise:   (1 - e) / (1 + e), e = exp(-2 * min(a, kClamp))
//
// exp uses round-to-nearest range reduction by ln 2 (split in a high part
// with trailing zero bits and a low correction) and a degree 13 Horner
// polynomial; 2^n is assembled in the exponent field directly.

namespace qgraph::simd::detail::tanh_constants {

inline constexpr double kSmall = 0.125;
inline constexpr double kClamp = 20.0;

// tanh(a) = a + a z (c3 + c5 z + c7 z^2 + ...)
inline constexpr double kTaylor[] = {
    0x1.3558248036744p-11,   // x^17
    -0x1.7da36452b75e3p-10,  // x^15
    0x1.d6d3d0e157de0p-9,    // x^13
    -0x1.226e355e6c23dp-7,   // x^11
    0x1.664f4882c10fap-6,    // x^9
    -0x1.ba1ba1ba1ba1cp-5,   // x^7
    0x1.1111111111111p-3,    // x^5
    -0x1.5555555555555p-2,   // x^3
};

inline constexpr double kInvLn2 = 0x1.71547652b82fep+0;
inline constexpr double kLn2Hi = 0x1.62e42fee00000p-1;
inline constexpr double kLn2Lo = 0x1.a39ef35793c76p-33;
// 1.5 * 2^52: adding it rounds to an integer held in the low mantissa bits.
inline constexpr double kShifter = 0x1.8p52;

// 1/k!, k = 13 down to 0.
inline constexpr double kExp[] = {
    1.6059043836821613e-10, 2.08767569878681e-09,  2.505210838544172e-08,
    2.755731922398589e-07,  2.7557319223985893e-06, 2.48015873015873e-05,
    0.0001984126984126984,  0.001388888888888889,  0.008333333333333333,
    0.041666666666666664,   0.16666666666666666,   0.5,
    1.0,                    1.0,
};

}  // namespace qgraph::simd::detail::tanh_constants
