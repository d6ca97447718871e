#pragma once

#include <array>
#include <cstdint>

namespace tsa::detail {

// Primitive polynomials (bit-encoded, LSB = constant term) and initial
// direction values m_k for the first 40 Sobol dimensions, standard
// Joe-Kuo table. Dimension 1 is the plain van der Corput sequence.
struct SobolDim {
  std::uint32_t poly;
  std::uint32_t degree;
  std::array<std::uint32_t, 18> m_init;  // first `degree` entries used
};

inline constexpr std::array<SobolDim, 40> kSobolDims = {{
    {1u, 1u, {{1u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {3u, 1u, {{1u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {7u, 2u, {{1u, 3u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {11u, 3u, {{1u, 3u, 1u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {13u, 3u, {{1u, 1u, 1u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {19u, 4u, {{1u, 1u, 3u, 3u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {25u, 4u, {{1u, 3u, 5u, 13u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {37u, 5u, {{1u, 1u, 5u, 5u, 17u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {41u, 5u, {{1u, 1u, 5u, 5u, 5u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {47u, 5u, {{1u, 1u, 7u, 11u, 19u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {55u, 5u, {{1u, 1u, 5u, 1u, 1u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {59u, 5u, {{1u, 1u, 1u, 3u, 11u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {61u, 5u, {{1u, 3u, 5u, 5u, 31u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {67u, 6u, {{1u, 3u, 3u, 9u, 7u, 49u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {91u, 6u, {{1u, 1u, 1u, 15u, 21u, 21u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {97u, 6u, {{1u, 3u, 1u, 13u, 27u, 49u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {103u, 6u, {{1u, 1u, 1u, 15u, 7u, 5u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {109u, 6u, {{1u, 3u, 1u, 15u, 13u, 25u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {115u, 6u, {{1u, 1u, 5u, 5u, 19u, 61u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {131u, 7u, {{1u, 3u, 7u, 11u, 23u, 15u, 103u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {137u, 7u, {{1u, 3u, 7u, 13u, 13u, 15u, 69u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {143u, 7u, {{1u, 1u, 3u, 13u, 7u, 35u, 63u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {145u, 7u, {{1u, 3u, 5u, 9u, 1u, 25u, 53u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {157u, 7u, {{1u, 3u, 1u, 13u, 9u, 35u, 107u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {167u, 7u, {{1u, 3u, 1u, 5u, 27u, 61u, 31u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {171u, 7u, {{1u, 1u, 5u, 11u, 19u, 41u, 61u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {185u, 7u, {{1u, 3u, 5u, 3u, 3u, 13u, 69u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {191u, 7u, {{1u, 1u, 7u, 13u, 1u, 19u, 1u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {193u, 7u, {{1u, 3u, 7u, 5u, 13u, 19u, 59u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {203u, 7u, {{1u, 1u, 3u, 9u, 25u, 29u, 41u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {211u, 7u, {{1u, 3u, 5u, 13u, 23u, 1u, 55u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {213u, 7u, {{1u, 3u, 7u, 3u, 13u, 59u, 17u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {229u, 7u, {{1u, 3u, 1u, 3u, 5u, 53u, 69u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {239u, 7u, {{1u, 1u, 5u, 5u, 23u, 33u, 13u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {241u, 7u, {{1u, 1u, 7u, 7u, 1u, 61u, 123u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {247u, 7u, {{1u, 1u, 7u, 9u, 13u, 61u, 49u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {253u, 7u, {{1u, 3u, 3u, 5u, 3u, 55u, 33u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {285u, 8u, {{1u, 3u, 1u, 15u, 31u, 13u, 49u, 245u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {299u, 8u, {{1u, 3u, 5u, 15u, 31u, 59u, 63u, 97u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
    {301u, 8u, {{1u, 3u, 1u, 11u, 11u, 11u, 77u, 249u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u, 0u}}},
}};

}  // namespace tsa::detail
