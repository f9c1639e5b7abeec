#pragma once

#include <numbers>

namespace stasplit::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double mass_rb87 = 1.44316060e-25;  // kg
inline constexpr double lattice_spacing = 5.18e-6;   // m
inline constexpr double lattice_offset = 200e-9;     // m

}  // namespace stasplit::constants
