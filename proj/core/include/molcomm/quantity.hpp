#pragma once

#include "molcomm/channel.hpp"

#include <string_view>

namespace molcomm {

enum class Dimension { Length, Time, Diffusivity, Rate, Speed, Count };

Dimension dimension_of(ParamId id);

/// Parses "6", "6e-6", "6 um" or "0.006 mm" into SI base units. A suffixed
/// value is rescaled by shifting its decimal exponent before conversion, so
/// equal quantities written in different units give the same double.
/// Throws ConfigError on a malformed number or a unit of the wrong dimension.
double parse_quantity(std::string_view text, Dimension dim);

} // namespace molcomm
