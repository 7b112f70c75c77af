#include "molcomm/quantity.hpp"

#include "molcomm/errors.hpp"

#include <array>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <string>

namespace molcomm {

namespace {

struct UnitInfo {
    std::string_view symbol;
    Dimension dim;
    int exponent; // SI value = number * 10^exponent
};

constexpr std::array kUnits{
    UnitInfo{"m", Dimension::Length, 0},          UnitInfo{"cm", Dimension::Length, -2},
    UnitInfo{"mm", Dimension::Length, -3},        UnitInfo{"um", Dimension::Length, -6},
    UnitInfo{"\xC2\xB5m", Dimension::Length, -6}, UnitInfo{"\xCE\xBCm", Dimension::Length, -6},
    UnitInfo{"nm", Dimension::Length, -9},        UnitInfo{"s", Dimension::Time, 0},
    UnitInfo{"ms", Dimension::Time, -3},          UnitInfo{"us", Dimension::Time, -6},
    UnitInfo{"\xC2\xB5s", Dimension::Time, -6},   UnitInfo{"\xCE\xBCs", Dimension::Time, -6},
    UnitInfo{"ns", Dimension::Time, -9},          UnitInfo{"m^2/s", Dimension::Diffusivity, 0},
    UnitInfo{"cm^2/s", Dimension::Diffusivity, -4}, UnitInfo{"mm^2/s", Dimension::Diffusivity, -6},
    UnitInfo{"um^2/s", Dimension::Diffusivity, -12}, UnitInfo{"\xC2\xB5m^2/s", Dimension::Diffusivity, -12},
    UnitInfo{"nm^2/s", Dimension::Diffusivity, -18}, UnitInfo{"1/s", Dimension::Rate, 0},
    UnitInfo{"Hz", Dimension::Rate, 0},           UnitInfo{"1/ms", Dimension::Rate, 3},
    UnitInfo{"m/s", Dimension::Speed, 0},         UnitInfo{"mm/s", Dimension::Speed, -3},
    UnitInfo{"um/s", Dimension::Speed, -6},       UnitInfo{"\xC2\xB5m/s", Dimension::Speed, -6},
    UnitInfo{"1", Dimension::Count, 0},
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_number_char(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E';
}

} // namespace

Dimension dimension_of(ParamId id) {
    switch (id) {
    case ParamId::Distance:
        return Dimension::Length;
    case ParamId::ReleaseTime:
        return Dimension::Time;
    case ParamId::Diffusion:
        return Dimension::Diffusivity;
    case ParamId::Degradation:
        return Dimension::Rate;
    case ParamId::FlowPar:
    case ParamId::FlowPerp:
        return Dimension::Speed;
    case ParamId::NumMolecules:
        return Dimension::Count;
    }
    return Dimension::Count;
}

double parse_quantity(std::string_view text, Dimension dim) {
    const std::string_view whole = trim(text);
    std::size_t split = 0;
    while (split < whole.size() && is_number_char(whole[split])) ++split;
    std::string_view number = whole.substr(0, split);
    const std::string_view unit = trim(whole.substr(split));
    if (number.empty()) throw ConfigError("expected a number in '" + std::string(text) + "'");

    int shift = 0;
    if (!unit.empty()) {
        bool found = false;
        for (const auto& u : kUnits) {
            if (u.symbol != unit) continue;
            if (u.dim != dim) throw ConfigError("unit '" + std::string(unit) + "' has the wrong dimension");
            shift = u.exponent;
            found = true;
            break;
        }
        if (!found) throw ConfigError("unknown unit '" + std::string(unit) + "'");
    }

    // Split off an explicit exponent so the unit shift lands in it exactly.
    long exponent = 0;
    const auto e = number.find_first_of("eE");
    std::string mantissa(number.substr(0, e));
    if (e != std::string_view::npos) {
        const std::string exp_text(number.substr(e + 1));
        char* end = nullptr;
        errno = 0;
        exponent = std::strtol(exp_text.c_str(), &end, 10);
        if (exp_text.empty() || *end != '\0' || errno != 0) {
            throw ConfigError("malformed exponent in '" + std::string(text) + "'");
        }
    }
    const std::string rebuilt = mantissa + "e" + std::to_string(exponent + shift);
    char* end = nullptr;
    const double value = std::strtod(rebuilt.c_str(), &end);
    if (mantissa.empty() || *end != '\0' || !std::isfinite(value)) {
        throw ConfigError("malformed number '" + std::string(text) + "'");
    }
    return value;
}

} // namespace molcomm
