#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace hypomimia {

/// Canonical expression ordering. Frozen: every module, file format and
/// report indexes expressions in exactly this order.
enum class ExpressionLabel : std::size_t {
  Neutral = 0,
  Happiness = 1,
  Surprised = 2,
  Angry = 3,
};

inline constexpr std::size_t kNumExpressions = 4;
inline constexpr std::array<ExpressionLabel, kNumExpressions> kExpressionOrder = {
    ExpressionLabel::Neutral, ExpressionLabel::Happiness,
    ExpressionLabel::Surprised, ExpressionLabel::Angry};

/// Diagnostic classes. HC=0, PD=1; PD is the positive class everywhere
/// binary metrics are reported.
enum class Diagnosis : std::size_t {
  HC = 0,
  PD = 1,
};

std::string_view to_string(ExpressionLabel label);
std::string_view to_string(Diagnosis d);
ExpressionLabel parse_expression_label(std::string_view s);  // DataError on unknown
Diagnosis parse_diagnosis(std::string_view s);               // DataError on unknown

}  // namespace hypomimia
