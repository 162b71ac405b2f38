#include "hypomimia/labels.hpp"

#include <string>

#include "hypomimia/errors.hpp"

namespace hypomimia {

std::string_view to_string(ExpressionLabel label) {
  switch (label) {
    case ExpressionLabel::Neutral: return "neutral";
    case ExpressionLabel::Happiness: return "happiness";
    case ExpressionLabel::Surprised: return "surprised";
    case ExpressionLabel::Angry: return "angry";
  }
  throw DataError("invalid expression label value");
}

std::string_view to_string(Diagnosis d) {
  switch (d) {
    case Diagnosis::HC: return "HC";
    case Diagnosis::PD: return "PD";
  }
  throw DataError("invalid diagnosis value");
}

ExpressionLabel parse_expression_label(std::string_view s) {
  for (ExpressionLabel label : kExpressionOrder) {
    if (s == to_string(label)) return label;
  }
  throw DataError("unknown expression label: " + std::string(s));
}

Diagnosis parse_diagnosis(std::string_view s) {
  if (s == "HC" || s == "hc") return Diagnosis::HC;
  if (s == "PD" || s == "pd") return Diagnosis::PD;
  throw DataError("unknown diagnosis: " + std::string(s));
}

}  // namespace hypomimia
