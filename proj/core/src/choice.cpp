#include "stereofov/choice.hpp"

namespace stereofov {

std::string_view to_string(Choice c) noexcept {
  switch (c) {
    case Choice::peaks: return "peaks";
    case Choice::troughs: return "troughs";
    case Choice::left: return "left";
    case Choice::right: return "right";
  }
  return "?";
}

std::optional<Choice> parse_choice(std::string_view s) noexcept {
  if (s == "peaks") return Choice::peaks;
  if (s == "troughs") return Choice::troughs;
  if (s == "left") return Choice::left;
  if (s == "right") return Choice::right;
  return std::nullopt;
}

Choice opposite(Choice c) noexcept {
  switch (c) {
    case Choice::peaks: return Choice::troughs;
    case Choice::troughs: return Choice::peaks;
    case Choice::left: return Choice::right;
    case Choice::right: return Choice::left;
  }
  return c;
}

}  // namespace stereofov
