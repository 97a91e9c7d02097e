#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace stereofov {

/// Answer labels of the two 2AFC tasks: corrugation highlights (peaks or
/// troughs) and half-split scenes (which side carries disparity).
enum class Choice : std::uint8_t { peaks, troughs, left, right };

std::string_view to_string(Choice c) noexcept;
std::optional<Choice> parse_choice(std::string_view s) noexcept;

/// The other label of the same task.
Choice opposite(Choice c) noexcept;

}  // namespace stereofov
