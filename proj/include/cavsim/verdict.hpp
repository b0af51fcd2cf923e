#pragma once

#include <cstdint>
#include <string_view>

namespace cavsim {

/// Resolved connectivity of one identification slot.
enum class Connectivity : std::uint8_t { kPending, kConnected, kUnconnected };

constexpr std::string_view to_string(Connectivity c) noexcept {
  switch (c) {
    case Connectivity::kPending: return "pending";
    case Connectivity::kConnected: return "connected";
    case Connectivity::kUnconnected: return "unconnected";
  }
  return "?";
}

}  // namespace cavsim
