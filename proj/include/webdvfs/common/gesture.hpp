#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace webdvfs {

enum class Gesture { Scroll, Pinch };

inline std::string to_string(Gesture g) { return g == Gesture::Scroll ? "scroll" : "pinch"; }

inline Gesture parse_gesture(std::string_view s) {
  if (s == "scroll") return Gesture::Scroll;
  if (s == "pinch") return Gesture::Pinch;
  throw std::invalid_argument("unknown gesture '" + std::string(s) + "'");
}

}  // namespace webdvfs
