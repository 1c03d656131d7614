#pragma once

#include <string>
#include <vector>

namespace legible {

// Self-reported cognitive factors; the sensors cannot observe these.
struct PersonalFlags {
  bool fatigued = false;
  bool distracted = false;
  bool vision_reduced = false;

  bool any() const noexcept { return fatigued || distracted || vision_reduced; }
  bool operator==(const PersonalFlags&) const = default;

  /// Canonical label descriptors for the set flags, in fixed order.
  std::vector<std::string> descriptors() const {
    std::vector<std::string> out;
    if (fatigued) out.emplace_back("fatigued");
    if (distracted) out.emplace_back("distracted");
    if (vision_reduced) out.emplace_back("reduced vision");
    return out;
  }
};

}  // namespace legible
