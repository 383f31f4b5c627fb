#include "wrecksim/grid.hpp"

#include <algorithm>

namespace wrecksim {

std::size_t LabelMask::count() const {
  return static_cast<std::size_t>(std::count_if(data().begin(), data().end(),
                                                [](std::uint8_t p) { return p != 0; }));
}

std::size_t ShadowMask::count() const {
  return static_cast<std::size_t>(std::count_if(data().begin(), data().end(),
                                                [](std::uint8_t p) { return p != 0; }));
}

}  // namespace wrecksim
