#pragma once

namespace vmr {

inline constexpr const char* kVersionString = "vmr 0.1.0";

}  // namespace vmr
