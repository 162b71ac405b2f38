#pragma once

namespace hypomimia {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hypomimia
