#pragma once

#include <cstdio>
#include <string_view>

#include <fmt/format.h>

namespace salesopt {

/// Warnings go to stderr unless SALESOPT_QUIET is set in the environment.
bool warnings_enabled();

template <typename... Args>
void warn(fmt::format_string<Args...> format, Args&&... args) {
  if (!warnings_enabled()) return;
  fmt::print(stderr, "warning: {}\n", fmt::format(format, std::forward<Args>(args)...));
}

}  // namespace salesopt
