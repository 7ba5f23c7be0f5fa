#pragma once

namespace bbmld {

inline constexpr const char* kToolVersion = "0.1.0";

/// Entry point of the bbmld command line. Returns 0 on success, 2 on invalid input and
/// 1 on runtime failure.
int run_cli(int argc, char** argv);

}  // namespace bbmld
