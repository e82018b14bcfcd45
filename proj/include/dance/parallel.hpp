#pragma once

#include <cstdint>

namespace dance {

/// Selects between the OpenMP kernel and the serial reference path. Both paths
/// must produce bit-identical results; the serial path exists for testing and
/// benchmarking.
enum class Exec { Serial, Parallel };

/// Caps the OpenMP worker count for subsequent parallel regions. `n <= 0`
/// restores the runtime default.
void set_thread_count(int n);
int thread_count();

}  // namespace dance
