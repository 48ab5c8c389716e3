#pragma once

namespace nestlab {

/// Kernels that have an OpenMP version keep a serial reference next to it.
enum class Exec { Serial, Parallel };

} // namespace nestlab
