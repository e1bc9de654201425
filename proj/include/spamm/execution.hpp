#pragma once

namespace spamm {

/// Serial kernels are the reference path; parallel ones use OpenMP and must
/// reproduce the serial results.
enum class Execution { serial, parallel };

} // namespace spamm
