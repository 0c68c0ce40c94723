// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0
//
// The `sphiou` command line tool as a library, so tests can drive it without
// spawning processes.
//
// Exit codes: 0 success, 2 bad flags or input, 3 a semantic check failed
// (class mismatch in eval, speedup below 10 in bench), 4 output not writable.

#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sphiou/criteria.hpp"
#include "sphiou/sphere.hpp"

namespace sphiou {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitCheck = 3;
inline constexpr int kExitIo = 4;

/// Runs one invocation. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

using Polyline = std::vector<std::pair<double, double>>;

/// Box outline as pixel-space polylines on a W x H equirectangular canvas.
/// Each side is sampled along its great-circle arc; a line that crosses the
/// theta seam is split at x = 0 / x = W.
std::vector<Polyline> boundary_polylines(const SphericalRect& rect, const ErpImageSpec& spec,
                                         int samples_per_side = 128);

}  // namespace sphiou
