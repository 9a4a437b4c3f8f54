#pragma once

#include <string>

#include "diffopf/baseline.hpp"
#include "diffopf/diffusion.hpp"

namespace diffopf::checkpoint {

/// On-disk model container: magic + version, a JSON header carrying the
/// architecture descriptor, normalizer, noise schedule, layout, and a
/// content hash, followed by the raw weight arrays as little-endian
/// 64-bit floats.
void save_diffusion(const diffusion::DiffusionModel& model, const std::string& path);
diffusion::DiffusionModel load_diffusion(const std::string& path);

void save_baseline(const baseline::PointPredictor& model, const std::string& path);
baseline::PointPredictor load_baseline(const std::string& path);

/// "diffusion" or "baseline" without loading the weights.
std::string peek_kind(const std::string& path);

}  // namespace diffopf::checkpoint
