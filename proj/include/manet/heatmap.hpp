#pragma once

#include <string>
#include <vector>

#include "manet/data.hpp"
#include "manet/model.hpp"

namespace manet {

// Renders per-class probability maps (and per-modality encoder feature
// magnitude maps) of one sample as 8-bit grayscale PNGs, min-max scaled to
// [0,255]; constant maps render mid-gray. Returns the written file paths.
std::vector<std::string> export_heatmaps(const Model& model, const Sample& sample,
                                         const std::string& out_dir);

}  // namespace manet
