#pragma once

#include <filesystem>
#include <string>

#include "mmlf/fusion_net.hpp"

namespace mmlf {

// Versioned text checkpoint:
//   mmlf-ckpt v1 H=<H>
//   <block-name> <rows> <cols>
//   <row-major decimal floats, one row per line>
//   ...
// Blocks, in order: head3d.weight, head3d.bias, head2d.weight, head2d.bias,
// score.l1.weight, score.l1.bias, score.l2.weight, score.l2.bias,
// score.l3.weight, score.l3.bias. Bias blocks are <n> 1.
std::string format_checkpoint(const FusionParams& params);

// Throws ParseError on malformed input or shape mismatches.
FusionParams parse_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path,
                     const FusionParams& params);
FusionParams load_checkpoint(const std::filesystem::path& path);

}  // namespace mmlf
