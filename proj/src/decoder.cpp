#include "manet/decoder.hpp"

#include <stdexcept>

#include "manet/dfm.hpp"

namespace manet {

Decoder::Decoder(ParamRegistry& reg, int encoder_dim, int classes) : classes_(classes) {
  if (classes < 2) throw std::invalid_argument("decoder needs at least 2 classes");
  ladder_channels_ = dfm_channels(encoder_dim);
  // Running widths while walking coarse -> fine.
  int widths_in[3] = {ladder_channels_[3], ladder_channels_[2] / 2, ladder_channels_[1] / 2};
  int widths_out[3] = {ladder_channels_[2] / 2, ladder_channels_[1] / 2, ladder_channels_[0]};
  int finer[3] = {ladder_channels_[2], ladder_channels_[1], ladder_channels_[0]};
  for (int i = 0; i < 3; ++i) {
    Stage st;
    std::string prefix = "decoder.stage" + std::to_string(i);
    st.proj_w = reg.add(prefix + ".proj.weight", {widths_in[i], finer[i], 1, 1},
                        Init::kHeConv, true);
    st.proj_b = reg.add(prefix + ".proj.bias", {widths_in[i]}, Init::kZeros, true);
    st.conv_w = reg.add(prefix + ".conv.weight", {widths_out[i], widths_in[i], 3, 3},
                        Init::kHeConv, true);
    st.conv_b = reg.add(prefix + ".conv.bias", {widths_out[i]}, Init::kZeros, true);
    stages_.push_back(std::move(st));
  }
  // zero head: the first update fits a linear probe on the decoded features
  // before any gradient reaches the stack below, which keeps the initial
  // cross-entropy kick from wrecking the trunk
  head_w = reg.add("decoder.head.weight", {classes, ladder_channels_[0], 1, 1},
                   Init::kZeros, true);
  head_b = reg.add("decoder.head.bias", {classes}, Init::kZeros, true);
}

Tensor Decoder::decode(const std::vector<Tensor>& ladder, int out_h, int out_w) const {
  if (ladder.size() != 4) {
    throw std::invalid_argument("decode: expected a 4-scale ladder, got " +
                                std::to_string(ladder.size()));
  }
  for (size_t i = 0; i < 4; ++i) {
    if (ladder[i].ndim() != 3 || ladder[i].dim(0) != ladder_channels_[i]) {
      throw std::invalid_argument("decode: ladder level " + std::to_string(i) + " has shape " +
                                  shape_str(ladder[i].shape()) + ", expected " +
                                  std::to_string(ladder_channels_[i]) + " channels");
    }
    if (i > 0 && (ladder[i - 1].dim(1) != 2 * ladder[i].dim(1) ||
                  ladder[i - 1].dim(2) != 2 * ladder[i].dim(2))) {
      throw std::invalid_argument("decode: ladder levels " + std::to_string(i - 1) + "/" +
                                  std::to_string(i) + " are not a x2 scale apart");
    }
  }
  if (out_h != 4 * ladder[0].dim(1) || out_w != 4 * ladder[0].dim(2)) {
    throw std::invalid_argument("decode: requested " + std::to_string(out_h) + "x" +
                                std::to_string(out_w) + " does not match the ladder's 1/4 scale");
  }
  Tensor x = ladder[3];
  for (int i = 0; i < 3; ++i) {
    const Stage& st = stages_[static_cast<size_t>(i)];
    Tensor up = ops::upsample_bilinear(x, 2);
    Tensor finer = ops::add_channel_bias(ops::conv2d(ladder[static_cast<size_t>(2 - i)],
                                                     st.proj_w, 1, 0),
                                         st.proj_b);
    Tensor mixed = ops::conv2d(ops::add(up, finer), st.conv_w, 1, 1);
    x = ops::gelu(ops::add_channel_bias(mixed, st.conv_b));
  }
  Tensor full = ops::upsample_bilinear(x, 4);
  return ops::add_channel_bias(ops::conv2d(full, head_w, 1, 0), head_b);
}

}  // namespace manet
