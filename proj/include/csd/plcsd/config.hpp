#pragma once

// Configuration for the phone-level content-style disentanglement module.

#include <cstdint>

#include "csd/common.hpp"

namespace csd {

struct PlcsdConfig {
  // embedding and layer widths
  long d_c = 64;               // content embedding dimension
  long d_s = 64;               // style embedding dimension
  long encoder_width = 512;    // bidirectional total (width/2 per direction)
  long decoder_width = 512;
  long classifier_hidden = 64;
  long discriminator_width = 128;

  // optimisation; sub-steps 1-2 run at lr_reconstruction, the adversarial
  // sub-steps 3-6 at lr_adversarial unless overridden individually
  double lr_auto = 1e-3;
  double lr_collab = 1e-3;
  double lr_style_dis = 1e-4;
  double lr_style_gen = 1e-4;
  double lr_seg_dis = 1e-4;
  double lr_seg_gen = 1e-4;

  long batch_size = 32;
  long max_epochs = 50;
  double gate_threshold = 0.5;
  long max_decode_frames = 200;

  // early stop: quit when validation auto loss fails to improve by
  // early_stop_min_rel for early_stop_patience consecutive epochs
  long early_stop_patience = 5;
  double early_stop_min_rel = 0.01;
  double val_fraction = 0.1;

  double prob_clip = 1e-7;  // probability clamp inside log terms

  std::uint64_t seed = 0;

  void validate() const {
    if (d_c <= 0 || d_s <= 0 || encoder_width <= 0 || decoder_width <= 0 ||
        classifier_hidden <= 0 || discriminator_width <= 0)
      throw validation_error("PlcsdConfig: widths must be positive");
    if (encoder_width % 2 != 0)
      throw validation_error("PlcsdConfig: encoder_width must be even");
    if (batch_size <= 0 || max_epochs <= 0 || max_decode_frames <= 0)
      throw validation_error("PlcsdConfig: sizes must be positive");
    if (!(gate_threshold > 0.0 && gate_threshold < 1.0))
      throw validation_error("PlcsdConfig: gate_threshold must be in (0,1)");
    if (lr_auto <= 0 || lr_collab <= 0 || lr_style_dis <= 0 ||
        lr_style_gen <= 0 || lr_seg_dis <= 0 || lr_seg_gen <= 0)
      throw validation_error("PlcsdConfig: learning rates must be positive");
    if (prob_clip <= 0 || prob_clip >= 0.5)
      throw validation_error("PlcsdConfig: prob_clip must be in (0, 0.5)");
  }
};

}  // namespace csd
