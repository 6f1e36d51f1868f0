#pragma once

// PL-CSD training: one iteration runs six sub-steps in fixed order, each a
// gradient update on exactly the groups named for it (frozen groups receive
// no update and no gradient):
//
//   1. reconstruction         -> E_c, E_s, D
//   2. collaborative          -> E_c, C_c        (class + contrast losses)
//   3. style discrimination   -> C_s             (E_s fixed)
//   4. style generation       -> E_s             (C_s fixed)
//   5. segment discrimination -> C_seg           (E_c, E_s, D fixed)
//   6. segment generation     -> E_c, E_s, D     (C_seg fixed)
//
// Each sub-step owns its Adam state. Optimizer objectives are the batch-mean
// of the reported sums.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "csd/nn.hpp"
#include "csd/plcsd/losses.hpp"
#include "csd/plcsd/model.hpp"

namespace csd {

struct SubStepReport {
  int index = 0;  // 1-based, Table order
  std::string name;
  double loss = 0.0;       // batch sum, as defined by the loss operations
  double grad_norm = 0.0;  // over the updated groups, post-scaling
  std::vector<std::string> updated_groups;
};

struct StepReport {
  // the seven losses, batch-sum semantics
  double l_auto = 0.0;
  double l_c = 0.0;
  double l_contra = 0.0;
  double l_s_dis = 0.0;
  double l_s_gen = 0.0;
  double l_seg_dis = 0.0;
  double l_seg_gen = 0.0;
  std::vector<SubStepReport> substeps;

  std::map<std::string, double> losses() const {
    return {{"L_auto", l_auto},       {"L_c", l_c},
            {"L_contra", l_contra},   {"L_s_dis", l_s_dis},
            {"L_s_gen", l_s_gen},     {"L_seg_dis", l_seg_dis},
            {"L_seg_gen", l_seg_gen}};
  }

  bool all_finite() const {
    for (const auto& [name, v] : losses())
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// Called after every sub-step with the sub-step index (1..6) and the current
// parameters; used by the protocol test suite to assert frozen groups.
using SubStepObserver =
    std::function<void(int, const ModelParams&, const SubStepReport&)>;

class PlcsdTrainer {
 public:
  PlcsdTrainer(const PlcsdConfig& cfg, const PhoneInventory& inventory,
               long n_mels)
      : cfg_(cfg),
        inventory_(inventory),
        n_mels_(n_mels),
        params_(init_plcsd_params(cfg, n_mels, inventory.size())),
        opt_auto_(cfg.lr_auto),
        opt_collab_(cfg.lr_collab),
        opt_style_dis_(cfg.lr_style_dis),
        opt_style_gen_(cfg.lr_style_gen),
        opt_seg_dis_(cfg.lr_seg_dis),
        opt_seg_gen_(cfg.lr_seg_gen) {}

  // Adopt externally loaded parameters (checkpoint resume).
  void set_params(const ModelParams& params) { params_ = params; }

  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const PlcsdConfig& config() const { return cfg_; }
  const PhoneInventory& inventory() const { return inventory_; }
  long n_mels() const { return n_mels_; }

  StepReport train_step(const SegmentBatch& batch,
                        const SubStepObserver& observer = nullptr) {
    if (batch.empty())
      throw validation_error("train_step: empty batch");
    double inv_b = 1.0 / static_cast<double>(batch.size());
    StepReport report;
    using namespace plcsd_groups;

    // 1. reconstruction: E_c, E_s, D
    {
      Tape tape;
      Binder binder(tape);
      Var loss = build_auto_loss(tape, binder, params_, batch, cfg_, true, true);
      report.l_auto = tape.scalar_value(loss);
      SubStepReport sub = apply_update(tape, binder, loss, inv_b,
                                       {content_encoder, style_encoder, decoder},
                                       opt_auto_, 1, "reconstruction",
                                       report.l_auto);
      report.substeps.push_back(sub);
      if (observer) observer(1, params_, sub);
    }

    // 2. collaborative: E_c, C_c on class + contrast
    {
      Tape tape;
      Binder binder(tape);
      Var class_loss = build_content_class_loss(
          tape, binder, params_, batch, inventory_, cfg_, true, true);
      Var contra_loss =
          build_contrast_loss(tape, binder, params_, batch, true);
      report.l_c = tape.scalar_value(class_loss);
      report.l_contra = tape.scalar_value(contra_loss);
      Var loss = ad::add(class_loss, contra_loss);
      SubStepReport sub = apply_update(tape, binder, loss, inv_b,
                                       {content_encoder, content_classifier},
                                       opt_collab_, 2, "collaborative",
                                       report.l_c + report.l_contra);
      report.substeps.push_back(sub);
      if (observer) observer(2, params_, sub);
    }

    // 3. style discrimination: C_s only
    {
      Tape tape;
      Binder binder(tape);
      Var loss = build_style_class_loss(tape, binder, params_, batch,
                                        inventory_, cfg_, false, true);
      report.l_s_dis = tape.scalar_value(loss);
      SubStepReport sub = apply_update(tape, binder, loss, inv_b,
                                       {style_classifier}, opt_style_dis_, 3,
                                       "style discrimination", report.l_s_dis);
      report.substeps.push_back(sub);
      if (observer) observer(3, params_, sub);
    }

    // 4. style generation: E_s only
    {
      Tape tape;
      Binder binder(tape);
      Var loss =
          build_style_gen_loss(tape, binder, params_, batch, inventory_, true);
      report.l_s_gen = tape.scalar_value(loss);
      SubStepReport sub =
          apply_update(tape, binder, loss, inv_b, {style_encoder},
                       opt_style_gen_, 4, "style generation", report.l_s_gen);
      report.substeps.push_back(sub);
      if (observer) observer(4, params_, sub);
    }

    // 5. segment discrimination: C_seg only
    {
      Tape tape;
      Binder binder(tape);
      Var loss = build_seg_dis_loss(tape, binder, params_, batch, cfg_, true);
      report.l_seg_dis = tape.scalar_value(loss);
      SubStepReport sub = apply_update(
          tape, binder, loss, inv_b, {segment_discriminator}, opt_seg_dis_, 5,
          "segment discrimination", report.l_seg_dis);
      report.substeps.push_back(sub);
      if (observer) observer(5, params_, sub);
    }

    // 6. segment generation: E_c, E_s, D
    {
      Tape tape;
      Binder binder(tape);
      Var loss = build_seg_gen_loss(tape, binder, params_, batch, cfg_, true);
      report.l_seg_gen = tape.scalar_value(loss);
      SubStepReport sub = apply_update(tape, binder, loss, inv_b,
                                       {content_encoder, style_encoder, decoder},
                                       opt_seg_gen_, 6, "segment generation",
                                       report.l_seg_gen);
      report.substeps.push_back(sub);
      if (observer) observer(6, params_, sub);
    }

    if (!report.all_finite())
      throw numeric_error("train_step: non-finite loss in step report");
    return report;
  }

 private:
  SubStepReport apply_update(Tape& tape, Binder& binder, Var loss,
                             double batch_scale,
                             const std::vector<std::string>& groups, Adam& opt,
                             int index, const std::string& name,
                             double reported_loss) {
    if (!std::isfinite(tape.scalar_value(loss)))
      throw numeric_error("train_step sub-step " + std::to_string(index) + " (" +
                          name + "): non-finite loss");
    // the optimizer objective is the batch mean
    Var objective = ad::scale(loss, batch_scale);
    for (const auto& g : groups) params_.group(g).zero_grads();
    tape.backward(objective);
    binder.scatter_grads();
    std::vector<ParamTensor*> tensors = tensors_of(params_, groups);
    double gnorm = grad_norm(tensors);
    if (!std::isfinite(gnorm))
      throw numeric_error("train_step sub-step " + std::to_string(index) + " (" +
                          name + "): non-finite gradient");
    opt.step(tensors);
    for (const auto& g : groups) {
      if (!params_.group(g).all_finite())
        throw numeric_error("train_step sub-step " + std::to_string(index) +
                            " (" + name + "): non-finite parameters in " + g);
    }
    SubStepReport sub;
    sub.index = index;
    sub.name = name;
    sub.loss = reported_loss;
    sub.grad_norm = gnorm;
    sub.updated_groups = groups;
    return sub;
  }

  PlcsdConfig cfg_;
  PhoneInventory inventory_;
  long n_mels_;
  ModelParams params_;
  Adam opt_auto_, opt_collab_, opt_style_dis_, opt_style_gen_, opt_seg_dis_,
      opt_seg_gen_;
};

struct PlcsdEpochReport {
  long epoch = 0;
  double train_auto_per_segment = 0.0;  // mean L_auto per training segment
  double val_auto_per_segment = 0.0;
  bool is_best = false;
};

struct PlcsdTrainHooks {
  std::function<void(const StepReport&)> on_step;
  std::function<void(const PlcsdEpochReport&)> on_epoch;
  // called once per epoch with current params; is_best marks a new best
  // validation loss
  std::function<void(long, const ModelParams&, bool)> on_checkpoint;
};

struct PlcsdTrainResult {
  long epochs_run = 0;
  bool early_stopped = false;
  std::vector<PlcsdEpochReport> epochs;
};

// Epoch loop: deterministic shuffle per epoch, fixed-size batches, validation
// on a held-back slice, early stop on stagnating validation auto loss.
inline PlcsdTrainResult plcsd_train(PlcsdTrainer& trainer,
                                    const std::vector<PhoneSegment>& segments,
                                    const PlcsdTrainHooks& hooks = {}) {
  if (segments.empty())
    throw validation_error("plcsd_train: no segments");
  const PlcsdConfig& cfg = trainer.config();

  std::vector<std::size_t> order(segments.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng val_rng = Rng(cfg.seed).fork("plcsd-valsplit");
  val_rng.shuffle(order);
  auto n_val = static_cast<std::size_t>(
      cfg.val_fraction * static_cast<double>(segments.size()));
  std::vector<std::size_t> train_idx(order.begin(),
                                     order.end() - static_cast<long>(n_val));
  std::vector<std::size_t> val_idx(order.end() - static_cast<long>(n_val),
                                   order.end());
  if (train_idx.empty()) train_idx = order;

  SegmentBatch val_batch;
  for (std::size_t i : val_idx) val_batch.push_back(&segments[i]);

  PlcsdTrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  long stale = 0;
  for (long epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng epoch_rng = Rng(cfg.seed).fork("plcsd-epoch-" + std::to_string(epoch));
    std::vector<std::size_t> shuffled = train_idx;
    epoch_rng.shuffle(shuffled);

    double auto_sum = 0.0;
    for (std::size_t off = 0; off < shuffled.size();
         off += static_cast<std::size_t>(cfg.batch_size)) {
      SegmentBatch batch;
      for (std::size_t i = off;
           i < std::min(shuffled.size(),
                        off + static_cast<std::size_t>(cfg.batch_size));
           ++i)
        batch.push_back(&segments[shuffled[i]]);
      StepReport report = trainer.train_step(batch);
      auto_sum += report.l_auto;
      if (hooks.on_step) hooks.on_step(report);
    }

    PlcsdEpochReport er;
    er.epoch = epoch;
    er.train_auto_per_segment =
        auto_sum / static_cast<double>(shuffled.size());
    er.val_auto_per_segment =
        val_batch.empty()
            ? er.train_auto_per_segment
            : auto_loss(val_batch, trainer.params(), cfg) /
                  static_cast<double>(val_batch.size());
    bool improved =
        er.val_auto_per_segment < best_val * (1.0 - cfg.early_stop_min_rel);
    if (improved) {
      best_val = er.val_auto_per_segment;
      stale = 0;
    } else {
      ++stale;
    }
    er.is_best = improved;
    result.epochs.push_back(er);
    result.epochs_run = epoch;
    if (hooks.on_epoch) hooks.on_epoch(er);
    if (hooks.on_checkpoint) hooks.on_checkpoint(epoch, trainer.params(), improved);
    if (stale >= cfg.early_stop_patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace csd
